"""Command-line interface.

Subcommands: fit, extend score, extend link, export, simulate, counts.
Configuration merges three layers, later winning: built-in defaults, a flat
key=value config file, command-line flags.  Exit codes: 0 success, 1 runtime
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artifact import (
    ArtifactError,
    artifact_lock,
    load_draws,
    load_fitted_model,
    save_fit_artifact,
)
from .data import (
    Encoding,
    ResponseDataError,
    load_response_csv,
    pairwise_counts,
    save_response_csv,
)
from .export import ExportError, export_artifacts
from .extend import (
    ExtendError,
    NewDataCase,
    NewDataKind,
    UpdatePolicy,
    approx_new_intercept,
    approx_new_position,
    load_new_responses,
    sample_new_items,
    sample_new_persons,
)
from .model import (
    Linkage,
    ModelConfig,
    ModelError,
    PriorConfig,
    simulate_responses,
    validate_for_linkage,
)
from .postprocess import procrustes_align, summarize
from .sampler import McmcConfig, ProposalScales, SamplerError, fit

OUT_ROOT_ENV = "NIRM_OUT_ROOT"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 2."""


_DEFAULTS: dict[str, object] = {
    "dim": 2,
    "encoding": "prod",
    "linkage": "item-from-person",
    "epsilon": 1e-9,
    "sigma_theta_sq": 10.0,
    "sigma_beta_sq": 10.0,
    "a_sigma": 0.001,
    "b_sigma": 0.001,
    "iters": 15000,
    "burnin": 5000,
    "thin": 5,
    "seed": 1234,
    "workers": 1,
    "position_scale": 0.25,
    "theta_scale": 0.25,
    "beta_scale": 0.25,
    "adapt_window": 100,
    "random_scan": False,
    "progress": 0,
    "resync_every": 1000,
    "missing_token": "NA",
    "id_column": False,
    "metric": "s1",
    "threshold_quantile": 0.75,
}

_BOOL_KEYS = {"random_scan", "id_column"}
_INT_KEYS = {
    "dim",
    "iters",
    "burnin",
    "thin",
    "seed",
    "workers",
    "adapt_window",
    "progress",
    "resync_every",
}
_FLOAT_KEYS = {
    "epsilon",
    "sigma_theta_sq",
    "sigma_beta_sq",
    "a_sigma",
    "b_sigma",
    "position_scale",
    "theta_scale",
    "beta_scale",
    "threshold_quantile",
}


@dataclass
class RunConfig:
    """Merged, validated view of file values and flag overrides."""

    model: ModelConfig
    mcmc: McmcConfig
    missing_token: str
    id_column: bool
    metric: str
    threshold_quantile: float
    merged: dict


def _parse_config_file(path: Path) -> dict:
    values: dict[str, object] = {}
    problems: list[str] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{path}:{lineno}: expected key = value, got {raw!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _DEFAULTS:
            problems.append(f"{path}:{lineno}: unknown key {key!r}")
            continue
        values[key] = val
    if problems:
        raise UsageError("\n".join(problems))
    return values


def _coerce(key: str, value: object, problems: list[str]):
    if isinstance(value, str):
        try:
            if key in _BOOL_KEYS:
                low = value.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return low in ("true", "1", "yes")
            if key in _INT_KEYS:
                return int(value)
            if key in _FLOAT_KEYS:
                return float(value)
        except ValueError:
            problems.append(f"config key {key}: cannot parse {value!r}")
            return _DEFAULTS[key]
    return value


def validate_config(
    config_file: str | None, overrides: dict[str, object]
) -> RunConfig:
    """Merge defaults, file, and flag overrides; report every violation.

    All problems are aggregated into a single error so a bad config can be
    fixed in one pass rather than failure by failure.
    """
    merged = dict(_DEFAULTS)
    if config_file:
        path = Path(config_file)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        merged.update(_parse_config_file(path))
    merged.update({k: v for k, v in overrides.items() if v is not None})

    problems: list[str] = []
    for key in merged:
        merged[key] = _coerce(key, merged[key], problems)

    if merged["encoding"] not in ("prod", "concord"):
        problems.append(
            f"encoding must be 'prod' or 'concord', got {merged['encoding']!r}"
        )
    if merged["linkage"] not in ("item-from-person", "person-from-item"):
        problems.append(
            "linkage must be 'item-from-person' or 'person-from-item', "
            f"got {merged['linkage']!r}"
        )
    if isinstance(merged["dim"], int) and merged["dim"] < 1:
        problems.append(f"dim must be >= 1, got {merged['dim']}")
    if (
        isinstance(merged["burnin"], int)
        and isinstance(merged["iters"], int)
        and merged["burnin"] >= merged["iters"]
    ):
        problems.append(
            f"burnin ({merged['burnin']}) must be smaller than iters "
            f"({merged['iters']})"
        )
    if isinstance(merged["thin"], int) and merged["thin"] < 1:
        problems.append(f"thin must be >= 1, got {merged['thin']}")
    if isinstance(merged["workers"], int) and merged["workers"] < 1:
        problems.append(f"workers must be >= 1, got {merged['workers']}")
    for key in ("sigma_theta_sq", "sigma_beta_sq", "a_sigma", "b_sigma", "epsilon"):
        if isinstance(merged[key], float) and merged[key] <= 0:
            problems.append(f"{key} must be positive, got {merged[key]}")
    for key in ("position_scale", "theta_scale", "beta_scale"):
        if isinstance(merged[key], float) and merged[key] < 0:
            problems.append(f"{key} must be nonnegative, got {merged[key]}")
    if merged["metric"] not in ("s1", "s2"):
        problems.append(f"metric must be 's1' or 's2', got {merged['metric']!r}")
    if problems:
        raise UsageError("invalid configuration:\n  " + "\n  ".join(problems))

    model = ModelConfig(
        d=merged["dim"],
        encoding=Encoding(merged["encoding"]),
        linkage=Linkage(merged["linkage"]),
        priors=PriorConfig(
            sigma_theta_sq=merged["sigma_theta_sq"],
            sigma_beta_sq=merged["sigma_beta_sq"],
            a_sigma=merged["a_sigma"],
            b_sigma=merged["b_sigma"],
        ),
        epsilon=merged["epsilon"],
    )
    mcmc = McmcConfig(
        total_iterations=merged["iters"],
        burn_in=merged["burnin"],
        thinning=merged["thin"],
        scales=ProposalScales(
            position=merged["position_scale"],
            person_intercept=merged["theta_scale"],
            item_intercept=merged["beta_scale"],
        ),
        seed=merged["seed"],
        workers=merged["workers"],
        random_scan=merged["random_scan"],
        progress_every=merged["progress"],
        resync_every=merged["resync_every"],
    )
    return RunConfig(
        model=model,
        mcmc=mcmc,
        missing_token=str(merged["missing_token"]),
        id_column=bool(merged["id_column"]),
        metric=str(merged["metric"]),
        threshold_quantile=float(merged["threshold_quantile"]),
        merged=merged,
    )


def _default_out(data_path: Path, suffix: str) -> Path:
    root = os.environ.get(OUT_ROOT_ENV)
    base = Path(root) if root else Path.cwd()
    return base / f"{data_path.stem}_{suffix}"


def _load_data(args, run: RunConfig):
    path = Path(args.data)
    if not path.exists():
        raise UsageError(f"input data file not found: {path}")
    return load_response_csv(
        path,
        missing_token=run.missing_token,
        has_person_id_column=run.id_column,
    )


def cmd_fit(args) -> int:
    run = validate_config(args.config, _overrides_from(args))
    X = _load_data(args, run)
    try:
        validate_for_linkage(X, run.model)
    except ModelError as exc:
        raise UsageError(f"invalid configuration for this data: {exc}") from None
    out_dir = Path(args.out) if args.out else _default_out(Path(args.data), "fit")
    created_dir = not out_dir.exists()
    with artifact_lock(out_dir):
        try:
            draws = fit(X, run.model, run.mcmc)
            aligned = procrustes_align(draws)
            summary = summarize(draws, aligned)
            save_fit_artifact(
                out_dir,
                X,
                draws,
                summary,
                overwrite=args.overwrite,
                similarity_metric=run.metric,
                threshold_quantile=run.threshold_quantile,
                extra_manifest={"command": "fit", "data_file": str(args.data)},
            )
        except BaseException:
            _cleanup_partial(out_dir, created_dir)
            raise
    print(f"fit artifact written to {out_dir}")
    return EXIT_OK


def _cleanup_partial(out_dir: Path, created_dir: bool) -> None:
    if created_dir and out_dir.exists():
        shutil.rmtree(out_dir, ignore_errors=True)
    else:
        # Directory pre-existed: drop only files a complete run would replace.
        for name in (
            "draws.npz",
            "data.csv",
            "positions.csv",
            "edges.csv",
            "beta_summary.csv",
            "theta_summary.csv",
            "distance_histogram.csv",
            "item_rest.csv",
            "latent_space.svg",
            "network.svg",
            "manifest.json",
        ):
            (out_dir / name).unlink(missing_ok=True)


def _next_subdir(artifact: Path, prefix: str) -> Path:
    n = 1
    while (artifact / f"{prefix}-{n:03d}").exists():
        n += 1
    return artifact / f"{prefix}-{n:03d}"


def _extension_mcmc(args) -> McmcConfig:
    return McmcConfig(
        total_iterations=args.iters,
        burn_in=args.burnin,
        thinning=args.thin,
        seed=args.seed,
    )


def _g6(x) -> str:
    return f"{float(x):.6g}"


def cmd_extend_score(args) -> int:
    artifact = Path(args.artifact)
    if not artifact.exists():
        raise UsageError(f"artifact directory not found: {artifact}")
    fitted = load_fitted_model(artifact)
    rows = load_new_responses(
        Path(args.data),
        missing_token=args.missing_token,
        has_person_id_column=args.id_column,
    )
    if rows.item_ids != fitted.X.item_ids:
        raise ExtendError(
            "new rows must carry exactly the fitted item columns, in order"
        )
    d = fitted.config.d

    approx_rows = []
    can_place = fitted.config.linkage is Linkage.PERSON_FROM_ITEM
    for idx, pid in enumerate(rows.person_ids):
        row = rows.values[idx]
        score = int((row == 1).sum())
        if args.approx_only:
            theta = approx_new_intercept(row, fitted)  # unseen score is fatal here
        else:
            try:
                theta = approx_new_intercept(row, fitted)
            except ExtendError:
                theta = None  # sampler starts at zero instead
        pos = (
            approx_new_position(row, fitted, kind="person") if can_place else None
        )
        approx_rows.append((pid, score, theta, pos))

    sampled = None
    if not args.approx_only:
        sampled = sample_new_persons(rows, fitted, _extension_mcmc(args))

    with artifact_lock(artifact):
        out = _next_subdir(artifact, "extend-score")
        out.mkdir(parents=True)
        header = ["person", "sum_score", "approx_theta"]
        header += [f"approx_x{j + 1}" for j in range(d)] if can_place else []
        if sampled:
            header += ["theta_mean", "theta_sd"]
            header += [f"x{j + 1}_mean" for j in range(d)]
            header += [f"x{j + 1}_sd" for j in range(d)]
        lines = [",".join(header)]
        for pid, score, theta, pos in approx_rows:
            cells = [pid, str(score), "" if theta is None else _g6(theta)]
            if can_place:
                cells += [_g6(v) for v in pos]
            if sampled:
                unit = sampled.units[pid]
                cells += [_g6(unit.intercept_mean), _g6(unit.intercept_sd)]
                cells += [_g6(v) for v in unit.position_mean]
                cells += [_g6(v) for v in unit.position_sd]
            lines.append(",".join(cells))
        (out / "new_persons.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        info = {
            "command": "extend score",
            "approx_only": bool(args.approx_only),
            "seed": args.seed,
            "source_artifact_data_hash": fitted.data_hash,
        }
        (out / "extension.json").write_text(
            json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(f"extension written to {out}")
    return EXIT_OK


def cmd_extend_link(args) -> int:
    artifact = Path(args.artifact)
    if not artifact.exists():
        raise UsageError(f"artifact directory not found: {artifact}")
    fitted = load_fitted_model(artifact)
    if args.original_data:
        original = load_response_csv(
            Path(args.original_data),
            missing_token=args.missing_token,
            has_person_id_column=args.id_column,
        )
        fitted.require_same_data(original)
    payload = load_new_responses(
        Path(args.data),
        missing_token=args.missing_token,
        has_person_id_column=args.id_column,
    )
    old_persons = set(fitted.X.person_ids)
    if set(payload.person_ids) <= old_persons:
        kind = NewDataKind.NEW_ITEMS_SAME_PERSONS
    else:
        kind = NewDataKind.NEW_PERSONS_WITH_NEW_ITEMS
    case = NewDataCase(kind, payload, UpdatePolicy(args.policy))
    result = sample_new_items(case, fitted, _extension_mcmc(args))

    d = fitted.config.d
    with artifact_lock(artifact):
        out = _next_subdir(artifact, "extend-link")
        out.mkdir(parents=True)
        header = ["item", "beta_mean", "beta_sd"]
        header += [f"x{j + 1}_mean" for j in range(d)]
        header += [f"x{j + 1}_sd" for j in range(d)]
        lines = [",".join(header)]
        for iid, unit in result.units.items():
            cells = [iid, _g6(unit.intercept_mean), _g6(unit.intercept_sd)]
            cells += [_g6(v) for v in unit.position_mean]
            cells += [_g6(v) for v in unit.position_sd]
            lines.append(",".join(cells))
        (out / "new_items.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        if result.refreshed_person_positions is not None:
            _write_positions(
                out / "refreshed_person_positions.csv",
                fitted.X.person_ids,
                result.refreshed_person_positions,
            )
        if result.refreshed_item_positions is not None:
            _write_positions(
                out / "refreshed_item_positions.csv",
                fitted.X.item_ids,
                result.refreshed_item_positions,
            )
        if result.persons is not None:
            header = ["person", "theta_mean"] + [f"x{j + 1}_mean" for j in range(d)]
            lines = [",".join(header)]
            for pid, unit in result.persons.units.items():
                lines.append(
                    ",".join(
                        [pid, _g6(unit.intercept_mean)]
                        + [_g6(v) for v in unit.position_mean]
                    )
                )
            (out / "new_persons.csv").write_text(
                "\n".join(lines) + "\n", encoding="utf-8"
            )
        info = {
            "command": "extend link",
            "policy": case.update_policy.value,
            "kind": case.kind.value,
            "seed": args.seed,
            "source_artifact_data_hash": fitted.data_hash,
            "note": (
                "partial-update refreshes derived positions of original units "
                "over the joint unit set; identical common-item patterns can "
                "map to different positions than in the original fit"
            )
            if case.update_policy is UpdatePolicy.PARTIAL_UPDATE
            else None,
        }
        (out / "extension.json").write_text(
            json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(f"extension written to {out}")
    return EXIT_OK


def _write_positions(path: Path, ids, positions) -> None:
    d = positions.shape[1]
    lines = [",".join(["id"] + [f"x{j + 1}" for j in range(d)])]
    for i, uid in enumerate(ids):
        lines.append(",".join([uid] + [_g6(v) for v in positions[i]]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_export(args) -> int:
    artifact = Path(args.artifact)
    if not artifact.exists():
        raise UsageError(f"artifact directory not found: {artifact}")
    draws, X = load_draws(artifact)
    summary = summarize(draws, procrustes_align(draws))
    out_dir = Path(args.out) if args.out else artifact
    export_artifacts(
        summary,
        X,
        out_dir,
        overwrite=args.overwrite,
        similarity_metric=args.metric,
        threshold_quantile=args.threshold_quantile,
        extra_manifest={"command": "export", "source_artifact": str(artifact)},
    )
    print(f"export written to {out_dir}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    X, truth = simulate_responses(
        args.n,
        args.p,
        args.dim,
        args.seed,
        position_scale=args.position_scale,
        intercept_low=args.intercept_low,
        intercept_high=args.intercept_high,
    )
    out = Path(args.out)
    if out.exists() and not args.overwrite:
        raise UsageError(f"refusing to overwrite {out}; pass --overwrite")
    save_response_csv(X, out)
    if args.truth_out:
        np.savez(
            args.truth_out,
            person_positions=truth["person_positions"],
            item_positions=truth["item_positions"],
            item_intercepts=truth["item_intercepts"],
        )
    print(f"simulated {args.n}x{args.p} responses written to {out}")
    return EXIT_OK


def cmd_counts(args) -> int:
    path = Path(args.data)
    if not path.exists():
        raise UsageError(f"input data file not found: {path}")
    X = load_response_csv(
        path, missing_token=args.missing_token, has_person_id_column=args.id_column
    )
    try:
        items = [X.item_ids.index(tok) for tok in args.items.split(",")]
    except ValueError:
        raise UsageError(
            f"unknown item id in {args.items!r}; known: {', '.join(X.item_ids)}"
        ) from None
    result = pairwise_counts(X, items)
    print(f"persons fully observed on {args.items}: {result.n_complete}")
    print("pattern,count")
    for pattern, count in sorted(result.pattern_counts.items()):
        print(f"{pattern},{count}")
    print("item_a,item_b,concordant,discordant")
    for (a, b), (conc, disc) in result.pair_totals.items():
        print(f"{X.item_ids[a]},{X.item_ids[b]},{conc},{disc}")
    return EXIT_OK


def _overrides_from(args) -> dict:
    mapping = {
        "dim": args.dim,
        "encoding": args.encoding,
        "linkage": args.linkage,
        "iters": args.iters,
        "burnin": args.burnin,
        "thin": args.thin,
        "seed": args.seed,
        "workers": args.workers,
        "missing_token": args.missing_token,
        "id_column": True if args.id_column else None,
        "progress": args.progress,
        "metric": args.metric,
        "threshold_quantile": args.threshold_quantile,
    }
    return {k: v for k, v in mapping.items() if v is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nirm",
        description=(
            "Fit a latent-space network model to binary response data, "
            "position new persons/items in a fitted space, and export "
            "distance and similarity artifacts."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the model and write an artifact directory")
    p_fit.add_argument("--data", required=True, help="response CSV")
    p_fit.add_argument("--config", help="flat key=value config file")
    p_fit.add_argument("--out", help=f"artifact directory (default under ${OUT_ROOT_ENV} or cwd)")
    p_fit.add_argument("--seed", type=int)
    p_fit.add_argument("--dim", type=int)
    p_fit.add_argument("--encoding", choices=["prod", "concord"])
    p_fit.add_argument(
        "--linkage", choices=["item-from-person", "person-from-item"]
    )
    p_fit.add_argument("--iters", type=int)
    p_fit.add_argument("--burnin", type=int)
    p_fit.add_argument("--thin", type=int)
    p_fit.add_argument("--workers", type=int)
    p_fit.add_argument("--missing-token", dest="missing_token")
    p_fit.add_argument("--id-column", dest="id_column", action="store_true")
    p_fit.add_argument("--progress", type=int, help="progress interval (iterations)")
    p_fit.add_argument("--metric", choices=["s1", "s2"])
    p_fit.add_argument("--threshold-quantile", dest="threshold_quantile", type=float)
    p_fit.add_argument("--overwrite", action="store_true")
    p_fit.set_defaults(func=cmd_fit)

    p_ext = sub.add_parser("extend", help="position new persons or items")
    ext_sub = p_ext.add_subparsers(dest="extend_command", required=True)

    p_score = ext_sub.add_parser("score", help="position new persons")
    p_score.add_argument("--artifact", required=True)
    p_score.add_argument("--data", required=True, help="new person rows CSV")
    p_score.add_argument("--approx-only", dest="approx_only", action="store_true")
    p_score.add_argument("--seed", type=int, default=1234)
    p_score.add_argument("--iters", type=int, default=3000)
    p_score.add_argument("--burnin", type=int, default=1000)
    p_score.add_argument("--thin", type=int, default=2)
    p_score.add_argument("--missing-token", dest="missing_token", default="NA")
    p_score.add_argument("--id-column", dest="id_column", action="store_true")
    p_score.set_defaults(func=cmd_extend_score)

    p_link = ext_sub.add_parser("link", help="position new items")
    p_link.add_argument("--artifact", required=True)
    p_link.add_argument("--data", required=True, help="payload CSV with new items")
    p_link.add_argument(
        "--policy",
        choices=["place-only", "partial-update"],
        default="partial-update",
    )
    p_link.add_argument(
        "--original-data",
        dest="original_data",
        help="original fit data for verification (hash-checked)",
    )
    p_link.add_argument("--seed", type=int, default=1234)
    p_link.add_argument("--iters", type=int, default=3000)
    p_link.add_argument("--burnin", type=int, default=1000)
    p_link.add_argument("--thin", type=int, default=2)
    p_link.add_argument("--missing-token", dest="missing_token", default="NA")
    p_link.add_argument("--id-column", dest="id_column", action="store_true")
    p_link.set_defaults(func=cmd_extend_link)

    p_exp = sub.add_parser("export", help="re-export artifacts from stored draws")
    p_exp.add_argument("--artifact", required=True)
    p_exp.add_argument("--out", help="destination (default: the artifact dir)")
    p_exp.add_argument("--metric", choices=["s1", "s2"], default="s1")
    p_exp.add_argument(
        "--threshold-quantile", dest="threshold_quantile", type=float, default=0.75
    )
    p_exp.add_argument("--overwrite", action="store_true")
    p_exp.set_defaults(func=cmd_export)

    p_sim = sub.add_parser(
        "simulate",
        help="generate synthetic responses from a latent-distance response model",
    )
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--p", type=int, required=True)
    p_sim.add_argument("--dim", type=int, default=2)
    p_sim.add_argument("--seed", type=int, default=1234)
    p_sim.add_argument("--position-scale", dest="position_scale", type=float, default=1.0)
    p_sim.add_argument("--intercept-low", dest="intercept_low", type=float, default=-0.5)
    p_sim.add_argument("--intercept-high", dest="intercept_high", type=float, default=4.0)
    p_sim.add_argument("--truth-out", dest="truth_out")
    p_sim.add_argument("--overwrite", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_cnt = sub.add_parser("counts", help="pairwise contingency counts for items")
    p_cnt.add_argument("--data", required=True)
    p_cnt.add_argument("--items", required=True, help="comma-separated item ids")
    p_cnt.add_argument("--missing-token", dest="missing_token", default="NA")
    p_cnt.add_argument("--id-column", dest="id_column", action="store_true")
    p_cnt.set_defaults(func=cmd_counts)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nirm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        ResponseDataError,
        ModelError,
        SamplerError,
        ExtendError,
        ExportError,
        ArtifactError,
        OSError,
    ) as exc:
        print(f"nirm: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort CLI boundary
        print(f"nirm: unexpected failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
