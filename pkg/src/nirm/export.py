"""Analysis artifacts: similarity matrices, distance tables, CSV/SVG export.

Exports are deterministic: fixed column orders, 6-significant-digit numeric
formatting, no timestamps, and content hashes recorded in the manifest so a
re-export of the same summary is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import svg
from .data import MISSING, ResponseMatrix
from .postprocess import PosteriorSummary

__all__ = [
    "SimilarityMatrix",
    "ItemRestDistances",
    "EdgeList",
    "ExportError",
    "similarity_matrix",
    "item_rest_distances",
    "build_edge_list",
    "export_artifacts",
    "DOCUMENTED_DEVIATIONS",
]

# Modeling conventions that differ from, or pin down choices left open by,
# the usual presentation of this model family; echoed into every manifest.
DOCUMENTED_DEVIATIONS = (
    "each unordered pair enters the likelihood once (k<l, i<j); the doubled "
    "product over ordered pairs would rescale every log-term by two",
    "position point estimates are means of two-pass rigid-aligned draws, "
    "rotated to joint principal axes",
    "missing responses remove the affected edges from all likelihood products",
    "network SVG display threshold is presentation-only; edges.csv carries "
    "every pair",
)


class ExportError(RuntimeError):
    """Export could not proceed (existing files, unwritable directory)."""


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric similarities in [0, 1] derived from latent distances."""

    values: np.ndarray
    metric: str  # "s1" or "s2"


@dataclass(frozen=True)
class ItemRestDistances:
    """Per-item mean distance to the other items; large values flag outliers."""

    values: np.ndarray
    max_index: int


@dataclass(frozen=True)
class EdgeList:
    """One record per unordered pair: (id_a, id_b, distance, similarity)."""

    records: tuple[tuple[str, str, float, float], ...]
    metric: str


def _pair_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.einsum("abd,abd->ab", diff, diff))


def similarity_matrix(positions: np.ndarray, metric: str = "s1") -> SimilarityMatrix:
    """Distance-to-similarity transform over a configuration.

    ``s1`` is the inverse exponentiated distance exp(-dist); ``s2`` is one
    minus distance over the maximal pairwise distance.  Both are strictly
    order-reversing in distance, so either ranking matches the inverse
    distance ranking.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.shape[0] < 2:
        raise ValueError("similarity needs at least two positions")
    dist = _pair_distances(positions)
    if metric == "s1":
        values = np.exp(-dist)
    elif metric == "s2":
        dmax = float(dist.max())
        if dmax == 0.0:
            warnings.warn(
                "all positions identical; s2 degenerates to 1 everywhere",
                stacklevel=2,
            )
            values = np.ones_like(dist)
        else:
            values = 1.0 - dist / dmax
    else:
        raise ValueError(f"metric must be 's1' or 's2', got {metric!r}")
    return SimilarityMatrix(values=values, metric=metric)


def item_rest_distances(positions: np.ndarray) -> ItemRestDistances:
    """Mean distance from each item to every other item, plus the argmax."""
    positions = np.asarray(positions, dtype=float)
    p = positions.shape[0]
    if p < 2:
        raise ValueError("item-rest distances need at least two items")
    dist = _pair_distances(positions)
    values = dist.sum(axis=1) / (p - 1)
    return ItemRestDistances(values=values, max_index=int(np.argmax(values)))


def build_edge_list(
    positions: np.ndarray, ids: tuple[str, ...], metric: str = "s1"
) -> EdgeList:
    """All unordered pairs with distances and similarities, ordered
    lexicographically by the id pair."""
    sim = similarity_matrix(positions, metric)
    dist = _pair_distances(np.asarray(positions, dtype=float))
    records = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            a, b = ids[i], ids[j]
            (a, ii), (b, jj) = sorted([(a, i), (b, j)])
            records.append((a, b, float(dist[ii, jj]), float(sim.values[ii, jj])))
    records.sort(key=lambda r: (r[0], r[1]))
    return EdgeList(records=tuple(records), metric=metric)


def _g6(x: float) -> str:
    return f"{float(x):.6g}"


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def export_artifacts(
    summary: PosteriorSummary,
    X: ResponseMatrix,
    out_dir: str | Path,
    *,
    overwrite: bool = False,
    similarity_metric: str = "s1",
    threshold_quantile: float = 0.75,
    layout_seed: int = 7,
    extra_manifest: dict | None = None,
    extra_hashes: dict[str, str] | None = None,
) -> list[Path]:
    """Write the full artifact set for a posterior summary.

    Files: positions.csv, edges.csv, beta_summary.csv, theta_summary.csv,
    distance_histogram.csv, item_rest.csv, latent_space.svg, network.svg,
    manifest.json.  Existing files are refused unless ``overwrite`` is set.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [
        "positions.csv",
        "edges.csv",
        "beta_summary.csv",
        "theta_summary.csv",
        "distance_histogram.csv",
        "item_rest.csv",
        "latent_space.svg",
        "network.svg",
        "manifest.json",
    ]
    if not overwrite:
        clashes = [n for n in names if (out_dir / n).exists()]
        if clashes:
            raise ExportError(
                f"refusing to overwrite existing files in {out_dir}: {clashes}; "
                "pass overwrite to allow"
            )

    d = summary.person_positions.shape[1]
    scores = X.sum_scores()
    written: list[Path] = []

    # positions.csv: both spaces in one table, principal-axes orientation.
    rows = []
    for k, pid in enumerate(X.person_ids):
        rows.append(
            ["person", pid, str(int(scores[k]))]
            + [_g6(v) for v in summary.person_positions[k]]
        )
    for i, iid in enumerate(X.item_ids):
        rows.append(
            ["item", iid, ""] + [_g6(v) for v in summary.item_positions[i]]
        )
    path = out_dir / "positions.csv"
    _write_csv(path, ["kind", "id", "sum_score"] + [f"x{j + 1}" for j in range(d)], rows)
    written.append(path)

    # edges.csv: item pairs with distance and similarity.
    edge_list = build_edge_list(summary.item_positions, X.item_ids, similarity_metric)
    path = out_dir / "edges.csv"
    _write_csv(
        path,
        ["id_a", "id_b", "distance", "similarity"],
        [[a, b, _g6(dist), _g6(sim)] for a, b, dist, sim in edge_list.records],
    )
    written.append(path)

    # beta_summary.csv: per item, observed proportion plus posterior interval.
    observed = X.values != MISSING
    p_hat = (X.values == 1).sum(axis=0) / np.maximum(observed.sum(axis=0), 1)
    tbl = summary.item_intercepts
    path = out_dir / "beta_summary.csv"
    _write_csv(
        path,
        ["item", "p_hat", "estimate", "q05", "q95"],
        [
            [X.item_ids[i], _g6(p_hat[i]), _g6(tbl.mean[i]), _g6(tbl.q05[i]), _g6(tbl.q95[i])]
            for i in range(X.n_items)
        ],
    )
    written.append(path)

    # theta_summary.csv: person intercept estimates grouped by sum score.
    t_mean = summary.person_intercepts.mean
    path = out_dir / "theta_summary.csv"
    rows = []
    for s in np.unique(scores):
        group = t_mean[scores == s]
        rows.append(
            [
                str(int(s)),
                str(int(group.size)),
                _g6(group.mean()),
                _g6(np.quantile(group, 0.05)),
                _g6(np.median(group)),
                _g6(np.quantile(group, 0.95)),
            ]
        )
    _write_csv(path, ["sum_score", "freq", "estimate", "q05", "median", "q95"], rows)
    written.append(path)

    # distance_histogram.csv: every unordered item-pair distance.
    path = out_dir / "distance_histogram.csv"
    dist = summary.item_distances
    rows = [
        [X.item_ids[i], X.item_ids[j], _g6(dist[i, j])]
        for i in range(X.n_items)
        for j in range(i + 1, X.n_items)
    ]
    _write_csv(path, ["id_a", "id_b", "distance"], rows)
    written.append(path)

    # item_rest.csv: average distance from each item to the rest.
    rest = item_rest_distances(summary.item_positions)
    path = out_dir / "item_rest.csv"
    _write_csv(
        path,
        ["item", "avg_distance", "is_max"],
        [
            [X.item_ids[i], _g6(rest.values[i]), str(int(i == rest.max_index))]
            for i in range(X.n_items)
        ],
    )
    written.append(path)

    # latent_space.svg: persons colored by sum score, items labeled.
    path = out_dir / "latent_space.svg"
    path.write_text(
        svg.scatter_svg(
            summary.person_positions,
            scores,
            summary.item_positions,
            list(X.item_ids),
        )
        + "\n",
        encoding="utf-8",
    )
    written.append(path)

    # network.svg: similarity edges at or above the display threshold.
    sims = np.array([r[3] for r in edge_list.records])
    threshold = float(np.quantile(sims, threshold_quantile)) if sims.size else 0.0
    index_of = {iid: i for i, iid in enumerate(X.item_ids)}
    display_edges = [
        (index_of[a], index_of[b], s)
        for a, b, _, s in edge_list.records
        if s >= threshold
    ]
    path = out_dir / "network.svg"
    path.write_text(
        svg.network_svg(list(X.item_ids), display_edges, layout_seed) + "\n",
        encoding="utf-8",
    )
    written.append(path)

    # manifest.json last so it can embed the other files' hashes.
    config = summary.config
    mcmc = summary.mcmc
    manifest = {
        "model": {
            "d": config.d,
            "encoding": config.encoding.value,
            "linkage": config.linkage.value,
            "epsilon": config.epsilon,
            "priors": {
                "sigma_theta_sq": config.priors.sigma_theta_sq,
                "sigma_beta_sq": config.priors.sigma_beta_sq,
                "a_sigma": config.priors.a_sigma,
                "b_sigma": config.priors.b_sigma,
            },
        },
        # workers is execution detail, not a result parameter: runs with any
        # worker count are bitwise identical, so it stays out of the manifest
        "mcmc": {
            "total_iterations": mcmc.total_iterations,
            "burn_in": mcmc.burn_in,
            "thinning": mcmc.thinning,
            "seed": mcmc.seed,
            "random_scan": mcmc.random_scan,
        }
        if mcmc is not None
        else None,
        "seed": mcmc.seed if mcmc is not None else None,
        "retained_draws": summary.n_draws,
        "acceptance": summary.acceptance,
        "similarity_metric": similarity_metric,
        "network_display_threshold": threshold,
        "network_threshold_quantile": threshold_quantile,
        "deviations": list(DOCUMENTED_DEVIATIONS),
        "content_hashes": {
            "data": X.content_hash(),
            **{p.name: _sha256(p) for p in written},
            **(extra_hashes or {}),
        },
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    path = out_dir / "manifest.json"
    path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(path)
    return written
