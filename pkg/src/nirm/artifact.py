"""Fit-artifact directories: persistence and reload.

A fit artifact is a directory holding the input data copy, the raw thinned
draws, numeric summaries, the export file set, and a manifest with the merged
configuration and content hashes.  Extensions read everything they need from
the directory alone; a lock file serializes commands against one artifact.
"""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import ResponseMatrix, load_response_csv, save_response_csv
from .export import export_artifacts
from .extend import FittedModel
from .model import Encoding, Linkage, ModelConfig, PriorConfig
from .postprocess import PosteriorSummary, procrustes_align, summarize
from .sampler import AdaptationConfig, McmcConfig, PosteriorDraws, ProposalScales

__all__ = [
    "ArtifactError",
    "ArtifactLockError",
    "artifact_lock",
    "save_fit_artifact",
    "load_draws",
    "load_fitted_model",
    "model_config_to_dict",
    "model_config_from_dict",
    "mcmc_config_to_dict",
    "mcmc_config_from_dict",
]

DRAWS_FILE = "draws.npz"
DATA_FILE = "data.csv"
MANIFEST_FILE = "manifest.json"
LOCK_FILE = ".lock"


class ArtifactError(RuntimeError):
    """Artifact directory is missing, inconsistent, or unreadable."""


class ArtifactLockError(ArtifactError):
    """Another command holds the artifact directory."""


@contextmanager
def artifact_lock(directory: str | Path):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / LOCK_FILE
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ArtifactLockError(
            f"artifact directory {directory} is locked by another command "
            f"(remove {lock} if that command is gone)"
        ) from None
    try:
        os.close(fd)
        yield directory
    finally:
        lock.unlink(missing_ok=True)


def model_config_to_dict(config: ModelConfig) -> dict:
    return {
        "d": config.d,
        "encoding": config.encoding.value,
        "linkage": config.linkage.value,
        "epsilon": config.epsilon,
        "priors": asdict(config.priors),
    }


def model_config_from_dict(data: dict) -> ModelConfig:
    return ModelConfig(
        d=int(data["d"]),
        encoding=Encoding(data["encoding"]),
        linkage=Linkage(data["linkage"]),
        priors=PriorConfig(**data["priors"]),
        epsilon=float(data["epsilon"]),
    )


def mcmc_config_to_dict(mcmc: McmcConfig) -> dict:
    out = asdict(mcmc)
    out["scales"] = asdict(mcmc.scales)
    out["adaptation"] = asdict(mcmc.adaptation)
    return out


def mcmc_config_from_dict(data: dict) -> McmcConfig:
    data = dict(data)
    data["scales"] = ProposalScales(**data["scales"])
    data["adaptation"] = AdaptationConfig(**data["adaptation"])
    return McmcConfig(**data)


def save_fit_artifact(
    out_dir: str | Path,
    X: ResponseMatrix,
    draws: PosteriorDraws,
    summary: PosteriorSummary,
    *,
    overwrite: bool = False,
    similarity_metric: str = "s1",
    threshold_quantile: float = 0.75,
    extra_manifest: dict | None = None,
) -> list[Path]:
    """Persist a complete fit artifact; refuses to clobber unless asked."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in (DRAWS_FILE, DATA_FILE):
        if (out_dir / name).exists() and not overwrite:
            raise ArtifactError(
                f"refusing to overwrite {out_dir / name}; pass overwrite to allow"
            )

    save_response_csv(X, out_dir / DATA_FILE)

    mcmc_echo = mcmc_config_to_dict(draws.mcmc)
    # Execution-only knobs: results are identical for any value, so persist
    # normalized ones to keep artifacts byte-stable across environments.
    mcmc_echo["workers"] = 1
    mcmc_echo["progress_every"] = 0
    meta = {
        "model": model_config_to_dict(draws.config),
        "mcmc": mcmc_echo,
        "acceptance": draws.acceptance,
        "final_scales": asdict(draws.final_scales),
    }
    np.savez(
        out_dir / DRAWS_FILE,
        person_positions=draws.person_positions,
        item_positions=draws.item_positions,
        person_intercepts=draws.person_intercepts,
        item_intercepts=draws.item_intercepts,
        sigma_sq=draws.sigma_sq,
        log_posterior=draws.log_posterior,
        meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8),
    )

    draws_hash = hashlib.sha256((out_dir / DRAWS_FILE).read_bytes()).hexdigest()
    written = export_artifacts(
        summary,
        X,
        out_dir,
        overwrite=overwrite,
        similarity_metric=similarity_metric,
        threshold_quantile=threshold_quantile,
        extra_manifest=extra_manifest,
        extra_hashes={DRAWS_FILE: draws_hash},
    )
    return [out_dir / DATA_FILE, out_dir / DRAWS_FILE, *written]


def load_draws(directory: str | Path) -> tuple[PosteriorDraws, ResponseMatrix]:
    """Reload the retained chain and the data that produced it."""
    directory = Path(directory)
    path = directory / DRAWS_FILE
    if not path.exists():
        raise ArtifactError(f"no {DRAWS_FILE} in {directory}")
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode("utf-8"))
        draws = PosteriorDraws(
            person_positions=z["person_positions"],
            item_positions=z["item_positions"],
            person_intercepts=z["person_intercepts"],
            item_intercepts=z["item_intercepts"],
            sigma_sq=z["sigma_sq"],
            log_posterior=z["log_posterior"],
            acceptance=meta["acceptance"],
            final_scales=ProposalScales(**meta["final_scales"]),
            config=model_config_from_dict(meta["model"]),
            mcmc=mcmc_config_from_dict(meta["mcmc"]),
        )
    X = load_response_csv(directory / DATA_FILE, has_person_id_column=True)
    _verify_data_hash(directory, X)
    return draws, X


def _verify_data_hash(directory: Path, X: ResponseMatrix) -> None:
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.exists():
        return
    manifest = json.loads(manifest_path.read_text())
    want = manifest.get("content_hashes", {}).get("data")
    if want is not None and want != X.content_hash():
        raise ArtifactError(
            f"data in {directory} does not match the manifest content hash; "
            "the artifact has been tampered with or mixed up"
        )


def load_fitted_model(directory: str | Path) -> FittedModel:
    """Rebuild the point-estimate view of a fit from its artifact directory."""
    draws, X = load_draws(directory)
    summary = summarize(draws, procrustes_align(draws))
    return FittedModel.from_summary(summary, X)
