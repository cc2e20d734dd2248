"""Chain post-processing: alignment, rotation, traces, and summaries.

Latent positions are identified only up to translation, rotation, and
reflection, so raw position chains wander through equivalent configurations.
Alignment maps every retained draw onto a common frame (two passes: first
draw as provisional reference, then the pass-one mean); distances are
untouched by construction.  Scalar chains need none of this.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import Linkage
from .sampler import PosteriorDraws

__all__ = [
    "AlignedDraws",
    "ParameterTable",
    "PosteriorSummary",
    "procrustes_align",
    "principal_axes_rotate",
    "pair_distance_trace",
    "summarize",
    "effective_sample_size",
]


@dataclass
class AlignedDraws:
    """Per-draw positions mapped onto a common orientation.

    Both spaces receive the same rigid transform per draw (they share the
    latent space), computed from the free side.  ``residuals`` holds each
    draw's squared alignment residual against the final reference.
    """

    person_positions: np.ndarray  # (R, n, d)
    item_positions: np.ndarray  # (R, p, d)
    reference: np.ndarray  # (m, d) free-side reference configuration
    residuals: np.ndarray  # (R,)
    residuals_first_pass: np.ndarray  # (R,)

    @property
    def count(self) -> int:
        return int(self.residuals.shape[0])


def _orthogonal_fit(source: np.ndarray, target: np.ndarray):
    """Least-squares rigid match of source onto target.

    Returns (rotation, translation, squared residual); the rotation ranges
    over the full orthogonal group, reflections included.  Degenerate
    cross-products (all points coincident) fall back to the identity.
    """
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    a = source - mu_s
    b = target - mu_t
    cross = a.T @ b
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    # Spread at rounding-noise level relative to the centroid counts as
    # "all positions identical", as does an orthogonally-degenerate cross.
    tiny_a = norm_a <= 1e-12 * (1.0 + float(np.linalg.norm(mu_s)))
    tiny_b = norm_b <= 1e-12 * (1.0 + float(np.linalg.norm(mu_t)))
    if tiny_a or tiny_b or np.linalg.norm(cross) <= 1e-15 * norm_a * norm_b:
        warnings.warn(
            "rank-deficient alignment cross-product; using identity transform",
            stacklevel=3,
        )
        rot = np.eye(source.shape[1])
    else:
        u, _, vt = np.linalg.svd(cross)
        rot = u @ vt
    aligned = a @ rot
    resid = float(np.sum((aligned - b) ** 2))
    return rot, mu_t - mu_s @ rot, resid, aligned + mu_t


def procrustes_align(draws: PosteriorDraws) -> AlignedDraws:
    """Two-pass rigid alignment of the retained position draws.

    Pass one aligns every draw to the first retained draw; pass two re-aligns
    to the mean of the pass-one configurations, which is the least-squares
    reference.  The transform for each draw is estimated on the free side and
    applied to both spaces.
    """
    if draws.count < 1:
        raise ValueError("alignment needs at least one retained draw")
    item_linked = draws.config.linkage is Linkage.ITEM_FROM_PERSON
    free = draws.person_positions if item_linked else draws.item_positions
    other = draws.item_positions if item_linked else draws.person_positions

    def align_all(reference: np.ndarray, free_src: np.ndarray, other_src: np.ndarray):
        free_out = np.empty_like(free_src)
        other_out = np.empty_like(other_src)
        resid = np.empty(free_src.shape[0])
        for r in range(free_src.shape[0]):
            rot, shift, res, moved = _orthogonal_fit(free_src[r], reference)
            free_out[r] = moved
            other_out[r] = other_src[r] @ rot + shift
            resid[r] = res
        return free_out, other_out, resid

    free1, other1, resid1 = align_all(free[0], free, other)
    reference = free1.mean(axis=0)
    free2, other2, resid2 = align_all(reference, free1, other1)

    if item_linked:
        person_out, item_out = free2, other2
    else:
        person_out, item_out = other2, free2
    return AlignedDraws(
        person_positions=person_out,
        item_positions=item_out,
        reference=reference,
        residuals=resid2,
        residuals_first_pass=resid1,
    )


def principal_axes_rotate(positions: np.ndarray) -> np.ndarray:
    """Center a configuration and rotate it onto its principal axes.

    Output columns are uncorrelated with non-increasing variances; pairwise
    distances are preserved.  With (near-)repeated eigenvalues any valid
    eigenbasis may come back, with a warning.
    """
    positions = np.asarray(positions, dtype=float)
    m, d = positions.shape
    if m < d:
        raise ValueError(f"need at least d={d} rows to orient {d} axes")
    centered = positions - positions.mean(axis=0)
    cross = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cross)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    scale = max(float(eigvals[0]), 1.0)
    if d > 1 and np.any(np.diff(eigvals) > -1e-12 * scale):
        warnings.warn(
            "repeated eigenvalues; principal-axes basis is not unique",
            stacklevel=2,
        )
    # Fix each axis sign so the largest-magnitude loading is positive.
    for j in range(d):
        k = int(np.argmax(np.abs(eigvecs[:, j])))
        if eigvecs[k, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    return centered @ eigvecs


def pair_distance_trace(
    draws: PosteriorDraws,
    pairs: list[tuple[int, int]],
    space: str = "item",
) -> dict[tuple[int, int], dict[str, np.ndarray | float]]:
    """Per-draw distances for selected pairs, with lag-1 autocorrelation.

    Distances are alignment-invariant, so the raw draws are used as stored.
    """
    if space == "person":
        pos = draws.person_positions
    elif space == "item":
        pos = draws.item_positions
    else:
        raise ValueError(f"space must be 'person' or 'item', got {space!r}")
    m = pos.shape[1]
    out: dict[tuple[int, int], dict[str, np.ndarray | float]] = {}
    for a, b in pairs:
        if not (0 <= a < m and 0 <= b < m):
            raise IndexError(f"pair ({a}, {b}) out of range for size {m}")
        series = np.linalg.norm(pos[:, a, :] - pos[:, b, :], axis=1)
        out[(a, b)] = {"series": series, "lag1_autocorr": _lag1(series)}
    return out


def _lag1(series: np.ndarray) -> float:
    x = series - series.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        return 1.0
    return float(np.dot(x[:-1], x[1:]) / denom)


def effective_sample_size(chain: np.ndarray) -> float:
    """ESS via the initial-positive-sequence autocorrelation truncation.

    A constant chain counts as fully independent (ESS = length).
    """
    x = np.asarray(chain, dtype=float)
    t = x.shape[0]
    if t < 3 or np.all(x == x[0]):
        return float(t)
    x = x - x.mean()
    var = float(np.dot(x, x)) / t
    if var == 0.0:
        return float(t)
    # autocovariances up to t-2, normalized
    max_lag = t - 1
    rho = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        rho[lag - 1] = float(np.dot(x[:-lag], x[lag:])) / (t * var)
    tau = 1.0
    k = 0
    while 2 * k + 1 < max_lag:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 1
    return float(min(t, max(1.0, t / tau)))


@dataclass
class ParameterTable:
    """Per-parameter posterior summaries for one scalar block."""

    mean: np.ndarray
    median: np.ndarray
    q05: np.ndarray
    q95: np.ndarray
    ess: np.ndarray


@dataclass
class PosteriorSummary:
    """Point estimates and uncertainty for everything the exporter needs."""

    person_intercepts: ParameterTable
    item_intercepts: ParameterTable
    sigma_sq: ParameterTable
    person_positions: np.ndarray  # (n, d) aligned means, principal axes
    item_positions: np.ndarray  # (p, d) same frame as person positions
    person_distances: np.ndarray  # (n, n)
    item_distances: np.ndarray  # (p, p)
    acceptance: dict[str, dict[str, float]]
    quantiles_degraded: bool
    n_draws: int
    config: object
    mcmc: object


def _table(chains: np.ndarray, degraded: bool) -> ParameterTable:
    """chains: (R, k) -> per-column summaries."""
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    if chains.ndim == 1:
        chains = chains[:, None]
    if degraded:
        q05 = chains.min(axis=0)
        q95 = chains.max(axis=0)
    else:
        q05 = np.quantile(chains, 0.05, axis=0)
        q95 = np.quantile(chains, 0.95, axis=0)
    ess = np.array([effective_sample_size(chains[:, j]) for j in range(chains.shape[1])])
    return ParameterTable(
        mean=chains.mean(axis=0),
        median=np.median(chains, axis=0),
        q05=q05,
        q95=q95,
        ess=ess,
    )


def _distance_matrix(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt(np.einsum("abd,abd->ab", diff, diff))


def summarize(
    draws: PosteriorDraws, aligned: AlignedDraws | None = None
) -> PosteriorSummary:
    """Posterior summaries: scalar tables from raw chains, point positions
    from aligned means rotated to principal axes (one joint rotation so the
    two spaces stay mutually oriented), and distance matrices from those
    point positions."""
    if aligned is None:
        aligned = procrustes_align(draws)
    degraded = draws.count < 10
    if degraded:
        warnings.warn(
            f"only {draws.count} retained draws; reporting min/max in place "
            "of 5%/95% quantiles",
            stacklevel=2,
        )

    person_mean = aligned.person_positions.mean(axis=0)
    item_mean = aligned.item_positions.mean(axis=0)
    n = person_mean.shape[0]
    stacked = principal_axes_rotate(np.vstack([person_mean, item_mean]))
    person_pos = stacked[:n]
    item_pos = stacked[n:]

    return PosteriorSummary(
        person_intercepts=_table(draws.person_intercepts, degraded),
        item_intercepts=_table(draws.item_intercepts, degraded),
        sigma_sq=_table(draws.sigma_sq[:, None], degraded),
        person_positions=person_pos,
        item_positions=item_pos,
        person_distances=_distance_matrix(person_pos),
        item_distances=_distance_matrix(item_pos),
        acceptance=draws.acceptance,
        quantiles_degraded=degraded,
        n_draws=draws.count,
        config=draws.config,
        mcmc=draws.mcmc,
    )
