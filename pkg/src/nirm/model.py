"""Model state, latent-space linkages, and exact posterior evaluation.

Persons and items share one Euclidean latent space.  One side's positions
are free parameters; the other side is derived as response-weighted averages
of the free side, per the configured linkage direction.  Edge probabilities
in every pairwise network decay logistically with distance, shifted by a
per-person or per-item intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numpy as np

from .data import Encoding, ResponseMatrix

__all__ = [
    "Linkage",
    "PriorConfig",
    "ModelConfig",
    "ParameterState",
    "ParameterChange",
    "LogPosterior",
    "ModelError",
    "derive_positions",
    "edge_log_prob",
    "log_posterior",
    "delta_log_posterior",
    "initial_state",
    "simulate_networks",
    "simulate_responses",
    "validate_for_linkage",
]


class ModelError(ValueError):
    """Invalid model configuration or state for the given data."""


class Linkage(str, Enum):
    """Which latent space is free and which is derived from it.

    ITEM_FROM_PERSON: person positions are free; an item sits at the mean
    position of the persons who answered it positively.
    PERSON_FROM_ITEM: item positions are free; a person sits at the mean
    position of the items they answered positively (with a small epsilon
    guard so an all-zero row maps to the origin).
    """

    ITEM_FROM_PERSON = "item-from-person"
    PERSON_FROM_ITEM = "person-from-item"


@dataclass(frozen=True)
class PriorConfig:
    """Variances of the intercept priors and the inverse-gamma hyper-prior
    on the latent-space variance."""

    sigma_theta_sq: float = 10.0
    sigma_beta_sq: float = 10.0
    a_sigma: float = 0.001
    b_sigma: float = 0.001

    def __post_init__(self) -> None:
        for name in ("sigma_theta_sq", "sigma_beta_sq", "a_sigma", "b_sigma"):
            if not getattr(self, name) > 0:
                raise ModelError(f"prior parameter {name} must be positive")


@dataclass(frozen=True)
class ModelConfig:
    d: int = 2
    encoding: Encoding = Encoding.POSITIVE_CONCORDANT
    linkage: Linkage = Linkage.ITEM_FROM_PERSON
    priors: PriorConfig = field(default_factory=PriorConfig)
    epsilon: float = 1e-9

    def __post_init__(self) -> None:
        if int(self.d) < 1:
            raise ModelError(f"latent dimension must be >= 1, got {self.d}")
        if not self.epsilon > 0:
            raise ModelError("epsilon must be positive")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        object.__setattr__(self, "linkage", Linkage(self.linkage))

    def free_count(self, X: ResponseMatrix) -> int:
        if self.linkage is Linkage.ITEM_FROM_PERSON:
            return X.n_persons
        return X.n_items


@dataclass
class ParameterState:
    """One point in parameter space.

    ``free_positions`` holds the free side of the latent space (persons under
    item-from-person linkage, items otherwise); the other side is derived on
    demand.  ``sigma_sq`` is the variance of the free-position prior.
    """

    free_positions: np.ndarray
    person_intercepts: np.ndarray
    item_intercepts: np.ndarray
    sigma_sq: float

    def __post_init__(self) -> None:
        self.free_positions = np.array(self.free_positions, dtype=np.float64)
        self.person_intercepts = np.array(self.person_intercepts, dtype=np.float64)
        self.item_intercepts = np.array(self.item_intercepts, dtype=np.float64)
        self.sigma_sq = float(self.sigma_sq)
        if self.free_positions.ndim != 2:
            raise ModelError("free_positions must be a 2-d array")
        if not self.sigma_sq > 0:
            raise ModelError("sigma_sq must be positive")

    def copy(self) -> "ParameterState":
        return ParameterState(
            self.free_positions.copy(),
            self.person_intercepts.copy(),
            self.item_intercepts.copy(),
            self.sigma_sq,
        )

    def check_shapes(self, X: ResponseMatrix, config: ModelConfig) -> None:
        m = config.free_count(X)
        if self.free_positions.shape != (m, config.d):
            raise ModelError(
                f"free_positions shape {self.free_positions.shape} does not "
                f"match expected ({m}, {config.d}) for linkage "
                f"{config.linkage.value}"
            )
        if self.person_intercepts.shape != (X.n_persons,):
            raise ModelError("person_intercepts length must equal n_persons")
        if self.item_intercepts.shape != (X.n_items,):
            raise ModelError("item_intercepts length must equal n_items")


@dataclass(frozen=True)
class ParameterChange:
    """A single-block parameter change for incremental evaluation."""

    kind: Literal["position", "person_intercept", "item_intercept"]
    index: int
    value: float | np.ndarray


@dataclass(frozen=True)
class LogPosterior:
    log_likelihood_y: float
    log_likelihood_u: float
    log_prior: float

    @property
    def total(self) -> float:
        return self.log_likelihood_y + self.log_likelihood_u + self.log_prior


def validate_for_linkage(X: ResponseMatrix, config: ModelConfig) -> None:
    """Reject data the chosen linkage cannot support.

    Item-from-person linkage averages over positive respondents, so every
    item needs at least one positive fully-observed response; there is no
    epsilon guard on that side.
    """
    if config.linkage is Linkage.ITEM_FROM_PERSON:
        counts = X.positive_counts()
        bad = np.flatnonzero(counts == 0)
        if bad.size:
            names = ", ".join(X.item_ids[i] for i in bad[:5])
            raise ModelError(
                f"item-from-person linkage requires every item to have at "
                f"least one positive response; offending item(s): {names}"
            )


def derive_positions(
    state: ParameterState, X: ResponseMatrix, config: ModelConfig
) -> np.ndarray:
    """Positions of the non-free space as weighted means of the free space.

    Missing responses drop out of both numerator and denominator.  Under
    person-from-item linkage an all-zero row yields the zero vector exactly.
    """
    state.check_shapes(X, config)
    pos01 = (X.values == 1).astype(np.float64)
    if config.linkage is Linkage.ITEM_FROM_PERSON:
        counts = pos01.sum(axis=0)
        if (counts == 0).any():
            validate_for_linkage(X, config)  # raises with the item named
        return (pos01.T @ state.free_positions) / counts[:, None]
    counts = pos01.sum(axis=1)
    return (pos01 @ state.free_positions) / (config.epsilon + counts)[:, None]


def edge_log_prob(intercept: float, distance: float, edge: int) -> float:
    """Log-probability of one network edge.

    The linear predictor is intercept minus distance; the edge is Bernoulli
    through the logistic link.  Evaluated with log1p so large negative or
    positive predictors stay finite.
    """
    eta = float(intercept) - float(distance)
    if eta > 0:
        lse = eta + math.log1p(math.exp(-eta))
    else:
        lse = math.log1p(math.exp(eta))
    return float(edge) * eta - lse


def log_posterior(
    X: ResponseMatrix,
    state: ParameterState,
    config: ModelConfig,
    *,
    workers: int = 1,
) -> LogPosterior:
    """Exact evaluation of both network log-likelihood blocks and the prior.

    Each unordered pair is counted once (the networks are undirected, so the
    doubled product over ordered pairs would only rescale every term by two).
    Missing edges drop out of the products entirely.
    """
    from .engine import PosteriorEngine

    return PosteriorEngine(X, config, state, workers=workers).parts()


def delta_log_posterior(
    X: ResponseMatrix,
    state: ParameterState,
    config: ModelConfig,
    change: ParameterChange,
    *,
    workers: int = 1,
) -> float:
    """log_posterior(after change) minus log_posterior(before).

    Evaluated incrementally: only network terms touched by the changed block
    are revisited, including any derived positions that move with it.
    """
    from .engine import PosteriorEngine

    engine = PosteriorEngine(X, config, state, workers=workers)
    if change.kind == "position":
        return engine.position_delta(change.index, np.asarray(change.value, float))
    if change.kind == "person_intercept":
        new = state.person_intercepts.copy()
        new[change.index] = float(change.value)
        return float(engine.person_intercept_deltas(new)[change.index])
    if change.kind == "item_intercept":
        new = state.item_intercepts.copy()
        new[change.index] = float(change.value)
        return float(engine.item_intercept_deltas(new)[change.index])
    raise ModelError(f"unknown change kind {change.kind!r}")


def initial_state(
    X: ResponseMatrix, config: ModelConfig, rng: np.random.Generator
) -> ParameterState:
    """Starting point for sampling: zero intercepts, unit variance, and free
    positions drawn with small dispersion so distances do not saturate the
    logistic early on."""
    m = config.free_count(X)
    free = rng.normal(0.0, math.sqrt(0.1), size=(m, config.d))
    return ParameterState(
        free_positions=free,
        person_intercepts=np.zeros(X.n_persons),
        item_intercepts=np.zeros(X.n_items),
        sigma_sq=1.0,
    )


def log_prior_parts(
    state: ParameterState, X: ResponseMatrix, config: ModelConfig
) -> float:
    """Sum of the normal intercept priors, the normal free-position prior,
    and the inverse-gamma density on the latent-space variance."""
    pr = config.priors
    n = X.n_persons
    p = X.n_items
    m, d = state.free_positions.shape
    s2 = state.sigma_sq

    theta_ss = float(np.dot(state.person_intercepts, state.person_intercepts))
    beta_ss = float(np.dot(state.item_intercepts, state.item_intercepts))
    pos_ss = float(np.sum(state.free_positions * state.free_positions))

    total = -0.5 * n * math.log(2.0 * math.pi * pr.sigma_theta_sq)
    total -= theta_ss / (2.0 * pr.sigma_theta_sq)
    total += -0.5 * p * math.log(2.0 * math.pi * pr.sigma_beta_sq)
    total -= beta_ss / (2.0 * pr.sigma_beta_sq)
    total += -0.5 * m * d * math.log(2.0 * math.pi * s2)
    total -= pos_ss / (2.0 * s2)
    total += (
        pr.a_sigma * math.log(pr.b_sigma)
        - math.lgamma(pr.a_sigma)
        - (pr.a_sigma + 1.0) * math.log(s2)
        - pr.b_sigma / s2
    )
    return total


def simulate_networks(
    state: ParameterState,
    X: ResponseMatrix,
    config: ModelConfig,
    seed: int,
) -> dict[str, np.ndarray]:
    """Draw synthetic edges for every per-item and per-person network from
    the model's edge probabilities at the given state.

    Returns int8 arrays ``y`` (p, n, n) and ``u`` (n, p, p) with missing
    diagonals; edges are independent Bernoulli draws, symmetric within each
    network, reproducible under the seed.
    """
    from .data import MISSING

    state.check_shapes(X, config)
    rng = np.random.default_rng(seed)
    derived = derive_positions(state, X, config)
    if config.linkage is Linkage.ITEM_FROM_PERSON:
        person_pos, item_pos = state.free_positions, derived
    else:
        person_pos, item_pos = derived, state.free_positions

    def _draw(intercepts: np.ndarray, pos: np.ndarray) -> np.ndarray:
        m = pos.shape[0]
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt(np.einsum("abd,abd->ab", diff, diff))
        out = np.empty((intercepts.size, m, m), dtype=np.int8)
        iu, ju = np.triu_indices(m, k=1)
        for idx, c in enumerate(intercepts):
            eta = c - dist[iu, ju]
            prob = 1.0 / (1.0 + np.exp(-eta))
            draws = (rng.random(iu.size) < prob).astype(np.int8)
            net = np.full((m, m), MISSING, dtype=np.int8)
            net[iu, ju] = draws
            net[ju, iu] = draws
            out[idx] = net
        return out

    return {
        "y": _draw(state.item_intercepts, person_pos),
        "u": _draw(state.person_intercepts, item_pos),
    }


def simulate_responses(
    n_persons: int,
    n_items: int,
    d: int,
    seed: int,
    *,
    position_scale: float = 1.0,
    intercept_low: float = -0.5,
    intercept_high: float = 4.0,
) -> tuple[ResponseMatrix, dict[str, np.ndarray]]:
    """Generate binary responses from a latent-distance response model.

    This is a synthetic convention for recovery tests, not part of the
    fitted model: P(x_ki = 1) = logistic(b_i - ||z_k - w_i||) with person
    and item positions drawn from isotropic normals and item intercepts
    spread linearly so observed proportions cover a wide range.
    """
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, position_scale, size=(n_persons, d))
    w = rng.normal(0.0, position_scale, size=(n_items, d))
    b = np.linspace(intercept_low, intercept_high, n_items)
    diff = z[:, None, :] - w[None, :, :]
    dist = np.sqrt(np.einsum("kid,kid->ki", diff, diff))
    prob = 1.0 / (1.0 + np.exp(-(b[None, :] - dist)))
    values = (rng.random((n_persons, n_items)) < prob).astype(np.int8)
    X = ResponseMatrix(
        values,
        tuple(f"p{k + 1}" for k in range(n_persons)),
        tuple(f"i{i + 1}" for i in range(n_items)),
    )
    return X, {"person_positions": z, "item_positions": w, "item_intercepts": b}
