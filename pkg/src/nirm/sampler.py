"""Adaptive random-walk Metropolis sampler with a conjugate variance step.

One sweep proposes every free-position row sequentially, then the person
intercepts, then the item intercepts (each intercept block is conditionally
independent given positions, so its proposals are evaluated jointly), and
finally draws the latent-space variance from its inverse-gamma full
conditional.  Proposal scales adapt only during burn-in so retained draws
come from a fixed kernel.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .data import ResponseMatrix
from .engine import PosteriorEngine
from .model import (
    Linkage,
    ModelConfig,
    ModelError,
    ParameterState,
    initial_state,
    validate_for_linkage,
)

__all__ = [
    "ProposalScales",
    "AdaptationConfig",
    "McmcConfig",
    "BlockTally",
    "PosteriorDraws",
    "SamplerError",
    "fit",
    "sweep",
    "gibbs_update_variance",
    "adapt_scales",
]


class SamplerError(RuntimeError):
    """Sampling could not start or proceed."""


@dataclass(frozen=True)
class ProposalScales:
    position: float = 0.25
    person_intercept: float = 0.25
    item_intercept: float = 0.25

    def __post_init__(self) -> None:
        for name in ("position", "person_intercept", "item_intercept"):
            if not getattr(self, name) >= 0:
                raise ModelError(f"proposal scale {name} must be nonnegative")


@dataclass(frozen=True)
class AdaptationConfig:
    window: int = 100
    target_low: float = 0.2
    target_high: float = 0.4
    grow: float = 1.25
    shrink: float = 0.8


@dataclass(frozen=True)
class McmcConfig:
    total_iterations: int = 15000
    burn_in: int = 5000
    thinning: int = 5
    scales: ProposalScales = field(default_factory=ProposalScales)
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    seed: int = 1234
    workers: int = 1
    random_scan: bool = False
    progress_every: int = 0
    resync_every: int = 1000
    # Block freezing; useful for conditional runs (e.g. fixed intercepts).
    sample_positions: bool = True
    sample_person_intercepts: bool = True
    sample_item_intercepts: bool = True
    sample_sigma: bool = True

    def __post_init__(self) -> None:
        if self.total_iterations < 1:
            raise ModelError("total_iterations must be positive")
        if not 0 <= self.burn_in < self.total_iterations:
            raise ModelError("burn_in must satisfy 0 <= burn_in < total_iterations")
        if self.thinning < 1:
            raise ModelError("thinning must be >= 1")
        if self.workers < 1:
            raise ModelError("workers must be >= 1")

    @property
    def retained_count(self) -> int:
        return (self.total_iterations - self.burn_in) // self.thinning


@dataclass
class BlockTally:
    accepted: int = 0
    proposed: int = 0

    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def add(self, accepted: int, proposed: int) -> None:
        self.accepted += accepted
        self.proposed += proposed


_BLOCKS = ("position", "person_intercept", "item_intercept")


@dataclass
class PosteriorDraws:
    """Burn-in-trimmed, thinned chain with both position spaces realized."""

    person_positions: np.ndarray  # (R, n, d)
    item_positions: np.ndarray  # (R, p, d)
    person_intercepts: np.ndarray  # (R, n)
    item_intercepts: np.ndarray  # (R, p)
    sigma_sq: np.ndarray  # (R,)
    log_posterior: np.ndarray  # (R,)
    acceptance: dict[str, dict[str, float]]
    final_scales: ProposalScales
    config: ModelConfig
    mcmc: McmcConfig

    @property
    def count(self) -> int:
        return int(self.sigma_sq.shape[0])

    @property
    def states(self) -> list[ParameterState]:
        """Retained draws as ParameterState values (free side per linkage)."""
        item_linked = self.config.linkage is Linkage.ITEM_FROM_PERSON
        free = self.person_positions if item_linked else self.item_positions
        return [
            ParameterState(
                free[r].copy(),
                self.person_intercepts[r].copy(),
                self.item_intercepts[r].copy(),
                float(self.sigma_sq[r]),
            )
            for r in range(self.count)
        ]


def adapt_scales(
    tallies: dict[str, BlockTally],
    scales: ProposalScales,
    adaptation: AdaptationConfig,
) -> ProposalScales:
    """Window-based scale tuning: grow when acceptance runs hot, shrink when
    cold, leave alone inside the target band."""
    new = {}
    for name in _BLOCKS:
        scale = getattr(scales, name)
        tally = tallies.get(name)
        if tally is not None and tally.proposed > 0:
            rate = tally.rate()
            if rate > adaptation.target_high:
                scale *= adaptation.grow
            elif rate < adaptation.target_low:
                scale *= adaptation.shrink
        new[name] = scale
    return ProposalScales(**new)


def gibbs_update_variance(
    state: ParameterState, model: ModelConfig, rng: np.random.Generator
) -> float:
    """Draw the free-position variance from its inverse-gamma conditional."""
    m, d = state.free_positions.shape
    ss = float(np.sum(state.free_positions * state.free_positions))
    return _draw_sigma_sq(ss, m * d, model, rng)


def _draw_sigma_sq(
    sum_sq: float, n_coords: int, model: ModelConfig, rng: np.random.Generator
) -> float:
    shape = model.priors.a_sigma + 0.5 * n_coords
    rate = model.priors.b_sigma + 0.5 * sum_sq
    return rate / rng.gamma(shape)


def _run_sweep(
    engine: PosteriorEngine,
    mcmc: McmcConfig,
    scales: ProposalScales,
    rng: np.random.Generator,
    tallies: dict[str, BlockTally],
) -> None:
    state = engine.state
    model = engine.config
    m, d = state.free_positions.shape

    if mcmc.sample_positions:
        order = rng.permutation(m) if mcmc.random_scan else range(m)
        accepted = engine.position_block(scales.position, rng, order)
        tallies["position"].add(accepted, m)

    if mcmc.sample_person_intercepts:
        proposed = state.person_intercepts + scales.person_intercept * (
            rng.standard_normal(state.person_intercepts.size)
        )
        deltas = engine.person_intercept_deltas(proposed)
        accept = np.log(rng.random(proposed.size)) < deltas
        engine.commit_person_intercepts(accept, proposed)
        tallies["person_intercept"].add(int(accept.sum()), proposed.size)

    if mcmc.sample_item_intercepts:
        proposed = state.item_intercepts + scales.item_intercept * (
            rng.standard_normal(state.item_intercepts.size)
        )
        deltas = engine.item_intercept_deltas(proposed)
        accept = np.log(rng.random(proposed.size)) < deltas
        engine.commit_item_intercepts(accept, proposed)
        tallies["item_intercept"].add(int(accept.sum()), proposed.size)

    if mcmc.sample_sigma:
        engine.set_sigma_sq(
            _draw_sigma_sq(engine.sum_sq_positions(), m * d, model, rng)
        )


def sweep(
    state: ParameterState,
    X: ResponseMatrix,
    model: ModelConfig,
    scales: ProposalScales,
    rng: np.random.Generator,
    *,
    mcmc: McmcConfig | None = None,
) -> tuple[ParameterState, dict[str, BlockTally]]:
    """One full Metropolis pass plus the variance draw, as a pure step."""
    mcmc = mcmc or McmcConfig(total_iterations=1, burn_in=0, thinning=1)
    engine = PosteriorEngine(X, model, state, workers=mcmc.workers)
    tallies = {name: BlockTally() for name in _BLOCKS}
    try:
        _run_sweep(engine, mcmc, scales, rng, tallies)
        return engine.state.copy(), tallies
    finally:
        engine.close()


def fit(
    X: ResponseMatrix,
    model: ModelConfig,
    mcmc: McmcConfig,
    *,
    initial: ParameterState | None = None,
) -> PosteriorDraws:
    """Run the full sampler and return the retained chain.

    Deterministic for a fixed seed; the worker count changes scheduling only,
    never results.
    """
    validate_for_linkage(X, model)
    rng = np.random.default_rng(mcmc.seed)
    state = initial.copy() if initial is not None else initial_state(X, model, rng)
    state.check_shapes(X, model)

    engine = PosteriorEngine(X, model, state, workers=mcmc.workers)
    try:
        return _fit_loop(engine, X, model, mcmc, rng)
    finally:
        engine.close()


def _fit_loop(
    engine: PosteriorEngine,
    X: ResponseMatrix,
    model: ModelConfig,
    mcmc: McmcConfig,
    rng: np.random.Generator,
) -> PosteriorDraws:
    if not math.isfinite(engine.total()):
        raise SamplerError(
            "log-posterior is not finite at the initial state; check the "
            "data and configuration"
        )

    n, p, d = X.n_persons, X.n_items, model.d
    n_keep = mcmc.retained_count
    person_pos = np.empty((n_keep, n, d))
    item_pos = np.empty((n_keep, p, d))
    person_int = np.empty((n_keep, n))
    item_int = np.empty((n_keep, p))
    sigma = np.empty(n_keep)
    logpost = np.empty(n_keep)

    scales = mcmc.scales
    window_tallies = {name: BlockTally() for name in _BLOCKS}
    phase_tallies = {
        phase: {name: BlockTally() for name in _BLOCKS}
        for phase in ("burn_in", "sampling")
    }

    kept = 0
    for it in range(1, mcmc.total_iterations + 1):
        in_burn = it <= mcmc.burn_in
        sweep_tallies = {name: BlockTally() for name in _BLOCKS}
        _run_sweep(engine, mcmc, scales, rng, sweep_tallies)
        phase = "burn_in" if in_burn else "sampling"
        for name in _BLOCKS:
            phase_tallies[phase][name].add(
                sweep_tallies[name].accepted, sweep_tallies[name].proposed
            )
            window_tallies[name].add(
                sweep_tallies[name].accepted, sweep_tallies[name].proposed
            )

        if in_burn and it % mcmc.adaptation.window == 0:
            scales = adapt_scales(window_tallies, scales, mcmc.adaptation)
            window_tallies = {name: BlockTally() for name in _BLOCKS}

        if mcmc.resync_every and it % mcmc.resync_every == 0:
            engine.resync()

        if not in_burn and (it - mcmc.burn_in) % mcmc.thinning == 0:
            person_pos[kept] = engine.person_positions()
            item_pos[kept] = engine.item_positions()
            person_int[kept] = engine.state.person_intercepts
            item_int[kept] = engine.state.item_intercepts
            sigma[kept] = engine.state.sigma_sq
            logpost[kept] = engine.total()
            kept += 1

        if mcmc.progress_every and it % mcmc.progress_every == 0:
            rates = "/".join(
                f"{phase_tallies[phase][name].rate():.2f}" for name in _BLOCKS
            )
            print(
                f"[nirm] iter {it}/{mcmc.total_iterations} "
                f"logpost {engine.total():.3f} accept({'/'.join(_BLOCKS)}) {rates}",
                file=sys.stderr,
                flush=True,
            )

    assert kept == n_keep
    acceptance = {
        name: {
            phase: phase_tallies[phase][name].rate() for phase in phase_tallies
        }
        for name in _BLOCKS
    }
    return PosteriorDraws(
        person_positions=person_pos,
        item_positions=item_pos,
        person_intercepts=person_int,
        item_intercepts=item_int,
        sigma_sq=sigma,
        log_posterior=logpost,
        acceptance=acceptance,
        final_scales=scales,
        config=model,
        mcmc=mcmc,
    )
