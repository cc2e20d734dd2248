"""Sampler determinism, retention bookkeeping, adaptation, and the Gibbs step."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nirm.model import (
    Linkage,
    ModelConfig,
    ModelError,
    ParameterState,
    PriorConfig,
)
from nirm.sampler import (
    AdaptationConfig,
    BlockTally,
    McmcConfig,
    ProposalScales,
    SamplerError,
    adapt_scales,
    fit,
    gibbs_update_variance,
    sweep,
)
from oracles import random_response_matrix, random_state

SMALL = McmcConfig(
    total_iterations=300, burn_in=100, thinning=4, seed=7, resync_every=100
)


@pytest.fixture(scope="module")
def tiny_data():
    rng = np.random.default_rng(2024)
    return random_response_matrix(rng, 12, 5, ensure_positive_columns=True)


def test_fit_deterministic_under_seed(tiny_data):
    config = ModelConfig(d=2)
    a = fit(tiny_data, config, SMALL)
    b = fit(tiny_data, config, SMALL)
    np.testing.assert_array_equal(a.person_positions, b.person_positions)
    np.testing.assert_array_equal(a.item_positions, b.item_positions)
    np.testing.assert_array_equal(a.person_intercepts, b.person_intercepts)
    np.testing.assert_array_equal(a.item_intercepts, b.item_intercepts)
    np.testing.assert_array_equal(a.sigma_sq, b.sigma_sq)
    np.testing.assert_array_equal(a.log_posterior, b.log_posterior)
    assert a.acceptance == b.acceptance

    c = fit(tiny_data, config, McmcConfig(**{**SMALL.__dict__, "seed": 8}))
    assert not np.array_equal(a.sigma_sq, c.sigma_sq)


def test_workers_do_not_change_results(tiny_data):
    config = ModelConfig(d=2)
    one = fit(tiny_data, config, SMALL)
    four = fit(tiny_data, config, McmcConfig(**{**SMALL.__dict__, "workers": 4}))
    np.testing.assert_array_equal(one.person_positions, four.person_positions)
    np.testing.assert_array_equal(one.log_posterior, four.log_posterior)


@given(
    total=st.integers(min_value=2, max_value=2000),
    burn=st.integers(min_value=0, max_value=1999),
    thin=st.integers(min_value=1, max_value=20),
)
def test_retained_count_formula(total, burn, thin):
    if burn >= total:
        burn = total - 1
    cfg = McmcConfig(total_iterations=total, burn_in=burn, thinning=thin)
    kept = sum(
        1
        for it in range(1, total + 1)
        if it > burn and (it - burn) % thin == 0
    )
    assert cfg.retained_count == kept == (total - burn) // thin


def test_fit_draw_count_and_invariants(tiny_data):
    config = ModelConfig(d=2, linkage=Linkage.PERSON_FROM_ITEM)
    cfg = McmcConfig(total_iterations=233, burn_in=77, thinning=3, seed=3)
    draws = fit(tiny_data, config, cfg)
    assert draws.count == (233 - 77) // 3
    assert (draws.sigma_sq > 0).all()
    assert np.isfinite(draws.log_posterior).all()
    assert draws.person_positions.shape == (draws.count, 12, 2)
    assert draws.item_positions.shape == (draws.count, 5, 2)
    # states accessor reconstructs the free side per linkage
    st0 = draws.states[0]
    np.testing.assert_array_equal(st0.free_positions, draws.item_positions[0])


def test_zero_scales_accept_everything(tiny_data):
    config = ModelConfig(d=2)
    cfg = McmcConfig(
        total_iterations=40,
        burn_in=10,
        thinning=1,
        scales=ProposalScales(0.0, 0.0, 0.0),
        seed=5,
        sample_sigma=False,
    )
    draws = fit(tiny_data, config, cfg)
    for block in ("position", "person_intercept", "item_intercept"):
        assert draws.acceptance[block]["sampling"] == 1.0
    # the chain never moves
    np.testing.assert_array_equal(draws.person_positions[0], draws.person_positions[-1])
    np.testing.assert_array_equal(draws.person_intercepts[0], draws.person_intercepts[-1])


def test_sweep_is_replayable(tiny_data):
    config = ModelConfig(d=2)
    state = random_state(np.random.default_rng(11), tiny_data, config)
    out1, tallies1 = sweep(
        state, tiny_data, config, ProposalScales(), np.random.default_rng(42)
    )
    out2, tallies2 = sweep(
        state, tiny_data, config, ProposalScales(), np.random.default_rng(42)
    )
    np.testing.assert_array_equal(out1.free_positions, out2.free_positions)
    assert tallies1["position"].accepted == tallies2["position"].accepted


def test_adapt_scales_rules():
    scales = ProposalScales(1.0, 1.0, 1.0)
    adaptation = AdaptationConfig()

    in_band = {name: BlockTally(30, 100) for name in ("position", "person_intercept", "item_intercept")}
    out = adapt_scales(in_band, scales, adaptation)
    assert out == scales

    cold = {name: BlockTally(5, 100) for name in ("position", "person_intercept", "item_intercept")}
    out = adapt_scales(cold, scales, adaptation)
    assert out.position == pytest.approx(0.8)

    hot = {name: BlockTally(50, 100) for name in ("position", "person_intercept", "item_intercept")}
    out = adapt_scales(hot, scales, adaptation)
    assert out.item_intercept == pytest.approx(1.25)


def test_scales_freeze_after_burn_in(tiny_data):
    config = ModelConfig(d=2)
    base = dict(burn_in=100, thinning=1, seed=9)
    short = fit(tiny_data, config, McmcConfig(total_iterations=120, **base))
    long = fit(tiny_data, config, McmcConfig(total_iterations=320, **base))
    assert short.final_scales == long.final_scales


def test_gibbs_zero_positions_draws_prior_conditional():
    config = ModelConfig(d=2, priors=PriorConfig(a_sigma=5.0, b_sigma=2.0))
    state = ParameterState(np.zeros((6, 2)), np.zeros(6), np.zeros(4), 1.0)
    rng = np.random.default_rng(0)
    draws = np.array([gibbs_update_variance(state, config, rng) for _ in range(20000)])
    assert (draws > 0).all()
    # Inverse-gamma mean: b / (a + m*d/2 - 1) at zero sum of squares
    want = 2.0 / (5.0 + 6.0 - 1.0)
    assert draws.mean() == pytest.approx(want, rel=0.05)


def test_gibbs_longrun_mean_with_positions():
    rng = np.random.default_rng(1)
    positions = rng.normal(0.0, 1.3, size=(8, 2))
    config = ModelConfig(d=2, priors=PriorConfig(a_sigma=3.0, b_sigma=1.0))
    state = ParameterState(positions, np.zeros(8), np.zeros(4), 1.0)
    ss = float(np.sum(positions**2))
    draws = np.array([gibbs_update_variance(state, config, rng) for _ in range(30000)])
    want = (1.0 + ss / 2.0) / (3.0 + 8.0 - 1.0)
    assert draws.mean() == pytest.approx(want, rel=0.05)


def test_nonfinite_initial_state_is_an_error(tiny_data):
    config = ModelConfig(d=2)
    bad = ParameterState(
        np.full((12, 2), np.inf), np.zeros(12), np.zeros(5), 1.0
    )
    with np.errstate(invalid="ignore"):
        with pytest.raises(SamplerError, match="not finite"):
            fit(tiny_data, config, SMALL, initial=bad)


def test_config_invariants():
    with pytest.raises(ModelError):
        McmcConfig(total_iterations=100, burn_in=100)
    with pytest.raises(ModelError):
        McmcConfig(total_iterations=100, burn_in=10, thinning=0)
    with pytest.raises(ModelError):
        ProposalScales(position=-0.1)


def test_stationarity_from_high_posterior_state(tiny_data):
    """Starting at a high-posterior state, sweeps should not decay monotonically."""
    config = ModelConfig(d=2)
    warm = fit(
        tiny_data,
        config,
        McmcConfig(total_iterations=800, burn_in=500, thinning=1, seed=13),
    )
    best = int(np.argmax(warm.log_posterior))
    start = warm.states[best]
    for seed in (101, 102, 103):
        run = fit(
            tiny_data,
            config,
            McmcConfig(
                total_iterations=100,
                burn_in=0,
                thinning=1,
                seed=seed,
                scales=warm.final_scales,
            ),
            initial=start,
        )
        trace = run.log_posterior
        first, last = trace[:50], trace[50:]
        assert last.mean() > first.mean() - 3.0 * trace.std()


def test_degenerate_variance_prior_shrinks_positions(tiny_data):
    diffuse = ModelConfig(d=2, priors=PriorConfig())
    pinched = ModelConfig(
        d=2, priors=PriorConfig(a_sigma=400.0, b_sigma=0.04)
    )  # prior mass near sigma_sq ~ 1e-4
    cfg = McmcConfig(total_iterations=600, burn_in=300, thinning=2, seed=21)
    wide = fit(tiny_data, diffuse, cfg)
    tight = fit(tiny_data, pinched, cfg)
    wide_norm = float(np.mean(np.sum(wide.person_positions**2, axis=(1, 2))))
    tight_norm = float(np.mean(np.sum(tight.person_positions**2, axis=(1, 2))))
    assert tight_norm < 0.5 * wide_norm
