"""Incremental-evaluation consistency: caches must track exact recomputation."""

import numpy as np
import pytest

from nirm.data import Encoding
from nirm.engine import PosteriorEngine, log1p_exp
from nirm.model import Linkage, ModelConfig, log_posterior
from oracles import random_response_matrix, random_state

ALL_CONFIGS = [
    ModelConfig(d=2, encoding=enc, linkage=lk)
    for enc in (Encoding.POSITIVE_CONCORDANT, Encoding.ALL_CONCORDANT)
    for lk in (Linkage.ITEM_FROM_PERSON, Linkage.PERSON_FROM_ITEM)
]


def test_log1p_exp_matches_logaddexp():
    x = np.linspace(-800, 800, 4001)
    np.testing.assert_allclose(log1p_exp(x), np.logaddexp(0.0, x), rtol=1e-14)
    assert np.isfinite(log1p_exp(x)).all()


def _drive_engine(engine, rng, sweeps):
    """Random accept-all walk through every move type the sampler uses."""
    state = engine.state
    m, d = state.free_positions.shape
    for _ in range(sweeps):
        for r in range(m):
            step = rng.normal(0.0, 0.4, size=d)
            engine.position_delta(r, state.free_positions[r] + step)
            if rng.random() < 0.7:
                engine.commit_position()
        proposal = state.person_intercepts + rng.normal(0.0, 0.5, state.person_intercepts.size)
        engine.person_intercept_deltas(proposal)
        engine.commit_person_intercepts(rng.random(proposal.size) < 0.6, proposal)
        proposal = state.item_intercepts + rng.normal(0.0, 0.5, state.item_intercepts.size)
        engine.item_intercept_deltas(proposal)
        engine.commit_item_intercepts(rng.random(proposal.size) < 0.6, proposal)
        engine.set_sigma_sq(float(rng.uniform(0.2, 3.0)))


@pytest.mark.parametrize("config", ALL_CONFIGS, ids=str)
@pytest.mark.parametrize("missing_rate", [0.0, 0.3])
def test_caches_track_exact_recompute_after_many_moves(config, missing_rate):
    rng = np.random.default_rng(31)
    X = random_response_matrix(
        rng, 7, 5, missing_rate=missing_rate, ensure_positive_columns=True
    )
    state = random_state(rng, X, config)
    engine = PosteriorEngine(X, config, state)
    _drive_engine(engine, rng, sweeps=12)

    fresh = log_posterior(X, engine.state, config)
    assert engine.ll_y == pytest.approx(fresh.log_likelihood_y, abs=1e-9)
    assert engine.ll_u == pytest.approx(fresh.log_likelihood_u, abs=1e-9)
    assert engine.total() == pytest.approx(fresh.total, abs=1e-9)

    # Derived caches agree with a from-scratch rebuild too.
    P, Q = engine.P.copy(), engine.Q.copy()
    engine.resync()
    np.testing.assert_allclose(P, engine.P, atol=1e-12)
    np.testing.assert_allclose(Q, engine.Q, atol=1e-12)


@pytest.mark.parametrize("config", ALL_CONFIGS[:2], ids=str)
def test_delta_then_commit_equals_fresh_engine(config):
    rng = np.random.default_rng(55)
    X = random_response_matrix(rng, 6, 4, ensure_positive_columns=True)
    state = random_state(rng, X, config)
    engine = PosteriorEngine(X, config, state)
    before = engine.total()
    delta = engine.position_delta(1, state.free_positions[1] + np.array([0.3, -0.8]))
    engine.commit_position()
    fresh = log_posterior(X, engine.state, config).total
    assert before + delta == pytest.approx(fresh, abs=1e-10)


def test_workers_bitwise_identical():
    rng = np.random.default_rng(63)
    X = random_response_matrix(rng, 12, 6, ensure_positive_columns=True)
    config = ModelConfig(d=2)
    state = random_state(rng, X, config)

    eng1 = PosteriorEngine(X, config, state, workers=1)
    eng4 = PosteriorEngine(X, config, state, workers=4)
    assert eng1.ll_y == eng4.ll_y
    assert eng1.ll_u == eng4.ll_u

    new_row = state.free_positions[3] + np.array([0.5, 0.1])
    assert eng1.position_delta(3, new_row) == eng4.position_delta(3, new_row)
    eng1.commit_position()
    eng4.commit_position()
    proposal = state.person_intercepts + 0.25
    np.testing.assert_array_equal(
        eng1.person_intercept_deltas(proposal), eng4.person_intercept_deltas(proposal)
    )
    assert eng1.ll_y == eng4.ll_y and eng1.ll_u == eng4.ll_u
    eng1.close()
    eng4.close()


def test_workers_bitwise_identical_with_multichunk_grids():
    # large enough that the lse grids split into several chunks
    rng = np.random.default_rng(64)
    X = random_response_matrix(rng, 120, 20, ensure_positive_columns=True)
    config = ModelConfig(d=2, linkage=Linkage.PERSON_FROM_ITEM)
    state = random_state(rng, X, config)
    eng1 = PosteriorEngine(X, config, state, workers=1)
    eng4 = PosteriorEngine(X, config, state, workers=4)
    assert eng1.runner.chunks(eng1.n_ppairs, X.n_items).__len__() > 1
    assert eng1.ll_y == eng4.ll_y and eng1.ll_u == eng4.ll_u
    np.testing.assert_array_equal(eng1.Yval, eng4.Yval)

    new_row = state.free_positions[5] + np.array([0.4, -0.2])
    assert eng1.position_delta(5, new_row) == eng4.position_delta(5, new_row)
    proposal = state.item_intercepts + 0.3
    np.testing.assert_array_equal(
        eng1.item_intercept_deltas(proposal), eng4.item_intercept_deltas(proposal)
    )
    eng1.close()
    eng4.close()


def test_rejected_proposal_leaves_engine_unchanged():
    rng = np.random.default_rng(70)
    X = random_response_matrix(rng, 6, 4, ensure_positive_columns=True)
    config = ModelConfig(d=2)
    state = random_state(rng, X, config)
    engine = PosteriorEngine(X, config, state)
    before_total = engine.total()
    before_pos = engine.state.free_positions.copy()
    engine.position_delta(0, state.free_positions[0] + 1.0)  # never committed
    assert engine.total() == before_total
    np.testing.assert_array_equal(engine.state.free_positions, before_pos)
