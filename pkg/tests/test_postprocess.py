"""Alignment, principal-axes rotation, traces, and posterior summaries."""

import numpy as np
import pytest

from nirm.model import Linkage, ModelConfig
from nirm.postprocess import (
    effective_sample_size,
    pair_distance_trace,
    principal_axes_rotate,
    procrustes_align,
    summarize,
)
from nirm.sampler import McmcConfig, PosteriorDraws
from oracles import oracle_lag1_autocorr


def _random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def _synthetic_draws(rng, n=9, p=5, d=2, count=40, noise=0.0):
    """Draws that are rigid transforms (plus optional noise) of one shape."""
    base_person = rng.normal(size=(n, d))
    base_item = rng.normal(size=(p, d))
    person = np.empty((count, n, d))
    item = np.empty((count, p, d))
    for r in range(count):
        rot = _random_orthogonal(rng, d)
        if rng.random() < 0.5:
            rot = rot @ np.diag([1.0] * (d - 1) + [-1.0])
        shift = rng.normal(scale=3.0, size=d)
        person[r] = base_person @ rot + shift + rng.normal(scale=noise, size=(n, d))
        item[r] = base_item @ rot + shift + rng.normal(scale=noise, size=(p, d))
    return PosteriorDraws(
        person_positions=person,
        item_positions=item,
        person_intercepts=rng.normal(size=(count, n)),
        item_intercepts=rng.normal(size=(count, p)),
        sigma_sq=np.abs(rng.normal(size=count)) + 0.5,
        log_posterior=rng.normal(size=count),
        acceptance={"position": {"sampling": 0.3}},
        final_scales=None,
        config=ModelConfig(d=d, linkage=Linkage.ITEM_FROM_PERSON),
        mcmc=McmcConfig(total_iterations=count, burn_in=0, thinning=1),
    )


def _pair_dists(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt(np.einsum("abd,abd->ab", diff, diff))


# -- procrustes_align -----------------------------------------------------------


def test_rigid_transforms_are_fully_recovered():
    rng = np.random.default_rng(0)
    draws = _synthetic_draws(rng, count=60)
    aligned = procrustes_align(draws)
    assert float(aligned.residuals.max()) < 1e-8
    spread = aligned.person_positions.std(axis=0).max()
    assert spread < 1e-6  # all draws collapse onto one configuration


def test_alignment_preserves_within_draw_distances():
    rng = np.random.default_rng(1)
    draws = _synthetic_draws(rng, count=25, noise=0.15)
    aligned = procrustes_align(draws)
    for r in range(draws.count):
        np.testing.assert_allclose(
            _pair_dists(aligned.person_positions[r]),
            _pair_dists(draws.person_positions[r]),
            atol=1e-10,
        )
        np.testing.assert_allclose(
            _pair_dists(aligned.item_positions[r]),
            _pair_dists(draws.item_positions[r]),
            atol=1e-10,
        )


def test_single_draw_alignment_is_identity():
    rng = np.random.default_rng(2)
    draws = _synthetic_draws(rng, count=1)
    aligned = procrustes_align(draws)
    np.testing.assert_allclose(
        aligned.person_positions[0], draws.person_positions[0], atol=1e-12
    )
    assert aligned.residuals[0] == pytest.approx(0.0, abs=1e-18)


def test_mean_reference_pass_does_not_increase_total_residual():
    rng = np.random.default_rng(3)
    draws = _synthetic_draws(rng, count=30, noise=0.4)
    aligned = procrustes_align(draws)
    assert aligned.residuals.sum() <= aligned.residuals_first_pass.sum() + 1e-9


def test_identical_positions_fall_back_with_warning():
    rng = np.random.default_rng(4)
    draws = _synthetic_draws(rng, count=3)
    draws.person_positions[:] = 1.7  # every person at the same point
    with pytest.warns(UserWarning, match="rank-deficient"):
        aligned = procrustes_align(draws)
    assert aligned.count == 3


# -- principal_axes_rotate --------------------------------------------------------


def test_axis_aligned_cloud_is_unchanged():
    # exactly decorrelated, centered columns with var(x1) > var(x2)
    x = np.array(
        [
            [3.0, 0.0],
            [-3.0, 0.0],
            [2.0, 0.0],
            [-2.0, 0.0],
            [0.0, 1.0],
            [0.0, -1.0],
        ]
    )
    out = principal_axes_rotate(x)
    # agreement up to per-column sign
    for j in range(2):
        col = out[:, j]
        assert np.allclose(col, x[:, j], atol=1e-10) or np.allclose(
            col, -x[:, j], atol=1e-10
        )


def test_rotation_preserves_distances():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(15, 3))
    out = principal_axes_rotate(x)
    np.testing.assert_allclose(_pair_dists(out), _pair_dists(x), atol=1e-10)


def test_output_covariance_diagonal_and_sorted():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(50, 3)) @ rng.normal(size=(3, 3))
    out = principal_axes_rotate(x)
    cov = out.T @ out
    off = cov - np.diag(np.diag(cov))
    assert np.abs(off).max() < 1e-10 * max(1.0, np.abs(cov).max())
    variances = np.diag(cov)
    assert np.all(np.diff(variances) <= 1e-9)
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)


def test_repeated_eigenvalues_warn():
    x = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    with pytest.warns(UserWarning, match="repeated eigenvalues"):
        principal_axes_rotate(x)


def test_too_few_rows_rejected():
    with pytest.raises(ValueError, match="at least"):
        principal_axes_rotate(np.zeros((1, 2)))


# -- pair_distance_trace ------------------------------------------------------------


def test_self_pair_trace_is_zero():
    rng = np.random.default_rng(8)
    draws = _synthetic_draws(rng, count=12)
    out = pair_distance_trace(draws, [(2, 2)], space="person")
    np.testing.assert_array_equal(out[(2, 2)]["series"], np.zeros(12))


def test_trace_invariant_to_alignment():
    rng = np.random.default_rng(9)
    draws = _synthetic_draws(rng, count=15, noise=0.2)
    before = pair_distance_trace(draws, [(0, 3)], space="item")[(0, 3)]["series"]
    aligned = procrustes_align(draws)
    aligned_draws = PosteriorDraws(
        person_positions=aligned.person_positions,
        item_positions=aligned.item_positions,
        person_intercepts=draws.person_intercepts,
        item_intercepts=draws.item_intercepts,
        sigma_sq=draws.sigma_sq,
        log_posterior=draws.log_posterior,
        acceptance=draws.acceptance,
        final_scales=None,
        config=draws.config,
        mcmc=draws.mcmc,
    )
    after = pair_distance_trace(aligned_draws, [(0, 3)], space="item")[(0, 3)]["series"]
    np.testing.assert_allclose(before, after, atol=1e-9)


def test_trace_autocorr_matches_oracle():
    rng = np.random.default_rng(10)
    draws = _synthetic_draws(rng, count=50, noise=0.3)
    out = pair_distance_trace(draws, [(1, 4)], space="person")[(1, 4)]
    assert out["lag1_autocorr"] == pytest.approx(
        oracle_lag1_autocorr(out["series"]), abs=1e-12
    )


def test_trace_bounds_checked():
    rng = np.random.default_rng(11)
    draws = _synthetic_draws(rng, count=5)
    with pytest.raises(IndexError):
        pair_distance_trace(draws, [(0, 99)], space="person")


# -- effective_sample_size ------------------------------------------------------------


def test_ess_constant_chain_is_full_length():
    assert effective_sample_size(np.full(500, 3.3)) == 500.0


def test_ess_iid_chain_near_full_length():
    rng = np.random.default_rng(12)
    chain = rng.normal(size=4000)
    ess = effective_sample_size(chain)
    assert ess > 2500


def test_ess_sticky_chain_is_small():
    rng = np.random.default_rng(13)
    chain = np.empty(4000)
    chain[0] = 0.0
    for t in range(1, 4000):
        chain[t] = 0.98 * chain[t - 1] + rng.normal(scale=0.1)
    ess = effective_sample_size(chain)
    assert ess < 800


# -- summarize ----------------------------------------------------------------------


def _sorted_chain_quantile(chain, q):
    """Order-statistic quantile with linear interpolation (independent path)."""
    s = np.sort(chain)
    pos = q * (len(s) - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return s[lo] * (1 - frac) + s[hi] * frac


def test_summary_quantiles_match_sorted_oracle():
    rng = np.random.default_rng(14)
    draws = _synthetic_draws(rng, count=200)
    summary = summarize(draws)
    chain = draws.person_intercepts[:, 3]
    assert summary.person_intercepts.q05[3] == pytest.approx(
        _sorted_chain_quantile(chain, 0.05), abs=1e-12
    )
    assert summary.person_intercepts.q95[3] == pytest.approx(
        _sorted_chain_quantile(chain, 0.95), abs=1e-12
    )
    assert summary.person_intercepts.median[3] == pytest.approx(
        np.median(chain), abs=1e-12
    )
    assert np.all(summary.person_intercepts.q05 <= summary.person_intercepts.median)
    assert np.all(summary.person_intercepts.median <= summary.person_intercepts.q95)


def test_summary_constant_chain():
    rng = np.random.default_rng(15)
    draws = _synthetic_draws(rng, count=40)
    draws.item_intercepts[:, 2] = 1.25
    summary = summarize(draws)
    t = summary.item_intercepts
    assert t.mean[2] == t.median[2] == t.q05[2] == t.q95[2] == 1.25
    assert t.ess[2] == 40.0


def test_summary_distance_matrices_are_metric():
    rng = np.random.default_rng(16)
    draws = _synthetic_draws(rng, count=30, noise=0.2)
    summary = summarize(draws)
    for dist in (summary.person_distances, summary.item_distances):
        np.testing.assert_allclose(dist, dist.T, atol=1e-12)
        np.testing.assert_allclose(np.diag(dist), 0.0, atol=1e-12)
        m = dist.shape[0]
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    assert dist[a, c] <= dist[a, b] + dist[b, c] + 1e-9


def test_summary_exported_distances_match_rotated_coordinates():
    rng = np.random.default_rng(17)
    draws = _synthetic_draws(rng, count=30, noise=0.1)
    summary = summarize(draws)
    np.testing.assert_allclose(
        _pair_dists(summary.item_positions), summary.item_distances, atol=1e-10
    )


def test_summary_few_draws_degrades_to_min_max():
    rng = np.random.default_rng(18)
    draws = _synthetic_draws(rng, count=6)
    with pytest.warns(UserWarning, match="retained draws"):
        summary = summarize(draws)
    assert summary.quantiles_degraded
    chain = draws.person_intercepts[:, 0]
    assert summary.person_intercepts.q05[0] == chain.min()
    assert summary.person_intercepts.q95[0] == chain.max()


def test_summary_person_permutation_equivariance():
    rng = np.random.default_rng(19)
    draws = _synthetic_draws(rng, count=25)
    perm = rng.permutation(draws.person_positions.shape[1])
    permuted = PosteriorDraws(
        person_positions=draws.person_positions[:, perm, :],
        item_positions=draws.item_positions,
        person_intercepts=draws.person_intercepts[:, perm],
        item_intercepts=draws.item_intercepts,
        sigma_sq=draws.sigma_sq,
        log_posterior=draws.log_posterior,
        acceptance=draws.acceptance,
        final_scales=None,
        config=draws.config,
        mcmc=draws.mcmc,
    )
    base = summarize(draws)
    alt = summarize(permuted)
    np.testing.assert_allclose(
        alt.person_intercepts.mean, base.person_intercepts.mean[perm], atol=1e-12
    )
    np.testing.assert_allclose(
        alt.person_positions, base.person_positions[perm], atol=1e-9
    )
    np.testing.assert_allclose(
        alt.person_distances, base.person_distances[np.ix_(perm, perm)], atol=1e-9
    )
