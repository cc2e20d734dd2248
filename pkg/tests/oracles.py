"""Brute-force reference implementations used as independent test oracles.

Everything here favors explicit loops and third-party density functions over
the package's own vectorized paths, so agreement is evidence rather than
tautology.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from nirm.data import MISSING, NetworkAxis, ResponseMatrix, materialize_network
from nirm.model import Linkage, ModelConfig, ParameterState


def oracle_derive(
    state: ParameterState, X: ResponseMatrix, config: ModelConfig
) -> np.ndarray:
    """Derived positions by direct per-row averaging loops."""
    n, p, d = X.n_persons, X.n_items, config.d
    vals = X.values
    if config.linkage is Linkage.ITEM_FROM_PERSON:
        Z = state.free_positions
        W = np.zeros((p, d))
        for i in range(p):
            num = np.zeros(d)
            den = 0.0
            for k in range(n):
                if vals[k, i] == 1:
                    num += Z[k]
                    den += 1.0
            W[i] = num / den
        return W
    W = state.free_positions
    Z = np.zeros((n, d))
    for k in range(n):
        num = np.zeros(d)
        den = config.epsilon
        for i in range(p):
            if vals[k, i] == 1:
                num += W[i]
                den += 1.0
        Z[k] = num / den
    return Z


def oracle_log_posterior(
    X: ResponseMatrix, state: ParameterState, config: ModelConfig
) -> tuple[float, float, float]:
    """(ll_y, ll_u, log_prior) via fully materialized networks and scipy."""
    n, p = X.n_persons, X.n_items
    if config.linkage is Linkage.ITEM_FROM_PERSON:
        Z = state.free_positions
        W = oracle_derive(state, X, config)
    else:
        W = state.free_positions
        Z = oracle_derive(state, X, config)
    beta = state.item_intercepts
    theta = state.person_intercepts

    ll_y = 0.0
    for i in range(p):
        net = materialize_network(X, NetworkAxis.PER_ITEM, i, config.encoding)
        for k in range(n):
            for l in range(k + 1, n):
                e = net.edges[k, l]
                if e == MISSING:
                    continue
                eta = beta[i] - np.linalg.norm(Z[k] - Z[l])
                ll_y += e * eta - np.logaddexp(0.0, eta)

    ll_u = 0.0
    for k in range(n):
        net = materialize_network(X, NetworkAxis.PER_PERSON, k, config.encoding)
        for i in range(p):
            for j in range(i + 1, p):
                e = net.edges[i, j]
                if e == MISSING:
                    continue
                eta = theta[k] - np.linalg.norm(W[i] - W[j])
                ll_u += e * eta - np.logaddexp(0.0, eta)

    pr = config.priors
    lp = stats.norm.logpdf(theta, 0.0, np.sqrt(pr.sigma_theta_sq)).sum()
    lp += stats.norm.logpdf(beta, 0.0, np.sqrt(pr.sigma_beta_sq)).sum()
    lp += stats.norm.logpdf(
        state.free_positions, 0.0, np.sqrt(state.sigma_sq)
    ).sum()
    lp += stats.invgamma.logpdf(state.sigma_sq, pr.a_sigma, scale=pr.b_sigma)
    return float(ll_y), float(ll_u), float(lp)


def oracle_pattern_tally(values: np.ndarray, items: list[int]) -> dict[str, int]:
    """Pattern counts over fully observed rows, by direct iteration."""
    counts: dict[str, int] = {}
    for row in values:
        sub = [row[i] for i in items]
        if any(v == MISSING for v in sub):
            continue
        key = "".join(str(int(v)) for v in sub)
        counts[key] = counts.get(key, 0) + 1
    return counts


def oracle_lag1_autocorr(series: np.ndarray) -> float:
    x = np.asarray(series, dtype=float)
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0.0:
        return 1.0
    return float(np.dot(xc[:-1], xc[1:]) / denom)


def random_response_matrix(
    rng: np.random.Generator,
    n: int,
    p: int,
    *,
    missing_rate: float = 0.0,
    ensure_positive_columns: bool = False,
) -> ResponseMatrix:
    """Random ternary response grid for cross-check tests."""
    vals = rng.integers(0, 2, size=(n, p)).astype(np.int8)
    if missing_rate > 0:
        mask = rng.random((n, p)) < missing_rate
        vals[mask] = MISSING
    if ensure_positive_columns:
        for i in range(p):
            if not (vals[:, i] == 1).any():
                vals[rng.integers(0, n), i] = 1
    return ResponseMatrix(
        vals,
        tuple(f"p{k}" for k in range(n)),
        tuple(f"i{i}" for i in range(p)),
    )


def random_state(
    rng: np.random.Generator, X: ResponseMatrix, config: ModelConfig
) -> ParameterState:
    m = config.free_count(X)
    return ParameterState(
        free_positions=rng.normal(0.0, 1.0, size=(m, config.d)),
        person_intercepts=rng.normal(0.0, 1.0, size=X.n_persons),
        item_intercepts=rng.normal(0.0, 1.0, size=X.n_items),
        sigma_sq=float(rng.uniform(0.3, 2.5)),
    )
