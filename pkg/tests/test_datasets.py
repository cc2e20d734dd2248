"""Bundled LSAT6 data integrity."""

import numpy as np

from nirm.datasets import LSAT6_PATTERN_FREQUENCIES, lsat6


def test_lsat6_shape_and_totals():
    X = lsat6()
    assert X.n_persons == 1000
    assert X.n_items == 5
    assert sum(f for _, f in LSAT6_PATTERN_FREQUENCIES) == 1000
    assert not X.has_missing


def test_lsat6_classical_difficulties():
    X = lsat6()
    p_hat = (X.values == 1).mean(axis=0)
    np.testing.assert_allclose(p_hat, [0.924, 0.709, 0.553, 0.763, 0.870], atol=1e-12)


def test_lsat6_subsample_deterministic():
    a = lsat6(subsample=300, seed=4)
    b = lsat6(subsample=300, seed=4)
    c = lsat6(subsample=300, seed=5)
    assert a.person_ids == b.person_ids
    assert np.array_equal(a.values, b.values)
    assert a.person_ids != c.person_ids
    assert a.n_persons == 300
