"""Bundled sample data.

LSAT section 6: 1000 test takers by 5 binary items, a classic public-domain
benchmark that ships as a response-pattern frequency table (Bock & Lieberman,
1970).  Expanding the table row by row reproduces the full matrix; classical
proportions correct are .924, .709, .553, .763, .870.
"""

from __future__ import annotations

import numpy as np

from .data import ResponseMatrix

__all__ = ["lsat6", "LSAT6_PATTERN_FREQUENCIES"]

LSAT6_PATTERN_FREQUENCIES: tuple[tuple[str, int], ...] = (
    ("00000", 3),
    ("00001", 6),
    ("00010", 2),
    ("00011", 11),
    ("00100", 1),
    ("00101", 1),
    ("00110", 3),
    ("00111", 4),
    ("01000", 1),
    ("01001", 8),
    ("01010", 0),
    ("01011", 16),
    ("01100", 0),
    ("01101", 3),
    ("01110", 2),
    ("01111", 15),
    ("10000", 10),
    ("10001", 29),
    ("10010", 14),
    ("10011", 81),
    ("10100", 3),
    ("10101", 28),
    ("10110", 15),
    ("10111", 80),
    ("11000", 16),
    ("11001", 56),
    ("11010", 21),
    ("11011", 173),
    ("11100", 11),
    ("11101", 61),
    ("11110", 28),
    ("11111", 298),
)


def lsat6(subsample: int | None = None, seed: int = 0) -> ResponseMatrix:
    """The LSAT6 response matrix, optionally subsampled without replacement.

    Rows follow the canonical pattern order, so the full matrix is identical
    across calls; subsampling is deterministic in the seed.
    """
    rows = []
    for pattern, freq in LSAT6_PATTERN_FREQUENCIES:
        bits = [int(c) for c in pattern]
        rows.extend([bits] * freq)
    values = np.array(rows, dtype=np.int8)
    assert values.shape == (1000, 5)
    if subsample is not None:
        if not 2 <= subsample <= 1000:
            raise ValueError("subsample must be between 2 and 1000")
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(1000, size=subsample, replace=False))
        values = values[keep]
        person_ids = tuple(f"p{k + 1}" for k in keep)
    else:
        person_ids = tuple(f"p{k + 1}" for k in range(1000))
    return ResponseMatrix(
        values, person_ids, ("item1", "item2", "item3", "item4", "item5")
    )
