from __future__ import annotations

import numpy as np
import pytest

from spmvkit import canonicalize

# The 4x4 running example used across the format golden tests:
#   [[0, 6, 1, 0],
#    [2, 0, 8, 3],
#    [0, 0, 4, 0],
#    [0, 7, 5, 0]]
DEMO_ENTRIES = [
    (0, 1, 6.0),
    (0, 2, 1.0),
    (1, 0, 2.0),
    (1, 2, 8.0),
    (1, 3, 3.0),
    (2, 2, 4.0),
    (3, 1, 7.0),
    (3, 2, 5.0),
]


@pytest.fixture
def demo4x4():
    rows, cols, vals = zip(*DEMO_ENTRIES)
    return canonicalize(rows, cols, vals, 4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
