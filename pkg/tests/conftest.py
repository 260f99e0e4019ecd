from __future__ import annotations

import numpy as np
import pytest

from nedspec import MatrixSequence, Window, builtin_example

OMEGA, A = 1.0, 0.1


def random_table(seed: int, N: int, k_min: int = -80, k_max: int = 80, lo: float = 0.3, hi: float = 3.0):
    """Bounded invertible table: orthogonal @ diag(sv) @ orthogonal, sv in [lo, hi]."""
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(k_max - k_min + 1):
        q1 = np.linalg.qr(rng.standard_normal((N, N)))[0]
        q2 = np.linalg.qr(rng.standard_normal((N, N)))[0]
        mats.append(q1 @ np.diag(rng.uniform(lo, hi, N)) @ q2)
    return MatrixSequence.from_table(mats, k_min=k_min)


def log_phi11(k, l, omega=OMEGA, a=A):
    """Closed form of log Phi_11(k, l) for the oscillating example, k >= l.

    Derived by telescoping the rate c_j = -omega + a j (-1)^j - a (j-1)(-1)^(j-1).
    """
    sgn = lambda n: 1 - 2 * (np.asarray(n) % 2)
    return -omega * (k - l) + a * (k - 1) * sgn(k - 1) + a * (l - 1) * sgn(l)


def printed_log_phi11(k, l, omega=OMEGA, a=A):
    """The closed form as printed for the same entry."""
    sgn = lambda n: 1 - 2 * (np.asarray(n) % 2)
    return -omega * (k - l - 1) - a * (k - l - 1) * sgn(k - 1) - a * l * sgn(k - 1) + a * l * sgn(l)


@pytest.fixture
def paper_2d():
    return builtin_example("paper_2d", [OMEGA, A])


@pytest.fixture
def paper_scalar():
    return builtin_example("paper_scalar", [OMEGA, A])


@pytest.fixture
def diag2():
    return builtin_example("constant_diag", [2.0, 0.5])


@pytest.fixture
def upper2():
    return MatrixSequence.constant([[2.0, 1.0], [0.0, 0.5]])


@pytest.fixture
def w30():
    return Window(-30, 30)
