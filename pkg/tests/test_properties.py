from __future__ import annotations

import math

import numpy as np
from conftest import random_table
from hypothesis import given, settings
from hypothesis import strategies as st

from nedspec import (
    DichotomyCertificate,
    MatrixSequence,
    Window,
    evolution,
    interval_hausdorff,
    propagate_projector,
    spectral_projector,
    split_gram,
    verify_certificate,
    weighted_evolution,
)
from nedspec.spectrum import BundleBasis, intersect_subspaces

seeds = st.integers(0, 2**31 - 1)
dims = st.integers(1, 3)
idx = st.integers(-10, 10)
FAST = settings(max_examples=40, deadline=None)


@FAST
@given(seeds, dims, idx, idx, idx)
def test_cocycle_identity(seed, N, k, m, l):
    sys = random_table(seed, N, -12, 12)
    lhs = evolution(sys, k, m) @ evolution(sys, m, l)
    rhs = evolution(sys, k, l)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(rhs), np.linalg.norm(lhs))


@FAST
@given(seeds, dims, idx, idx, st.floats(0.1, 10.0))
def test_weighted_scaling_law(seed, N, k, l, gamma):
    sys = random_table(seed, N, -12, 12)
    want = gamma ** (l - k) * evolution(sys, k, l)
    got = weighted_evolution(sys, gamma, k, l)
    assert np.linalg.norm(got - want) <= 1e-12 * np.linalg.norm(want)


@FAST
@given(seeds, st.integers(2, 3), idx)
def test_propagated_projector_invariance_and_rank(seed, N, l_ref):
    rng = np.random.default_rng(seed)
    sys = random_table(seed, N, -12, 12)
    X = np.linalg.qr(rng.standard_normal((N, N)))[0] + 0.3 * rng.standard_normal((N, N))
    r = int(rng.integers(0, N + 1))
    P = X @ np.diag([1.0] * r + [0.0] * (N - r)) @ np.linalg.inv(X)
    w = Window(-8, 8)
    proj = propagate_projector(sys, P, l_ref, w)
    assert set(proj.ranks().tolist()) == {r}
    Ps = proj.projectors()
    A = sys.matrices(-8, 7)
    for i in range(16):
        res = np.linalg.norm(Ps[i + 1] @ A[i] - A[i] @ Ps[i])
        assert res <= 1e-10 * np.linalg.norm(A[i]) * max(1.0, np.linalg.norm(Ps[i]), np.linalg.norm(Ps[i + 1]))


@FAST
@given(seeds, st.floats(1.0, 5.0))
def test_flavor_monotonicity(seed, eps):
    sys = random_table(seed, 2, -12, 12)
    w = Window(-6, 6)
    proj = spectral_projector(sys, 1, w, 4)
    cert = DichotomyCertificate(proj, 50.0, 0.95, 1.0, "uniform_ED")
    if verify_certificate(sys, cert, w).passed:
        looser = DichotomyCertificate(proj, 50.0, 0.95, eps, "NED")
        assert verify_certificate(sys, looser, w).passed


@FAST
@given(st.floats(1.0, 3.0), st.floats(1.0, 1e3))
def test_verification_is_monotone_in_K(K, factor):
    sys = MatrixSequence.constant(np.diag([0.5, 2.0]))
    w = Window(-5, 5)
    proj = propagate_projector(sys, np.diag([1.0, 0.0]), 0, w)
    base = verify_certificate(sys, DichotomyCertificate(proj, K, 0.5, 1.0, "uniform_ED"), w)
    bigger = verify_certificate(sys, DichotomyCertificate(proj, K * factor, 0.5, 1.0, "uniform_ED"), w)
    assert base.passed and bigger.passed
    assert bigger.max_stable_excess <= base.max_stable_excess + 1e-12


@FAST
@given(seeds, st.integers(2, 5))
def test_split_gram_properties(seed, N):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, N)) + 0.5 * np.eye(N)
    if np.linalg.cond(X) > 1e6:
        return
    r = int(rng.integers(1, N))
    S, R = split_gram(X, r)
    P = np.diag([1.0] * r + [0.0] * (N - r))
    G = X.T @ X
    Rt = P @ G @ P + (np.eye(N) - P) @ G @ (np.eye(N) - P)
    assert np.linalg.norm(R @ R - Rt) <= 1e-9 * np.linalg.norm(Rt)
    assert np.linalg.norm(P @ R - R @ P) <= 1e-10 * np.linalg.norm(R)
    assert np.linalg.eigvalsh(R).min() > 0
    assert np.linalg.norm(S, 2) <= math.sqrt(2) + 1e-9
    assert np.linalg.norm(S @ R - X) <= 1e-9 * np.linalg.norm(X)


@FAST
@given(seeds, st.integers(2, 6), st.integers(1, 3), st.integers(1, 3))
def test_intersection_is_symmetric_and_contained(seed, N, d1, d2):
    rng = np.random.default_rng(seed)
    d1, d2 = min(d1, N), min(d2, N)
    B1 = BundleBasis(0, np.linalg.qr(rng.standard_normal((N, d1)))[0])
    B2 = BundleBasis(0, np.linalg.qr(rng.standard_normal((N, d2)))[0])
    a, b = intersect_subspaces(B1, B2), intersect_subspaces(B2, B1)
    assert a.dim == b.dim == max(0, d1 + d2 - N)
    if a.dim:
        assert np.linalg.norm(B1.projector() @ a.basis - a.basis) <= 1e-8
        assert np.linalg.norm(B2.projector() @ a.basis - a.basis) <= 1e-8


intervals = st.lists(st.tuples(st.floats(0.01, 100.0), st.floats(1.0, 3.0)), min_size=1, max_size=3).map(
    lambda xs: [(a, a * f) for a, f in xs]
)


@settings(max_examples=100, deadline=None)
@given(intervals, intervals, intervals)
def test_hausdorff_is_a_metric_on_interval_families(A, B, C):
    assert interval_hausdorff(A, A) == 0.0
    ab, ba = interval_hausdorff(A, B), interval_hausdorff(B, A)
    assert abs(ab - ba) <= 1e-12
    assert interval_hausdorff(A, C) <= ab + interval_hausdorff(B, C) + 1e-9
