from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import log_phi11
from scipy.linalg import sqrtm

from nedspec import (
    BlockSystem,
    MatrixSequence,
    SimilarityTransform,
    Window,
    block_diagonalize,
    estimate_spectrum,
    evolution,
    full_reduction,
    lyapunov_split,
    normalize_projector,
    propagate_projector,
    spectral_projector,
    spectrum_invariance_check,
    split_gram,
    verify_weak_similarity,
)
from nedspec.errors import CertificateMissing, CutPointNotResolvent, IndefiniteGram, RankDegenerate

P1 = np.diag([1.0, 0.0])


def off_block(B, r):
    return max(np.linalg.norm(B[..., :r, r:]), np.linalg.norm(B[..., r:, :r]))


def test_normalize_already_diagonal(paper_2d, w30):
    fr = normalize_projector(paper_2d, propagate_projector(paper_2d, P1, 0, w30), 0)
    np.testing.assert_allclose(np.abs(fr.T), np.eye(2), atol=1e-14)
    for k in (-5, 0, 4, 12):
        np.testing.assert_allclose(np.abs(fr.X(k)), np.abs(evolution(paper_2d, k, 0)), rtol=1e-12)
    np.testing.assert_allclose(fr.X(0), fr.T_inv, atol=1e-15)


def test_normalize_oblique_projector():
    sys = MatrixSequence.constant([[2.0, 0.0], [0.0, 0.5]])
    P = np.array([[1.0, 1.0], [0.0, 0.0]])
    fr = normalize_projector(sys, propagate_projector(sys, P, 0, Window(-3, 3)), 0)
    assert np.linalg.norm(fr.T @ P @ fr.T_inv - P1) <= 1e-12
    # range span{(1,0)}, kernel span{(-1,1)}
    assert abs(abs(fr.T_inv[:, 0] @ np.array([1.0, 0.0])) - 1) <= 1e-12
    assert abs(abs(fr.T_inv[:, 1] @ np.array([-1.0, 1.0])) / math.sqrt(2) - 1) <= 1e-12


def test_normalize_rank_degenerate(paper_2d, w30):
    with pytest.raises(RankDegenerate):
        normalize_projector(paper_2d, propagate_projector(paper_2d, np.zeros((2, 2)), 0, w30))


def test_split_gram_identity_and_orthogonal():
    S, R = split_gram(np.eye(2), 1)
    np.testing.assert_allclose(S, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(R, np.eye(2), atol=1e-15)
    Q = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)))[0]
    S, R = split_gram(Q, 1)
    np.testing.assert_allclose(R, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(S, Q, atol=1e-12)


def test_split_gram_against_sqrtm():
    rng = np.random.default_rng(5)
    P = np.diag([1.0, 1.0, 0.0, 0.0])
    for _ in range(10):
        X = rng.standard_normal((4, 4))
        S, R = split_gram(X, 2)
        G = X.T @ X
        Rt = P @ G @ P + (np.eye(4) - P) @ G @ (np.eye(4) - P)
        np.testing.assert_allclose(R, np.real(sqrtm(Rt)), atol=1e-9 * np.linalg.norm(R))
        assert np.linalg.norm(S, 2) <= math.sqrt(2) + 1e-9


def test_split_gram_singular():
    with pytest.raises(IndefiniteGram):
        split_gram(np.array([[1.0, 0.0], [0.0, 0.0]]), 1)


def test_lyapunov_split_paper_2d(paper_2d, w30):
    fr = normalize_projector(paper_2d, propagate_projector(paper_2d, P1, 0, w30), 0)
    S, R = lyapunov_split(fr, 4)
    phi = evolution(paper_2d, 4, 0)
    np.testing.assert_allclose(R, np.diag(np.abs(np.diag(phi))), rtol=1e-12)
    assert R[0, 0] == pytest.approx(math.exp(log_phi11(4, 0)), rel=1e-12)
    np.testing.assert_allclose(np.abs(S), np.eye(2), atol=1e-12)


def test_lyapunov_split_properties_random_frame():
    rng = np.random.default_rng(8)
    mats = [np.linalg.qr(rng.standard_normal((3, 3)))[0] @ np.diag(rng.uniform(0.4, 2.5, 3)) for _ in range(21)]
    sys = MatrixSequence.from_table(mats, k_min=-10)
    w = Window(-8, 8)
    proj = spectral_projector(sys, 1, w, 2)
    fr = normalize_projector(sys, proj)
    for k in (-8, -3, 0, 5, 8):
        S, R = lyapunov_split(fr, k)
        X = fr.X(k)
        assert np.linalg.norm(S @ R - X) <= 1e-9 * np.linalg.norm(X)
        assert np.linalg.norm(R - R.T) <= 1e-10 * np.linalg.norm(R)
        assert np.linalg.norm(fr.P_tilde @ R - R @ fr.P_tilde) <= 1e-10 * np.linalg.norm(R)
        assert np.linalg.norm(S, 2) <= math.sqrt(2) + 1e-9
        lhs = S @ fr.P_tilde @ np.linalg.inv(S)
        rhs = X @ fr.P_tilde @ np.linalg.inv(X)
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * max(1, np.linalg.norm(rhs))


def test_block_diagonalize_paper_2d(paper_2d, w30):
    S, blocks = block_diagonalize(paper_2d, propagate_projector(paper_2d, P1, 0, w30), w30)
    B = blocks.assembled()
    A = paper_2d.matrices(w30.k_min, w30.k_max - 1)
    assert off_block(B, 1) == 0.0
    np.testing.assert_allclose(np.abs(B), np.abs(A), rtol=1e-12)
    rep = verify_weak_similarity(paper_2d, blocks, S, w30)
    assert rep.passed and rep.max_residual <= 1e-9
    assert rep.fitted_eps <= math.exp(0.2) + 1e-9


def test_block_diagonalize_upper_triangular(upper2, w30):
    # the dichotomy projector at gamma = 1 has the contracting direction as its range
    proj = spectral_projector(upper2, 1, w30)
    S, blocks = block_diagonalize(upper2, proj, w30)
    B = blocks.assembled()
    assert off_block(B, 1) <= 1e-10 * np.abs(B).max()
    np.testing.assert_allclose(np.abs(B[:, 0, 0]), 0.5, rtol=1e-8)
    np.testing.assert_allclose(np.abs(B[:, 1, 1]), 2.0, rtol=1e-8)
    assert sorted(np.abs([B[0, 0, 0], B[0, 1, 1]])) == pytest.approx([0.5, 2.0], rel=1e-8)
    assert verify_weak_similarity(upper2, blocks, S, w30).passed


def test_block_diagonalize_requires_dichotomy_projector(upper2, w30):
    # the invariant direction e_1 expands, so a range-e_1 projector has no dichotomy at gamma = 1
    with pytest.raises(CertificateMissing):
        block_diagonalize(upper2, propagate_projector(upper2, P1, 0, w30), w30)


def test_block_diagonalize_rank_degenerate(paper_2d, w30):
    with pytest.raises(RankDegenerate):
        block_diagonalize(paper_2d, propagate_projector(paper_2d, np.zeros((2, 2)), 0, w30), w30)


def test_verify_weak_similarity_examples(paper_2d, w30):
    ident = SimilarityTransform.identity(2, w30)
    rep = verify_weak_similarity(paper_2d, paper_2d, ident, w30)
    assert rep.passed and rep.fitted_M == pytest.approx(1.0) and rep.fitted_eps == pytest.approx(1.0)
    rep = verify_weak_similarity(paper_2d, paper_2d.scaled(2.0), ident, w30)
    assert not rep.passed and rep.max_residual > 0


def test_full_reduction_constant_diag(diag2, w30):
    est = estimate_spectrum(diag2, w30)
    red = full_reduction(diag2, est)
    assert red.blocks.dims == [1, 1]
    spectra = [e.intervals for e in red.block_estimates]
    assert spectra[0][0][0] <= 0.5 <= spectra[0][0][1]
    assert spectra[1][0][0] <= 2.0 <= spectra[1][0][1]
    assert verify_weak_similarity(diag2, red.blocks, red.transform, w30).passed


def test_full_reduction_scalar(paper_scalar):
    w = Window(-40, 40)
    red = full_reduction(paper_scalar, estimate_spectrum(paper_scalar, w))
    assert red.blocks.dims == [1]
    np.testing.assert_allclose(np.abs(red.transform.S), 1.0, rtol=1e-15)
    assert red.transform.degeneracy == "non_degenerate"


def test_full_reduction_paper_2d(paper_2d, w30):
    est = estimate_spectrum(paper_2d, w30)
    red = full_reduction(paper_2d, est)
    assert red.blocks.dims == [1, 1]
    assert all(d <= 2 * est.bisect_tol for d in red.block_distances)
    assert red.blocks.off_block_ratio() <= 1e-10


def test_full_reduction_upper_triangular(upper2, w30):
    est = estimate_spectrum(upper2, w30)
    transform, blocks = full_reduction(upper2, est)
    assert blocks.dims == [1, 1]
    rep = verify_weak_similarity(upper2, blocks, transform, w30)
    assert rep.passed
    assert np.all(np.linalg.norm(transform.S, 2, axis=(1, 2)) <= math.sqrt(2) + 1e-9)


def test_full_reduction_without_intervals(diag2, w30):
    est = estimate_spectrum(diag2, w30, gamma_bracket=(0.6, 1.5))
    with pytest.raises(CutPointNotResolvent):
        full_reduction(diag2, est)


def test_spectrum_invariance_identity(diag2, w30):
    est = estimate_spectrum(diag2, w30)
    rep = spectrum_invariance_check(diag2, diag2, SimilarityTransform.identity(2, w30), est)
    assert rep["relative_hausdorff"] == 0.0 and rep["pass"]


def test_spectrum_invariance_permuted_blocks(diag2, w30):
    est = estimate_spectrum(diag2, w30)
    # tables reach past the doubled window so the confirmation fits can run
    wide = Window(-90, 90)
    swapped = BlockSystem([MatrixSequence.constant([[0.5]]).to_table(wide),
                           MatrixSequence.constant([[2.0]]).to_table(wide)])
    rep = spectrum_invariance_check(diag2, swapped, None, est)
    assert rep["relative_hausdorff"] == 0.0 and rep["pass"]


def test_spectrum_invariance_paper_2d(paper_2d, w30):
    est = estimate_spectrum(paper_2d, w30)
    red = full_reduction(paper_2d, est)
    rep = spectrum_invariance_check(paper_2d, red.blocks, red.transform, est)
    assert rep["pass"] and rep["relative_hausdorff"] <= 2e-3
    assert rep["similarity"]["pass"]


def test_reports_serialize(paper_2d, w30):
    est = estimate_spectrum(paper_2d, w30)
    d = full_reduction(paper_2d, est).to_dict()
    assert d["blocks"]["dims"] == [1, 1]
    assert d["transform"]["max_norm_S"] <= math.sqrt(2) + 1e-9
