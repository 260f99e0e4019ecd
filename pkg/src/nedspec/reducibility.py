"""Weak kinematic similarity to block-diagonal form.

An invariant projector sequence is first normalised to ``diag(I, 0)`` by a
constant change of basis ``T``.  With the fundamental matrix
``X_k = Phi(k, n) T^{-1}`` the Gram-type matrix

    Rt_k = P X_k^T X_k P + (I - P) X_k^T X_k (I - P)

is symmetric positive definite and commutes with ``P``; its square root
``R_k`` splits ``X_k = S_k R_k`` with ``||S_k|| <= sqrt 2``, and the system
``B_k = R_{k+1} R_k^{-1}`` is block diagonal.

Numerically ``X_k`` is never formed from raw products.  Its two column
blocks are carried as ``V_k C_k`` and ``U_k D_k`` with orthonormal range and
kernel bases ``V_k, U_k`` and the restricted cocycles ``C_k, D_k``, so that
``Rt_k = diag(C_k^T C_k, D_k^T D_k)`` and every quantity is formed block by
block.  Writing ``C_k = O_k R^1_k`` (polar factors) gives

    S_k = [V_k O_k | U_k O'_k],      B^1_k = O_{k+1}^T (V_{k+1}^T A_k V_k) O_k,

which equals ``R^1_{k+1} (R^1_k)^{-1}`` but involves orthogonal factors only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dichotomy import (
    DichotomyCertificate,
    FitConfig,
    ProjectorSequence,
    fit_constants,
    propagate_projector,
    spectral_projector,
    verify_certificate,
)
from .errors import (
    BlockSpectrumMismatch,
    CertificateMissing,
    CutPointNotResolvent,
    IllConditionedBasis,
    IndefiniteGram,
    IndexOutOfRange,
    RankDegenerate,
)
from .spectrum import SpectrumEstimate, estimate_spectrum, interval_hausdorff, resolvent_test
from .system import MatrixSequence, Window

__all__ = [
    "NormalizedFrame",
    "SimilarityTransform",
    "BlockSystem",
    "SimilarityReport",
    "ReductionResult",
    "normalize_projector",
    "lyapunov_split",
    "split_gram",
    "block_diagonalize",
    "verify_weak_similarity",
    "full_reduction",
    "spectrum_invariance_check",
]

GRAM_FLOOR = 1e-14
COND_MAX = 1e8
RESIDUAL_TOL = 1e-9
WEAK_TOL = 1e-9


def _fix_signs(B: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    if B.shape[1] == 0:
        return B
    idx = np.argmax(np.abs(B), axis=0)
    sgn = np.sign(B[idx, np.arange(B.shape[1])])
    sgn[sgn == 0] = 1.0
    return B * sgn


def _polar(C: np.ndarray, label: str) -> tuple[np.ndarray, np.ndarray]:
    """``C = O R`` with ``O`` orthogonal and ``R`` the SPD root of ``C^T C``.

    The root is built from the eigenpairs of ``C^T C`` obtained through the
    SVD of ``C``, which avoids squaring its condition number.
    """
    r = C.shape[1]
    if r == 0:
        return np.empty((0, 0)), np.empty((0, 0))
    W, sv, Zt = np.linalg.svd(C)
    if not np.all(np.isfinite(sv)) or sv[-1] ** 2 <= GRAM_FLOOR * sv[0] ** 2:
        raise IndefiniteGram(f"{label}: Gram eigenvalue ratio {(sv[-1] / sv[0]) ** 2:.3e} below {GRAM_FLOOR:g}")
    O = W @ Zt
    R = (Zt.T * sv) @ Zt
    return O, 0.5 * (R + R.T)


def split_gram(X: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """Split ``X = S R`` for ``P = diag(I_rank, 0)``.

    ``Rt = P X^T X P + (I - P) X^T X (I - P)`` is assembled literally and its
    square root is taken by a symmetric eigendecomposition of each diagonal
    block.  Eigenvalues below ``1e-14`` times the largest one of their block
    raise :class:`IndefiniteGram`.

    Returns
    -------
    S, R : ndarray
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    P = np.zeros((N, N))
    P[:rank, :rank] = np.eye(rank)
    Q = np.eye(N) - P
    G = X.T @ X
    Rt = P @ G @ P + Q @ G @ Q
    R = np.zeros((N, N))
    for sl in (slice(0, rank), slice(rank, N)):
        blk = Rt[sl, sl]
        if blk.size == 0:
            continue
        lam, Z = np.linalg.eigh(0.5 * (blk + blk.T))
        if lam[0] <= GRAM_FLOOR * lam[-1]:
            raise IndefiniteGram(f"Gram block eigenvalue {lam[0]:.3e} at or below floor")
        R[sl, sl] = (Z * np.sqrt(lam)) @ Z.T
    R = 0.5 * (R + R.T)
    S = np.linalg.solve(R.T, X.T).T
    return S, R


@dataclass
class NormalizedFrame:
    """Fundamental matrix ``X_k = Phi(k, n_ref) T^{-1}`` with ``T P T^{-1} = diag(I, 0)``.

    Attributes
    ----------
    T : ndarray
    T_inv : ndarray
        ``[range basis | kernel basis]`` of ``P_{n_ref}``.
    P_tilde : ndarray
    rank : int
    n_ref : int
    window : Window
    V, U : ndarray
        Orthonormal range and kernel bases over the window.
    C, D : ndarray
        Restricted cocycles with ``X_k = [V_k C_k | U_k D_k]``.
    """

    T: np.ndarray
    T_inv: np.ndarray
    P_tilde: np.ndarray
    rank: int
    n_ref: int
    window: Window
    V: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    steps_V: np.ndarray = field(repr=False)
    steps_U: np.ndarray = field(repr=False)

    def _i(self, k: int) -> int:
        if k not in self.window:
            raise IndexOutOfRange(f"index {k} outside frame window {self.window}")
        return k - self.window.k_min

    def X(self, k: int) -> np.ndarray:
        i = self._i(k)
        return np.concatenate([self.V[i] @ self.C[i], self.U[i] @ self.D[i]], axis=1)

    def X_all(self) -> np.ndarray:
        return np.concatenate(
            [np.einsum("kij,kjl->kil", self.V, self.C), np.einsum("kij,kjl->kil", self.U, self.D)], axis=2
        )


def normalize_projector(sys: MatrixSequence, proj: ProjectorSequence, n_ref: int | None = None,
                        w: Window | None = None) -> NormalizedFrame:
    """Constant change of basis taking ``P_{n_ref}`` to ``diag(I_r, 0)``.

    ``T^{-1}`` stacks an orthonormal basis of the range of ``P_{n_ref}``
    next to one of its kernel, each column signed so that its
    largest-magnitude entry is positive.

    Parameters
    ----------
    w : Window, optional
        Window of the frame; defaults to the projector's window.
    n_ref : int, optional
        Defaults to the window midpoint.

    Raises
    ------
    RankDegenerate
        If the projector has rank 0 or ``N``.
    IllConditionedBasis
        If the condition number of ``T`` exceeds ``1e8``.

    Examples
    --------
    >>> sys = MatrixSequence.constant([[2.0, 0.0], [0.0, 0.5]])
    >>> P = propagate_projector(sys, [[1.0, 1.0], [0.0, 0.0]], 0, Window(-2, 2))
    >>> fr = normalize_projector(sys, P, 0)
    >>> bool(np.allclose(fr.T @ P.at(0) @ fr.T_inv, np.diag([1.0, 0.0])))
    True
    """
    w = proj.window if w is None else w
    if w.k_min < proj.window.k_min or w.k_max > proj.window.k_max:
        raise IndexOutOfRange(f"frame window {w} not inside projector window {proj.window}")
    n_ref = w.midpoint if n_ref is None else int(n_ref)
    if n_ref not in w:
        raise IndexOutOfRange(f"reference index {n_ref} outside {w}")
    N, r = proj.dimension, proj.rank
    if r in (0, N):
        raise RankDegenerate(f"projector rank {r} is trivial for N={N}")
    off = w.k_min - proj.window.k_min
    V = proj.V[off : off + w.size].copy()
    U = proj.U[off : off + w.size].copy()
    i0 = n_ref - w.k_min
    V[i0] = _fix_signs(V[i0])
    U[i0] = _fix_signs(U[i0])
    T_inv = np.concatenate([V[i0], U[i0]], axis=1)
    cond = np.linalg.cond(T_inv)
    if not cond <= COND_MAX:
        raise IllConditionedBasis(f"cond(T) = {cond:.3e} exceeds {COND_MAX:g}")
    T = np.linalg.inv(T_inv)
    P_tilde = np.diag(np.r_[np.ones(r), np.zeros(N - r)])
    A = sys.matrices(w.k_min, w.k_max - 1)
    cV = np.einsum("kji,kjl,klm->kim", V[1:], A, V[:-1])
    cU = np.einsum("kji,kjl,klm->kim", U[1:], A, U[:-1])
    C = _cocycle(cV, i0, r)
    Dm = _cocycle(cU, i0, N - r)
    return NormalizedFrame(T, T_inv, P_tilde, r, n_ref, w, V, U, C, Dm, cV, cU)


def _cocycle(steps: np.ndarray, i0: int, m: int) -> np.ndarray:
    """``C_k`` with ``C_{i0} = I`` and ``C_{k+1} = steps_k C_k``."""
    n = steps.shape[0] + 1
    out = np.empty((n, m, m))
    out[i0] = np.eye(m)
    for i in range(i0, n - 1):
        out[i + 1] = steps[i] @ out[i]
    for i in range(i0 - 1, -1, -1):
        out[i] = np.linalg.solve(steps[i], out[i + 1])
    return out


def lyapunov_split(frame: NormalizedFrame, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(S_k, R_k)`` with ``X_k = S_k R_k``, ``R_k`` SPD and commuting with ``P``.

    Raises
    ------
    IndefiniteGram
    """
    i = frame._i(k)
    O1, R1 = _polar(frame.C[i], f"range block at k={k}")
    O2, R2 = _polar(frame.D[i], f"kernel block at k={k}")
    S = np.concatenate([frame.V[i] @ O1, frame.U[i] @ O2], axis=1)
    R = np.zeros((frame.V.shape[1],) * 2)
    r = frame.rank
    R[:r, :r] = R1
    R[r:, r:] = R2
    return S, R


def _log_norm_pair(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sv = np.linalg.svd(S, compute_uv=False)
    # adding 0.0 turns -0.0 into 0.0 for clean reports
    return np.log(sv[:, 0]) + 0.0, 0.0 - np.log(sv[:, -1])


def _fit_weak(ks: np.ndarray, logs: np.ndarray, tol: float = WEAK_TOL) -> tuple[float, float]:
    """Smallest saturated ``(log M, log eps)`` with ``logs <= log M + |k| log eps``.

    The slope is accepted when, on each side of ``k = 0``, the largest
    excess on the outer quarter of the range does not exceed that on the
    inner shell by more than ``tol``.
    """
    lam = np.abs(ks).astype(float)
    R = max(int(lam.max()), 1)
    shells = []
    for side in (ks >= 0, ks <= 0):
        inner = side & (lam > 0.375 * R) & (lam <= 0.5 * R)
        outer = side & (lam > 0.75 * R)
        if inner.any() and outer.any():
            shells.append((inner, outer))

    def saturated(s: float) -> bool:
        e = logs - s * lam
        return all(e[o].max() <= e[i].max() + tol for i, o in shells)

    if saturated(0.0):
        s = 0.0
    else:
        hi = 1.0
        while not saturated(hi):
            hi *= 2.0
            if hi > 1e6:
                return math.inf, math.inf
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if saturated(mid) else (mid, hi)
        s = hi
    c = float(np.max(logs - s * lam))
    return max(c, 0.0), s


@dataclass
class SimilarityTransform:
    """Sequence ``S_k`` over a window with fitted weak non-degeneracy bounds.

    ``||S_k||`` and ``||S_k^{-1}||`` are both bounded by
    ``fitted_M * fitted_eps^|k|``.
    """

    S: np.ndarray = field(repr=False)
    window: Window
    fitted_M: float
    fitted_eps: float
    degeneracy: str
    log_norm_S: np.ndarray = field(repr=False)
    log_norm_S_inv: np.ndarray = field(repr=False)

    @classmethod
    def from_matrices(cls, S: np.ndarray, window: Window) -> "SimilarityTransform":
        S = np.asarray(S, dtype=float)
        if S.shape[0] != window.size:
            raise ValueError(f"{S.shape[0]} matrices for a window of size {window.size}")
        ln, lni = _log_norm_pair(S)
        logM, s = _fit_weak(window.indices(), np.maximum(ln, lni))
        deg = "non_degenerate" if s == 0 else "weakly_non_degenerate"
        return cls(S, window, float(np.exp(logM)), float(np.exp(s)), deg, ln, lni)

    @classmethod
    def identity(cls, N: int, window: Window) -> "SimilarityTransform":
        return cls.from_matrices(np.broadcast_to(np.eye(N), (window.size, N, N)).copy(), window)

    def at(self, k: int) -> np.ndarray:
        if k not in self.window:
            raise IndexOutOfRange(f"index {k} outside transform window {self.window}")
        return self.S[k - self.window.k_min]

    def restrict(self, w: Window) -> "SimilarityTransform":
        if w.k_min < self.window.k_min or w.k_max > self.window.k_max:
            raise IndexOutOfRange(f"{w} not inside transform window {self.window}")
        s = slice(w.k_min - self.window.k_min, w.k_max - self.window.k_min + 1)
        return SimilarityTransform.from_matrices(self.S[s], w)

    def norm_rows(self) -> list:
        """Rows ``(k, log||S_k||, log||S_k^{-1}||)``."""
        return [(int(k), float(a), float(b)) for k, a, b in
                zip(self.window.indices(), self.log_norm_S, self.log_norm_S_inv)]

    def to_dict(self) -> dict:
        return {
            "window": self.window.as_list(),
            "fitted_M": self.fitted_M,
            "fitted_eps": self.fitted_eps,
            "degeneracy": self.degeneracy,
            "max_norm_S": float(np.exp(self.log_norm_S.max())),
            "max_norm_S_inv": float(np.exp(self.log_norm_S_inv.max())),
        }


@dataclass
class BlockSystem:
    """Block-diagonal system given by its diagonal blocks.

    Attributes
    ----------
    blocks : list of MatrixSequence
        Table-backed blocks over the same index range.
    labels : list of int
        Index ``i`` of the spectral bundle ``W_i`` each block represents
        (``None`` for a plain two-block split).
    """

    blocks: list
    labels: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ValueError("a block system needs at least one block")
        ranges = {b.k_range for b in self.blocks}
        if len(ranges) != 1 or None in ranges:
            raise ValueError("blocks must be tables over a common index range")
        if not self.labels:
            self.labels = [None] * len(self.blocks)

    @property
    def dims(self) -> list[int]:
        return [b.dimension for b in self.blocks]

    @property
    def dimension(self) -> int:
        return sum(self.dims)

    @property
    def k_range(self) -> tuple[int, int]:
        return self.blocks[0].k_range

    def assembled(self, k0: int | None = None, k1: int | None = None) -> np.ndarray:
        lo, hi = self.k_range
        k0 = lo if k0 is None else k0
        k1 = hi if k1 is None else k1
        N = self.dimension
        out = np.zeros((k1 - k0 + 1, N, N))
        p = 0
        for b in self.blocks:
            d = b.dimension
            out[:, p : p + d, p : p + d] = b.matrices(k0, k1)
            p += d
        return out

    def as_sequence(self) -> MatrixSequence:
        return MatrixSequence.from_table(self.assembled(), k_min=self.k_range[0])

    def off_block_ratio(self) -> float:
        """``max_k ||off-diagonal part of B_k|| / ||B_k||`` (zero by construction)."""
        B = self.assembled()
        mask = np.ones(B.shape[1:], dtype=bool)
        p = 0
        for d in self.dims:
            mask[p : p + d, p : p + d] = False
            p += d
        off = np.linalg.norm(np.where(mask, B, 0.0), 2, axis=(1, 2))
        return float(np.max(off / np.linalg.norm(B, 2, axis=(1, 2))))

    def to_dict(self) -> dict:
        return {"dims": self.dims, "labels": self.labels, "k_range": list(self.k_range)}


@dataclass
class SimilarityReport:
    """Outcome of checking ``S_{k+1} B_k = A_k S_k`` and the weak bounds."""

    max_residual: float
    witness: int | None
    fitted_M: float
    fitted_eps: float
    window: Window
    tolerance: float = RESIDUAL_TOL
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        self.passed = bool(self.max_residual <= self.tolerance and math.isfinite(self.fitted_M)
                           and math.isfinite(self.fitted_eps))

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "witness": self.witness,
            "fitted_M": self.fitted_M if math.isfinite(self.fitted_M) else None,
            "fitted_eps": self.fitted_eps if math.isfinite(self.fitted_eps) else None,
            "window": self.window.as_list(),
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _certify(sys, proj, w, certificate, gamma, fit_config) -> DichotomyCertificate:
    weighted = sys.scaled(1.0 / gamma)
    if certificate is None:
        cert = fit_constants(weighted, proj, w, config=fit_config)
        if not cert:
            raise CertificateMissing(f"no dichotomy certificate for the projector at gamma={gamma:g}: {cert.reason}")
        return cert
    cw = certificate.projector.window
    if certificate.projector.rank != proj.rank:
        raise CertificateMissing(f"certificate rank {certificate.projector.rank} differs from projector rank {proj.rank}")
    rep = verify_certificate(weighted, certificate, cw)
    if not rep.passed:
        raise CertificateMissing(f"certificate fails on {cw}: excess {max(rep.max_stable_excess, rep.max_unstable_excess):.3e}")
    return certificate


def _two_block(sys: MatrixSequence, proj: ProjectorSequence, w: Window):
    """Transform, the two block tables over ``[k_min, k_max - 1]`` and the frame."""
    frame = normalize_projector(sys, proj, w.midpoint, w)
    n, N, r = w.size, sys.dimension, frame.rank
    O1 = np.empty((n, r, r))
    O2 = np.empty((n, N - r, N - r))
    S = np.empty((n, N, N))
    for i, k in enumerate(w.indices()):
        O1[i], _ = _polar(frame.C[i], f"range block at k={k}")
        O2[i], _ = _polar(frame.D[i], f"kernel block at k={k}")
        S[i, :, :r] = frame.V[i] @ O1[i]
        S[i, :, r:] = frame.U[i] @ O2[i]
    B1 = np.einsum("kji,kjl,klm->kim", O1[1:], frame.steps_V, O1[:-1])
    B2 = np.einsum("kji,kjl,klm->kim", O2[1:], frame.steps_U, O2[:-1])
    return S, B1, B2, frame


def block_diagonalize(
    sys: MatrixSequence,
    proj: ProjectorSequence,
    w: Window,
    certificate: DichotomyCertificate | None = None,
    gamma: float = 1.0,
    fit_config: FitConfig | None = None,
) -> tuple[SimilarityTransform, BlockSystem]:
    """Decouple the system along an invariant projector.

    The projector must carry a dichotomy certificate for the weighted
    system ``A_k / gamma``; a supplied certificate is re-verified and
    otherwise one is fitted on ``w``.

    Returns
    -------
    transform : SimilarityTransform
        ``S_k`` for ``k`` in ``w``.
    blocks : BlockSystem
        Blocks of sizes ``rank`` and ``N - rank`` over ``[k_min, k_max - 1]``,
        so that ``S_{k+1} B_k = A_k S_k``.

    Raises
    ------
    RankDegenerate, CertificateMissing, IndefiniteGram, IllConditionedBasis
    """
    N, r = sys.dimension, proj.rank
    if r in (0, N):
        raise RankDegenerate(f"projector rank {r} is trivial for N={N}")
    if w.size < 2:
        raise ValueError("block_diagonalize needs a window with at least two indices")
    _certify(sys, proj, w, certificate, gamma, fit_config)
    S, B1, B2, _ = _two_block(sys, proj, w)
    blocks = BlockSystem([MatrixSequence.from_table(B1, k_min=w.k_min), MatrixSequence.from_table(B2, k_min=w.k_min)])
    return SimilarityTransform.from_matrices(S, w), blocks


def verify_weak_similarity(A: MatrixSequence, B, S: SimilarityTransform, w: Window) -> SimilarityReport:
    """Check ``S_{k+1} B_k = A_k S_k`` over ``w`` and fit the weak bounds.

    The residual is ``max_k ||S_{k+1} B_k - A_k S_k|| / ||A_k S_k||``; the
    check passes when it is at most ``1e-9`` and finite ``(M, eps)`` exist.
    ``B`` may be a :class:`MatrixSequence` or a :class:`BlockSystem`.
    """
    if isinstance(B, BlockSystem):
        B = B.as_sequence()
    if B.dimension != A.dimension or S.S.shape[1] != A.dimension:
        raise ValueError("dimensions of A, B and S differ")
    St = S.restrict(w)
    if w.size < 2:
        res = np.zeros(0)
    else:
        Am = A.matrices(w.k_min, w.k_max - 1)
        Bm = B.matrices(w.k_min, w.k_max - 1)
        lhs = np.einsum("kij,kjl->kil", St.S[1:], Bm)
        rhs = np.einsum("kij,kjl->kil", Am, St.S[:-1])
        res = np.linalg.norm(lhs - rhs, 2, axis=(1, 2)) / np.linalg.norm(rhs, 2, axis=(1, 2))
    worst = int(np.argmax(res)) if res.size else None
    return SimilarityReport(
        max_residual=float(res[worst]) if res.size else 0.0,
        witness=None if worst is None else int(w.k_min + worst),
        fitted_M=St.fitted_M,
        fitted_eps=St.fitted_eps,
        window=w,
    )


@dataclass
class ReductionResult:
    """Outcome of the full spectral cascade."""

    transform: SimilarityTransform
    blocks: BlockSystem
    window: Window
    support: Window
    block_estimates: list
    block_distances: list
    certificates: list

    def __iter__(self):
        return iter((self.transform, self.blocks))

    def to_dict(self) -> dict:
        return {
            "window": self.window.as_list(),
            "support": self.support.as_list(),
            "transform": self.transform.to_dict(),
            "blocks": self.blocks.to_dict(),
            "block_spectra": [e.to_dict()["intervals"] for e in self.block_estimates],
            "block_log_hausdorff": self.block_distances,
            "certificates": [c.to_dict() for c in self.certificates],
        }


def full_reduction(
    sys: MatrixSequence,
    est: SpectrumEstimate,
    w: Window | None = None,
    fit_config: FitConfig | None = None,
    check_blocks: bool = True,
) -> ReductionResult:
    """Reduce the system to one block per spectral interval.

    At every cut ``gamma_i`` with stable dimension ``d_i`` the remaining
    block is split by a rank ``d_i - d_{i-1}`` projector, certified afresh
    at ``gamma_i``; the transforms compose as
    ``S = S^0 diag(I, S^1) diag(I, I, S^2) ...``.  All work happens on a
    support window that pads ``w`` by twice its half-width on each side
    where the system allows, so that block spectra can be re-estimated
    with the same doubling check as the original.

    Returns
    -------
    ReductionResult
        Unpacks as ``(transform, blocks)``; the transform is restricted to
        ``w``.

    Raises
    ------
    CutPointNotResolvent
        If a cut weight does not certify the expected split.
    BlockSpectrumMismatch
        If a re-estimated block spectrum lies further than ``2 bisect_tol``
        (log-space Hausdorff distance) from its interval.
    """
    w = est.window if w is None else w
    config = fit_config or FitConfig()
    if est.n < 1:
        raise CutPointNotResolvent("the estimate has no spectral interval to reduce along")
    support = sys.valid_extent(w, 2 * max(w.half_width, 1))
    N = sys.dimension
    # bundle W_i sits between cuts gamma_{i-1} and gamma_i; a missing first cut shifts the labels
    shift = 1 if est.unbounded_left else 0
    S_total = np.broadcast_to(np.eye(N), (support.size, N, N)).copy()
    rest = sys
    offset = prev_dim = 0
    done: list[MatrixSequence] = []
    labels: list[int] = []
    certs = []
    final_label = len(est.cut_points) + shift
    for c, (gamma, d) in enumerate(zip(est.cut_points, est.stable_dims)):
        m = N - offset
        r = d - prev_dim
        if r < 0 or r > m:
            raise CutPointNotResolvent(f"stable dimension {d} at gamma={gamma:g} is inconsistent with the cascade")
        if r == 0:
            continue
        if r == m:
            final_label = c + shift
            break
        verdict = resolvent_test(rest, gamma, w, config)
        if verdict.status != "resolvent" or verdict.stable_dim != r:
            raise CutPointNotResolvent(
                f"gamma={gamma:g} is {verdict.status} for the remaining block "
                f"(stable dim {verdict.stable_dim}, expected {r})"
            )
        certs.append(verdict.certificate)
        proj = spectral_projector(rest, r, support, config.horizon_for(w))
        Sb, B1, B2, _ = _two_block(rest, proj, support)
        blk = np.broadcast_to(np.eye(N), (support.size, N, N)).copy()
        blk[:, offset:, offset:] = Sb
        S_total = np.einsum("kij,kjl->kil", S_total, blk)
        done.append(MatrixSequence.from_table(B1, k_min=support.k_min))
        labels.append(c + shift)
        rest = MatrixSequence.from_table(B2, k_min=support.k_min)
        offset += r
        prev_dim = d
    if not rest.is_table:
        rest = rest.to_table(Window(support.k_min, support.k_max - 1))
    done.append(rest)
    labels.append(final_label)
    blocks = BlockSystem(done, labels)
    transform = SimilarityTransform.from_matrices(S_total, support).restrict(w)

    estimates, dists = [], []
    if check_blocks:
        for b, lab in zip(blocks.blocks, labels):
            be = estimate_spectrum(b, w, gamma_bracket=est.bracket, bisect_tol=est.bisect_tol,
                                   fit_config=config, strict_bracket=False, check_saturation=False)
            estimates.append(be)
            want = [est.intervals[lab - 1]] if 1 <= lab <= est.n else []
            dist = interval_hausdorff(be.intervals, want)
            dists.append(dist)
            if not dist <= 2 * est.bisect_tol:
                raise BlockSpectrumMismatch(
                    f"block for bundle {lab}: spectrum {_fmt(be.intervals)} vs expected {_fmt(want)} "
                    f"(log distance {dist:.3e})"
                )
    return ReductionResult(transform, blocks, w, support, estimates, dists, certs)


def _fmt(intervals) -> list:
    return [(round(a, 6), round(b, 6)) for a, b in intervals]


def spectrum_invariance_check(A: MatrixSequence, B, S: SimilarityTransform | None, est_A: SpectrumEstimate,
                              fit_config: FitConfig | None = None) -> dict:
    """Compare the spectrum of ``A`` with that of a weakly similar ``B``.

    ``B`` is estimated with the bracket, tolerance and window of ``est_A``;
    the check passes when the relative Hausdorff distance of the two
    interval families is at most ``2 bisect_tol``.
    """
    if isinstance(B, BlockSystem):
        B = B.as_sequence()
    est_B = estimate_spectrum(B, est_A.window, gamma_bracket=est_A.bracket, bisect_tol=est_A.bisect_tol,
                              fit_config=fit_config, strict_bracket=False)
    dist = interval_hausdorff(est_A.intervals, est_B.intervals)
    rel = math.expm1(dist) if math.isfinite(dist) else math.inf
    out = {
        "intervals_A": [list(x) for x in est_A.intervals],
        "intervals_B": [list(x) for x in est_B.intervals],
        "relative_hausdorff": rel,
        "tolerance": 2 * est_A.bisect_tol,
        "pass": bool(rel <= 2 * est_A.bisect_tol),
        "saturated_B": est_B.saturated,
    }
    if S is not None:
        out["similarity"] = verify_weak_similarity(A, B, S, S.window).to_dict()
    return out
