"""Invariant subspace bases and projected growth over index pairs.

The projected norms ``||Phi(k, l) P_l||`` are never formed from the raw
product ``Phi(k, l)``: an oblique projector applied after a long product
cancels huge expanding components and destroys all relative accuracy.
Instead the range and kernel of ``P_k`` are carried as orthonormal bases
``V_k`` and ``U_k`` and the dynamics is restricted to them, so that

    Phi(k, l) P_l = V_k C(k, l) Y_l^T,        C_k = V_{k+1}^T A_k V_k,

where ``Y_l^T`` are the first ``r`` rows of ``[V_l U_l]^{-1}``.  The kernel
part is handled the same way with the inverse restricted cocycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, NotAProjector
from .system import MatrixSequence, Window

_SEED = 20240917
ANCHOR_COND = 1e15


def orth(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column space of a full-column-rank ``M``."""
    if M.shape[1] == 0:
        return M.copy()
    return np.linalg.qr(M)[0]


def generic_frame(N: int, r: int) -> np.ndarray:
    """A fixed, generic ``r``-frame used to seed subspace iterations."""
    rng = np.random.default_rng(_SEED + 7919 * N + r)
    return np.linalg.qr(rng.standard_normal((N, N)))[0][:, :r]


def split_projector(P: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of ``range(P)`` and ``ker(P)`` via the SVD."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    N = P.shape[0]
    if P.shape != (N, N) or not np.all(np.isfinite(P)):
        raise NotAProjector("projector must be a finite square matrix")
    scale = max(1.0, np.linalg.norm(P, 2))
    if np.linalg.norm(P @ P - P, 2) > 1e-8 * scale:
        raise NotAProjector(f"||P^2 - P|| = {np.linalg.norm(P @ P - P, 2):.3e}")
    u, sv, vt = np.linalg.svd(P)
    r = int(np.sum(sv > tol * max(1.0, sv[0] if sv.size else 0.0)))
    return u[:, :r].copy(), vt[r:].T.copy()


def _needed_range(sys: MatrixSequence, lo: int, hi: int) -> tuple[int, int]:
    rng = sys.k_range
    if rng is None:
        return lo, hi
    return max(lo, rng[0]), min(hi, rng[1] + 1)


def _anchor_run(sys: MatrixSequence, near: int, far: int, backward: bool = False) -> np.ndarray:
    """Factors from ``near`` towards ``far`` outside the window, in index order.

    The run stops before the first factor whose condition number exceeds
    ``ANCHOR_COND``.  Anchor factors are only used to converge a seed frame,
    which re-orthonormalisation keeps accurate, so they are held to a looser
    standard than factors inside the window.
    """
    if (far > near) if backward else (far < near):
        return np.empty((0, sys.dimension, sys.dimension))
    k0, k1 = (far, near) if backward else (near, far)
    mats = sys.matrices(k0, k1, check=False)
    finite = np.isfinite(mats).all(axis=(1, 2))
    ok = finite.copy()
    if finite.any():
        ok[finite] = np.linalg.cond(mats[finite]) < ANCHOR_COND
    if backward:
        bad = np.flatnonzero(~ok[::-1])
        keep = len(mats) if bad.size == 0 else int(bad[0])
        return mats[len(mats) - keep :]
    bad = np.flatnonzero(~ok)
    keep = len(mats) if bad.size == 0 else int(bad[0])
    return mats[:keep]


def anchored_bases(
    sys: MatrixSequence, r: int, window: Window, horizon: int
) -> tuple[np.ndarray, np.ndarray]:
    """Stable and unstable bases of rank ``r`` and ``N - r`` over ``window``.

    The stable basis is seeded at ``k_max + horizon`` and pulled back with
    ``V_k = orth(A_k^{-1} V_{k+1})``; backward iteration converges to the
    ``r`` directions that contract fastest forward in time.  The unstable
    basis is seeded at ``k_min - horizon`` and pushed forward.  Both
    directions of iteration are numerically stable.  Anchors are clipped to
    the range of a table-backed system.
    """
    N = sys.dimension
    n = window.size
    lo, hi = window.k_min, window.k_max
    V = np.empty((n, N, r))
    U = np.empty((n, N, N - r))
    if r == N:
        V[:] = np.eye(N)
    elif r > 0:
        rlo, end = _needed_range(sys, lo, hi + horizon)
        if rlo > lo or end < hi:
            raise IndexOutOfRange(f"window {window} outside system range")
        inv = sys.inverses(lo, hi - 1)
        v = generic_frame(N, r)
        for A in _anchor_run(sys, hi, end - 1)[::-1]:
            v = orth(np.linalg.solve(A, v))
        V[n - 1] = v
        for j in range(hi - 1, lo - 1, -1):
            v = orth(inv[j - lo] @ v)
            V[j - lo] = v
    if r == 0:
        U[:] = np.eye(N)
    elif r < N:
        start, rhi = _needed_range(sys, lo - horizon, hi)
        if start > lo or rhi < hi:
            raise IndexOutOfRange(f"window {window} outside system range")
        mats = sys.matrices(lo, hi - 1)
        u = generic_frame(N, N - r)
        for A in _anchor_run(sys, lo - 1, start, backward=True):
            u = orth(A @ u)
        U[0] = u
        for j in range(lo, hi):
            u = orth(mats[j - lo] @ u)
            U[j - lo + 1] = u
    return V, U


def propagated_bases(
    sys: MatrixSequence, P_ref: np.ndarray, l_ref: int, window: Window
) -> tuple[np.ndarray, np.ndarray]:
    """Bases of ``Phi(k, l_ref) P_ref Phi(l_ref, k)`` by literal conjugation.

    Range and kernel of ``P_ref`` are transported forward with ``A_k`` and
    backward with ``A_k^{-1}``, re-orthonormalising at every step.
    """
    V0, U0 = split_projector(P_ref)
    N = sys.dimension
    if V0.shape[0] != N:
        raise NotAProjector(f"projector is {V0.shape[0]}x{V0.shape[0]}, system has N={N}")
    lo, hi = min(window.k_min, l_ref), max(window.k_max, l_ref)
    n = hi - lo + 1
    r = V0.shape[1]
    V = np.empty((n, N, r))
    U = np.empty((n, N, N - r))
    i0 = l_ref - lo
    V[i0], U[i0] = V0, U0
    if hi > l_ref:
        mats = sys.matrices(l_ref, hi - 1)
        for j in range(l_ref, hi):
            V[j - lo + 1] = orth(mats[j - l_ref] @ V[j - lo])
            U[j - lo + 1] = orth(mats[j - l_ref] @ U[j - lo])
    if lo < l_ref:
        inv = sys.inverses(lo, l_ref - 1)
        for j in range(l_ref - 1, lo - 1, -1):
            V[j - lo] = orth(inv[j - lo] @ V[j - lo + 1])
            U[j - lo] = orth(inv[j - lo] @ U[j - lo + 1])
    s = slice(window.k_min - lo, window.k_max - lo + 1)
    return V[s].copy(), U[s].copy()


def dual_rows(V: np.ndarray, U: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Rows of ``[V U]^{-1}`` split as ``(Y^T, Z^T)`` and the worst transversality."""
    r = V.shape[2]
    W = np.concatenate([V, U], axis=2)
    smin = float(np.min(np.linalg.svd(W, compute_uv=False)[:, -1])) if W.shape[0] else 1.0
    Winv = np.linalg.inv(W)
    return Winv[:, :r, :], Winv[:, r:, :], smin


@dataclass(frozen=True)
class PairTable:
    """Log-norms ``e = log ||Phi(k, l) X_l||`` over index pairs of one half-plane."""

    k: np.ndarray
    l: np.ndarray
    loge: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.abs(self.k - self.l)

    def __len__(self) -> int:
        return len(self.k)

    @staticmethod
    def empty() -> "PairTable":
        z = np.empty(0, dtype=np.int64)
        return PairTable(z, z, np.empty(0))


def _batched_norm(M: np.ndarray) -> np.ndarray:
    if M.shape[1] == 1 or M.shape[2] == 1:
        return np.sqrt(np.einsum("lij,lij->l", M, M))
    return np.linalg.norm(M, 2, axis=(1, 2))


def _sweep(coeffs: np.ndarray, start: np.ndarray, forward: bool) -> tuple[list, list, list]:
    """Accumulate ``log ||C_{l+d-1} ... C_l M_l||`` (or the backward analogue).

    Products are renormalised after every step and the scale carried in
    log form, so arbitrarily long windows neither overflow nor underflow.
    """
    n = start.shape[0]
    M = start.copy()
    nrm = np.maximum(_batched_norm(M), np.finfo(float).tiny)
    logs = np.log(nrm)
    M = M / nrm[:, None, None]
    ks, ls, es = [np.arange(n)], [np.arange(n)], [logs.copy()]
    for d in range(1, n):
        if forward:
            M = np.einsum("lij,ljk->lik", coeffs[d - 1 : n - 1], M[: n - d])
            logs = logs[: n - d]
            lidx = np.arange(n - d)
            kidx = lidx + d
        else:
            M = np.einsum("lij,ljk->lik", coeffs[0 : n - d], M[1:])
            logs = logs[1:]
            lidx = np.arange(d, n)
            kidx = lidx - d
        nrm = np.maximum(_batched_norm(M), np.finfo(float).tiny)
        logs = logs + np.log(nrm)
        M = M / nrm[:, None, None]
        ks.append(kidx)
        ls.append(lidx)
        es.append(logs.copy())
    return ks, ls, es


def projected_log_norms(
    sys: MatrixSequence, V: np.ndarray, U: np.ndarray, window: Window
) -> tuple[PairTable, PairTable, float]:
    """Log-norms of ``Phi(k, l) P_l`` (k >= l) and ``Phi(k, l) Q_l`` (k <= l).

    Returns the two pair tables and the smallest singular value of
    ``[V_k U_k]`` over the window.
    """
    n = window.size
    k0 = window.k_min
    r = V.shape[2]
    q = U.shape[2]
    Yt, Zt, smin = dual_rows(V, U)
    mats = sys.matrices(k0, window.k_max - 1)
    stable = unstable = PairTable.empty()
    if r:
        C = np.einsum("kji,kjl,klm->kim", V[1:], mats, V[:-1])
        ks, ls, es = _sweep(C, Yt, forward=True)
        stable = PairTable(np.concatenate(ks) + k0, np.concatenate(ls) + k0, np.concatenate(es))
    if q:
        inv = np.linalg.inv(mats) if len(mats) else mats
        Dinv = np.einsum("kji,kjl,klm->kim", U[:-1], inv, U[1:])
        ks, ls, es = _sweep(Dinv, Zt, forward=False)
        unstable = PairTable(np.concatenate(ks) + k0, np.concatenate(ls) + k0, np.concatenate(es))
    return stable, unstable, smin


def qr_growth(sys: MatrixSequence, l: int, horizon: int, forward: bool) -> tuple[np.ndarray, np.ndarray]:
    """Right-singular frame and log growth of ``Phi(l + h, l)`` or ``Phi(l - h, l)``.

    Runs the QR iteration on the transposed factors, which converges to the
    right singular vectors of the product in decreasing order of growth
    without ever forming the product.  The iteration starts from a generic
    frame so that the columns sort themselves by growth even for diagonal
    systems.  Returns the orthogonal frame ``Q``
    (columns ordered from most to least expanding) and the accumulated
    ``log |R_ii|`` for each column.
    """
    N = sys.dimension
    Q = generic_frame(N, N)
    logs = np.zeros(N)
    if horizon <= 0:
        return Q, logs
    if forward:
        facs = sys.matrices(l, l + horizon - 1)[::-1]
    else:
        facs = sys.inverses(l - horizon, l - 1)
    for A in facs:
        Q, R = np.linalg.qr(A.T @ Q)
        d = np.diag(R)
        sgn = np.where(d < 0, -1.0, 1.0)
        Q = Q * sgn
        logs += np.log(np.abs(d))
    return Q, logs
