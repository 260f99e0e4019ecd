"""Dichotomy certificates: representation, verification and fitting.

A certificate claims the nonuniform dichotomy estimates

    ||Phi(k, l) P_l|| <= K alpha^(k - l) eps^lam(l)      for k >= l,
    ||Phi(k, l) Q_l|| <= K alpha^(l - k) eps^lam(l)      for k <= l,

on a window, with ``Q_l = Id - P_l`` and ``lam(l) = |l|`` by default
(``l`` with ``nonuniform_exponent="signed"``).  ``eps = 1`` gives the uniform
exponential dichotomy and ``alpha * eps^2 < 1`` a strong one.  All norms are
operator 2-norms and all comparisons are made in log space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._bases import (
    PairTable,
    anchored_bases,
    dual_rows,
    projected_log_norms,
    propagated_bases,
    split_projector,
)
from ._fit import build_half, nonuniform_lam
from .errors import EmptyGrid, IndexOutOfRange, Infeasible, NotAProjector
from .system import MatrixSequence, Window

__all__ = [
    "FLAVORS",
    "FitConfig",
    "ProjectorSequence",
    "DichotomyCertificate",
    "ViolationReport",
    "GrowthBound",
    "propagate_projector",
    "spectral_projector",
    "verify_certificate",
    "certificate_excess",
    "minimal_log_constant",
    "fit_constants",
    "is_strong",
    "fit_growth_bound",
    "default_alpha_grid",
    "default_eps_grid",
]

FLAVORS = ("uniform_ED", "NED", "strong_NED")
EXCESS_TOL = 1e-9
INVARIANCE_TOL = 1e-10


def default_alpha_grid() -> np.ndarray:
    return np.geomspace(1e-3, 0.999, 64)


def default_eps_grid() -> np.ndarray:
    return np.geomspace(1.0, 10.0, 16)


@dataclass(frozen=True)
class FitConfig:
    """Settings shared by the fitting and spectrum routines.

    Attributes
    ----------
    alpha_grid, eps_grid : sequence of float or None
        Grids for :func:`fit_constants`; ``None`` selects the defaults.
    cap : float
        Largest admissible ``K``.
    saturation_tol : float
        Log-space slack allowed when comparing outer and inner shells.
    exponent : {"absolute", "signed"}
        Whether the nonuniform factor is ``eps^|l|`` or ``eps^l``.
    horizon : int or None
        Distance beyond the window used to anchor invariant bases; ``None``
        means the window half-width.
    bundle_eps : float
        ``eps`` used by the bundle gap test before a certificate exists.
    strict_margin : float
        A fitted ``log alpha + 2 log eps`` must lie below ``-strict_margin``
        to count as strong; this absorbs the resolution of the bisection.
    """

    alpha_grid: Sequence[float] | None = None
    eps_grid: Sequence[float] | None = None
    cap: float = 1e12
    saturation_tol: float = 1e-9
    exponent: str = "absolute"
    horizon: int | None = None
    bundle_eps: float = 1.0
    strict_margin: float = 1e-7

    def __post_init__(self) -> None:
        if self.exponent not in ("absolute", "signed"):
            raise ValueError(f"unknown nonuniform_exponent {self.exponent!r}")
        if not (self.cap > 1 and self.saturation_tol > 0 and self.bundle_eps >= 1):
            raise ValueError("cap must exceed 1, saturation_tol be positive and bundle_eps >= 1")
        if self.horizon is not None and int(self.horizon) < 0:
            raise ValueError("horizon must be nonnegative")

    @property
    def log_cap(self) -> float:
        return float(np.log(self.cap))

    def horizon_for(self, window: Window) -> int:
        return int(self.horizon) if self.horizon is not None else max(window.half_width, 1)


class ProjectorSequence:
    """Invariant projectors ``P_k`` over a window, carried as subspace bases.

    ``P_k`` has range ``span V_k`` and kernel ``span U_k``; both bases are
    orthonormal.  Invariance ``P_{k+1} A_k = A_k P_k`` holds because
    ``V_{k+1}`` and ``U_{k+1}`` span the images of ``V_k`` and ``U_k``.

    Attributes
    ----------
    l_ref : int
    P_ref : ndarray
        Projector at the reference index.
    window : Window
    rank : int
    source : str
        ``"propagated"`` (conjugation of ``P_ref``) or ``"anchored"``
        (bases pulled in from beyond the window).
    invariance_residual : float
        ``max_k ||P_{k+1} A_k - A_k P_k|| / (||A_k|| max(1, ||P_k||))``.
    """

    def __init__(self, sys: MatrixSequence, window: Window, V: np.ndarray, U: np.ndarray,
                 l_ref: int, source: str) -> None:
        self.window = window
        self.V = V
        self.U = U
        self.rank = V.shape[2]
        self.dimension = V.shape[1]
        self.l_ref = int(l_ref)
        self.source = source
        self._Yt, self._Zt, self.transversality = dual_rows(V, U)
        if l_ref in window:
            self.P_ref = self.at(l_ref)
        else:
            self.P_ref = None
        self.invariance_residual = self._invariance(sys)

    def _invariance(self, sys: MatrixSequence) -> float:
        if self.window.size < 2:
            return 0.0
        A = sys.matrices(self.window.k_min, self.window.k_max - 1)
        P = self.projectors()
        res = np.einsum("kij,kjl->kil", P[1:], A) - np.einsum("kij,kjl->kil", A, P[:-1])
        scale = np.linalg.norm(A, 2, axis=(1, 2)) * np.maximum(1.0, np.linalg.norm(P[:-1], 2, axis=(1, 2)))
        return float(np.max(np.linalg.norm(res, 2, axis=(1, 2)) / scale))

    def _idx(self, k: int) -> int:
        if k not in self.window:
            raise IndexOutOfRange(f"index {k} outside projector window {self.window}")
        return k - self.window.k_min

    def at(self, k: int) -> np.ndarray:
        i = self._idx(k)
        return self.V[i] @ self._Yt[i]

    def projectors(self) -> np.ndarray:
        return np.einsum("kij,kjl->kil", self.V, self._Yt)

    def bases(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        i = self._idx(k)
        return self.V[i], self.U[i]

    def restrict(self, sys: MatrixSequence, window: Window) -> "ProjectorSequence":
        if window.k_min < self.window.k_min or window.k_max > self.window.k_max:
            raise IndexOutOfRange(f"{window} not inside projector window {self.window}")
        s = slice(window.k_min - self.window.k_min, window.k_max - self.window.k_min + 1)
        l_ref = self.l_ref if self.l_ref in window else window.midpoint
        return ProjectorSequence(sys, window, self.V[s], self.U[s], l_ref, self.source)

    def ranks(self, tol: float = 1e-8) -> np.ndarray:
        sv = np.linalg.svd(self.projectors(), compute_uv=False)
        return np.sum(sv > tol, axis=1)

    def __repr__(self) -> str:
        return f"ProjectorSequence(rank={self.rank}, window={self.window}, source={self.source!r})"


def propagate_projector(sys: MatrixSequence, P_ref, l_ref: int, w: Window) -> ProjectorSequence:
    """Transport ``P_ref`` from ``l_ref`` over ``w`` by conjugation.

    ``P_k = Phi(k, l_ref) P_ref Phi(l_ref, k)``, realised through the range
    and kernel bases of ``P_ref``.

    Raises
    ------
    NotAProjector
        If ``P_ref`` is not idempotent to ``1e-8``.
    IndexOutOfRange
    """
    P_ref = np.atleast_2d(np.asarray(P_ref, dtype=float))
    if P_ref.shape != (sys.dimension, sys.dimension):
        raise NotAProjector(f"projector shape {P_ref.shape} does not match N={sys.dimension}")
    V, U = propagated_bases(sys, P_ref, int(l_ref), w)
    out = ProjectorSequence(sys, w, V, U, int(l_ref), "propagated")
    if l_ref not in w:
        out.P_ref = P_ref
    return out


def spectral_projector(sys: MatrixSequence, rank: int, w: Window, horizon: int | None = None) -> ProjectorSequence:
    """Invariant projector whose range contracts fastest, anchored beyond ``w``.

    The range is the ``rank``-dimensional subspace of fastest forward
    contraction and the kernel the complementary subspace of fastest
    backward contraction, both estimated from ``horizon`` steps beyond the
    window (clipped to a table's range).
    """
    if not 0 <= rank <= sys.dimension:
        raise ValueError(f"rank must lie in [0, {sys.dimension}]")
    horizon = max(w.half_width, 1) if horizon is None else int(horizon)
    V, U = anchored_bases(sys, int(rank), w, horizon)
    return ProjectorSequence(sys, w, V, U, w.midpoint, "anchored")


@dataclass(frozen=True)
class DichotomyCertificate:
    """Claimed dichotomy constants for a projector sequence."""

    projector: ProjectorSequence
    K: float
    alpha: float
    epsilon: float
    flavor: str = "NED"
    exponent: str = "absolute"

    def __post_init__(self) -> None:
        if self.flavor not in FLAVORS:
            raise ValueError(f"flavor must be one of {FLAVORS}")
        if not self.K >= 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.epsilon >= 1:
            raise ValueError(f"epsilon must be >= 1, got {self.epsilon}")
        if self.flavor == "uniform_ED" and self.epsilon != 1:
            raise ValueError("a uniform_ED certificate needs epsilon = 1")
        if self.flavor == "strong_NED" and not self.alpha * self.epsilon**2 < 1:
            raise ValueError("a strong_NED certificate needs alpha * epsilon^2 < 1")
        if self.exponent not in ("absolute", "signed"):
            raise ValueError(f"unknown exponent convention {self.exponent!r}")

    def to_dict(self) -> dict:
        P = self.projector.P_ref
        return {
            "projector": {
                "matrix": None if P is None else np.asarray(P).tolist(),
                "reference_index": self.projector.l_ref,
                "rank": self.projector.rank,
            },
            "K": self.K,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "flavor": self.flavor,
            "nonuniform_exponent": self.exponent,
        }


@dataclass
class ViolationReport:
    """Worst log-excess of each dichotomy estimate over a window.

    The excess of a pair is ``log ||Phi(k, l) P_l|| - log(K alpha^D eps^lam)``;
    ``passed`` holds when both maxima are at most ``1e-9``.
    """

    max_stable_excess: float
    max_unstable_excess: float
    stable_witness: tuple[int, int] | None
    unstable_witness: tuple[int, int] | None
    window: Window
    tolerance: float = EXCESS_TOL
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        self.passed = bool(self.max_stable_excess <= self.tolerance and self.max_unstable_excess <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "max_stable_excess": _finite_or_none(self.max_stable_excess),
            "max_unstable_excess": _finite_or_none(self.max_unstable_excess),
            "stable_witness": None if self.stable_witness is None else list(self.stable_witness),
            "unstable_witness": None if self.unstable_witness is None else list(self.unstable_witness),
            "window": self.window.as_list(),
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _finite_or_none(x: float):
    return float(x) if np.isfinite(x) else None


@dataclass(frozen=True)
class GrowthBound:
    """Constants of ``||Phi(k, l)|| <= K a^|k - l| eps^lam(l)``."""

    K: float
    a: float
    epsilon: float

    def bracket(self) -> tuple[float, float]:
        """Weights outside which the system is certainly resolvent.

        For a strong dichotomy the nonuniform factor costs ``eps^2`` on
        each side, so the bracket is ``[1 / (a eps^2), a eps^2]``.
        """
        w = self.a * self.epsilon**2
        return 1.0 / w, w


def _projector_on(sys: MatrixSequence, proj: ProjectorSequence, w: Window) -> ProjectorSequence:
    pw = proj.window
    if pw.k_min <= w.k_min and w.k_max <= pw.k_max:
        return proj if pw == w else proj.restrict(sys, w)
    if proj.P_ref is None:
        raise IndexOutOfRange(f"projector window {pw} does not cover {w}")
    return propagate_projector(sys, proj.P_ref, proj.l_ref, w)


def projector_tables(sys: MatrixSequence, proj: ProjectorSequence, w: Window) -> tuple[PairTable, PairTable]:
    p = _projector_on(sys, proj, w)
    st, un, _ = projected_log_norms(sys, p.V, p.U, w)
    return st, un


def _excess(table: PairTable, logK: float, theta: float, s: float, exponent: str) -> np.ndarray:
    return table.loge - logK - theta * table.D - s * nonuniform_lam(table.l, exponent)


def certificate_excess(sys: MatrixSequence, cert: DichotomyCertificate, w: Window):
    """Per-pair log-excess of both estimates.

    Returns
    -------
    (stable, unstable) : tuple of (k, l, excess) array triples
    """
    st, un = projector_tables(sys, cert.projector, w)
    logK, th, s = np.log(cert.K), np.log(cert.alpha), np.log(cert.epsilon)
    return (
        (st.k, st.l, _excess(st, logK, th, s, cert.exponent)),
        (un.k, un.l, _excess(un, logK, th, s, cert.exponent)),
    )


def verify_certificate(sys: MatrixSequence, cert: DichotomyCertificate, w: Window) -> ViolationReport:
    """Check both dichotomy estimates exhaustively over ``w``.

    Examples
    --------
    >>> sys = MatrixSequence.constant([[0.5]])
    >>> P = propagate_projector(sys, [[1.0]], 0, Window(-5, 5))
    >>> verify_certificate(sys, DichotomyCertificate(P, 1.0, 0.5, 1.0, "uniform_ED"), Window(-5, 5)).passed
    True
    """
    (sk, sl, se), (uk, ul, ue) = certificate_excess(sys, cert, w)

    def worst(k, l, e):
        if e.size == 0:
            return -np.inf, None
        i = int(np.argmax(e))
        return float(e[i]), (int(k[i]), int(l[i]))

    ms, ws = worst(sk, sl, se)
    mu, wu = worst(uk, ul, ue)
    return ViolationReport(ms, mu, ws, wu, w)


def minimal_log_constant(sys: MatrixSequence, proj: ProjectorSequence, w: Window, alpha: float,
                         epsilon: float, exponent: str = "absolute") -> float:
    """``log K`` of the smallest constant making the estimates hold on ``w``."""
    st, un = projector_tables(sys, proj, w)
    th, s = np.log(alpha), np.log(epsilon)
    vals = [_excess(t, 0.0, th, s, exponent).max() for t in (st, un) if len(t)]
    return float(max(vals))


def is_strong(cert) -> bool:
    """Whether ``alpha * epsilon^2 < 1``.  Accepts a certificate or an ``(alpha, eps)`` pair."""
    if isinstance(cert, DichotomyCertificate):
        alpha, eps = cert.alpha, cert.epsilon
    else:
        alpha, eps = cert
    return bool(alpha * eps**2 < 1)


def _clean_grid(values, name: str, check) -> np.ndarray:
    arr = np.asarray(list(values), dtype=float).ravel()
    if arr.size == 0:
        raise EmptyGrid(f"{name} is empty")
    bad = ~check(arr)
    if np.any(bad):
        raise ValueError(f"{name} has out-of-range values {arr[bad][:3].tolist()}")
    return np.unique(arr)


def fit_constants(
    sys: MatrixSequence,
    proj: ProjectorSequence,
    w: Window,
    alpha_grid: Sequence[float] | None = None,
    eps_grid: Sequence[float] | None = None,
    config: FitConfig | None = None,
) -> DichotomyCertificate | Infeasible:
    """Best strong certificate over a grid of ``(alpha, eps)`` pairs.

    For each pair the minimal ``K`` is the exponential of the largest
    log-excess over ``w``.  A pair is admissible when ``alpha eps^2 < 1``,
    ``K`` stays below ``config.cap`` and the excess is saturated (it does
    not trend upward towards the window edge, see :mod:`nedspec._fit`).
    Among admissible pairs the smallest ``alpha eps^2`` wins, then the
    smaller ``K``, then the smaller ``eps``.

    Returns
    -------
    DichotomyCertificate or Infeasible

    Raises
    ------
    EmptyGrid
    """
    config = config or FitConfig()
    alphas = _clean_grid(default_alpha_grid() if alpha_grid is None else alpha_grid, "alpha_grid",
                         lambda a: (a > 0) & (a < 1))
    epss = _clean_grid(default_eps_grid() if eps_grid is None else eps_grid, "eps_grid", lambda e: e >= 1)
    p = _projector_on(sys, proj, w)
    st, un = projector_tables(sys, p, w)
    halves = [build_half(t, w, config.exponent) for t in (st, un)]
    tol, log_cap = config.saturation_tol, config.log_cap
    best = None
    for eps in epss:
        s = float(np.log(eps))
        for alpha in alphas:
            if not alpha * eps**2 < 1:
                continue
            th = float(np.log(alpha))
            cs = []
            ok = True
            for h in halves:
                c, sat = h.evaluate(th, s, tol)
                ok &= sat and c <= log_cap
                cs.append(c)
            if not ok:
                continue
            logK = max(max(cs), 0.0)
            key = (round(th + 2 * s, 12), logK, s)
            if best is None or key < best[0]:
                best = (key, alpha, eps, logK)
    if best is None:
        return Infeasible(f"no saturated (alpha, eps) pair with alpha*eps^2 < 1 and K <= {config.cap:g} on {w}")
    _, alpha, eps, logK = best
    flavor = "uniform_ED" if eps == 1 else "strong_NED"
    return DichotomyCertificate(p, float(np.exp(logK)), float(alpha), float(eps), flavor, config.exponent)


def full_norm_tables(sys: MatrixSequence, w: Window) -> tuple[PairTable, PairTable]:
    """Log-norms of ``Phi(k, l)`` forward (k >= l) and backward (k <= l)."""
    N = sys.dimension
    n = w.size
    eye = np.broadcast_to(np.eye(N), (n, N, N))
    none = np.empty((n, N, 0))
    fwd, _, _ = projected_log_norms(sys, eye, none, w)
    _, bwd, _ = projected_log_norms(sys, none, eye, w)
    return fwd, bwd


def fit_growth_bound(
    sys: MatrixSequence,
    w: Window,
    eps_grid: Sequence[float] | None = None,
    config: FitConfig | None = None,
) -> GrowthBound:
    """Fit ``||Phi(k, l)|| <= K a^|k - l| eps^lam(l)`` on ``w``.

    For each ``eps`` the smallest saturated ``log a >= 0`` is found by
    bisection; the triple with the smallest ``a`` is returned, ties going
    to the smaller ``eps``.

    Raises
    ------
    EmptyGrid
    """
    config = config or FitConfig()
    epss = _clean_grid(default_eps_grid() if eps_grid is None else eps_grid, "eps_grid", lambda e: e >= 1)
    fwd, bwd = full_norm_tables(sys, w)
    halves = [build_half(t, w, config.exponent) for t in (fwd, bwd)]
    tol, log_cap = config.saturation_tol, config.log_cap
    fits = []
    for eps in epss:
        s = float(np.log(eps))
        th = max(max(h.min_theta(s, tol, log_cap) for h in halves), 0.0)
        if np.isfinite(th):
            fits.append((th, s, eps))
    if not fits:
        raise EmptyGrid(f"no eps in the grid gives a saturated growth bound on {w}")
    # bisection resolves log a only to about the saturation tolerance, so
    # rates that agree to 1e-9 count as ties and the smaller eps wins
    th_min = min(f[0] for f in fits)
    th, s, eps = min((f for f in fits if f[0] <= th_min + 1e-9), key=lambda f: f[1])
    c = max(h.evaluate(th, s, tol)[0] for h in halves)
    return GrowthBound(K=float(np.exp(c)), a=float(np.exp(th)), epsilon=float(eps))
