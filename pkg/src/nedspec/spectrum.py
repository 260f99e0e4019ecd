"""Dichotomy spectrum, stable and unstable bundles, and spectral bundles.

A weight ``gamma > 0`` is *resolvent* when the weighted system
``x_{k+1} = A_k x_k / gamma`` admits a strong nonuniform dichotomy; the
spectrum is the complement.  On a finite window the test is carried out by
fitting saturated certificates (see :mod:`nedspec._fit`) for invariant
projectors of every rank, and the spectrum is located by a log-spaced scan
followed by bisection of every change of verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._bases import qr_growth
from ._fit import build_half, minimize_strong, nonuniform_lam
from .dichotomy import (
    DichotomyCertificate,
    FitConfig,
    GrowthBound,
    ProjectorSequence,
    fit_growth_bound,
    projector_tables,
    spectral_projector,
)
from .errors import (
    BracketNotResolvent,
    FiberMismatch,
    IndexOutOfRange,
    NedError,
    NonMonotoneDims,
    NonpositiveWeight,
    NoSpectralGap,
    WhitneyFailure,
)
from .system import MatrixSequence, Window

__all__ = [
    "BundleBasis",
    "ResolventVerdict",
    "SpectrumEstimate",
    "SpectrumWorkspace",
    "stable_bundle",
    "unstable_bundle",
    "resolvent_test",
    "estimate_spectrum",
    "spectral_bundles",
    "intersect_subspaces",
    "interval_hausdorff",
    "compare_with_candidates",
    "reference_bands",
]

GAP_FACTOR = math.log(2.0)
TRANSVERSALITY_MIN = 1e-8
ANGLE_TOL = 1e-8
REFERENCE_RTOL = 5e-3


@dataclass(frozen=True)
class BundleBasis:
    """Orthonormal basis (columns of ``basis``) of one fiber of a bundle."""

    fiber_index: int
    basis: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[1] > b.shape[0]:
            raise ValueError("basis must be an N x dim array with dim <= N")
        if b.shape[1] and np.linalg.norm(b.T @ b - np.eye(b.shape[1])) > 1e-10:
            raise ValueError("basis vectors are not orthonormal")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def to_dict(self) -> dict:
        return {"fiber_index": self.fiber_index, "dim": self.dim, "basis": self.basis.T.tolist()}


def _bundle(sys, gamma, l, horizon, eps, dim, exponent, forward):
    if not gamma > 0:
        raise NonpositiveWeight(f"gamma must be positive, got {gamma}")
    Q, logs = qr_growth(sys, int(l), int(horizon), forward=forward)
    g = math.log(gamma)
    weighted = logs - horizon * g if forward else logs + horizon * g
    N = sys.dimension
    if dim is None:
        thr = float(nonuniform_lam(np.array([l]), exponent)[0]) * math.log(eps)
        if np.any(np.abs(weighted - thr) < GAP_FACTOR):
            raise NoSpectralGap(
                f"weighted growth {np.round(weighted, 3).tolist()} within a factor 2 of the threshold at gamma={gamma:g}"
            )
        dim = int(np.sum(weighted <= thr))
    if not 0 <= dim <= N:
        raise ValueError(f"dim must lie in [0, {N}]")
    return BundleBasis(int(l), Q[:, N - dim :].copy())


def stable_bundle(sys: MatrixSequence, gamma: float, l: int, horizon: int, eps: float = 1.0,
                  dim: int | None = None, exponent: str = "absolute") -> BundleBasis:
    """Directions at fiber ``l`` with bounded weighted forward growth.

    The right singular frame of ``Phi_gamma(l + horizon, l)`` is obtained by
    QR iteration on the transposed factors; the bundle is spanned by the
    directions whose weighted log-growth lies below ``lam(l) log eps``.

    Parameters
    ----------
    dim : int, optional
        Force the dimension instead of counting directions below the
        threshold (used once the dimension is known from a certificate).

    Raises
    ------
    NoSpectralGap
        If a weighted growth lies within a factor 2 of the threshold.
    """
    return _bundle(sys, gamma, l, horizon, eps, dim, exponent, forward=True)


def unstable_bundle(sys: MatrixSequence, gamma: float, l: int, horizon: int, eps: float = 1.0,
                    dim: int | None = None, exponent: str = "absolute") -> BundleBasis:
    """Directions at fiber ``l`` with bounded weighted backward growth.

    Mirror of :func:`stable_bundle` built from ``Phi_gamma(l - horizon, l)``.
    """
    return _bundle(sys, gamma, l, horizon, eps, dim, exponent, forward=False)


def intersect_subspaces(B1: BundleBasis, B2: BundleBasis) -> BundleBasis:
    """Intersection of two fibers from their principal angles.

    Directions whose principal cosine exceeds ``1 - 1e-8`` are kept.

    Raises
    ------
    FiberMismatch
    """
    if B1.fiber_index != B2.fiber_index or B1.ambient != B2.ambient:
        raise FiberMismatch(
            f"fibers ({B1.fiber_index}, N={B1.ambient}) and ({B2.fiber_index}, N={B2.ambient}) differ"
        )
    if B1.dim == 0 or B2.dim == 0:
        return BundleBasis(B1.fiber_index, np.zeros((B1.ambient, 0)))
    u, cos, _ = np.linalg.svd(B1.basis.T @ B2.basis)
    keep = cos > 1 - ANGLE_TOL
    basis = np.linalg.qr(B1.basis @ u[:, : len(cos)][:, keep])[0] if keep.any() else np.zeros((B1.ambient, 0))
    return BundleBasis(B1.fiber_index, basis)


@dataclass
class ResolventVerdict:
    """Classification of one weight.

    ``status`` is ``"resolvent"`` when a strong certificate was fitted on the
    window, ``"spectrum"`` when none exists on the window nor on the doubled
    window, and ``"undecided"`` when only the doubled window admits one.
    """

    gamma: float
    status: str
    certificate: DichotomyCertificate | None = None
    stable_dim: int | None = None
    window: Window | None = None
    gap_ambiguous: bool = False
    margin: float | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.status not in ("resolvent", "spectrum", "undecided"):
            raise ValueError(f"bad status {self.status!r}")
        if (self.status == "resolvent") != (self.certificate is not None):
            raise ValueError("a certificate is present exactly for resolvent verdicts")

    @property
    def label(self) -> tuple:
        return ("R", self.stable_dim) if self.status == "resolvent" else ("S",)

    def to_dict(self) -> dict:
        d = {"gamma": self.gamma, "status": self.status, "stable_dim": self.stable_dim,
             "gap_ambiguous": self.gap_ambiguous, "note": self.note}
        if self.margin is not None and np.isfinite(self.margin):
            d["log_alpha_eps2"] = self.margin
        if self.certificate is not None:
            d["certificate"] = self.certificate.to_dict()
        return d


class SpectrumWorkspace:
    """Cache of projectors and reduced fit data for one system.

    Everything cached here is independent of ``gamma``: the weight only
    shears the fitted rate, so one set of projected norms per projector rank
    and window serves the whole scan.
    """

    def __init__(self, sys: MatrixSequence, config: FitConfig, horizon: int) -> None:
        self.sys = sys
        self.config = config
        self.horizon = int(horizon)
        self._data: dict = {}
        self._growth: dict = {}

    def data(self, r: int, window: Window):
        key = (r, window)
        if key not in self._data:
            try:
                proj = spectral_projector(self.sys, r, window, self.horizon)
            except (NedError, np.linalg.LinAlgError) as exc:
                self._data[key] = (None, None, None, str(exc))
                return self._data[key]
            if proj.transversality < TRANSVERSALITY_MIN:
                self._data[key] = (proj, None, None, "stable and unstable bases nearly dependent")
                return self._data[key]
            st, un = projector_tables(self.sys, proj, window)
            self._data[key] = (
                proj,
                build_half(st, window, self.config.exponent),
                build_half(un, window, self.config.exponent),
                "",
            )
        return self._data[key]

    def growth_logs(self, window: Window) -> np.ndarray:
        if window not in self._growth:
            m = window.midpoint
            h = self.horizon
            rng = self.sys.k_range
            if rng is not None:
                h = max(0, min(h, rng[1] + 1 - m))
            self._growth[window] = (h, qr_growth(self.sys, m, h, forward=True)[1])
        return self._growth[window]

    def gap_guess(self, g: float, window: Window) -> tuple[int, bool]:
        """Stable dimension suggested by the singular-value split at the midpoint."""
        h, logs = self.growth_logs(window)
        if h == 0:
            return self.sys.dimension // 2, True
        weighted = logs - h * g
        lam = float(nonuniform_lam(np.array([window.midpoint]), self.config.exponent)[0])
        thr = lam * math.log(self.config.bundle_eps)
        return int(np.sum(weighted <= thr)), bool(np.any(np.abs(weighted - thr) < GAP_FACTOR))

    def attempt(self, g: float, window: Window):
        """Try every projector rank, nearest to the gap guess first.

        Returns ``(certificate, rank, margin, gap_ambiguous)``; the
        certificate is ``None`` when no rank admits a strong dichotomy.
        """
        N = self.sys.dimension
        r0, ambiguous = self.gap_guess(g, window)
        order = sorted(range(N + 1), key=lambda r: (abs(r - r0), r))
        best_margin = np.inf
        cfg = self.config
        for r in order:
            proj, st, un, _ = self.data(r, window)
            if st is None:
                continue
            fit = minimize_strong(st, un, g, cfg.saturation_tol, cfg.log_cap)
            if fit is None:
                continue
            best_margin = min(best_margin, fit.margin)
            if fit.margin < -cfg.strict_margin and fit.theta < -cfg.strict_margin and fit.c <= cfg.log_cap:
                eps = math.exp(fit.s)
                cert = DichotomyCertificate(
                    proj,
                    K=math.exp(max(fit.c, 0.0)),
                    alpha=math.exp(fit.theta),
                    epsilon=eps,
                    flavor="uniform_ED" if eps == 1.0 else "strong_NED",
                    exponent=cfg.exponent,
                )
                return cert, r, fit.margin, ambiguous
        return None, None, best_margin, ambiguous

    def classify(self, gamma: float, window: Window) -> ResolventVerdict:
        if not gamma > 0:
            raise NonpositiveWeight(f"gamma must be positive, got {gamma}")
        g = math.log(gamma)
        cert, r, margin, amb = self.attempt(g, window)
        if cert is not None:
            return ResolventVerdict(gamma, "resolvent", cert, r, window, amb, margin)
        try:
            big = window.doubled().clipped(self.sys.k_range)
        except IndexOutOfRange:
            big = window
        if big == window:
            return ResolventVerdict(gamma, "spectrum", None, None, window, amb, margin,
                                    "no larger window available for the confirmation fit")
        cert2, r2, _, _ = self.attempt(g, big)
        if cert2 is not None:
            return ResolventVerdict(gamma, "undecided", None, None, window, amb, margin,
                                    f"strong dichotomy with stable rank {r2} only on {big.as_list()}")
        return ResolventVerdict(gamma, "spectrum", None, None, window, amb, margin)


def resolvent_test(sys: MatrixSequence, gamma: float, w: Window, fit_config: FitConfig | None = None,
                   workspace: SpectrumWorkspace | None = None) -> ResolventVerdict:
    """Decide whether ``gamma`` lies in the resolvent set.

    Projectors of every rank are tried, starting from the stable dimension
    suggested by the singular-value split at the window midpoint.  For each
    the rate ``log alpha + 2 log eps`` of the best saturated certificate of
    the weighted system is minimised; a negative value proves a strong
    dichotomy on ``w``.

    Returns
    -------
    ResolventVerdict
        ``resolvent`` with its certificate, ``spectrum`` when neither ``w``
        nor the doubled window admits a certificate, ``undecided`` when only
        the doubled window does.
    """
    config = fit_config or FitConfig()
    ws = workspace or SpectrumWorkspace(sys, config, config.horizon_for(w))
    return ws.classify(float(gamma), w)


@dataclass
class SpectrumEstimate:
    """Interval structure of the spectrum found on a window.

    Attributes
    ----------
    intervals : list of (float, float)
        Enclosures ``[a_i, b_i]`` whose endpoints are resolvent weights
        within ``bisect_tol`` of a non-resolvent weight (or of a change of
        stable dimension).
    endpoint_brackets : list of dict
        For each interval, the sample pairs ``(resolvent, other)`` that
        bracket its endpoints.
    unbounded_left, unbounded_right : bool
        Set when the scan bracket itself is not resolvent (only when
        ``strict_bracket`` is off).
    cut_points : list of float
        Resolvent weights ``gamma_0 < ... < gamma_n`` separating intervals.
    cut_verdicts : list of ResolventVerdict
    stable_dims : list of int
        Stable dimension at each cut point.
    samples : list of ResolventVerdict
        Every classified weight in increasing order.
    saturated : bool
        Whether every boundary was confirmed on the doubled window and no
        weight was left undecided.
    """

    intervals: list
    endpoint_brackets: list
    unbounded_left: bool
    unbounded_right: bool
    cut_points: list
    cut_verdicts: list
    stable_dims: list
    samples: list
    window: Window
    bracket: tuple
    bisect_tol: float
    saturated: bool
    growth_bound: GrowthBound | None = None
    diagnostics: list = field(default_factory=list)
    references: dict | None = None

    @property
    def n(self) -> int:
        return len(self.intervals)

    def log_intervals(self) -> list:
        return [(math.log(a), math.log(b)) for a, b in self.intervals]

    def scan_rows(self) -> list:
        return [(v.gamma, v.status, v.stable_dim) for v in self.samples]

    def to_dict(self) -> dict:
        d = {
            "intervals": [[a, b] for a, b in self.intervals],
            "endpoint_brackets": self.endpoint_brackets,
            "unbounded_left": self.unbounded_left,
            "unbounded_right": self.unbounded_right,
            "cut_points": list(self.cut_points),
            "stable_dims": list(self.stable_dims),
            "cut_verdicts": [v.to_dict() for v in self.cut_verdicts],
            "window": self.window.as_list(),
            "bracket": list(self.bracket),
            "bisect_tol": self.bisect_tol,
            "saturated": self.saturated,
            "n_samples": len(self.samples),
            "diagnostics": list(self.diagnostics),
        }
        if self.growth_bound is not None:
            gb = self.growth_bound
            d["growth_bound"] = {"K": gb.K, "a": gb.a, "epsilon": gb.epsilon}
        if self.references is not None:
            d["references"] = self.references
        return d


def _default_bracket(sys, w, config) -> tuple[tuple[float, float], GrowthBound]:
    gb = fit_growth_bound(sys, w, config.eps_grid, config)
    lo, hi = gb.bracket()
    return (lo / 2.0, hi * 2.0), gb


def estimate_spectrum(
    sys: MatrixSequence,
    w: Window,
    gamma_bracket: Sequence[float] | None = None,
    bisect_tol: float = 1e-3,
    fit_config: FitConfig | None = None,
    n_scan: int = 33,
    strict_bracket: bool = True,
    strict_dims: bool = False,
    check_saturation: bool = True,
) -> SpectrumEstimate:
    """Locate the spectral intervals inside a bracket of weights.

    Parameters
    ----------
    sys : MatrixSequence
    w : Window
    gamma_bracket : (float, float), optional
        Scan range.  Defaults to the growth-bound bracket
        ``[1 / (a eps^2), a eps^2]`` widened by a factor 2 on each side.
    bisect_tol : float
        Relative width to which every change of verdict is bisected.
    n_scan : int
        Number of log-spaced weights in the initial scan.
    strict_bracket : bool
        Raise :class:`BracketNotResolvent` when a bracket endpoint is not
        resolvent; otherwise report an unbounded interval.
    strict_dims : bool
        Raise :class:`NonMonotoneDims` instead of recording a diagnostic.
    check_saturation : bool
        Re-test every boundary on the doubled window: the samples on both
        sides of each boundary must keep their verdict and stable dimension.

    Returns
    -------
    SpectrumEstimate
    """
    if not bisect_tol > 0:
        raise ValueError("bisect_tol must be positive")
    config = fit_config or FitConfig()
    gb = None
    if gamma_bracket is None:
        (lo, hi), gb = _default_bracket(sys, w, config)
    else:
        lo, hi = (float(x) for x in gamma_bracket)
        if not 0 < lo < hi:
            raise ValueError("gamma_bracket must satisfy 0 < lo < hi")
    ws = SpectrumWorkspace(sys, config, config.horizon_for(w))
    samples: dict[float, ResolventVerdict] = {}

    def classify(gamma: float) -> ResolventVerdict:
        if gamma not in samples:
            samples[gamma] = ws.classify(gamma, w)
        return samples[gamma]

    # each boundary is bracketed to half the tolerance, so an interval
    # around a single point is at most bisect_tol wide
    half_tol = 0.5 * math.log1p(bisect_tol)
    grid = np.geomspace(lo, hi, max(int(n_scan), 2))
    scan = [classify(float(x)) for x in grid]

    def refine(a: ResolventVerdict, b: ResolventVerdict) -> None:
        if math.log(b.gamma / a.gamma) <= half_tol:
            return
        m = classify(math.sqrt(a.gamma * b.gamma))
        if m.label != a.label:
            refine(a, m)
        if m.label != b.label:
            refine(m, b)

    for a, b in zip(scan[:-1], scan[1:]):
        if a.label != b.label:
            refine(a, b)

    ordered = [samples[x] for x in sorted(samples)]
    diagnostics: list[str] = []
    intervals, brackets = [], []
    unb_left = unb_right = False
    i = 0
    n_s = len(ordered)
    while i < n_s:
        v = ordered[i]
        if v.status != "resolvent":
            j = i
            while j + 1 < n_s and ordered[j + 1].status != "resolvent":
                j += 1
            left = ordered[i - 1] if i > 0 else None
            right = ordered[j + 1] if j + 1 < n_s else None
            if left is None:
                unb_left = True
            if right is None:
                unb_right = True
            a = left.gamma if left is not None else lo
            b = right.gamma if right is not None else hi
            intervals.append((a, b))
            brackets.append({
                "left": None if left is None else [left.gamma, ordered[i].gamma],
                "right": None if right is None else [ordered[j].gamma, right.gamma],
            })
            i = j + 1
            continue
        if i + 1 < n_s and ordered[i + 1].status == "resolvent" and ordered[i + 1].stable_dim != v.stable_dim:
            nxt = ordered[i + 1]
            intervals.append((v.gamma, nxt.gamma))
            brackets.append({"left": [v.gamma, nxt.gamma], "right": [v.gamma, nxt.gamma]})
        i += 1

    if (unb_left or unb_right) and strict_bracket:
        side = "lower" if unb_left else "upper"
        raise BracketNotResolvent(
            f"the {side} end of the bracket [{lo:.6g}, {hi:.6g}] is not resolvent; widen the bracket"
        )

    res = [v for v in ordered if v.status == "resolvent"]
    cut_verdicts: list[ResolventVerdict] = []
    if intervals and res:
        if not unb_left:
            cut_verdicts.append(res[0])
        for (a1, b1), (a2, b2) in zip(intervals[:-1], intervals[1:]):
            inside = [v for v in res if b1 <= v.gamma <= a2]
            mid = 0.5 * (math.log(b1) + math.log(a2))
            cut_verdicts.append(min(inside, key=lambda v: abs(math.log(v.gamma) - mid)))
        if not unb_right:
            cut_verdicts.append(res[-1])
    elif res:
        cut_verdicts.append(res[0])
    dims = [v.stable_dim for v in cut_verdicts]
    all_dims = [v.stable_dim for v in res]
    if any(d2 < d1 for d1, d2 in zip(all_dims[:-1], all_dims[1:])):
        msg = f"stable dimensions decrease along increasing weights: {all_dims}"
        if strict_dims:
            raise NonMonotoneDims(msg)
        diagnostics.append(msg)

    saturated = not any(v.status == "undecided" for v in ordered)
    if any(v.status == "undecided" for v in ordered):
        diagnostics.append("some weights are undecided between the window and its double")
    if check_saturation and intervals:
        big = w.doubled().clipped(sys.k_range)
        if big == w:
            saturated = False
            diagnostics.append("the doubled window is not available; saturation unconfirmed")
        else:
            # the samples bracketing each boundary lie within bisect_tol of it;
            # if they keep their verdicts on the doubled window the boundary
            # moved by less than that
            for br in brackets:
                for pair in (br["left"], br["right"]):
                    if pair is None:
                        continue
                    for gamma in pair:
                        v = samples[gamma]
                        cert, r, _, _ = ws.attempt(math.log(gamma), big)
                        same = (cert is not None and r == v.stable_dim) if v.status == "resolvent" else cert is None
                        if not same:
                            saturated = False
                            diagnostics.append(
                                f"verdict at gamma={gamma:.6g} changes on the doubled window {big.as_list()}"
                            )
    if gb is not None:
        blo, bhi = gb.bracket()
        for a, b in intervals:
            if a < blo * (1 - bisect_tol) or b > bhi * (1 + bisect_tol):
                diagnostics.append(f"interval [{a:.6g}, {b:.6g}] leaves the growth bracket [{blo:.6g}, {bhi:.6g}]")

    est = SpectrumEstimate(
        intervals=intervals,
        endpoint_brackets=brackets,
        unbounded_left=unb_left,
        unbounded_right=unb_right,
        cut_points=[v.gamma for v in cut_verdicts],
        cut_verdicts=cut_verdicts,
        stable_dims=dims,
        samples=ordered,
        window=w,
        bracket=(lo, hi),
        bisect_tol=bisect_tol,
        saturated=saturated,
        growth_bound=gb,
        diagnostics=diagnostics,
    )
    bands = reference_bands(sys)
    if bands is not None and intervals:
        est.references = compare_with_candidates(est, bands, REFERENCE_RTOL)
    return est


def spectral_bundles(sys: MatrixSequence, est: SpectrumEstimate, l: int, horizon: int) -> list[BundleBasis]:
    """Fibers ``W_0, ..., W_{n+1}`` of the spectral bundles at index ``l``.

    ``W_0 = S_{gamma_0}``, ``W_i = U_{gamma_{i-1}} cap S_{gamma_i}`` and
    ``W_{n+1} = U_{gamma_n}``, each bundle evaluated with the stable
    dimension certified at its cut point.  A missing outer cut (unbounded
    interval) gives the trivial fiber.

    Raises
    ------
    WhitneyFailure
        If the fibers do not add up to a direct sum of ``R^N``.
    """
    N = sys.dimension
    cuts = list(zip(est.cut_points, est.stable_dims, est.cut_verdicts))
    exp_ = cuts[0][2].certificate.exponent if cuts else "absolute"

    def S(c):
        return stable_bundle(sys, c[0], l, horizon, c[2].certificate.epsilon, dim=c[1], exponent=exp_)

    def U(c):
        return unstable_bundle(sys, c[0], l, horizon, c[2].certificate.epsilon, dim=N - c[1], exponent=exp_)

    zero = BundleBasis(int(l), np.zeros((N, 0)))
    full = BundleBasis(int(l), np.eye(N))
    Ss = [S(c) for c in cuts]
    Us = [U(c) for c in cuts]
    if est.unbounded_left:
        Ss.insert(0, zero)
        Us.insert(0, full)
    if est.unbounded_right:
        Ss.append(full)
        Us.append(zero)
    W = [Ss[0]]
    for i in range(1, len(Ss)):
        W.append(intersect_subspaces(Us[i - 1], Ss[i]))
    W.append(Us[-1])
    total = sum(b.dim for b in W)
    if total != N:
        raise WhitneyFailure(f"spectral bundle dimensions {[b.dim for b in W]} sum to {total}, not {N}")
    nonzero = [b.basis for b in W if b.dim]
    if nonzero:
        stacked = np.concatenate(nonzero, axis=1)
        smin = np.linalg.svd(stacked, compute_uv=False)[-1]
        if smin < TRANSVERSALITY_MIN:
            raise WhitneyFailure(f"spectral bundles are not independent (smallest singular value {smin:.2e})")
    return W


def _union(intervals) -> list:
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return out


def _directed(X, Y) -> float:
    """``sup_{x in X} dist(x, Y)`` for finite unions of closed intervals."""
    Y = _union(Y)
    cand = []
    for a, b in X:
        cand += [a, b]
        for (y1, y2), (y3, y4) in zip(Y[:-1], Y[1:]):
            mid = 0.5 * (y2 + y3)
            if a <= mid <= b:
                cand.append(mid)

    def dist(x):
        return min(0.0 if y1 <= x <= y2 else min(abs(x - y1), abs(x - y2)) for y1, y2 in Y)

    return max(dist(x) for x in cand)


def interval_hausdorff(A, B) -> float:
    """Hausdorff distance between two families of intervals in log coordinates.

    Log coordinates make the distance relative: ``0.002`` corresponds to
    weights that differ by about 0.2 percent.
    """
    la = [(math.log(a), math.log(b)) for a, b in A]
    lb = [(math.log(a), math.log(b)) for a, b in B]
    if not la and not lb:
        return 0.0
    if not la or not lb:
        return math.inf
    return max(_directed(la, lb), _directed(lb, la))


def compare_with_candidates(est: SpectrumEstimate, candidates: dict, rtol: float) -> dict:
    """Compare a one-interval estimate against named candidate intervals.

    Returns a report listing the relative (log-space) endpoint distance to
    each candidate, which candidates match within ``rtol``, and whether the
    candidates disagree with one another (a conflict between references).
    """
    report = {"candidates": {}, "matched": [], "rtol": rtol}
    for name, (a, b) in candidates.items():
        if est.n == 1:
            ea, eb = est.intervals[0]
            dist = max(abs(math.log(ea / a)), abs(math.log(eb / b)))
        else:
            dist = interval_hausdorff(est.intervals, [(a, b)])
        ok = bool(dist <= rtol)
        report["candidates"][name] = {"interval": [a, b], "log_distance": dist, "matches": ok}
        if ok:
            report["matched"].append(name)
    vals = list(candidates.values())
    report["reference_conflict"] = bool(
        len(vals) > 1 and interval_hausdorff([vals[0]], [v for v in vals[1:]]) > rtol
    )
    return report


def reference_bands(sys: MatrixSequence) -> dict | None:
    """Closed-form reference intervals for the oscillating scalar example.

    ``rate_band`` is ``[e^{-omega-a}, e^{-omega+a}]`` (the spread of the
    average rate) and ``strong_band`` is ``[e^{-omega-5a}, e^{-omega+5a}]``
    (where the nonuniform factor ``e^{2a|l|}`` is paid twice on top of the
    rate spread).
    """
    if sys.name != "paper_scalar" or sys.scale != 1.0:
        return None
    omega, a = sys.params
    return {
        "rate_band": (math.exp(-omega - a), math.exp(-omega + a)),
        "strong_band": (math.exp(-omega - 5 * a), math.exp(-omega + 5 * a)),
    }
