"""Saturated log-space fitting of dichotomy constants.

Every dichotomy-type estimate handled here has the form

    e(k, l) <= c + theta * D + s * lam,      D = |k - l|,  lam = |l| or l,

with ``e`` a log-norm, ``theta = log alpha``, ``s = log eps`` and
``c = log K``.  For fixed ``(theta, s)`` the minimal ``c`` is the largest
excess over the window.  On a finite window that maximum always exists, so
every claim would be "feasible"; a certificate is therefore only accepted
when it is *saturated*: the excess must not trend upward away from the
window centre.  The check compares, sector by sector around the centre, the
largest excess on an outer shell of pairs with that on an inner shell at half
the radius.  Excess that grows linearly along any ray of index pairs shows
up as an outer maximum above the inner one, however small the slope and
whatever the additive offsets are, while bounded excess passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._bases import PairTable
from .system import Window

N_SECTORS = 16
INNER_SHELL = (0.375, 0.5)
OUTER_SHELL = (0.75, 1.0)


def _upper_hull(x: np.ndarray, y: np.ndarray) -> list[int]:
    """Indices of the upper convex hull of points with increasing ``x``."""
    idx: list[int] = []
    for i in range(len(x)):
        while len(idx) >= 2:
            a, b = idx[-2], idx[-1]
            if (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]) >= 0:
                idx.pop()
            else:
                break
        idx.append(i)
    return idx


def nonuniform_lam(l: np.ndarray, exponent: str) -> np.ndarray:
    if exponent == "absolute":
        return np.abs(l).astype(float)
    if exponent == "signed":
        return l.astype(float)
    raise ValueError(f"nonuniform_exponent must be 'absolute' or 'signed', got {exponent!r}")


@dataclass
class HalfProblem:
    """Reduced constraint data for one half-plane of index pairs."""

    D: np.ndarray
    lam: np.ndarray
    e: np.ndarray
    starts: np.ndarray
    inner_pos: np.ndarray
    outer_pos: np.ndarray
    n_pairs: int
    rate: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def empty(self) -> bool:
        return self.n_pairs == 0

    def group_max(self, theta: float, s: float) -> np.ndarray:
        E = self.e - theta * self.D - s * self.lam
        return np.maximum.reduceat(E, self.starts)

    def evaluate(self, theta: float, s: float, tol: float) -> tuple[float, bool]:
        """Largest excess and saturation flag at ``(theta, s)``."""
        if self.empty:
            return -np.inf, True
        gm = self.group_max(theta, s)
        sat = bool(np.all(gm[self.outer_pos] <= gm[self.inner_pos] + tol))
        return float(gm[0]), sat

    def min_theta(self, s: float, tol: float, log_cap: float) -> float:
        """Smallest ``theta`` with a saturated excess below ``log_cap``.

        ``-inf`` when the half carries no constraint and ``+inf`` when no
        ``theta`` works for this ``s``.
        """
        if self.empty:
            return -np.inf
        key = (float(s), tol, log_cap)
        if key in self._cache:
            return self._cache[key]
        span = float(np.max(np.abs(self.e))) + abs(s) * float(np.max(np.abs(self.lam))) + abs(log_cap) + 1.0

        def ok(theta: float) -> bool:
            c, sat = self.evaluate(theta, s, tol)
            return sat and c <= log_cap

        lo, hi = -span, span
        if not ok(hi):
            out = np.inf
        elif ok(lo):
            out = lo
        else:
            for _ in range(56):
                mid = 0.5 * (lo + hi)
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            out = hi
        self._cache[key] = out
        return out


def build_half(table: PairTable, window: Window, exponent: str) -> HalfProblem:
    """Reduce a pair table to upper-hull vertices per (group, l).

    For fixed ``l`` the excess is affine in ``D``, so only the upper convex
    hull of ``(D, e)`` can ever attain a group maximum.
    """
    if len(table) == 0:
        z = np.empty(0)
        return HalfProblem(z, z, z, np.zeros(1, dtype=np.int64), np.empty(0, int), np.empty(0, int), 0, 0.0)
    k, l = table.k, table.l
    D = np.abs(k - l)
    e = table.loge
    lam = nonuniform_lam(l, exponent)
    m = window.midpoint
    R = max(window.half_width, 1)
    x, y = k - m, l - m
    rho = np.maximum(np.abs(x), np.abs(y))
    ang = np.mod(np.arctan2(y, x) - np.pi / 4, 2 * np.pi)
    sector = np.minimum((ang / (2 * np.pi / N_SECTORS)).astype(int), N_SECTORS - 1)
    inner = (rho > INNER_SHELL[0] * R) & (rho <= INNER_SHELL[1] * R)
    outer = (rho > OUTER_SHELL[0] * R) & (rho <= OUTER_SHELL[1] * R)
    # group 0 collects every pair; 1 + 2j / 2 + 2j are inner / outer shells of sector j
    groups = [np.ones(len(k), dtype=bool)]
    for j in range(N_SECTORS):
        sj = sector == j
        groups.append(sj & inner)
        groups.append(sj & outer)
    present = [g.any() for g in groups]
    keep_D, keep_lam, keep_e, starts, gid = [], [], [], [], []
    pos = 0
    for g, mask in enumerate(groups):
        if g > 0:
            j = (g - 1) // 2
            if not (present[1 + 2 * j] and present[2 + 2 * j]):
                continue
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            continue
        order = idx[np.lexsort((D[idx], l[idx]))]
        ls = l[order]
        cut = np.flatnonzero(np.diff(ls)) + 1
        chosen = []
        for seg in np.split(order, cut):
            hull = _upper_hull(D[seg].astype(float), e[seg])
            chosen.append(seg[hull])
        chosen = np.concatenate(chosen)
        starts.append(pos)
        gid.append(g)
        pos += len(chosen)
        keep_D.append(D[chosen])
        keep_lam.append(lam[chosen])
        keep_e.append(e[chosen])
    gid = np.array(gid)
    inner_pos, outer_pos = [], []
    for j in range(N_SECTORS):
        a, b = np.flatnonzero(gid == 1 + 2 * j), np.flatnonzero(gid == 2 + 2 * j)
        if a.size and b.size:
            inner_pos.append(int(a[0]))
            outer_pos.append(int(b[0]))
    far = D >= max(1, R // 4)
    rate = float(np.max(np.abs(e[far]) / D[far])) if far.any() else 0.0
    return HalfProblem(
        D=np.concatenate(keep_D).astype(float),
        lam=np.concatenate(keep_lam),
        e=np.concatenate(keep_e),
        starts=np.array(starts, dtype=np.int64),
        inner_pos=np.array(inner_pos, dtype=int),
        outer_pos=np.array(outer_pos, dtype=int),
        n_pairs=len(k),
        rate=rate,
    )


@dataclass
class StrongFit:
    theta: float
    s: float
    c: float

    @property
    def margin(self) -> float:
        return self.theta + 2.0 * self.s


def minimize_strong(
    stable: HalfProblem,
    unstable: HalfProblem,
    g: float,
    tol: float,
    log_cap: float,
    s_max: float | None = None,
    n_grid: int = 65,
    zoom_levels: int = 3,
) -> StrongFit | None:
    """Minimise ``theta + 2 s`` over saturated certificates of the weighted system.

    The weight ``gamma = e^g`` enters only as a shear: the stable half needs
    ``theta + g`` and the unstable half ``theta - g``.  ``s`` is searched on
    a uniform grid followed by local zooms.
    """
    if s_max is None:
        s_max = 2.0 * max(stable.rate, unstable.rate) + 1.0

    def theta_at(s: float) -> float:
        ts = stable.min_theta(s, tol, log_cap)
        tu = unstable.min_theta(s, tol, log_cap)
        return max(ts - g, tu + g)

    def scan(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        th = np.array([theta_at(s) for s in grid])
        return th, th + 2 * grid

    grid = np.linspace(0.0, s_max, n_grid)
    th, phi = scan(grid)
    if not np.any(np.isfinite(phi)):
        return None
    for _ in range(zoom_levels):
        i = int(np.argmin(phi))
        nb = [phi[j] for j in (i - 1, i + 1) if 0 <= j < len(phi) and np.isfinite(phi[j])]
        spread = max([abs(v - phi[i]) for v in nb], default=np.inf)
        if phi[i] > spread or phi[i] < -spread:
            break
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        sub = np.linspace(lo, hi, 17)
        sth, sphi = scan(sub)
        grid, first = np.unique(np.concatenate([grid, sub]), return_index=True)
        th = np.concatenate([th, sth])[first]
        phi = np.concatenate([phi, sphi])[first]
    i = int(np.argmin(phi))
    if not np.isfinite(phi[i]):
        return None
    s, theta = float(grid[i]), float(th[i])
    cs, _ = stable.evaluate(theta + g, s, tol)
    cu, _ = unstable.evaluate(theta - g, s, tol)
    return StrongFit(theta=theta, s=s, c=max(cs, cu))
