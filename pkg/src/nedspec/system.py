"""Matrix sequences and their evolution operators.

A linear difference system ``x_{k+1} = A_k x_k`` is represented by a
:class:`MatrixSequence`, either backed by a finite table of matrices or by a
closed-form generator defined on all of the integers.  The evolution operator
``Phi(k, l)`` is evaluated literally: a product of transitions for ``k > l``,
the identity for ``k == l`` and a product of per-factor inverses for
``k < l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    IndexOutOfRange,
    NonpositiveWeight,
    ParamConstraintViolated,
    SingularTransition,
    UnknownName,
)

__all__ = [
    "Window",
    "MatrixSequence",
    "transition",
    "evolution",
    "weighted_evolution",
    "builtin_example",
    "BUILTIN_NAMES",
]


@dataclass(frozen=True)
class Window:
    """Closed integer interval ``[k_min, k_max]``."""

    k_min: int
    k_max: int

    def __post_init__(self) -> None:
        if int(self.k_min) != self.k_min or int(self.k_max) != self.k_max:
            raise ValueError("window bounds must be integers")
        object.__setattr__(self, "k_min", int(self.k_min))
        object.__setattr__(self, "k_max", int(self.k_max))
        if self.k_min > self.k_max:
            raise ValueError(f"empty window [{self.k_min}, {self.k_max}]")

    @property
    def size(self) -> int:
        return self.k_max - self.k_min + 1

    @property
    def midpoint(self) -> int:
        return (self.k_min + self.k_max) // 2

    @property
    def half_width(self) -> int:
        """Largest distance from the midpoint to an endpoint."""
        m = self.midpoint
        return max(m - self.k_min, self.k_max - m)

    def indices(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def __contains__(self, k: object) -> bool:
        return isinstance(k, (int, np.integer)) and self.k_min <= k <= self.k_max

    def expanded(self, left: int, right: int | None = None) -> "Window":
        right = left if right is None else right
        return Window(self.k_min - left, self.k_max + right)

    def doubled(self) -> "Window":
        """Window with twice the extent on each side of the midpoint."""
        m = self.midpoint
        return Window(m - 2 * (m - self.k_min), m + 2 * (self.k_max - m))

    def inner(self) -> "Window":
        """Window with half the extent on each side of the midpoint."""
        m = self.midpoint
        return Window(m - (m - self.k_min) // 2, m + (self.k_max - m) // 2)

    def clipped(self, k_range: tuple[int, int] | None) -> "Window":
        if k_range is None:
            return self
        lo, hi = max(self.k_min, k_range[0]), min(self.k_max, k_range[1])
        if lo > hi:
            raise IndexOutOfRange(f"window {self} does not meet range {k_range}")
        return Window(lo, hi)

    def as_list(self) -> list[int]:
        return [self.k_min, self.k_max]


Generator = Callable[[np.ndarray], np.ndarray]


class MatrixSequence:
    """A sequence of invertible real ``N x N`` matrices indexed by integers.

    Parameters
    ----------
    dimension : int
        State dimension ``N``.
    generator : callable, optional
        Vectorised closed form mapping an integer array of indices to an
        array of shape ``(len(ks), N, N)``.  Defined for every integer.
    table : array_like, optional
        Matrices ``A_{k_min}, ..., A_{k_min + T - 1}`` of shape ``(T, N, N)``.
    k_min : int
        Index of the first table entry.
    invertibility_tolerance : float
        A transition is accepted when ``|det A_k| > tol * ||A_k||^N``.
    name, params
        Provenance recorded in reports.

    Notes
    -----
    Instances are immutable; :meth:`scaled` returns a new sequence.
    """

    def __init__(
        self,
        dimension: int,
        generator: Generator | None = None,
        table: np.ndarray | None = None,
        k_min: int = 0,
        invertibility_tolerance: float = 1e-12,
        name: str | None = None,
        params: Sequence[float] = (),
        scale: float = 1.0,
    ) -> None:
        if (generator is None) == (table is None):
            raise ValueError("give exactly one of generator or table")
        if int(dimension) != dimension or dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if not invertibility_tolerance > 0:
            raise ValueError("invertibility_tolerance must be positive")
        self.dimension = int(dimension)
        self.invertibility_tolerance = float(invertibility_tolerance)
        self.name = name
        self.params = tuple(float(p) for p in params)
        self.scale = float(scale)
        self._generator = generator
        if table is not None:
            arr = np.array(table, dtype=float)
            if arr.ndim != 3 or arr.shape[1:] != (self.dimension, self.dimension):
                raise ValueError(f"table must have shape (T, {dimension}, {dimension})")
            if arr.shape[0] == 0:
                raise ValueError("table is empty")
            if not np.all(np.isfinite(arr)):
                raise ValueError("table contains non-finite entries")
            arr.setflags(write=False)
            self._table = arr
            self._k_min = int(k_min)
        else:
            self._table = None
            self._k_min = 0

    # construction helpers ---------------------------------------------------

    @classmethod
    def from_table(cls, matrices, k_min: int = 0, **kw) -> "MatrixSequence":
        arr = np.asarray(matrices, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1, 1)
        return cls(arr.shape[1], table=arr, k_min=k_min, **kw)

    @classmethod
    def from_function(cls, dimension: int, func: Callable[[int], np.ndarray], **kw) -> "MatrixSequence":
        """Wrap a per-index function ``k -> A_k`` as a generator."""

        def gen(ks: np.ndarray) -> np.ndarray:
            return np.array([np.asarray(func(int(k)), dtype=float) for k in ks]).reshape(
                len(ks), dimension, dimension
            )

        return cls(dimension, generator=gen, **kw)

    @classmethod
    def constant(cls, matrix, **kw) -> "MatrixSequence":
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        A.setflags(write=False)

        def gen(ks: np.ndarray) -> np.ndarray:
            return np.broadcast_to(A, (len(ks),) + A.shape).copy()

        kw.setdefault("name", "constant")
        kw.setdefault("params", tuple(A.ravel()))
        return cls(A.shape[0], generator=gen, **kw)

    # queries ----------------------------------------------------------------

    @property
    def is_table(self) -> bool:
        return self._table is not None

    @property
    def k_range(self) -> tuple[int, int] | None:
        """Inclusive index range of a table, ``None`` for generators."""
        if self._table is None:
            return None
        return (self._k_min, self._k_min + self._table.shape[0] - 1)

    def check_range(self, k0: int, k1: int) -> None:
        r = self.k_range
        if r is not None and k0 <= k1 and (k0 < r[0] or k1 > r[1]):
            raise IndexOutOfRange(f"indices [{k0}, {k1}] outside table range [{r[0]}, {r[1]}]")

    def matrices(self, k0: int, k1: int, check: bool = True) -> np.ndarray:
        """Return ``A_k`` for ``k = k0..k1`` as an array ``(k1 - k0 + 1, N, N)``."""
        k0, k1 = int(k0), int(k1)
        N = self.dimension
        if k1 < k0:
            return np.empty((0, N, N))
        self.check_range(k0, k1)
        if self._table is not None:
            out = self._table[k0 - self._k_min : k1 - self._k_min + 1].copy()
        else:
            out = np.asarray(self._generator(np.arange(k0, k1 + 1)), dtype=float)
            out = out.reshape(k1 - k0 + 1, N, N)
        if self.scale != 1.0:
            out = out * self.scale
        if check:
            self._check_invertible(out, k0)
        return out

    def inverses(self, k0: int, k1: int) -> np.ndarray:
        """Return ``A_k^{-1}`` for ``k = k0..k1``, one factor at a time."""
        return np.linalg.inv(self.matrices(k0, k1))

    def _check_invertible(self, mats: np.ndarray, k0: int) -> None:
        if not np.all(np.isfinite(mats)):
            bad = int(np.argwhere(~np.isfinite(mats).all(axis=(1, 2)))[0, 0])
            raise SingularTransition(f"A_{k0 + bad} has non-finite entries")
        N = self.dimension
        dets = np.abs(np.linalg.det(mats))
        norms = np.linalg.norm(mats, 2, axis=(1, 2))
        bad = dets <= self.invertibility_tolerance * norms**N
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SingularTransition(f"|det A_{k0 + i}| = {dets[i]:.3e} below tolerance")

    def invertible_mask(self, mats: np.ndarray) -> np.ndarray:
        """Which factors of ``mats`` pass the invertibility test."""
        finite = np.isfinite(mats).all(axis=(1, 2))
        safe = np.where(finite[:, None, None], mats, 0.0)
        dets = np.abs(np.linalg.det(safe))
        norms = np.linalg.norm(safe, 2, axis=(1, 2))
        return finite & (dets > self.invertibility_tolerance * norms**self.dimension)

    def valid_extent(self, window: Window, pad: int) -> Window:
        """Largest window inside ``window`` padded by ``pad`` on each side.

        The result contains ``window`` and extends outwards as long as the
        table range allows and the factors pass the invertibility test.

        Raises
        ------
        SingularTransition
            If a factor inside ``window`` itself fails the test.
        """
        self.matrices(window.k_min, window.k_max - 1)
        lo, hi = window.k_min - pad, window.k_max + pad
        rng = self.k_range
        if rng is not None:
            lo, hi = max(lo, rng[0]), min(hi, rng[1] + 1)
        left = self.matrices(lo, window.k_min - 1, check=False)
        right = self.matrices(window.k_max, hi - 1, check=False)
        okl = self.invertible_mask(left)[::-1] if len(left) else np.empty(0, bool)
        okr = self.invertible_mask(right) if len(right) else np.empty(0, bool)
        nl = len(okl) if okl.all() else int(np.argmin(okl))
        nr = len(okr) if okr.all() else int(np.argmin(okr))
        return Window(window.k_min - nl, window.k_max + nr)

    def scaled(self, factor: float) -> "MatrixSequence":
        """Sequence ``factor * A_k``; ``scaled(1 / gamma)`` is the weighted system."""
        new = object.__new__(MatrixSequence)
        new.__dict__.update(self.__dict__)
        new.scale = self.scale * float(factor)
        return new

    def to_table(self, window: Window) -> "MatrixSequence":
        return MatrixSequence.from_table(
            self.matrices(window.k_min, window.k_max),
            k_min=window.k_min,
            invertibility_tolerance=self.invertibility_tolerance,
            name="table",
        )

    def describe(self) -> dict:
        d = {"dimension": self.dimension}
        if self._table is not None:
            d.update(kind="table", k_min=self._k_min, length=int(self._table.shape[0]))
        else:
            d.update(kind="builtin", name=self.name, params=list(self.params))
        if self.scale != 1.0:
            d["scale"] = self.scale
        return d

    def __repr__(self) -> str:
        src = f"table{self.k_range}" if self.is_table else f"{self.name}{self.params}"
        return f"MatrixSequence(N={self.dimension}, {src}, scale={self.scale:g})"


def transition(sys: MatrixSequence, k: int) -> np.ndarray:
    """Return the transition matrix ``A_k``.

    Raises
    ------
    IndexOutOfRange
        If ``k`` lies outside a table.
    SingularTransition
        If ``|det A_k|`` falls below the invertibility tolerance.
    """
    return sys.matrices(k, k)[0]


def evolution(sys: MatrixSequence, k: int, l: int) -> np.ndarray:
    """Evolution operator ``Phi(k, l)``.

    Parameters
    ----------
    sys : MatrixSequence
    k, l : int
        Final and initial index.

    Returns
    -------
    ndarray
        ``A_{k-1} ... A_l`` for ``k > l``, the identity for ``k == l`` and
        ``A_k^{-1} ... A_{l-1}^{-1}`` for ``k < l``.

    Notes
    -----
    Products are accumulated sequentially without re-orthogonalisation, so
    long products of strongly non-normal systems lose relative accuracy in
    their small singular directions.
    """
    k, l = int(k), int(l)
    N = sys.dimension
    phi = np.eye(N)
    if k > l:
        for A in sys.matrices(l, k - 1):
            phi = A @ phi
    elif k < l:
        for Ainv in sys.inverses(k, l - 1)[::-1]:
            phi = Ainv @ phi
    else:
        sys.check_range(k, k)
    return phi


def weighted_evolution(sys: MatrixSequence, gamma: float, k: int, l: int) -> np.ndarray:
    """``gamma^{-(k - l)} Phi(k, l)``, the evolution of ``x_{k+1} = A_k x_k / gamma``."""
    if not gamma > 0:
        raise NonpositiveWeight(f"gamma must be positive, got {gamma}")
    return float(gamma) ** (-(int(k) - int(l))) * evolution(sys, k, l)


# builtin examples ------------------------------------------------------------

def _alternating(ks: np.ndarray) -> np.ndarray:
    return 1 - 2 * np.mod(ks, 2)


def oscillating_rate(ks: np.ndarray, omega: float, a: float) -> np.ndarray:
    """Log-rate ``-omega + a k (-1)^k - a (k - 1) (-1)^(k - 1)`` of the oscillating examples."""
    ks = np.asarray(ks, dtype=np.int64)
    return -omega + a * ks * _alternating(ks) - a * (ks - 1) * _alternating(ks - 1)


def _paper_2d(omega: float, a: float) -> Generator:
    def gen(ks: np.ndarray) -> np.ndarray:
        c = oscillating_rate(ks, omega, a)
        out = np.zeros((len(ks), 2, 2))
        out[:, 0, 0] = np.exp(c)
        out[:, 1, 1] = np.exp(-c)
        return out

    return gen


def _paper_scalar(omega: float, a: float) -> Generator:
    def gen(ks: np.ndarray) -> np.ndarray:
        return np.exp(oscillating_rate(ks, omega, a)).reshape(-1, 1, 1)

    return gen


BUILTIN_NAMES = ("paper_2d", "paper_scalar", "constant_diag", "constant", "table")


def builtin_example(name: str, params: Sequence[float] = (), **kw) -> MatrixSequence:
    """Construct one of the named example systems.

    Parameters
    ----------
    name : str
        ``paper_2d``: ``diag(e^{c_k}, e^{-c_k})`` with the oscillating rate
        ``c_k``, params ``(omega, a)`` with ``omega > a > 0``.
        ``paper_scalar``: ``e^{c_k}``, params ``(omega, a)`` with
        ``omega > 5 a > 0``.
        ``constant_diag``: ``diag(params)`` at every index.
        ``constant``: a constant square matrix given row-major.
        ``table``: params ``(N, k_min, entries...)`` with each matrix
        row-major.
    params : sequence of float

    Raises
    ------
    UnknownName, ParamConstraintViolated
    """
    p = [float(x) for x in params]
    if name in ("paper_2d", "paper_scalar"):
        if len(p) != 2:
            raise ParamConstraintViolated(f"{name} takes (omega, a), got {p}")
        omega, a = p
        if name == "paper_2d":
            if not omega > a > 0:
                raise ParamConstraintViolated(f"paper_2d needs omega > a > 0, got omega={omega}, a={a}")
            return MatrixSequence(2, generator=_paper_2d(omega, a), name=name, params=p, **kw)
        if not omega > 5 * a > 0:
            raise ParamConstraintViolated(f"paper_scalar needs omega > 5a > 0, got omega={omega}, a={a}")
        return MatrixSequence(1, generator=_paper_scalar(omega, a), name=name, params=p, **kw)
    if name == "constant_diag":
        if not p or any(x == 0 for x in p):
            raise ParamConstraintViolated("constant_diag needs nonzero diagonal entries")
        return MatrixSequence.constant(np.diag(p), name=name, params=p, **kw)
    if name == "constant":
        n = int(round(np.sqrt(len(p))))
        if n == 0 or n * n != len(p):
            raise ParamConstraintViolated("constant needs a square number of row-major entries")
        return MatrixSequence.constant(np.reshape(p, (n, n)), name=name, params=p, **kw)
    if name == "table":
        if len(p) < 3 or int(p[0]) != p[0] or int(p[1]) != p[1] or p[0] < 1:
            raise ParamConstraintViolated("table needs (N, k_min, entries...)")
        n, k0 = int(p[0]), int(p[1])
        entries = p[2:]
        if len(entries) % (n * n):
            raise ParamConstraintViolated("table entries are not a whole number of matrices")
        return MatrixSequence.from_table(np.reshape(entries, (-1, n, n)), k_min=k0, **kw)
    raise UnknownName(name)
