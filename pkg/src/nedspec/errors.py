"""Exception hierarchy and the infeasibility sentinel."""

from __future__ import annotations

from dataclasses import dataclass


class NedError(Exception):
    """Base class for every error raised by nedspec."""


class IndexOutOfRange(NedError, IndexError):
    """An index lies outside the range on which a system is defined."""


class SingularTransition(NedError, ArithmeticError):
    """A transition matrix is numerically singular."""


class NonpositiveWeight(NedError, ValueError):
    """A spectral weight gamma is not strictly positive."""


class UnknownName(NedError, KeyError):
    """A builtin example name is not recognised."""


class ParamConstraintViolated(NedError, ValueError):
    """Builtin parameters violate the constraints of the example."""


class NotAProjector(NedError, ValueError):
    """A matrix that should be idempotent is not."""


class EmptyGrid(NedError, ValueError):
    """A fitting grid has no usable entries."""


class NoSpectralGap(NedError):
    """Singular values cluster around the split threshold."""


class BracketNotResolvent(NedError):
    """An endpoint of the scan bracket is not in the resolvent set."""


class NonMonotoneDims(NedError):
    """Stable dimensions decrease along increasing resolvent weights."""


class WhitneyFailure(NedError):
    """Spectral bundles do not form a direct sum of the full space."""


class FiberMismatch(NedError, ValueError):
    """Bundle bases live on different fibers or ambient dimensions."""


class RankDegenerate(NedError, ValueError):
    """A projector has rank 0 or full rank where a proper split is needed."""


class IllConditionedBasis(NedError):
    """The normalising change of basis is too ill-conditioned."""


class IndefiniteGram(NedError, ArithmeticError):
    """A Gram block is not numerically positive definite."""


class CertificateMissing(NedError):
    """No dichotomy certificate could be found for a projector."""


class CutPointNotResolvent(NedError):
    """A cut point of the spectrum does not test as resolvent."""


class BlockSpectrumMismatch(NedError):
    """A reduced block has a spectrum away from its expected interval."""


class ParseError(NedError, ValueError):
    """A configuration or certificate document is malformed."""


@dataclass(frozen=True)
class Infeasible:
    """Result of a fit that found no admissible constants.

    Instances are falsy so that ``if fit_constants(...)`` reads naturally.
    """

    reason: str

    def __bool__(self) -> bool:
        return False
