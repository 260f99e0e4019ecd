"""Nonuniform exponential dichotomies and their spectra for difference systems.

The package works with linear systems ``x_{k+1} = A_k x_k`` on windows of
the integers.  It verifies and fits nonuniform dichotomy certificates,
estimates the dichotomy spectrum with its spectral bundles, and reduces a
system to block-diagonal form by a weak kinematic similarity.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .dichotomy import (
    DichotomyCertificate,
    FitConfig,
    GrowthBound,
    ProjectorSequence,
    ViolationReport,
    fit_constants,
    fit_growth_bound,
    is_strong,
    minimal_log_constant,
    propagate_projector,
    spectral_projector,
    verify_certificate,
)
from .errors import Infeasible, NedError
from .reducibility import (
    BlockSystem,
    NormalizedFrame,
    SimilarityReport,
    SimilarityTransform,
    block_diagonalize,
    full_reduction,
    lyapunov_split,
    normalize_projector,
    split_gram,
    spectrum_invariance_check,
    verify_weak_similarity,
)
from .spectrum import (
    BundleBasis,
    ResolventVerdict,
    SpectrumEstimate,
    estimate_spectrum,
    interval_hausdorff,
    resolvent_test,
    spectral_bundles,
    stable_bundle,
    unstable_bundle,
)
from .system import (
    BUILTIN_NAMES,
    MatrixSequence,
    Window,
    builtin_example,
    evolution,
    transition,
    weighted_evolution,
)

__all__ = [
    "__version__",
    "BUILTIN_NAMES",
    "BlockSystem",
    "BundleBasis",
    "DichotomyCertificate",
    "FitConfig",
    "GrowthBound",
    "Infeasible",
    "MatrixSequence",
    "NedError",
    "NormalizedFrame",
    "ProjectorSequence",
    "ResolventVerdict",
    "SimilarityReport",
    "SimilarityTransform",
    "SpectrumEstimate",
    "ViolationReport",
    "Window",
    "block_diagonalize",
    "builtin_example",
    "estimate_spectrum",
    "evolution",
    "fit_constants",
    "fit_growth_bound",
    "full_reduction",
    "interval_hausdorff",
    "is_strong",
    "lyapunov_split",
    "minimal_log_constant",
    "normalize_projector",
    "propagate_projector",
    "resolvent_test",
    "spectral_bundles",
    "spectral_projector",
    "spectrum_invariance_check",
    "split_gram",
    "stable_bundle",
    "transition",
    "unstable_bundle",
    "verify_certificate",
    "verify_weak_similarity",
    "weighted_evolution",
]
