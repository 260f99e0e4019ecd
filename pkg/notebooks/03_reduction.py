# %% [markdown]
# # Block diagonalisation by a weak kinematic similarity
#
# Along an invariant projector the fundamental matrix splits as
# `X_k = S_k R_k` with `||S_k|| <= sqrt 2` and `R_k` commuting with
# `diag(I, 0)`; then `B_k = R_{k+1} R_k^{-1}` is block diagonal and
# `S_{k+1} B_k = A_k S_k`.

# %%
import numpy as np

from nedspec import (
    MatrixSequence,
    Window,
    block_diagonalize,
    builtin_example,
    estimate_spectrum,
    full_reduction,
    spectral_projector,
    spectrum_invariance_check,
    split_gram,
    verify_weak_similarity,
)

w = Window(-30, 30)

# %% [markdown]
# ## The splitting on a single matrix

# %%
rng = np.random.default_rng(0)
X = rng.standard_normal((3, 3))
S, R = split_gram(X, 1)
print(np.linalg.norm(S, 2), np.linalg.norm(S @ R - X))

# %% [markdown]
# ## Two blocks for a constant upper-triangular system
#
# At `gamma = 1` the dichotomy projector has the contracting direction as
# its range, so the first block carries `1/2` and the second `2`.

# %%
upper = MatrixSequence.constant([[2.0, 1.0], [0.0, 0.5]])
S, blocks = block_diagonalize(upper, spectral_projector(upper, 1, w), w)
print(np.round(blocks.assembled(0, 0)[0], 12))
print(verify_weak_similarity(upper, blocks, S, w))

# %% [markdown]
# ## The full cascade and spectrum invariance

# %%
sys = builtin_example("paper_2d", [1.0, 0.1])
est = estimate_spectrum(sys, w)
red = full_reduction(sys, est)
print(red.blocks.dims, red.block_distances)
print(spectrum_invariance_check(sys, red.blocks, red.transform, est)["relative_hausdorff"])
