# %% [markdown]
# # Estimating the dichotomy spectrum
#
# A weight `gamma` is resolvent when `A_k / gamma` admits a strong
# nonuniform dichotomy.  `estimate_spectrum` scans a bracket of weights,
# bisects every change of verdict and reports the spectral intervals with
# the stable dimension at each resolvent cut.

# %%
import numpy as np

from nedspec import Window, builtin_example, estimate_spectrum, spectral_bundles, stable_bundle, unstable_bundle

# %% [markdown]
# ## Constant diagonal system: point spectrum `{1/2, 2}`

# %%
diag = builtin_example("constant_diag", [2.0, 0.5])
est = estimate_spectrum(diag, Window(-30, 30))
print(est.intervals, est.stable_dims, est.saturated)
for W in spectral_bundles(diag, est, 0, 30):
    print(W.dim, np.round(W.basis.T, 12))

# %% [markdown]
# Stable and unstable bundles at a resolvent weight are complementary.

# %%
S = stable_bundle(diag, 1.0, 0, 20)
U = unstable_bundle(diag, 1.0, 0, 20)
print(S.dim, U.dim, np.round(np.c_[S.basis, U.basis], 12))

# %% [markdown]
# ## Scalar oscillating example
#
# Two closed-form candidate intervals exist for this system: the spread of
# the average rate, `[e^{-omega-a}, e^{-omega+a}]`, and the band that also
# pays the nonuniform factor, `[e^{-omega-5a}, e^{-omega+5a}]`.  The
# estimate is compared with both.

# %%
scalar = builtin_example("paper_scalar", [1.0, 0.1])
est = estimate_spectrum(scalar, Window(-40, 40))
print(est.intervals)
print(est.references["matched"], est.references["reference_conflict"])
