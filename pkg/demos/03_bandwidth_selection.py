"""
Cross-validated bandwidth selection, step by step
=================================================

What the selector actually does: rotate the transformed sample to
principal axes, run least-squares cross-validation on each univariate
score, and reassemble a plane bandwidth from the two answers.
"""

import numpy as np

from probitcopula import (
    CopulaModel,
    cv_criterion_1d,
    pca_scores,
    pseudo_observations,
    sample_copula,
    select_fixed,
    select_knn,
    transform,
)
from probitcopula.bandwidth import ALPHA_GRID, k_factor_fixed, k_factor_knn

model = CopulaModel("gaussian", 0.59)
u, v = sample_copula(model, 500, seed=3)
ts = transform(pseudo_observations(u, v))

# step 1: principal axes of the transformed cloud; correlation moves into
# the rotation and leaves two (empirically) uncorrelated scores
pca = pca_scores(ts)
print("rotation W =\n", np.round(pca.W, 4))
print("score spreads: %.3f / %.3f"
      % (pca.scores[:, 0].std(), pca.scores[:, 1].std()))

# step 2: the least-squares CV criterion for the first score, over a
# bandwidth sweep -- the selector minimises exactly this curve
print("\n     h     CV criterion (degree 1)")
for h in (0.05, 0.1, 0.2, 0.4, 0.8, 1.6):
    crit = cv_criterion_1d(pca.scores[:, 0], 1, h=h)
    print("  %5.2f   %10.5f" % (h, crit))

# the same criterion drives the neighbour-fraction choice: alpha = k/n,
# with the local bandwidth equal to the k-th neighbour distance
print("\n  alpha   CV criterion (degree 1, k-NN)")
for alpha in ALPHA_GRID[::4]:
    crit = cv_criterion_1d(pca.scores[:, 0], 1, alpha=float(alpha))
    print("  %5.3f   %10.5f" % (alpha, crit))

# step 3: the univariate answers are inflated (fixed) or deflated (k-NN)
# by a degree-dependent power of n before going into the plane fit
n = ts.n
print("\nplane factors at n = %d:" % n)
print("  fixed : %.5f (p=1)  %.5f (p=2)"
      % (k_factor_fixed(n, 1), k_factor_fixed(n, 2)))
print("  k-NN  : %.5f (p=1)  %.5f (p=2)"
      % (k_factor_knn(n, 1), k_factor_knn(n, 2)))

# the packaged selectors do all of the above in one call
for p in (1, 2):
    fixed = select_fixed(ts, p)
    knn = select_knn(ts, p)
    H = fixed.H_st
    print("\ndegree %d:" % p)
    print("  fixed H_st = [[%.4f, %.4f], [%.4f, %.4f]]"
          % (H.h1_sq, H.h12, H.h12, H.h2_sq))
    print("  k-NN alpha_q = %.3f, kappa = %.2f, k = %d"
          % (knn.alpha_q, knn.kappa, knn.k))
