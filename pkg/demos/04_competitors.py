"""
Reference estimators: mirror reflection, Beta kernels, Bernstein
================================================================

Three classical ways to smooth on the unit square without a transform,
compared on one Clayton sample.
"""

import numpy as np

from probitcopula import (
    CopulaModel,
    beta_estimate,
    bernstein_estimate,
    copula_density,
    ise_grid,
    make_estimator,
    mirror_estimate,
    pseudo_observations,
    sample_copula,
    truth_grid,
)
from probitcopula.competitors import reflect_sample

model = CopulaModel("clayton", 2.5)
u, v = sample_copula(model, 500, seed=29)
ps = pseudo_observations(u, v)

# the mirror estimator reflects the sample across every edge and corner
# (9 copies) so that mass leaking out of the square is paid back in
cloud = reflect_sample(ps)
print("mirror cloud: %d points from n = %d" % (cloud.shape[0], ps.n))

pts = np.array([[0.05, 0.05], [0.5, 0.5], [0.95, 0.95]])
truth = copula_density(model, pts[:, 0], pts[:, 1])
print("\n              (0.05,0.05)  (0.5,0.5)  (0.95,0.95)")
print("truth        %10.3f %10.3f %11.3f" % tuple(truth))
print("mirror       %10.3f %10.3f %11.3f" % tuple(mirror_estimate(ps, pts)))

# Beta kernels adapt their shape to the boundary instead of reflecting;
# h is the smoothing parameter of the Beta(x/h+1, (1-x)/h+1) weights
print("beta h=0.02  %10.3f %10.3f %11.3f"
      % tuple(beta_estimate(ps, 0.02, pts)))

# the Bernstein estimator smooths empirical-copula box masses with
# binomial weights; k is the number of boxes per axis
print("bernstein 14 %10.3f %10.3f %11.3f"
      % tuple(bernstein_estimate(ps, 14, pts)))

# whole-surface comparison on the 64x64 scoring lattice
target = truth_grid(model, 64)
print("\nISE on the 64x64 lattice:")
for spec in ("mirror", "beta:h=0.02", "bernstein:k=14",
             "naive", "amended", "loglin"):
    est = make_estimator(spec).fit(ps)
    print("  %-14s %.4f" % (spec, ise_grid(est.grid(64), target)))
