"""
Probit transform and the naive back-transformed KDE
===================================================

Why smoothing on the unit square is hard, and what moving the problem to
the plane does about it.
"""

import numpy as np

from probitcopula import (
    BandwidthMatrix,
    CopulaModel,
    copula_density,
    naive_estimate,
    amended_estimate,
    normal_reference_H,
    pseudo_observations,
    sample_copula,
    transform,
    unit_square_kde,
)

# draw a Frank-copula sample; tau = 0.4 corresponds to theta = 4.16
model = CopulaModel("frank", 4.16)
u, v = sample_copula(model, 1000, seed=7)

# in practice the margins are unknown: reduce the data to ranks
ps = pseudo_observations(u, v)
print("pseudo-observations: n = %d, range (%.4f, %.4f)"
      % (ps.n, ps.u.min(), ps.u.max()))

# a plain KDE on the square puts kernel mass outside the support, so it
# understates the density along the edges -- by half at the borders and
# by three quarters at the corners, whatever the true density does there
H_sq = BandwidthMatrix(0.05, 0.05, 0.0)
edge = np.array([[0.5, 0.5], [0.01, 0.5], [0.01, 0.01]])
flat = unit_square_kde(ps, H_sq, edge)
print("\nunit-square KDE at centre / border / corner:")
print("  ", np.round(flat, 3), " (true values:",
      np.round(copula_density(model, edge[:, 0], edge[:, 1]), 3), ")")

# the probit transform sends the sample to the full plane, where there is
# no boundary to leak mass across
ts = transform(ps)
print("\ntransformed sample: std %.3f / %.3f, corr %.3f"
      % (ts.s.std(), ts.t.std(),
         float(np.corrcoef(ts.s, ts.t)[0, 1])))

# smooth there with a normal-reference bandwidth and map the fit back;
# the back-transformed estimate has no boundary defect to speak of
H = normal_reference_H(ts)
naive = naive_estimate(ts, H, edge)
print("\nnaive probit-KDE at the same points:")
print("  ", np.round(naive, 3))

# the price is a bias factor that grows in the tails of the transformed
# data; the amended variant divides it out pointwise
amended = amended_estimate(ts, H, edge)
print("amended variant       :")
print("  ", np.round(amended, 3))

# compare along the main diagonal, where Frank dependence concentrates
diag = np.linspace(0.05, 0.95, 7)
pts = np.column_stack((diag, diag))
print("\n  u=v    truth   square-KDE   naive   amended")
rows = zip(diag, copula_density(model, diag, diag),
           unit_square_kde(ps, H_sq, pts), naive_estimate(ts, H, pts),
           amended_estimate(ts, H, pts))
for x, ct, cs, cn, ca in rows:
    print("  %.2f   %6.3f   %10.3f   %5.3f   %7.3f" % (x, ct, cs, cn, ca))
