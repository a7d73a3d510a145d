"""Poisson versus Strauss wells: how fast does the IDS vanish at the bottom?

Both runs place triangular wells of depth 2 at the points of a process on
[-8, 8] and count eigenvalues below each lambda. The Poisson IDS decays like
exp(c lambda log|lambda|); the repulsive Strauss process forbids clusters,
so its IDS decays like exp(-q lambda^2). Dividing log N by each candidate
scale shows which one flattens.
"""

import numpy as np

from gibbsids import bounds
from gibbsids.pointproc import BoxDomain, Pairwise, SingleSitePotential, Strauss
from gibbsids.sampler import GibbsTarget, PoissonTarget
from gibbsids.schrodinger import estimate_ids

L, h = 16.0, 1 / 16
lams = np.linspace(-6, -2, 9)
u0 = SingleSitePotential.triangular(2.0, 1.0)
box = BoxDomain.centered(L, 1)

poisson = estimate_ids(PoissonTarget(box, 1.0), u0, lams, L, h, 4000, seed=1)
strauss = estimate_ids(GibbsTarget(Pairwise(Strauss(1.0, 1.0)), box), u0, lams, L, h, 20000, seed=2,
                       thinning=200)

print(f"{'lambda':>7} {'N poisson':>11} {'N strauss':>11} {'logN/(l log|l|)':>16} {'logN/l^2':>10}")
with np.errstate(divide="ignore"):
    for lam, p, s in zip(lams, poisson.n_hat, strauss.n_hat):
        print(f"{lam:7.2f} {p:11.3e} {s:11.3e} {np.log(p) / (lam * np.log(-lam)):16.3f} {np.log(s) / lam**2:10.3f}")

fit = bounds.pastur_slope_fit(poisson, u0)
print(f"\nPoisson plateau {fit.plateau:.3f}, predicted 1/|u0(0)| = {fit.target:.3f}")
print("Strauss ordinates are -inf where no replica had an eigenvalue that low.")
