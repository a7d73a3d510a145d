"""The count law of a Strauss process squeezed between two explicit bounds.

On the unit interval with interaction range 1, every pair of points pays
energy a = 1, so P(M = n) falls off like exp(-a n^2 / 2). The sampler's
empirical log-probabilities sit between the closed-form lower and upper
bounds for every n that is observed often enough.
"""

import math

from gibbsids.bounds import tail_lower_bound, tail_upper_bound
from gibbsids.pointproc import BoxDomain, Pairwise, Strauss
from gibbsids.sampler import GibbsTarget, estimate_count_pmf, sample_gibbs

model = Pairwise(Strauss(1.0, 1.0))
win = BoxDomain.from_bounds([0.0], [1.0])
res = sample_gibbs(GibbsTarget(model, win.padded(1.0)), 1_000_000, 7, thinning=10, chains=4)
pmf = estimate_count_pmf(res.samples, win, effective_samples=res.ess)

print(f"{'n':>2} {'hits':>8} {'lower':>9} {'log P':>9} {'upper':>9}")
for n in range(6):
    p = pmf.prob(n)
    lp = math.log(p) if p > 0 else -math.inf
    hits = int(pmf.hits[n]) if n < len(pmf.hits) else 0
    print(f"{n:2d} {hits:8d} {tail_lower_bound(win, n, model):9.3f} {lp:9.3f} "
          f"{tail_upper_bound([win], [n], 1.0):9.3f}")
