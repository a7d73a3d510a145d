"""When does the Gaussian lattice sum obey its quadratic bound?

log sum_n exp(-c|n|^2 - 2c sum_I n_i n_j + t v.n) is eventually below
(1 + eps) max_J sum_J v_j^2 t^2 / (4c), but not for small t. The scan finds
the grid point after which the bound holds.
"""

import numpy as np

from gibbsids.bounds import find_validity_threshold, gaussian_lattice_sum, int_lem_bound

print("k=1, t=2, eps=0.1:", f"log sum {gaussian_lattice_sum(1.0, [1.0], (), 2.0):.4f}",
      f"> bound {int_lem_bound(1.0, [1.0], (), 2.0, 0.1):.4f}")

grid = np.geomspace(0.25, 40, 60)
for v, I in [((1.0,), ()), ((1.0, 2.0), ((0, 1),)), ((1.0, 1.0, 1.0), ((0, 1), (1, 2)))]:
    for eps in (0.1, 0.5):
        rep = find_validity_threshold(1.0, v, I, eps, grid)
        print(f"v={v} I={I} eps={eps}: holds from t={rep.threshold:.3f} ({len(rep.violations)} failures below)")
