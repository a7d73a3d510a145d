"""The separated-packing norm and its staircase approximations.

||u||_S^2 is the largest sum of u(x_i)^2 over point sets whose pairwise
differences avoid S. A small S lets many points crowd into the bump; once
S covers every difference of the support only one point fits.
"""

from gibbsids.packing import Ball, Bump, norm_u_S, upper2_convergence

tri, cos = Bump.triangle(), Bump.cosine()
for r in (0.25, 0.5, 1.0, 2.5):
    a, b = norm_u_S(tri, Ball(r), 1e-2), norm_u_S(cos, Ball(r), 1e-2)
    print(f"S = Ball({r:<4}) triangle {a.value:.4f} ({len(a.witness)} pts)   "
          f"cosine {b.value:.4f} ({len(b.witness)} pts)")

print("\nStaircase approximations on eroded windows approach the norm from above:")
for row in upper2_convergence(tri, Ball(1.0), 2.0, [4, 8, 16, 32, 64]):
    print(f"  n={row.n:3d}  lower={row.lower:.5f}  upper={row.upper:.5f}  target={row.target:.5f}")
