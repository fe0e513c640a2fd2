"""Sweep the truncation rank and watch error trade against compression.

Projections of smooth objects have rapidly decaying singular values, so a
small k reproduces them almost exactly while storing k*(m+n+1) values
instead of m*n.
"""

from ictlite import Phantom, box, forward_project, make_circular_geometry, sphere
from ictlite.metrics import cr_svd, mse_curve
from ictlite.svdcodec import choose_rank

phantom = Phantom(
    (
        sphere((0.0, 0.0, 0.0), 30.0, 1.0),
        box((12.0, -10.0, 4.0), (30.0, 20.0, 20.0), 0.6),
    )
)
geometry = make_circular_geometry(8, 128, 108, 1.0, 500.0)
stack = forward_project(phantom, geometry)

print(" k    mean truncation MSE    CR_SVD")
for k, mse in mse_curve(stack, [1, 2, 4, 8, 12, 16, 24, 32]):
    print(f"{k:3d}    {mse:18.6e}    {float(cr_svd(128, 108, k)):6.2f}")

budget = 1e-6
k_star = choose_rank(stack, budget)
print(f"\nsmallest rank with worst-view MSE <= {budget:g}: k = {k_star}")
print(f"that rank compresses each view by {float(cr_svd(128, 108, k_star)):.1f}x")
