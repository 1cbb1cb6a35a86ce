"""Forward problem: contracted GPTs of disk conductivities.

Run with ``python3 demos/01_forward_gpts.py``.

A homogeneous disk of conductivity k has diagonal contracted GPTs
2 pi n R^(2n) (k - 1)/(k + 1). We check that first, then look at the radial
benchmark profile: its table is diagonal, the cosine and sine responses
coincide, and every harmonic quadratic form sits between the two volume
bounds. Finally the table predicts the far field of the perturbation u - h.
"""

import numpy as np

from gptlab import RadialConductivity, contracted_gpts
from gptlab.gpt import far_field_eval, first_order_pt, gpt_homogeneous_disk, positivity_bounds

np.set_printoptions(precision=5, suppress=True, linewidth=100)

# homogeneous disks against the closed form
for k in (0.5, 2.0, 10.0):
    table = contracted_gpts(RadialConductivity.constant(k), 4)
    exact = [gpt_homogeneous_disk(k, 1.0, n) for n in range(1, 5)]
    print(f"k = {k:5.1f}  M_nn = {np.diag(table.cc)}  max rel err = {np.max(np.abs(np.diag(table.cc) / exact - 1)):.1e}")

# the radial benchmark profile
sigma = RadialConductivity.benchmark()
table = contracted_gpts(sigma, 6)
print("\nbenchmark profile, diagonal of M^cc:", np.diag(table.cc))
print("off-diagonal and cross blocks vanish:", np.abs(table.matrix - np.diag(np.diag(table.matrix))).max())
print("first-order polarization tensor:\n", first_order_pt(table).matrix)

# sigma >= 1 here, so each quadratic form lies between the two bounds
for n in (1, 3, 6):
    a = np.zeros(n)
    a[-1] = 1.0
    lo, hi = positivity_bounds(sigma, a)
    print(f"n = {n}: {lo:9.4f} <= {table.quadratic_form(a):9.4f} <= {hi:9.4f}")

# far field of h = r cos(theta): leading term -M_11 cos(theta) / (2 pi r)
print("\n   r     u - h        leading term")
for r in (1.5, 3.0, 10.0):
    v = far_field_eval(sigma, [1.0], [], [r, 0.0], table=table)
    print(f"{r:5.1f}  {v: .6e}  {-table.cc[0, 0] / (2 * np.pi * r): .6e}")
