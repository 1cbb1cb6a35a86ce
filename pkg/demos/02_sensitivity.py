"""Sensitivity of the GPTs to the conductivity.

Run with ``python3 demos/02_sensitivity.py``.

The derivative of M_mn in a direction gamma is the integral of gamma
against grad u_m . grad u_n. We compare it with a central difference, then
look at the singular values of the radial Jacobian: they decay fast, and the
columns for nodes near the centre are tiny. That is why the centre of the
disk is the hardest part to reconstruct.
"""

import numpy as np

from gptlab import RadialConductivity, contracted_gpts
from gptlab.basis import DiskGrid
from gptlab.sensitivity import bump, frechet_derivative, radial_jacobian, sensitivity_singular_values

sigma = RadialConductivity.benchmark()
gamma = bump(0.7, 0.2)
grid = DiskGrid.uniform(1.0, 64, angular_order=4, gauss_order=8, breakpoints=(0.5, 0.9))

eps = 1e-4


def shifted(s):
    return RadialConductivity(lambda r: sigma.radial(r) + s * gamma(r), 1.0, breakpoints=(0.5, 0.9))


print(" n   derivative      central difference")
for n in range(1, 5):
    d = frechet_derivative(sigma, gamma, n, n, grid=grid)
    fd = (contracted_gpts(shifted(eps), n).cc[-1, -1] - contracted_gpts(shifted(-eps), n).cc[-1, -1]) / (2 * eps)
    print(f"{n:2d}  {d: .10f}  {fd: .10f}")

nodes = np.linspace(0.0, 1.0, 11)
sv = sensitivity_singular_values(sigma, 6, nodes)
print("\nsingular values of d(M_11..M_66)/d(nodal values):")
print(np.array2string(sv, precision=3))
jac = radial_jacobian(sigma, 6, nodes)
print("column norms from centre to rim:")
print(np.array2string(np.linalg.norm(jac, axis=0), precision=3))
