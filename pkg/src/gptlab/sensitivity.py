"""Interior states, Frechet derivatives of contracted GPTs and their adjoints.

For a harmonic mode ``h`` the interior state ``u`` solves ``div(sigma grad u) = 0``
in the disk with flux ``(Lambda_sigma - Lambda^e)^-1 (Lambda_1 - Lambda^e)[dh/dnu]``;
it is the restriction to the disk of the full-plane transmission solution
with background field ``h``. The derivative of a contracted GPT entry in the
direction ``gamma`` is ``int_B gamma grad u_m . grad u_n``.
"""

import numpy as np

from .basis import COS, SIN, DiskGrid, HarmonicMode, harmonic_normal_derivative, volume_integrate
from .ntd import ntd_exterior, ntd_harmonic, parallel_map, radial_mode

RADIAL_PANELS = 64
RADIAL_GAUSS = 8


def default_grid(sigma, max_order, radius=None):
    """Quadrature grid on which states of ``sigma`` are represented.

    Gridded conductivities always use their own grid. For radial ones the
    panels are refined uniformly and split at the profile's breakpoints.
    """
    if not sigma.is_radial:
        return sigma.grid
    radius = float(sigma.support_radius if radius is None else radius)
    return DiskGrid.uniform(
        radius, RADIAL_PANELS, angular_order=max(int(max_order), 4), gauss_order=RADIAL_GAUSS,
        breakpoints=sigma.breakpoints,
    )


def sigma_on_grid(sigma, grid):
    if sigma.is_radial:
        return np.repeat(sigma.radial(grid.r)[:, None], grid.n_theta, axis=1)
    if grid is not sigma.grid:
        raise ValueError("a gridded conductivity can only be evaluated on its own grid")
    return np.asarray(sigma.values)


def _as_mode(mode):
    if isinstance(mode, HarmonicMode):
        return mode
    if isinstance(mode, tuple):
        return HarmonicMode(*mode)
    return HarmonicMode(int(mode), COS)


def field_on_grid(field, grid):
    """Sample a callable ``f(r, theta)`` (or pass through an array) on the grid nodes."""
    if callable(field):
        r, theta = grid.mesh
        return np.broadcast_to(np.asarray(field(r, theta), dtype=float), grid.shape)
    values = np.asarray(field, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid shape {grid.shape}")
    return values


class InteriorStates:
    """Lazily computed interior states ``grad u_n`` of one conductivity.

    States are filled on first request and never change afterwards; a new
    conductivity iterate needs a new instance.

    Parameters
    ----------
    sigma : RadialConductivity or GriddedConductivity
    max_order : int
        Highest harmonic order that will be requested.
    grid : DiskGrid, optional
        Quadrature grid (see :func:`default_grid`).
    radius : float, optional
        Radius of the disk ``B`` for radial conductivities.
    """

    def __init__(self, sigma, max_order, grid=None, radius=None):
        self.sigma = sigma
        self.max_order = int(max_order)
        if sigma.is_radial:
            self.radius = float(sigma.support_radius if radius is None else radius)
        else:
            self.radius = sigma.grid.radius
        self.grid = grid if grid is not None else default_grid(sigma, max_order, self.radius)
        if not np.isclose(self.grid.radius, self.radius):
            raise ValueError("grid radius must match the disk radius")
        self._cache = {}
        self._general = None

    def _general_setup(self):
        if self._general is None:
            from .fem import FourierGalerkinSolver

            solver = FourierGalerkinSolver.for_conductivity(self.sigma)
            K = solver.order
            if self.max_order > K:
                raise ValueError(f"order {self.max_order} exceeds the grid's angular order {K}")
            lam_s = solver.ntd()
            lam_1, lam_e = ntd_harmonic(K, self.radius), ntd_exterior(K, self.radius)
            lhs = lam_s.dense - lam_e.matrix
            rhs_op = lam_1.matrix - lam_e.matrix
            self._general = (solver, lhs, rhs_op)
        return self._general

    def datum(self, mode):
        """Flux ``sigma du/dnu`` of the state as a flat coefficient vector."""
        mode = _as_mode(mode)
        if self.sigma.is_radial:
            sol = radial_mode(self.sigma, mode.order, self.radius)
            n, R = mode.order, self.radius
            lam1, lame = R / n, -R / n
            g = (lam1 - lame) / (sol.value - lame) * n * R ** (n - 1)
            vec = np.zeros(2 * self.max_order)
            vec[mode.index(self.max_order)] = g
            return vec
        solver, lhs, rhs_op = self._general_setup()
        dh = harmonic_normal_derivative(mode, self.radius, solver.order).vector
        return np.linalg.solve(lhs, rhs_op @ dh)

    def _compute(self, mode):
        r, theta = self.grid.mesh
        if self.sigma.is_radial:
            n = mode.order
            sol = radial_mode(self.sigma, n, self.radius)
            g = self.datum(mode)[mode.index(self.max_order)]
            f = g * sol.f(self.grid.r)[:, None]
            df = g * sol.df(self.grid.r)[:, None]
            c, s = np.cos(n * theta), np.sin(n * theta)
            if mode.parity == COS:
                return df * c, -n * f * s / r
            return df * s, n * f * c / r
        solver = self._general_setup()[0]
        return solver.gradient(solver.solve(self.datum(mode)))

    def gradient(self, mode):
        """Polar components ``(u_r, u_theta / r)`` of ``grad u`` at the grid nodes."""
        mode = _as_mode(mode)
        if mode.order > self.max_order:
            raise ValueError(f"mode {mode.order} exceeds max_order {self.max_order}")
        key = (mode.order, mode.parity)
        if key not in self._cache:
            self._cache[key] = self._compute(mode)
        return self._cache[key]

    def fill(self, modes):
        """Compute several states up front (optionally in parallel, see ``GPTLAB_THREADS``)."""
        modes = [_as_mode(m) for m in modes]
        todo = [m for m in modes if (m.order, m.parity) not in self._cache]
        for m, val in zip(todo, parallel_map(self._compute, todo)):
            self._cache[(m.order, m.parity)] = val
        return self

    def kernel(self, mode_m, mode_n):
        """Pointwise ``grad u_m . grad u_n``."""
        gm, gn = self.gradient(mode_m), self.gradient(mode_n)
        return gm[0] * gn[0] + gm[1] * gn[1]

    def combination_gradient(self, cos_coeffs, sin_coeffs):
        """Gradient of the state for the background ``h = sum a_n^c r^n cos + a_n^s r^n sin``."""
        gr = np.zeros(self.grid.shape)
        gt = np.zeros(self.grid.shape)
        for parity, coeffs in ((COS, cos_coeffs), (SIN, sin_coeffs)):
            for n, a in enumerate(np.atleast_1d(coeffs), start=1):
                if a:
                    g = self.gradient(HarmonicMode(n, parity))
                    gr += a * g[0]
                    gt += a * g[1]
        return gr, gt


def interior_state(sigma, mode, grid=None, radius=None):
    """Gradient ``(u_r, u_theta / r)`` of the interior state of ``mode`` on the quadrature grid."""
    mode = _as_mode(mode)
    return InteriorStates(sigma, mode.order, grid, radius).gradient(mode)


def _states_for(sigma, m, n, states, grid, radius):
    if states is None:
        states = InteriorStates(sigma, max(m.order, n.order), grid, radius)
    return states


def frechet_derivative(sigma, gamma, m, n, parities=(COS, COS), states=None, grid=None, radius=None):
    """Directional derivative of ``M^{pq}_{mn}`` along ``gamma``.

    Parameters
    ----------
    gamma : callable or ndarray
        Perturbation ``gamma(r, theta)`` or its values on the state grid.
    m, n : int
        Receiver and source orders.
    parities : (str, str)
        Parities of receiver and source, ``("cos", "cos")`` for ``M^cc``.
    """
    mm, nn = HarmonicMode(m, parities[0]), HarmonicMode(n, parities[1])
    states = _states_for(sigma, mm, nn, states, grid, radius)
    g = field_on_grid(gamma, states.grid)
    return volume_integrate(states.grid, g * states.kernel(mm, nn))


def frechet_adjoint(sigma, m, n, c, parities=(COS, COS), states=None, grid=None, radius=None):
    """Adjoint of the derivative applied to the scalar ``c``: the field ``c grad u_m . grad u_n``."""
    mm, nn = HarmonicMode(m, parities[0]), HarmonicMode(n, parities[1])
    states = _states_for(sigma, mm, nn, states, grid, radius)
    if c == 0:
        return np.zeros(states.grid.shape)
    return c * states.kernel(mm, nn)


def linearized_perturbation_map(gamma, m, n, grid=None, radius=1.0):
    """Moment ``int_B gamma(x) r^(m+n-2) exp(i (m - n) theta) dx``.

    At a constant background ``k`` the states are ``2/(k+1)`` times the
    harmonic modes, so every contracted-GPT derivative is a multiple of this
    moment; see :func:`linearized_gpt_derivatives`.
    """
    if grid is None:
        grid = DiskGrid.uniform(radius, RADIAL_PANELS, angular_order=max(m + n, 8), gauss_order=RADIAL_GAUSS)
    g = field_on_grid(gamma, grid)
    r, theta = grid.mesh
    re = volume_integrate(grid, g * r ** (m + n - 2) * np.cos((m - n) * theta))
    im = volume_integrate(grid, g * r ** (m + n - 2) * np.sin((m - n) * theta))
    return complex(re, im)


def linearized_gpt_derivatives(moment, m, n, k=1.0):
    """Derivatives of the four contracted GPT entries ``(m, n)`` at constant background ``k``."""
    c2mn = (2.0 / (k + 1.0)) ** 2 * m * n
    return {
        "cc": c2mn * moment.real,
        "ss": c2mn * moment.real,
        "cs": -c2mn * moment.imag,
        "sc": c2mn * moment.imag,
    }


def radial_jacobian(sigma, max_order, nodes, states=None, radius=None):
    """Jacobian of ``(M_1, ..., M_N)`` (diagonal cc entries) w.r.t. nodal values of a
    piecewise-linear radial perturbation on ``nodes`` (which start at 0).
    """
    states = states or InteriorStates(sigma, max_order, radius=radius)
    grid = states.grid
    nodes = np.asarray(nodes, dtype=float)
    jac = np.empty((max_order, nodes.size))
    for j in range(nodes.size):
        hat = np.interp(grid.r, nodes, np.eye(nodes.size)[j])[:, None]
        for n in range(1, max_order + 1):
            jac[n - 1, j] = volume_integrate(grid, hat * states.kernel((n, COS), (n, COS)))
    return jac


def sensitivity_singular_values(sigma, max_order, nodes, radius=None):
    """Singular values of :func:`radial_jacobian`, largest first."""
    return np.linalg.svd(radial_jacobian(sigma, max_order, nodes, radius=radius), compute_uv=False)


def bump(center, width, height=1.0):
    """Smooth radial bump ``height * cos^2`` profile of half-width ``width`` around ``r = center``."""

    def gamma(r, theta=None):
        t = np.clip((np.asarray(r) - center) / width, -1.0, 1.0)
        return height * np.cos(0.5 * np.pi * t) ** 2

    return gamma


def indicator_disk(rad):
    return lambda r, theta=None: (np.asarray(r) <= rad).astype(float)
