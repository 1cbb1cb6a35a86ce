"""Contracted generalized polarization tensors.

The central formula maps the three NtD operators to the tensor table::

    phi  = Lambda_1^-1 (Lambda_1 - Lambda_sigma) (Lambda_sigma - Lambda^e)^-1 (Lambda_1 - Lambda^e) [dh/dnu]
    M_mn = int_{|x|=R} r^m (cos|sin)(m theta) phi ds

with ``h = r^n (cos|sin)(n theta)``. Boundary pairings are exact in the
trigonometric basis.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import COS, SIN, DEFAULT_ORDER, DiskGeometry, harmonic_coefficients, harmonic_gradient
from .ntd import ntd_exterior, ntd_harmonic, ntd_sigma, ntd_sigma_general, radial_mode
from .sensitivity import InteriorStates, default_grid, sigma_on_grid

BLOCKS = ("cc", "cs", "sc", "ss")


@dataclass(frozen=True, eq=False)
class ContractedGPTTable:
    """Blocks ``M^cc, M^cs, M^sc, M^ss`` (rows: receiver order ``m``, columns: source order ``n``)."""

    cc: np.ndarray
    cs: np.ndarray
    sc: np.ndarray
    ss: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        shapes = set()
        for name in BLOCKS:
            block = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, block)
            shapes.add(block.shape)
        if len(shapes) != 1 or len(next(iter(shapes))) != 2 or len(set(next(iter(shapes)))) != 1:
            raise ValueError("all four GPT blocks must be square and of the same size")

    @classmethod
    def from_matrix(cls, matrix, radius=1.0):
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0] // 2
        return cls(matrix[:n, :n], matrix[:n, n:], matrix[n:, :n], matrix[n:, n:], radius)

    @classmethod
    def zeros(cls, max_order, radius=1.0):
        return cls.from_matrix(np.zeros((2 * max_order, 2 * max_order)), radius)

    @property
    def max_order(self):
        return self.cc.shape[0]

    @property
    def matrix(self):
        """Assembled ``2N x 2N`` matrix ``[[cc, cs], [sc, ss]]``."""
        return np.block([[self.cc, self.cs], [self.sc, self.ss]])

    @property
    def diagonal(self):
        """``M_n = M^cc_nn`` for ``n = 1..N``."""
        return np.diag(self.cc).copy()

    def block(self, name):
        return getattr(self, name)

    def truncate(self, max_order):
        if max_order > self.max_order:
            raise ValueError(f"table has order {self.max_order} < {max_order}")
        k = slice(0, max_order)
        return ContractedGPTTable(self.cc[k, k], self.cs[k, k], self.sc[k, k], self.ss[k, k], self.radius)

    def norm(self):
        return float(np.linalg.norm(self.matrix))

    def symmetry_defect(self):
        """``||M - M^T|| / ||M||`` for the assembled matrix (0 for the zero table)."""
        m = self.matrix
        scale = np.linalg.norm(m)
        return float(np.linalg.norm(m - m.T) / scale) if scale else 0.0

    def quadratic_form(self, cos_coeffs, sin_coeffs=()):
        """Harmonic sum ``sum a_alpha a_beta M_alpha_beta`` for ``h`` given by its coefficients."""
        a = self._coeff_vector(cos_coeffs, sin_coeffs)
        return float(a @ self.matrix @ a)

    def bilinear_form(self, h1, h2):
        """``sum a_alpha b_beta M_alpha_beta``; ``h1``/``h2`` are ``(cos_coeffs, sin_coeffs)`` pairs."""
        return float(self._coeff_vector(*h2) @ self.matrix @ self._coeff_vector(*h1))

    def _coeff_vector(self, cos_coeffs, sin_coeffs=()):
        c, s = harmonic_coefficients(cos_coeffs, sin_coeffs)
        N = self.max_order
        if c.size > N:
            if np.any(c[N:]) or np.any(s[N:]):
                raise ValueError(f"harmonic of order {c.size} exceeds table order {N}")
            c, s = c[:N], s[:N]
        return np.concatenate([np.pad(c, (0, N - c.size)), np.pad(s, (0, N - s.size))])


@dataclass(frozen=True)
class FirstOrderPT:
    """The 2x2 polarization tensor."""

    matrix: np.ndarray

    @property
    def is_symmetric(self):
        m = np.asarray(self.matrix)
        return bool(np.allclose(m, m.T, rtol=1e-10, atol=1e-14 * (np.abs(m).max() or 1)))

    def eigenvalues(self):
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))


def gpt_matrix_from_ntd(lam_sigma, radius):
    """Assembled contracted GPT matrix from a truncated ``Lambda_sigma``.

    Columns are sources ``(n, parity)``, rows receivers ``(m, parity)``, both
    in the flat ``[cos 1..N, sin 1..N]`` layout.
    """
    N = lam_sigma.max_order
    lam1, lame = ntd_harmonic(N, radius), ntd_exterior(N, radius)
    n = np.arange(1, N + 1)
    dh = np.concatenate([n * radius ** (n - 1)] * 2)
    trace = np.concatenate([radius**n] * 2)
    if lam_sigma.is_diagonal:
        ls, l1, le = lam_sigma.diagonal, lam1.diagonal, lame.diagonal
        gap = l1 - ls if lam_sigma.deficit is None else lam_sigma.deficit
        factor = gap * (l1 - le) / (l1 * (ls - le))
        return np.diag(np.pi * radius * trace * np.concatenate([factor] * 2) * dh)
    L1, Ls, Le = lam1.matrix, lam_sigma.matrix, lame.matrix
    inner = np.linalg.solve(Ls - Le, (L1 - Le) * dh[None, :])
    phi = (1.0 / np.diag(L1))[:, None] * ((L1 - Ls) @ inner)
    return np.pi * radius * trace[:, None] * phi


def contracted_gpts(sigma, max_order=DEFAULT_ORDER, radius=None):
    """Contracted GPT table of order ``N`` for a radial or gridded conductivity.

    Radial conductivities go through the per-mode ODE solves (diagonal
    operators). Gridded ones use the Galerkin NtD matrix at the grid's full
    angular order, and the table is truncated to ``N`` afterwards.
    """
    if max_order < 1:
        raise ValueError("GPT order must be >= 1")
    if sigma.is_radial:
        radius = float(sigma.support_radius if radius is None else radius)
        lam_s = ntd_sigma(sigma, max_order, radius)
    else:
        radius = sigma.grid.radius
        lam_s = ntd_sigma_general(sigma)
        if max_order > lam_s.max_order:
            raise ValueError(f"GPT order {max_order} exceeds the grid's angular order {lam_s.max_order}")
    table = ContractedGPTTable.from_matrix(gpt_matrix_from_ntd(lam_s, radius), radius)
    return table.truncate(max_order)


def gpt_homogeneous_disk(k, radius, n):
    """Closed form ``2 pi n R^(2n) (k - 1)/(k + 1)`` for a disk of constant conductivity ``k``."""
    if not k > 0:
        raise ValueError("conductivity must be positive")
    if n < 1:
        raise ValueError("order must be >= 1")
    DiskGeometry(radius)
    return 2 * np.pi * n * radius ** (2 * n) * (k - 1) / (k + 1)


def far_field_series(table, cos_coeffs, sin_coeffs, x):
    """Truncated far-field series for ``(u - h)(x)`` and the size of its last retained term."""
    x = np.asarray(x, dtype=float)
    r = float(np.hypot(x[0], x[1]))
    if not r > table.radius:
        raise ValueError(f"far-field point {tuple(x)} is not outside the disk of radius {table.radius}")
    theta = float(np.arctan2(x[1], x[0]))
    a = table._coeff_vector(cos_coeffs, sin_coeffs)
    N = table.max_order
    mixed = table.matrix @ a
    m = np.arange(1, N + 1)
    terms = -(np.cos(m * theta) * mixed[:N] + np.sin(m * theta) * mixed[N:]) / (2 * np.pi * m * r**m)
    return float(terms.sum()), float(abs(terms[-1]))


def far_field_eval(sigma, cos_coeffs, sin_coeffs, x, table=None, max_order=None, tail_tol=1e-6):
    """Perturbation ``(u - h)(x)`` at an exterior point from the contracted GPT expansion.

    Warns (``RuntimeWarning``) when the last retained term exceeds
    ``tail_tol`` times the value, i.e. the series is visibly truncated.
    """
    if table is None:
        c, s = harmonic_coefficients(cos_coeffs, sin_coeffs)
        order = max_order or max(DEFAULT_ORDER, c.size)
        table = contracted_gpts(sigma, order)
    value, tail = far_field_series(table, cos_coeffs, sin_coeffs, x)
    if tail > tail_tol * max(abs(value), np.finfo(float).tiny):
        warnings.warn(
            f"far-field series truncated at order {table.max_order}: last term {tail:.3g} "
            f"vs value {value:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return value


def gpt_volume_identity(sigma, h1, h2, states=None, radius=None):
    """``int_B (sigma - 1) grad u_1 . grad h_2 dx`` with ``u_1`` the transmission solution for ``h_1``.

    ``h1`` and ``h2`` are ``(cos_coeffs, sin_coeffs)`` pairs. The value equals
    the harmonic sum ``sum a_alpha b_beta M_alpha_beta``.
    """
    c1, s1 = harmonic_coefficients(*h1)
    c2, s2 = harmonic_coefficients(*h2)
    order = max(c1.size, c2.size)
    if states is None:
        states = InteriorStates(sigma, order, radius=radius)
    grid = states.grid
    gr, gt = states.combination_gradient(c1, s1)
    r, theta = grid.mesh
    hr, ht = harmonic_gradient(c2, s2, r, theta)
    weight = sigma_on_grid(sigma, grid) - 1.0
    return float(np.sum(grid.weights * weight * (gr * hr + gt * ht)))


def gpt_boundary_formula(sigma, m, n, parities=(COS, COS), radius=None, max_order=None):
    """GPT entry from ``int h_1 sigma du_2/dnu ds - int dh_1/dnu u_2 ds``.

    ``u_2`` is the transmission solution for ``h_2 = r^m (cos|sin)(m theta)``
    and ``h_1 = r^n (cos|sin)(n theta)``. The interior flux and the exterior
    scattered coefficients are solved together from the two transmission
    conditions. By symmetry the result is ``M^{pq}_{mn}`` with ``p``, ``q``
    the parities of ``m`` and ``n``.
    """
    pm, pn = parities
    if sigma.is_radial:
        radius = float(sigma.support_radius if radius is None else radius)
        if m != n or pm != pn:
            return 0.0
        lam = radial_mode(sigma, m, radius).value
        R = radius
        # unknowns: interior flux c and exterior coefficient A of r^-m
        system = np.array([[lam, -(R**-m)], [1.0, m * R ** (-m - 1)]])
        c, _ = np.linalg.solve(system, [R**m, m * R ** (m - 1)])
        return float(np.pi * R * c * (R**n - n * R ** (n - 1) * lam))
    radius = sigma.grid.radius
    lam_s = ntd_sigma_general(sigma)
    K = lam_s.max_order
    R = radius
    k = np.arange(1, K + 1)
    k2 = np.concatenate([k, k])
    L = lam_s.dense
    # trace: L psi - R^-k A = h_2|_dB ; flux: psi + k R^(-k-1) A = dh_2/dnu
    system = np.block([[L, -np.diag(R ** (-k2))], [np.eye(2 * K), np.diag(k2 * R ** (-k2 - 1.0))]])
    h2 = np.zeros(2 * K)
    dh2 = np.zeros(2 * K)
    idx_m = m - 1 + (K if pm == SIN else 0)
    h2[idx_m] = R**m
    dh2[idx_m] = m * R ** (m - 1)
    psi = np.linalg.solve(system, np.concatenate([h2, dh2]))[: 2 * K]
    u2 = L @ psi
    idx_n = n - 1 + (K if pn == SIN else 0)
    return float(np.pi * R * (R**n * psi[idx_n] - n * R ** (n - 1) * u2[idx_n]))


def positivity_bounds(sigma, cos_coeffs, sin_coeffs=(), grid=None, radius=None):
    """Lower and upper bounds ``int (sigma-1)/sigma |grad h|^2`` and ``int (sigma-1) |grad h|^2``."""
    c, s = harmonic_coefficients(cos_coeffs, sin_coeffs)
    if grid is None:
        grid = default_grid(sigma, c.size, radius)
    sg = sigma_on_grid(sigma, grid)
    r, theta = grid.mesh
    hr, ht = harmonic_gradient(c, s, r, theta)
    grad2 = hr**2 + ht**2
    lower = float(np.sum(grid.weights * (sg - 1.0) / sg * grad2))
    upper = float(np.sum(grid.weights * (sg - 1.0) * grad2))
    return lower, upper


def first_order_pt(table):
    """The polarization tensor ``[[M^cc_11, M^cs_11], [M^sc_11, M^ss_11]]``."""
    return FirstOrderPT(np.array([[table.cc[0, 0], table.cs[0, 0]], [table.sc[0, 0], table.ss[0, 0]]]))
