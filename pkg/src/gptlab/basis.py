"""Trigonometric boundary basis, disk geometry and volume quadrature.

Boundary functions on the circle ``|x| = R`` are stored as coefficient
vectors in the basis ``cos(n theta), sin(n theta)``, ``n = 1..N``; the zero
mode is never represented, so every :class:`BoundaryFunction` has mean zero.
The flat layout used by operators is ``[c_1, ..., c_N, s_1, ..., s_N]``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

COS = "cos"
SIN = "sin"
DEFAULT_ORDER = 16


@dataclass(frozen=True)
class DiskGeometry:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    @property
    def area(self):
        return np.pi * self.radius**2

    @property
    def perimeter(self):
        return 2 * np.pi * self.radius


@dataclass(frozen=True)
class HarmonicMode:
    """The harmonic polynomial ``r^n cos(n theta)`` or ``r^n sin(n theta)``."""

    order: int
    parity: str = COS

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"harmonic order must be a positive integer, got {self.order}")
        if self.parity not in (COS, SIN):
            raise ValueError(f"parity must be 'cos' or 'sin', got {self.parity!r}")

    def index(self, max_order):
        """Position of this mode in the flat ``2N`` coefficient layout."""
        if self.order > max_order:
            raise ValueError(f"mode {self.order} exceeds truncation order {max_order}")
        return self.order - 1 + (max_order if self.parity == SIN else 0)


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Zero-mean function ``sum_n c_n cos(n theta) + s_n sin(n theta)`` on ``|x| = R``."""

    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        c = np.array(self.cos_coeffs, dtype=float).ravel()
        s = np.array(self.sin_coeffs, dtype=float).ravel()
        if c.shape != s.shape or c.size == 0:
            raise ValueError("cos and sin coefficient sequences must be non-empty and of equal length")
        object.__setattr__(self, "cos_coeffs", c)
        object.__setattr__(self, "sin_coeffs", s)

    @classmethod
    def zeros(cls, max_order, radius=1.0):
        return cls(np.zeros(max_order), np.zeros(max_order), radius)

    @classmethod
    def from_vector(cls, vec, radius=1.0):
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or vec.size % 2:
            raise ValueError("flat coefficient vector must have even length 2N")
        n = vec.size // 2
        return cls(vec[:n], vec[n:], radius)

    @property
    def max_order(self):
        return self.cos_coeffs.size

    @property
    def vector(self):
        return np.concatenate([self.cos_coeffs, self.sin_coeffs])

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        n = np.arange(1, self.max_order + 1)
        nt = np.multiply.outer(theta, n)
        return np.cos(nt) @ self.cos_coeffs + np.sin(nt) @ self.sin_coeffs

    def pair(self, other):
        """Boundary integral ``int_{|x|=R} f g ds``, exact by orthogonality."""
        n = min(self.max_order, other.max_order)
        return np.pi * self.radius * (
            self.cos_coeffs[:n] @ other.cos_coeffs[:n] + self.sin_coeffs[:n] @ other.sin_coeffs[:n]
        )

    def slot(self, mode):
        coeffs = self.cos_coeffs if mode.parity == COS else self.sin_coeffs
        return coeffs[mode.order - 1]

    def __add__(self, other):
        return BoundaryFunction.from_vector(self.vector + other.vector, self.radius)

    def __sub__(self, other):
        return BoundaryFunction.from_vector(self.vector - other.vector, self.radius)

    def __mul__(self, scalar):
        return BoundaryFunction.from_vector(scalar * self.vector, self.radius)

    __rmul__ = __mul__


def _single_slot(mode, value, radius, max_order):
    max_order = max(max_order or mode.order, mode.order)
    vec = np.zeros(2 * max_order)
    vec[mode.index(max_order)] = value
    return BoundaryFunction.from_vector(vec, radius)


def harmonic_trace(mode, radius=1.0, max_order=None):
    """Trace of ``r^n cos/sin(n theta)`` on the circle: ``R^n`` in the matching slot."""
    DiskGeometry(radius)
    return _single_slot(mode, radius**mode.order, radius, max_order)


def harmonic_normal_derivative(mode, radius=1.0, max_order=None):
    """Outward normal derivative of ``r^n cos/sin(n theta)``: ``n R^(n-1)`` in the matching slot."""
    DiskGeometry(radius)
    return _single_slot(mode, mode.order * radius ** (mode.order - 1), radius, max_order)


def harmonic_coefficients(cos_coeffs=(), sin_coeffs=()):
    """Pad ``(a^c, a^s)`` sequences to a common length."""
    c = np.atleast_1d(np.asarray(cos_coeffs, dtype=float))
    s = np.atleast_1d(np.asarray(sin_coeffs, dtype=float))
    n = max(c.size, s.size, 1)
    return np.pad(c, (0, n - c.size)), np.pad(s, (0, n - s.size))


def harmonic_value(cos_coeffs, sin_coeffs, r, theta):
    """Evaluate ``h = sum_n r^n (a_n^c cos n theta + a_n^s sin n theta)``."""
    c, s = harmonic_coefficients(cos_coeffs, sin_coeffs)
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    out = np.zeros(r.shape)
    for n in range(1, c.size + 1):
        out += r**n * (c[n - 1] * np.cos(n * theta) + s[n - 1] * np.sin(n * theta))
    return out


def harmonic_gradient(cos_coeffs, sin_coeffs, r, theta):
    """Polar components ``(dh/dr, (1/r) dh/dtheta)`` of the harmonic polynomial's gradient."""
    c, s = harmonic_coefficients(cos_coeffs, sin_coeffs)
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    gr = np.zeros(r.shape)
    gt = np.zeros(r.shape)
    for n in range(1, c.size + 1):
        cn, sn = np.cos(n * theta), np.sin(n * theta)
        scale = n * r ** (n - 1)
        gr += scale * (c[n - 1] * cn + s[n - 1] * sn)
        gt += scale * (s[n - 1] * cn - c[n - 1] * sn)
    return gr, gt


@dataclass(frozen=True, eq=False)
class DiskGrid:
    """Tensor quadrature on the disk ``|x| <= R``.

    Radially, a composite Gauss-Legendre rule on the panels
    ``[0, r_1], [r_1, r_2], ..., [r_{P-1}, R]`` with the Jacobian ``r`` folded
    into the weights; angularly, the trapezoid rule on ``n_theta`` equispaced
    points, exact for trigonometric polynomials of degree ``< n_theta``.

    Parameters
    ----------
    radius : float
    radial_nodes : array_like
        Strictly increasing panel ends in ``(0, R]``; ``R`` is appended if missing.
    angular_order : int
        Fourier truncation used for non-radial fields on this grid.
    gauss_order : int
        Gauss points per radial panel.
    """

    radius: float
    radial_nodes: np.ndarray
    angular_order: int = DEFAULT_ORDER
    gauss_order: int = 4

    def __post_init__(self):
        DiskGeometry(self.radius)
        nodes = np.asarray(self.radial_nodes, dtype=float).ravel()
        if nodes.size == 0 or not np.isclose(nodes[-1], self.radius, rtol=1e-14, atol=0):
            nodes = np.append(nodes, self.radius)
        nodes[-1] = self.radius
        if nodes[0] <= 0 or np.any(np.diff(nodes) <= 0) or nodes[-1] > self.radius:
            raise ValueError("radial nodes must be strictly increasing in (0, R]")
        if self.angular_order < 1 or self.gauss_order < 1:
            raise ValueError("angular_order and gauss_order must be positive")
        object.__setattr__(self, "radial_nodes", nodes)

    @classmethod
    def uniform(cls, radius=1.0, panels=64, angular_order=DEFAULT_ORDER, gauss_order=4, breakpoints=()):
        nodes = np.linspace(0.0, radius, panels + 1)[1:]
        extra = [b for b in breakpoints if 0 < b < radius]
        nodes = np.unique(np.concatenate([nodes, extra]))
        return cls(radius, nodes, angular_order, gauss_order)

    @property
    def geometry(self):
        return DiskGeometry(self.radius)

    @property
    def panel_edges(self):
        return np.concatenate([[0.0], self.radial_nodes])

    @property
    def n_theta(self):
        return 4 * (self.angular_order + 1)

    @property
    def exact_degree(self):
        """Highest polynomial degree in ``r`` integrated exactly (Jacobian excluded)."""
        return 2 * self.gauss_order - 2

    @cached_property
    def _radial_rule(self):
        x, w = np.polynomial.legendre.leggauss(self.gauss_order)
        a, b = self.panel_edges[:-1, None], self.panel_edges[1:, None]
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        wr = 0.5 * (b - a) * w * r
        return r.ravel(), wr.ravel()

    @property
    def r(self):
        """Radial quadrature points, panel-major."""
        return self._radial_rule[0]

    @property
    def radial_weights(self):
        """Weights for ``int_0^R f(r) r dr``."""
        return self._radial_rule[1]

    @cached_property
    def theta(self):
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def shape(self):
        return (self.r.size, self.n_theta)

    @cached_property
    def mesh(self):
        """``(r, theta)`` arrays of shape :attr:`shape`."""
        return np.meshgrid(self.r, self.theta, indexing="ij")

    @cached_property
    def weights(self):
        return np.outer(self.radial_weights, np.full(self.n_theta, 2 * np.pi / self.n_theta))

    def refined(self, factor=2):
        edges = self.panel_edges
        fine = np.concatenate(
            [np.linspace(a, b, factor + 1)[1:] for a, b in zip(edges[:-1], edges[1:])]
        )
        return DiskGrid(self.radius, fine, self.angular_order, self.gauss_order)


def volume_integrate(grid, field):
    """Quadrature approximation of ``int_B field dx``.

    ``field`` is either a callable ``f(r, theta)`` (numpy-broadcasting) or an
    array of shape ``grid.shape`` holding the values at the grid nodes.
    """
    if callable(field):
        r, theta = grid.mesh
        values = np.broadcast_to(np.asarray(field(r, theta), dtype=float), grid.shape)
    else:
        values = np.asarray(field, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"field shape {values.shape} does not match grid shape {grid.shape}")
    return float(np.sum(grid.weights * values))
