"""Conductivity distributions on the disk.

Two concrete kinds are supported: :class:`RadialConductivity`, a profile
``sigma(r)`` equal to 1 beyond its support radius, and
:class:`GriddedConductivity`, arbitrary values at the nodes of a
:class:`~gptlab.basis.DiskGrid`.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import DiskGrid
from .errors import InadmissibleDataError

BENCHMARK_EXPRESSION = "(0.3*r^2+0.5*r^3+6*(r^2-0.5)^2+3.0)/3.0"


def benchmark_profile(r):
    r = np.asarray(r, dtype=float)
    return (0.3 * r**2 + 0.5 * r**3 + 6 * (r**2 - 0.5) ** 2 + 3.0) / 3.0


@dataclass(frozen=True, eq=False)
class RadialConductivity:
    """A radially symmetric conductivity ``sigma(r)``.

    Parameters
    ----------
    profile : callable
        Vectorised ``r -> sigma(r)`` used on ``[0, support_radius]``.
    support_radius : float
        ``sigma`` is 1 for ``r > support_radius``.
    breakpoints : tuple of float
        Radii where the profile or its derivative is discontinuous. ODE solves
        and quadratures split there; ``support_radius`` is always included.
    label : str
        Free-form description (expression string, ``"constant 2"``...).
    """

    profile: callable
    support_radius: float = 1.0
    breakpoints: tuple = ()
    label: str = ""
    bounds: tuple = field(default=None)

    is_radial = True

    def __post_init__(self):
        if not self.support_radius > 0:
            raise ValueError("support radius must be positive")
        bps = {float(b) for b in self.breakpoints if 0 < b < self.support_radius}
        bps.add(float(self.support_radius))
        object.__setattr__(self, "breakpoints", tuple(sorted(bps)))
        if self.bounds is None:
            probe = np.linspace(0.0, self.support_radius, 4097)
            vals = np.asarray(self.profile(probe), dtype=float) * np.ones_like(probe)
            if not np.all(np.isfinite(vals)):
                raise InadmissibleDataError(f"conductivity {self.label!r} is not finite on the disk")
            lo, hi = min(vals.min(), 1.0), max(vals.max(), 1.0)
            object.__setattr__(self, "bounds", (float(lo), float(hi)))
        if not self.bounds[0] > 0:
            raise InadmissibleDataError(
                f"conductivity {self.label!r} must be bounded below by a positive constant "
                f"(min found {self.bounds[0]:.6g})"
            )

    @classmethod
    def constant(cls, k, support_radius=1.0):
        k = float(k)
        return cls(lambda r: np.full(np.shape(r), k), support_radius, label=f"constant {k!r}", bounds=(min(k, 1.0), max(k, 1.0)))

    @classmethod
    def benchmark(cls):
        """The smooth radial profile used as the reconstruction test case (support radius 1)."""
        return cls(benchmark_profile, 1.0, label=BENCHMARK_EXPRESSION)

    @classmethod
    def piecewise_linear(cls, nodes, values, support_radius=None):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or np.any(np.diff(nodes) <= 0):
            raise ValueError("piecewise-linear profile needs matching, strictly increasing nodes")
        support = float(support_radius if support_radius is not None else nodes[-1])
        return cls(
            lambda r: np.interp(r, nodes, values),
            support,
            breakpoints=tuple(nodes[1:-1]),
            label="piecewise linear",
            bounds=(min(values.min(), 1.0), max(values.max(), 1.0)),
        )

    @property
    def lambda1(self):
        return self.bounds[0]

    @property
    def lambda2(self):
        return self.bounds[1]

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.support_radius
        vals = np.asarray(self.profile(np.where(inside, r, 0.0)), dtype=float) * np.ones(r.shape)
        return np.where(inside, vals, 1.0)

    def __call__(self, r, theta=None):
        return self.radial(r)

    def on_segment(self, a, b):
        """Profile restricted to ``[a, b]`` between consecutive breakpoints.

        Arguments are clipped into the open segment so that one-sided values
        are used at jump discontinuities.
        """
        if a >= self.support_radius:
            return lambda r: 1.0
        eps = 1e-13 * b
        lo, hi = a + eps, b - eps
        return lambda r: float(self.profile(min(max(r, lo), hi)))


@dataclass(frozen=True, eq=False)
class GriddedConductivity:
    """Conductivity values at the quadrature nodes of a :class:`DiskGrid`.

    ``values`` has shape ``grid.shape`` (radial quadrature points by angular
    samples). The field is taken to equal 1 outside the grid's disk.
    """

    grid: DiskGrid
    values: np.ndarray
    label: str = ""

    is_radial = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise InadmissibleDataError("gridded conductivity has non-finite values")
        if vals.min() <= 0:
            raise InadmissibleDataError(
                f"conductivity must be bounded below by a positive constant (min found {vals.min():.6g})"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, func, grid, label=""):
        r, theta = grid.mesh
        return cls(grid, np.broadcast_to(np.asarray(func(r, theta), dtype=float), grid.shape), label)

    @classmethod
    def constant(cls, k, grid):
        return cls(grid, np.full(grid.shape, float(k)), f"constant {float(k)!r}")

    @classmethod
    def from_radial(cls, sigma, grid):
        return cls(grid, np.repeat(sigma.radial(grid.r)[:, None], grid.n_theta, axis=1), sigma.label)

    @property
    def support_radius(self):
        return self.grid.radius

    @property
    def bounds(self):
        return (min(float(self.values.min()), 1.0), max(float(self.values.max()), 1.0))

    @property
    def lambda1(self):
        return self.bounds[0]

    @property
    def lambda2(self):
        return self.bounds[1]

    def angular_mean(self):
        """Radial profile obtained by averaging over ``theta`` at each radial quadrature point."""
        return self.values.mean(axis=1)

    def with_values(self, values):
        return GriddedConductivity(self.grid, values, self.label)
