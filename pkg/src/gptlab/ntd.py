"""Neumann-to-Dirichlet operators on the circle ``|x| = R``.

All operators act on zero-mean boundary functions in the flat trigonometric
layout of :mod:`gptlab.basis`. Radial conductivities give diagonal
operators (one value per harmonic order, shared by cos and sin); general
conductivities give dense symmetric ``2N x 2N`` matrices.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .basis import BoundaryFunction, DiskGeometry
from .errors import ConvergenceError, SolverError

log = logging.getLogger(__name__)

R_MIN_FACTOR = 1e-6
ODE_RTOL = 1e-12
CONDITION_LIMIT = 1e12


def worker_count():
    """Worker cap from ``GPTLAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("GPTLAB_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(func, items):
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True, eq=False)
class NtDOperator:
    """Truncated NtD map.

    Exactly one of ``diagonal`` (length ``N``, radial case) and ``dense``
    (``2N x 2N``) is set.
    """

    radius: float
    diagonal: np.ndarray = None
    dense: np.ndarray = None
    # diagonal of Lambda_1 - Lambda_sigma computed without cancellation (radial solves only)
    deficit: np.ndarray = None

    def __post_init__(self):
        if (self.diagonal is None) == (self.dense is None):
            raise ValueError("give exactly one of diagonal or dense")
        if self.diagonal is not None:
            object.__setattr__(self, "diagonal", np.asarray(self.diagonal, dtype=float).ravel())
        else:
            d = np.asarray(self.dense, dtype=float)
            if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] % 2:
                raise ValueError("dense NtD matrix must be square with even size 2N")
            object.__setattr__(self, "dense", d)

    @property
    def is_diagonal(self):
        return self.diagonal is not None

    @property
    def max_order(self):
        return self.diagonal.size if self.is_diagonal else self.dense.shape[0] // 2

    @property
    def matrix(self):
        if self.is_diagonal:
            return np.diag(np.concatenate([self.diagonal, self.diagonal]))
        return self.dense

    def truncate(self, max_order):
        if max_order > self.max_order:
            raise ValueError(f"cannot truncate order {self.max_order} operator to {max_order}")
        if self.is_diagonal:
            deficit = None if self.deficit is None else self.deficit[:max_order]
            return NtDOperator(self.radius, diagonal=self.diagonal[:max_order], deficit=deficit)
        n = self.max_order
        idx = np.r_[0:max_order, n : n + max_order]
        return NtDOperator(self.radius, dense=self.dense[np.ix_(idx, idx)])

    def apply(self, f):
        vec = f.vector if isinstance(f, BoundaryFunction) else np.asarray(f, dtype=float)
        if vec.size != 2 * self.max_order:
            raise ValueError(f"boundary function of order {vec.size // 2} vs operator order {self.max_order}")
        if self.is_diagonal:
            out = np.concatenate([self.diagonal, self.diagonal]) * vec
        else:
            out = self.dense @ vec
        return BoundaryFunction.from_vector(out, self.radius) if isinstance(f, BoundaryFunction) else out

    def _combine(self, other, sign):
        if self.max_order != other.max_order or not math.isclose(self.radius, other.radius):
            raise ValueError("operators must share truncation order and radius")
        if self.is_diagonal and other.is_diagonal:
            return NtDOperator(self.radius, diagonal=self.diagonal + sign * other.diagonal)
        return NtDOperator(self.radius, dense=self.matrix + sign * other.matrix)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def norm(self):
        """Spectral norm."""
        if self.is_diagonal:
            return float(np.max(np.abs(self.diagonal)))
        return float(np.linalg.norm(self.dense, 2))

    def symmetry_defect(self):
        """``||A - A^T|| / ||A||`` (Frobenius)."""
        if self.is_diagonal:
            return 0.0
        scale = np.linalg.norm(self.dense)
        return float(np.linalg.norm(self.dense - self.dense.T) / scale) if scale else 0.0


def ntd_harmonic(max_order, radius=1.0):
    """``Lambda_1``: diagonal ``R/n``."""
    DiskGeometry(radius)
    if max_order < 1:
        raise ValueError("truncation order must be >= 1")
    return NtDOperator(radius, diagonal=radius / np.arange(1, max_order + 1))


def ntd_exterior(max_order, radius=1.0):
    """``Lambda^e``: diagonal ``-R/n`` (decaying exterior harmonics, normal pointing out of the disk)."""
    DiskGeometry(radius)
    if max_order < 1:
        raise ValueError("truncation order must be >= 1")
    return NtDOperator(radius, diagonal=-radius / np.arange(1, max_order + 1))


class RadialModeSolution:
    """Regular solution of ``(r sigma f')' = n^2 sigma f / r`` with unit flux ``sigma(R) f'(R) = 1``.

    Integrated in ``s = log r`` on ``[log r_min, log R]`` for the scaled
    unknowns ``w = f / r^n`` and ``p = sigma r f' / r^n``, which obey

        w' = p / sigma - n w,    p' = n^2 sigma w - n p,

    so constant conductivities give constant ``(w, p)``. The start values
    ``w = 1, p = n sigma(r_min)`` encode ``f ~ r^n``; the irregular solution
    decays like ``(r_min / r)^(2n)`` and is negligible at ``R``.

    The integrated pair is ``(w, d)`` with ``d = p - n w``, which vanishes
    where ``sigma = 1``:

        w' = d / sigma + n w (1/sigma - 1),
        d' = n^2 w (sigma - 1/sigma) - n d (1 + 1/sigma).

    ``deficit = R/n - value`` is then ``R d(R) / (n p(R))`` without
    subtracting two nearly equal numbers, which keeps weak contrasts and
    inflated disks accurate to the ODE tolerance.
    """

    def __init__(self, sigma, n, radius, rtol=ODE_RTOL):
        if n < 1:
            raise ValueError("harmonic order must be >= 1")
        self.sigma = sigma
        self.n = n
        self.radius = float(radius)
        r_min = R_MIN_FACTOR * self.radius
        edges = [r_min] + [b for b in sigma.breakpoints if r_min < b < self.radius] + [self.radius]
        y = np.array([1.0, n * (float(sigma.radial(r_min)) - 1.0)])
        # absolute tolerance of d scales with the contrast so small d keeps its relative accuracy
        probe = sigma.radial(np.linspace(r_min, min(self.radius, sigma.support_radius), 257))
        contrast = float(np.max(np.abs(probe - 1.0 / probe)))
        atol = rtol * 1e-2 * np.array([1.0, max(n * contrast, 1e-300)])
        self._y0 = y.copy()
        self._segments = []
        for a, b in zip(edges[:-1], edges[1:]):
            prof = sigma.on_segment(a, b)

            def rhs(s, v, prof=prof):
                sg = prof(math.exp(s))
                inv = 1.0 / sg
                return (v[1] * inv + n * v[0] * (inv - 1.0), n * n * v[0] * (sg - inv) - n * v[1] * (1.0 + inv))

            sol = solve_ivp(
                rhs, (math.log(a), math.log(b)), y, method="DOP853", rtol=rtol, atol=atol, dense_output=True,
            )
            if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
                raise SolverError(
                    f"radial mode ODE failed for n={n} on [{a:.3g}, {b:.3g}]: {sol.message}", mode=n
                )
            self._segments.append((math.log(a), math.log(b), sol.sol))
            y = sol.y[:, -1]
        w_R, d_R = y
        p_R = d_R + n * w_R
        if not p_R > 0:
            raise SolverError(f"non-positive boundary flux in mode {n}", mode=n, residual=float(p_R))
        # unit flux: sigma f'(R) = R^(n-1) p(R) after scaling
        self.scale = 1.0 / (self.radius ** (n - 1) * p_R)
        self.value = self.radius * w_R / p_R
        self.deficit = self.radius * d_R / (n * p_R)
        self._s_edges = np.array([seg[0] for seg in self._segments] + [self._segments[-1][1]])

    def _wp(self, r):
        r = np.asarray(r, dtype=float)
        s = np.log(np.maximum(r, 1e-300))
        w = np.full(r.shape, self._y0[0])
        d = np.full(r.shape, self._y0[1])
        seg = np.clip(np.searchsorted(self._s_edges, s, side="right") - 1, 0, len(self._segments) - 1)
        inside = s >= self._s_edges[0]
        for k, (a, b, interp) in enumerate(self._segments):
            mask = inside & (seg == k)
            if np.any(mask):
                vals = interp(np.clip(s[mask], a, b))
                w[mask], d[mask] = vals[0], vals[1]
        return w, d + self.n * w

    def f(self, r):
        """Mode profile with unit boundary flux."""
        r = np.asarray(r, dtype=float)
        w, _ = self._wp(r)
        return self.scale * r**self.n * w

    def df(self, r):
        """Radial derivative ``f'(r) = r^(n-1) p / sigma``."""
        r = np.asarray(r, dtype=float)
        _, p = self._wp(r)
        return self.scale * r ** (self.n - 1) * p / self.sigma.radial(r)


@lru_cache(maxsize=512)
def _mode_solution(sigma, n, radius):
    return RadialModeSolution(sigma, n, radius)


def radial_mode(sigma, n, radius=None):
    """Cached :class:`RadialModeSolution` for ``(sigma, n, R)``."""
    radius = float(sigma.support_radius if radius is None else radius)
    if radius < sigma.support_radius * (1 - 1e-14):
        raise ValueError(
            f"disk radius {radius} does not contain supp(sigma - 1) (radius {sigma.support_radius})"
        )
    return _mode_solution(sigma, int(n), radius)


def ntd_sigma_radial(sigma, n, radius=None):
    """n-th diagonal entry of ``Lambda_sigma`` for a radial conductivity."""
    if not getattr(sigma, "is_radial", False):
        raise TypeError("ntd_sigma_radial needs a RadialConductivity")
    return radial_mode(sigma, n, radius).value


def ntd_sigma_radial_operator(sigma, max_order, radius=None):
    sols = parallel_map(lambda n: radial_mode(sigma, n, radius), range(1, max_order + 1))
    radius = float(sigma.support_radius if radius is None else radius)
    return NtDOperator(radius, diagonal=np.array([s.value for s in sols]),
                       deficit=np.array([s.deficit for s in sols]))


def ntd_sigma_general(sigma, max_order=None):
    """Dense ``Lambda_sigma`` of a gridded conductivity via the Fourier-Galerkin FEM solver."""
    from .fem import FourierGalerkinSolver

    solver = FourierGalerkinSolver.for_conductivity(sigma)
    op = solver.ntd()
    return op if max_order is None else op.truncate(max_order)


def ntd_sigma(sigma, max_order, radius=None):
    """``Lambda_sigma`` for either conductivity kind."""
    if sigma.is_radial:
        return ntd_sigma_radial_operator(sigma, max_order, radius)
    if radius is not None and not math.isclose(radius, sigma.grid.radius):
        raise ValueError("gridded conductivities are solved on their own grid radius")
    return ntd_sigma_general(sigma, max_order)


def _as_pair(pair):
    lam_sigma, lam_e = pair
    if lam_sigma.max_order != lam_e.max_order:
        raise ValueError("operator pair must share the truncation order")
    return lam_sigma - lam_e


def ntd_difference_inverse_apply(pair, f):
    """Solve ``(Lambda_sigma - Lambda^e)[g] = f`` directly."""
    diff = _as_pair(pair)
    vec = f.vector if isinstance(f, BoundaryFunction) else np.asarray(f, dtype=float)
    if diff.is_diagonal:
        d = np.concatenate([diff.diagonal, diff.diagonal])
        cond = np.max(np.abs(d)) / np.min(np.abs(d)) if np.all(d) else np.inf
        if cond > CONDITION_LIMIT:
            raise SolverError("Lambda_sigma - Lambda^e is numerically singular", residual=cond)
        g = vec / d
    else:
        cond = np.linalg.cond(diff.dense)
        if cond > CONDITION_LIMIT:
            raise SolverError("Lambda_sigma - Lambda^e is numerically singular", residual=cond)
        g = np.linalg.solve(diff.dense, vec)
    return BoundaryFunction.from_vector(g, diff.radius) if isinstance(f, BoundaryFunction) else g


def ntd_difference_inverse_landweber(pair, f, step=None, tol=1e-12, max_iter=100_000):
    """Landweber iteration ``g <- g + w A (f - A g)`` for ``A = Lambda_sigma - Lambda^e``.

    ``A`` is symmetric, so ``A`` is its own adjoint. Converges for
    ``0 < step < 2 / ||A||^2``; the default is ``1 / ||A||^2``.

    Raises
    ------
    ConvergenceError
        If the relative residual exceeds ``tol`` after ``max_iter`` steps,
        or grows beyond its starting value by a factor 1e6 (divergence).
    """
    diff = _as_pair(pair)
    a = diff.matrix
    vec = f.vector if isinstance(f, BoundaryFunction) else np.asarray(f, dtype=float)
    norm_a = np.linalg.norm(a, 2)
    if step is None:
        step = 1.0 / norm_a**2
    if not step > 0:
        raise ValueError("Landweber step must be positive")
    if step >= 2.0 / norm_a**2:
        log.warning("Landweber step %.3g violates the bound 2/||A||^2 = %.3g", step, 2.0 / norm_a**2)
    f_norm = np.linalg.norm(vec) or 1.0
    g = np.zeros_like(vec)
    res = vec.copy()
    rel = np.linalg.norm(res) / f_norm
    for it in range(max_iter):
        if rel <= tol:
            break
        g = g + step * (a @ res)
        res = vec - a @ g
        rel = np.linalg.norm(res) / f_norm
        if not np.isfinite(rel) or rel > 1e6:
            raise ConvergenceError(
                f"Landweber iteration diverged at step {it + 1} (relative residual {rel:.3g}); "
                f"reduce the step below {2.0 / norm_a**2:.3g}",
                residual=float(rel),
            )
    else:
        if rel > tol:
            raise ConvergenceError(
                f"Landweber iteration stopped after {max_iter} steps with relative residual {rel:.3g}",
                residual=float(rel),
            )
    return BoundaryFunction.from_vector(g, diff.radius) if isinstance(f, BoundaryFunction) else g
