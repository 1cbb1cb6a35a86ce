"""Conductivity reconstruction from contracted GPTs.

The discrepancy ``S(sigma) = 1/2 sum_{m,n <= l} w_mn (y_mn - M_mn(sigma))^2``
is decreased by Landweber (gradient) steps

    sigma <- sigma + step * sum w_mn (y_mn - M_mn) grad u_m . grad u_n

where the sum runs over the orders active in the current stage. Stages
activate one more order at a time and refine the radial mesh, each stage
starting from the previous result.

Two parametrizations are available. ``"radial"`` keeps a piecewise-linear
profile on the stage's radial nodes; forward solves use a P1 Galerkin
discretisation of the per-mode radial equation on a fine mesh nested in the
stage mesh, which makes the gradient the exact derivative of the discrete
GPTs. Their O(h^2) bias is removed by a constant per-order offset computed
with the accurate ODE solver at the start of every stage. ``"gridded"`` updates values on a fixed :class:`~gptlab.basis.DiskGrid`
with the Fourier-Galerkin solver and fits all four GPT blocks.
"""

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solveh_banded

from .basis import DiskGrid, volume_integrate
from .conductivity import GriddedConductivity, RadialConductivity
from .errors import InadmissibleDataError, SolverError
from .gpt import BLOCKS, ContractedGPTTable, contracted_gpts, gpt_matrix_from_ntd
from .ntd import ntd_exterior, ntd_harmonic

log = logging.getLogger(__name__)

FINE_ELEMENTS = 1200
STALL_WINDOW = 50
STALL_TOL = 1e-12
MIN_STEP_FRACTION = 2.0**-40


@dataclass(frozen=True)
class Stage:
    """One stage of the recursive schedule.

    ``order`` GPT orders are active, the radial profile has ``nodes`` nodes,
    at most ``max_iter`` Landweber steps are taken and the stage stops early
    once ``S <= tol``.
    """

    order: int
    nodes: int
    max_iter: int = 800
    tol: float = 1e-20

    def __post_init__(self):
        if self.order < 1 or self.nodes < 2 or self.max_iter < 0 or not self.tol >= 0:
            raise ValueError(f"invalid stage {self}")


def default_weights(max_order, radius=1.0):
    """``w_mn = 1 / (m n R^(2(m+n))``, balancing the growth ``M_mn ~ n R^(2n)``."""
    n = np.arange(1, max_order + 1, dtype=float)
    return 1.0 / (np.outer(n, n) * radius ** (2 * (n[:, None] + n[None, :])))


def default_schedule(max_order, nodes_per_order=8, max_iter=800, tol=1e-20):
    return tuple(Stage(l, nodes_per_order * l + 1, max_iter, tol) for l in range(1, max_order + 1))


@dataclass(frozen=True, eq=False)
class ReconstructionConfig:
    """Settings of :func:`recursive_reconstruct`.

    Parameters
    ----------
    max_order : int
        Highest GPT order ``N`` used.
    weights : ndarray, optional
        ``N x N`` nonnegative weights; :func:`default_weights` if omitted.
    step_size : float
        Initial Landweber step of every stage; halved whenever ``S`` would increase.
    schedule : sequence of Stage, optional
        Strictly increasing orders ending at ``N``; :func:`default_schedule` if omitted.
    lambda_min : float
        Positivity floor applied after every step.
    radius : float
        Radius of the disk ``B`` carrying the unknown conductivity.
    parametrization : {"radial", "gridded"}
    grid : DiskGrid, optional
        Fixed grid of the gridded parametrization.
    """

    max_order: int
    weights: np.ndarray = None
    step_size: float = 0.1
    schedule: tuple = None
    lambda_min: float = 0.1
    radius: float = 1.0
    parametrization: str = "radial"
    grid: DiskGrid = None
    fine_elements: int = FINE_ELEMENTS

    def __post_init__(self):
        N = int(self.max_order)
        if N < 1:
            raise ValueError("max_order must be >= 1")
        object.__setattr__(self, "max_order", N)
        w = default_weights(N, self.radius) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (N, N) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError(f"weights must be a nonnegative {N}x{N} array")
        object.__setattr__(self, "weights", w)
        sched = default_schedule(N) if self.schedule is None else tuple(
            s if isinstance(s, Stage) else Stage(*s) for s in self.schedule
        )
        orders = [s.order for s in sched]
        if not orders or orders[-1] != N or any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValueError(f"schedule orders {orders} must increase strictly up to {N}")
        object.__setattr__(self, "schedule", sched)
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not self.lambda_min > 0:
            raise ValueError("lambda_min must be positive")
        if self.parametrization not in ("radial", "gridded"):
            raise ValueError(f"unknown parametrization {self.parametrization!r}")
        if self.parametrization == "gridded":
            grid = self.grid or DiskGrid.uniform(self.radius, 24, angular_order=max(N, 4), gauss_order=3)
            if not math.isclose(grid.radius, self.radius):
                raise ValueError("grid radius must equal the reconstruction radius")
            if grid.angular_order < N:
                raise ValueError(f"grid angular order {grid.angular_order} is below max_order {N}")
            object.__setattr__(self, "grid", grid)


class RadialGalerkin:
    """P1 Galerkin solver of the per-mode radial equation for piecewise-linear profiles.

    For ``u = f(r) cos(n theta)`` the weak form on ``[0, R]`` is
    ``int sigma (f' v' + n^2 f v / r^2) r dr = R v(R)`` with ``f(0) = 0``,
    so ``lambda_n = f(R)``. Every coarse panel is split into the same number
    of elements, so the coarse hat functions are exactly representable.

    Parameters
    ----------
    nodes : array_like
        Coarse nodes ``0 = x_0 < ... < x_P = R`` of the profile.
    elements : int
        Approximate number of fine elements.
    """

    def __init__(self, nodes, elements=FINE_ELEMENTS, gauss_order=3):
        nodes = np.asarray(nodes, dtype=float)
        if nodes[0] != 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must start at 0 and increase strictly")
        self.nodes = nodes
        self.radius = R = float(nodes[-1])
        sub = max(1, math.ceil(elements / (nodes.size - 1)))
        x = np.concatenate([np.linspace(a, b, sub + 1)[:-1] for a, b in zip(nodes[:-1], nodes[1:])] + [[R]])
        self.x = x
        self.h = h = np.diff(x)[:, None]
        gx, gw = np.polynomial.legendre.leggauss(gauss_order)
        self.rho = rho = x[:-1, None] + 0.5 * h * (gx + 1)
        self.w = 0.5 * h * gw * rho
        self.psi_l = (x[1:, None] - rho) / h
        self.psi_r = (rho - x[:-1, None]) / h
        # coarse hats at the fine quadrature points, and their lumped mass
        self.hats = np.stack([np.interp(rho, nodes, e) for e in np.eye(nodes.size)])
        self.mass = 2 * np.pi * np.einsum("ieg,eg->i", self.hats, self.w)

    def profile_at_quadrature(self, values):
        return np.interp(self.rho, self.nodes, values)

    def solve(self, values, max_order):
        """GPTs ``M_n`` and gradients ``dM_n/d(values)`` for ``n = 1..max_order``.

        Returns
        -------
        M : ndarray, shape (N,)
        D : ndarray, shape (N, P+1)
            ``D[n-1, i] = int_B phi_i |grad u_n|^2 dx`` (angular average of the cos state).
        """
        R = self.radius
        s = self.profile_at_quadrature(values)
        h, w, rho, pl, pr = self.h, self.w, self.rho, self.psi_l, self.psi_r
        ws = w * s
        stiff_d = np.sum(ws / h**2, axis=1)
        mass_ll = np.sum(ws * pl**2 / rho**2, axis=1)
        mass_rr = np.sum(ws * pr**2 / rho**2, axis=1)
        mass_lr = np.sum(ws * pl * pr / rho**2, axis=1)
        E = h.shape[0]
        M = np.empty(max_order)
        D = np.empty((max_order, self.nodes.size))
        rhs = np.zeros(E)
        rhs[-1] = R
        for n in range(1, max_order + 1):
            diag = np.zeros(E + 1)
            diag[:-1] += stiff_d + n * n * mass_ll
            diag[1:] += stiff_d + n * n * mass_rr
            band = np.zeros((2, E))
            band[1] = diag[1:]
            band[0, 1:] = (-stiff_d + n * n * mass_lr)[1:]
            try:
                f = np.concatenate([[0.0], solveh_banded(band, rhs)])
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"radial Galerkin system not positive definite: {exc}", mode=n) from exc
            lam = f[-1]
            M[n - 1] = 2 * np.pi * n * R ** (2 * n) * (R - n * lam) / (n * lam + R)
            g = 2 * R * n * R ** (n - 1) / (n * lam + R)
            df = (np.diff(f) / h[:, 0])[:, None]
            fq = pl * f[:-1, None] + pr * f[1:, None]
            kern = 0.5 * g * g * (df**2 + n * n * fq**2 / rho**2)
            D[n - 1] = 2 * np.pi * np.einsum("ieg,eg->i", self.hats, w * kern)
        return M, D


@dataclass(eq=False)
class ReconstructionState:
    """Current iterate and bookkeeping of a reconstruction.

    ``values`` are the nodal profile values (radial) or grid values
    (gridded); ``sigma`` is the matching conductivity object. ``history``
    holds one record per accepted step: ``(k, order, eps_M, eps_sigma, S, step)``
    with ``eps_sigma`` NaN when no ground truth is known.
    """

    values: np.ndarray
    targets: ContractedGPTTable
    order: int
    nodes: np.ndarray = None
    grid: DiskGrid = None
    iteration: int = 0
    step: float = 0.1
    history: list = field(default_factory=list)
    _solver: object = field(default=None, repr=False)
    _offset: np.ndarray = field(default=None, repr=False)
    _cache: object = field(default=None, repr=False)

    @property
    def is_radial(self):
        return self.nodes is not None

    @property
    def sigma(self):
        if self.is_radial:
            return RadialConductivity.piecewise_linear(self.nodes, self.values)
        return GriddedConductivity(self.grid, self.values, "reconstruction")

    @property
    def history_array(self):
        return np.array(self.history, dtype=float).reshape(-1, 6)


def initial_guess(M1, area, radius=None):
    """Constant conductivity with first contracted GPT ``M1`` on a disk of the given area.

    ``sigma_0 = (2|B| + M1) / (2|B| - M1)``.

    Raises
    ------
    InadmissibleDataError
        If ``|M1| >= 2 |B|``, where the formula leaves the positive conductivities.
    """
    if not area > 0:
        raise ValueError("area must be positive")
    if not abs(M1) < 2 * area:
        raise InadmissibleDataError(
            f"first GPT {M1:.6g} is outside (-2|B|, 2|B|) = ({-2 * area:.6g}, {2 * area:.6g}); "
            "no positive constant conductivity matches it"
        )
    value = (2 * area + M1) / (2 * area - M1)
    radius = math.sqrt(area / math.pi) if radius is None else radius
    return RadialConductivity.constant(value, support_radius=radius)


def check_radial_targets(targets, rtol=1e-10):
    """Reject tables that no radial conductivity can produce."""
    M = targets.matrix
    scale = np.linalg.norm(M) or 1.0
    N = targets.max_order
    off = np.concatenate([targets.cs.ravel(), targets.sc.ravel(),
                          (targets.cc - np.diag(np.diag(targets.cc))).ravel(),
                          (targets.ss - np.diag(np.diag(targets.ss))).ravel()])
    worst = np.max(np.abs(off)) if off.size else 0.0
    if worst > rtol * scale:
        raise InadmissibleDataError(
            f"targets have off-diagonal or mixed cos/sin entries up to {worst:.3g} "
            f"(order {N}); a radial conductivity cannot fit them, use the gridded parametrization"
        )
    gap = np.max(np.abs(np.diag(targets.cc) - np.diag(targets.ss)))
    if gap > rtol * scale:
        raise InadmissibleDataError(f"M^cc and M^ss diagonals differ by {gap:.3g}; targets are not radial")


def _active_weights(config, order):
    return config.weights[:order, :order]


def _evaluate(state, config):
    """Residuals and gradient kernels of the current iterate, cached on the state."""
    if state._cache is not None:
        return state._cache
    l = state.order
    if state.is_radial:
        M, D = state._solver.solve(state.values, l)
        M = M + state._offset
        res = np.diag(state.targets.cc)[:l] - M
        w = np.diag(_active_weights(config, l))
        S = 0.5 * float(np.sum(w * res**2))
        out = {"M": M, "res": res, "D": D, "S": S, "eps_M": float(np.sum(res**2))}
    else:
        out = _evaluate_gridded(state, config)
    state._cache = out
    return out


def _evaluate_gridded(state, config):
    from .fem import FourierGalerkinSolver

    grid, l, R = state.grid, state.order, config.radius
    solver = FourierGalerkinSolver(grid, state.values)
    K = solver.order
    lam_s = solver.ntd()
    table = ContractedGPTTable.from_matrix(gpt_matrix_from_ntd(lam_s, R), R).truncate(l)
    target = state.targets.truncate(l)
    w = _active_weights(config, l)
    res = {b: getattr(target, b) - getattr(table, b) for b in BLOCKS}
    S = 0.5 * float(sum(np.sum(w * res[b] ** 2) for b in BLOCKS))
    # interior states of all active modes from one block solve
    lam1, lame = ntd_harmonic(K, R), ntd_exterior(K, R)
    dh = np.zeros((2 * K, 2 * l))
    for j in range(l):
        dh[j, j] = dh[K + j, l + j] = (j + 1) * R**j
    data = np.linalg.solve(lam_s.dense - lame.matrix, (lam1.matrix - lame.matrix) @ dh)
    U = solver.solve(data)
    grads = [solver.gradient(U[..., j]) for j in range(2 * l)]
    return {"res": res, "grads": grads, "S": S, "eps_M": float(sum(np.sum(res[b] ** 2) for b in BLOCKS))}


def discrepancy_functional(state, config):
    """``S = 1/2 sum w_mn (y_mn - M_mn)^2`` over the orders active in ``state``."""
    return _evaluate(state, config)["S"]


def _update(state, config):
    ev = _evaluate(state, config)
    l = state.order
    if state.is_radial:
        w = np.diag(_active_weights(config, l))
        return (w * ev["res"]) @ ev["D"] / state._solver.mass
    w = _active_weights(config, l)
    grads = ev["grads"]
    upd = np.zeros(state.grid.shape)
    for b in BLOCKS:
        coef = w * ev["res"][b]
        ro, co = (0 if b[0] == "c" else l), (0 if b[1] == "c" else l)
        for m in range(l):
            gm = grads[ro + m]
            for n in range(l):
                if coef[m, n]:
                    gn = grads[co + n]
                    upd += coef[m, n] * (gm[0] * gn[0] + gm[1] * gn[1])
    return upd


def landweber_step(state, config, step=None):
    """One Landweber update ``sigma + step * sum w (y - M) M'^*[1]``, clamped at ``lambda_min``.

    Returns a new state; ``state`` itself is left untouched. Raises
    :class:`SolverError` if the update is not finite.
    """
    step = state.step if step is None else step
    upd = _update(state, config)
    with np.errstate(all="ignore"):
        values = np.maximum(state.values + step * upd, config.lambda_min)
    if not (np.all(np.isfinite(upd)) and np.all(np.isfinite(values))):
        bad = int(np.sum(~np.isfinite(values)))
        raise SolverError(
            f"non-finite Landweber update at iteration {state.iteration} "
            f"(step {step:.3g}, {bad} non-finite values, max |update| {np.nanmax(np.abs(upd)):.3g})"
        )
    return replace(state, values=values, iteration=state.iteration + 1, history=state.history, _cache=None)


def _truth_sampler(state, truth):
    """Callable ``values -> eps_sigma`` for the current parametrization."""
    if truth is None:
        return lambda values: float("nan")
    if state.is_radial:
        solver = state._solver
        w = solver.w
        t = truth.radial(solver.rho) if hasattr(truth, "radial") else np.asarray(truth(solver.rho, 0.0)) * np.ones_like(w)
        denom = float(np.sum(w * t**2))
        return lambda values: float(np.sum(w * (solver.profile_at_quadrature(values) - t) ** 2)) / denom
    grid = state.grid
    t = truth.values if getattr(truth, "grid", None) is grid else np.broadcast_to(
        np.asarray(truth(*grid.mesh), dtype=float), grid.shape
    )
    denom = volume_integrate(grid, t**2)
    return lambda values: volume_integrate(grid, (values - t) ** 2) / denom


def _start_state(targets, config):
    area = math.pi * config.radius**2
    sigma0 = initial_guess(float(targets.cc[0, 0]), area, config.radius)
    value = float(sigma0.radial(0.0))
    first = config.schedule[0]
    if config.parametrization == "radial":
        nodes = np.linspace(0.0, config.radius, first.nodes)
        return ReconstructionState(np.full(nodes.size, value), targets, first.order, nodes=nodes, step=config.step_size)
    return ReconstructionState(np.full(config.grid.shape, value), targets, first.order, grid=config.grid, step=config.step_size)


def _enter_stage(state, stage, config):
    if state.is_radial:
        nodes = np.linspace(0.0, config.radius, stage.nodes)
        values = np.interp(nodes, state.nodes, state.values)
        solver = RadialGalerkin(nodes, config.fine_elements)
        # defect correction: shift the Galerkin GPTs onto the accurate ODE values at the stage start
        exact = np.diag(contracted_gpts(RadialConductivity.piecewise_linear(nodes, values), stage.order).cc)
        offset = exact - solver.solve(values, stage.order)[0]
        return replace(state, values=values, nodes=nodes, order=stage.order, step=config.step_size,
                       _solver=solver, _offset=offset, _cache=None)
    return replace(state, order=stage.order, step=config.step_size, _cache=None)


def initial_state(targets, config, values=None):
    """State at the start of the first schedule stage.

    ``values`` overrides the constant initial guess (nodal values for the
    radial parametrization, grid values for the gridded one).
    """
    targets = targets.truncate(config.max_order)
    state = _start_state(targets, config)
    if values is not None:
        values = np.broadcast_to(np.asarray(values, dtype=float), state.values.shape).copy()
        state = replace(state, values=values)
    return _enter_stage(state, config.schedule[0], config)


def recursive_reconstruct(targets, config, truth=None, callback=None):
    """Recover a conductivity from target GPTs by staged Landweber iteration.

    Parameters
    ----------
    targets : ContractedGPTTable
        Measured (or synthetic) GPTs of order at least ``config.max_order``.
    config : ReconstructionConfig
    truth : conductivity or callable, optional
        Ground truth used only to record ``eps_sigma``.
    callback : callable, optional
        Called as ``callback(state)`` after every accepted step.

    Returns
    -------
    sigma : RadialConductivity or GriddedConductivity
    state : ReconstructionState
        Final state; ``state.history`` has one record per accepted step
        (the starting point is recorded as ``k = 0`` of each stage).
    """
    if targets.max_order < config.max_order:
        raise ValueError(f"targets have order {targets.max_order} < max_order {config.max_order}")
    if not math.isclose(targets.radius, config.radius):
        raise ValueError(f"targets radius {targets.radius} differs from config radius {config.radius}")
    targets = targets.truncate(config.max_order)
    if config.parametrization == "radial":
        check_radial_targets(targets)
    state = _start_state(targets, config)
    t0 = time.perf_counter()
    for stage in config.schedule:
        state = _enter_stage(state, stage, config)
        eps_sigma = _truth_sampler(state, truth)
        ev = _evaluate(state, config)
        state.history.append((state.iteration, stage.order, ev["eps_M"], eps_sigma(state.values), ev["S"], state.step))
        min_step = config.step_size * MIN_STEP_FRACTION
        taken = 0
        while taken < stage.max_iter and ev["S"] > stage.tol:
            trial = landweber_step(state, config)
            ev_t = _evaluate(trial, config)
            if not ev_t["S"] < ev["S"]:
                state.step *= 0.5
                if state.step < min_step:
                    log.info("stage %d: step underflow at S = %.3g", stage.order, ev["S"])
                    break
                continue
            state, ev = trial, ev_t
            taken += 1
            state.history.append((state.iteration, stage.order, ev["eps_M"], eps_sigma(state.values), ev["S"], state.step))
            if callback is not None:
                callback(state)
            if taken > STALL_WINDOW and state.history[-STALL_WINDOW - 1][2] - ev["eps_M"] < STALL_TOL:
                break
        if ev["S"] > stage.tol and taken >= stage.max_iter:
            warnings.warn(
                f"stage {stage.order} stopped at max_iter={stage.max_iter} with S = {ev['S']:.3g} > tol",
                RuntimeWarning,
                stacklevel=2,
            )
        log.info("stage %d done: %d steps, S = %.3g, eps_M = %.3g", stage.order, taken, ev["S"], ev["eps_M"])
    log.info("reconstruction finished in %.2f s after %d steps", time.perf_counter() - t0, state.iteration)
    return state.sigma, state


def discrepancies(state, truth=None, max_order=None):
    """``(eps_M, eps_sigma)`` of a state, with GPTs from the accurate forward solver.

    ``eps_M = sum_{n <= N} (y_n - M_n)^2`` on the diagonal ``M^cc`` entries for
    radial states and over all four blocks for gridded ones;
    ``eps_sigma = int (sigma - sigma*)^2 / int sigma*^2`` (NaN without truth).
    """
    N = state.targets.max_order if max_order is None else max_order
    sigma = state.sigma
    table = contracted_gpts(sigma, N)
    target = state.targets.truncate(N)
    if state.is_radial:
        eps_m = float(np.sum((np.diag(target.cc) - np.diag(table.cc)) ** 2))
    else:
        eps_m = float(sum(np.sum((getattr(target, b) - getattr(table, b)) ** 2) for b in BLOCKS))
    return eps_m, conductivity_error(sigma, truth)


def conductivity_error(sigma, truth, grid=None):
    """Normalised squared L2 error ``int_B (sigma - truth)^2 / int_B truth^2``."""
    if truth is None:
        return float("nan")
    if grid is None:
        if sigma.is_radial:
            bps = tuple(sigma.breakpoints) + tuple(getattr(truth, "breakpoints", ()))
            grid = DiskGrid.uniform(sigma.support_radius, 256, angular_order=1, gauss_order=6, breakpoints=bps)
        else:
            grid = sigma.grid
    r, theta = grid.mesh

    def values(c):
        if isinstance(c, GriddedConductivity):
            if c.grid is not grid:
                raise ValueError("gridded conductivities must share the comparison grid")
            return c.values
        return np.broadcast_to(np.asarray(c(r, theta), dtype=float), grid.shape)

    s, t = values(sigma), values(truth)
    return volume_integrate(grid, (s - t) ** 2) / volume_integrate(grid, t**2)
