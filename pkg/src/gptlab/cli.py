"""Command-line driver: ``gptlab --task {forward,reconstruct,sensitivity,farfield}``.

Exit codes: 0 success, 1 usage or input error, 2 solver failure,
3 inadmissible data (non-positive conductivity, unusable GPT targets).
"""

import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from .basis import COS, SIN, DiskGrid, HarmonicMode
from .conductivity import GriddedConductivity, RadialConductivity
from .errors import InadmissibleDataError, SolverError
from .expr import Expression, ExpressionError
from .gpt import contracted_gpts, far_field_series, first_order_pt, positivity_bounds
from .inversion import ReconstructionConfig, Stage, default_schedule, discrepancies, recursive_reconstruct
from .io import FormatError, read_gpt_table, read_grid_conductivity, read_points, write_columns, write_gpt_table
from .sensitivity import InteriorStates, default_grid, field_on_grid, frechet_derivative

log = logging.getLogger("gptlab")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_INADMISSIBLE = 0, 1, 2, 3
TASKS = ("forward", "reconstruct", "sensitivity", "farfield")
DEFAULT_ORDERS = {"forward": 6, "sensitivity": None, "farfield": 16}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="gptlab", description="Contracted GPTs of disk conductivities: forward, inverse, sensitivity, far field.")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--sigma", help="conductivity: number or expression in r, theta (e.g. '(0.3*r^2+3)/3')")
    p.add_argument("--grid-file", help="gridded conductivity file (alternative to --sigma)")
    p.add_argument("--order", type=int, help="GPT order N")
    p.add_argument("--radius", type=float, default=1.0, help="disk radius R (default 1)")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=0, help="seed for any randomised step (recorded in the summary)")
    p.add_argument("--plot", action="store_true", help="also render SVG plots (needs matplotlib)")
    p.add_argument("--lambda-min", type=float, default=0.1, help="positivity floor for conductivities (default 0.1)")
    p.add_argument("--panels", type=int, default=48, help="radial panels for non-radial expressions")
    p.add_argument("--angular-order", type=int, help="angular order for non-radial expressions")
    p.add_argument("-v", "--verbose", action="store_true")

    g = p.add_argument_group("reconstruct")
    g.add_argument("--gpt-file", help="target GPT table")
    g.add_argument("--truth", help="ground-truth conductivity expression for eps_sigma")
    g.add_argument("--weights", default="default", help="'default' or a CSV file with an N x N weight matrix")
    g.add_argument("--step", type=float, default=0.1, help="initial Landweber step (default 0.1)")
    g.add_argument("--schedule", help="stages 'order:nodes:max_iter[:tol]' separated by commas")
    g.add_argument("--parametrization", choices=("radial", "gridded"), default="radial")

    g = p.add_argument_group("sensitivity")
    g.add_argument("--gamma", help="perturbation expression in r, theta")
    g.add_argument("--m", type=int, default=1, help="receiver order")
    g.add_argument("--n", type=int, default=1, help="source order")
    g.add_argument("--parities", default="cc", choices=("cc", "cs", "sc", "ss"))

    g = p.add_argument_group("farfield")
    g.add_argument("--h-cos", default="1", help="comma-separated coefficients of r^n cos(n theta)")
    g.add_argument("--h-sin", default="", help="comma-separated coefficients of r^n sin(n theta)")
    g.add_argument("--points", help="CSV of exterior points x,y")
    return p


def _coeffs(text):
    text = (text or "").strip()
    if not text:
        return np.zeros(0)
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad coefficient list {text!r}") from exc


def parse_schedule(text):
    stages = []
    for item in text.split(","):
        parts = item.strip().split(":")
        if not 2 <= len(parts) <= 4:
            raise UsageError(f"bad schedule stage {item!r}; use order:nodes:max_iter[:tol]")
        try:
            vals = [int(parts[0]), int(parts[1])] + ([int(parts[2])] if len(parts) > 2 else []) + (
                [float(parts[3])] if len(parts) > 3 else []
            )
            stages.append(Stage(*vals))
        except ValueError as exc:
            raise UsageError(f"bad schedule stage {item!r}: {exc}") from exc
    return tuple(stages)


def _expression_field(text, radius, args, order, what="conductivity"):
    """A radial or gridded conductivity from an expression string."""
    expr = Expression(text)
    if expr.is_radial:
        prof = lambda r: expr(r)  # noqa: E731
        sigma = RadialConductivity(prof, radius, breakpoints=expr.breakpoints, label=text)
    else:
        K = args.angular_order or max(order or 0, 8)
        grid = DiskGrid.uniform(radius, args.panels, angular_order=K, gauss_order=4, breakpoints=expr.breakpoints)
        sigma = GriddedConductivity.from_function(expr, grid, label=text)
    lo = sigma.bounds[0]
    if lo < args.lambda_min:
        raise InadmissibleDataError(f"{what} {text!r} drops to {lo:.6g} < lambda_min = {args.lambda_min}")
    return sigma


def load_conductivity(args, order=None):
    if bool(args.sigma) == bool(args.grid_file):
        raise UsageError("give exactly one of --sigma and --grid-file")
    if args.grid_file:
        sigma = read_grid_conductivity(args.grid_file)
        if sigma.bounds[0] < args.lambda_min:
            raise InadmissibleDataError(f"grid conductivity drops below lambda_min = {args.lambda_min}")
        return sigma
    return _expression_field(args.sigma, args.radius, args, order)


def _summary(out, payload):
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_forward(args):
    N = args.order or DEFAULT_ORDERS["forward"]
    sigma = load_conductivity(args, N)
    table = contracted_gpts(sigma, N, args.radius if sigma.is_radial else None)
    write_gpt_table(table, os.path.join(args.out, "gpt.csv"))
    pt = first_order_pt(table)
    write_columns(os.path.join(args.out, "pt.csv"), ["row", "col1", "col2"], [[1, 2], pt.matrix[:, 0], pt.matrix[:, 1]])
    rows = []
    for n in range(1, N + 1):
        for parity in (COS, SIN):
            a = np.zeros(n)
            a[-1] = 1.0
            c, s = (a, ()) if parity == COS else ((), a)
            lo, hi = positivity_bounds(sigma, c, s, radius=table.radius if sigma.is_radial else None)
            q = table.quadratic_form(c, s)
            rows.append((n, parity, lo, q, hi))
    cols = list(zip(*rows))
    write_columns(os.path.join(args.out, "bounds.csv"), ["n", "parity", "lower", "quadratic_form", "upper"], cols)
    violations = sum(1 for _, _, lo, q, hi in rows if not (lo - 1e-9 * abs(lo) <= q <= hi + 1e-9 * abs(hi)))
    _summary(args.out, {
        "task": "forward",
        "sigma": args.sigma or args.grid_file,
        "order": N,
        "radius": table.radius,
        "gpt_norm": table.norm(),
        "symmetry_defect": table.symmetry_defect(),
        "pt": pt.matrix.tolist(),
        "pt_symmetric": pt.is_symmetric,
        "bound_violations": violations,
        "seed": args.seed,
    })
    return EXIT_OK


def _load_weights(spec, N):
    if spec == "default":
        return None
    try:
        w = np.loadtxt(spec, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read weights {spec!r}: {exc}") from exc
    if w.shape != (N, N):
        raise FormatError(f"weights file has shape {w.shape}, expected {(N, N)}")
    return w


def cmd_reconstruct(args):
    if not args.gpt_file:
        raise UsageError("--task reconstruct needs --gpt-file")
    targets = read_gpt_table(args.gpt_file)
    N = args.order or targets.max_order
    if N > targets.max_order:
        raise UsageError(f"--order {N} exceeds the file's order {targets.max_order}")
    schedule = parse_schedule(args.schedule) if args.schedule else default_schedule(N)
    config = ReconstructionConfig(
        N, weights=_load_weights(args.weights, N), step_size=args.step, schedule=schedule,
        lambda_min=args.lambda_min, radius=targets.radius, parametrization=args.parametrization,
    )
    truth = None
    if args.truth:
        truth = _expression_field(args.truth, targets.radius, args, N, what="truth")
        if args.parametrization == "gridded" and not truth.is_radial:
            truth = Expression(args.truth)
    t0 = time.perf_counter()
    sigma, state = recursive_reconstruct(targets, config, truth=truth)
    elapsed = time.perf_counter() - t0
    eps_m, eps_s = discrepancies(state, truth)
    hist = state.history_array
    write_columns(
        os.path.join(args.out, "history.csv"),
        ["k", "order", "eps_M", "eps_sigma", "S", "step"],
        [hist[:, 0].astype(int), hist[:, 1].astype(int), *hist[:, 2:].T],
    )
    if state.is_radial:
        r = state.nodes
        cols = [r, state.values] + ([truth.radial(r)] if truth is not None else [])
        write_columns(os.path.join(args.out, "profile.csv"), ["r", "sigma"] + (["truth"] if truth is not None else []), cols)
    else:
        from .io import write_grid_conductivity

        write_grid_conductivity(sigma, os.path.join(args.out, "profile_grid.csv"))
        write_columns(os.path.join(args.out, "profile.csv"), ["r", "sigma_angular_mean"], [sigma.grid.r, sigma.angular_mean()])
    if args.plot:
        _plot_history(hist, args.out)
    _summary(args.out, {
        "task": "reconstruct",
        "order": N,
        "iterations": int(state.iteration),
        "eps_M": eps_m,
        "eps_sigma": None if math.isnan(eps_s) else eps_s,
        "initial_sigma": _sigma0(targets),
        "seconds": round(elapsed, 3),
        "seed": args.seed,
    })
    return EXIT_OK


def _sigma0(targets):
    area = math.pi * targets.radius**2
    m1 = targets.cc[0, 0]
    return (2 * area + m1) / (2 * area - m1)


def _plot_history(hist, out):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib is not installed; skipping --plot (history.csv holds the data)")
        return
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].semilogy(hist[:, 0], hist[:, 2])
    axes[0].set_xlabel("k")
    axes[0].set_ylabel("eps_M")
    if np.all(np.isnan(hist[:, 3])):
        axes[1].set_visible(False)
    else:
        axes[1].semilogy(hist[:, 0], hist[:, 3])
        axes[1].set_xlabel("k")
        axes[1].set_ylabel("eps_sigma")
    fig.tight_layout()
    fig.savefig(os.path.join(out, "convergence.svg"))
    plt.close(fig)


def cmd_sensitivity(args):
    if not args.gamma:
        raise UsageError("--task sensitivity needs --gamma")
    m, n = args.m, args.n
    if m < 1 or n < 1:
        raise UsageError("--m and --n must be >= 1")
    N = args.order or max(m, n)
    sigma = load_conductivity(args, N)
    gamma = Expression(args.gamma)
    parities = (COS if args.parities[0] == "c" else SIN, COS if args.parities[1] == "c" else SIN)
    if sigma.is_radial:
        grid = default_grid(sigma, N, args.radius)
        if gamma.breakpoints:
            grid = DiskGrid.uniform(args.radius, 64, angular_order=max(N, 4), gauss_order=8,
                                    breakpoints=tuple(sigma.breakpoints) + gamma.breakpoints)
    else:
        grid = sigma.grid
    states = InteriorStates(sigma, N, grid=grid, radius=args.radius if sigma.is_radial else None)
    value = frechet_derivative(sigma, gamma, m, n, parities, states=states)
    kernel = states.kernel(HarmonicMode(m, parities[0]), HarmonicMode(n, parities[1]))
    r, theta = grid.mesh
    g = field_on_grid(gamma, grid)
    write_columns(os.path.join(args.out, "kernel.csv"), ["r", "theta", "kernel", "gamma"],
                  [r.ravel(), theta.ravel(), kernel.ravel(), g.ravel()])
    _summary(args.out, {"task": "sensitivity", "m": m, "n": n, "parities": args.parities,
                        "derivative": value, "seed": args.seed})
    return EXIT_OK


def cmd_farfield(args):
    if not args.points:
        raise UsageError("--task farfield needs --points")
    hc, hs = _coeffs(args.h_cos), _coeffs(args.h_sin)
    order = max(hc.size, hs.size, 1)
    N = args.order or max(DEFAULT_ORDERS["farfield"], order)
    if N < order:
        raise UsageError(f"--order {N} is below the order of h ({order})")
    sigma = load_conductivity(args, N)
    pts = read_points(args.points)
    table = contracted_gpts(sigma, N, args.radius if sigma.is_radial else None)
    vals, tails, flags = [], [], []
    for x in pts:
        if np.hypot(*x) <= table.radius:
            vals.append(np.nan)
            tails.append(np.nan)
            flags.append("interior")
            continue
        v, t = far_field_series(table, hc, hs, x)
        vals.append(v)
        tails.append(t)
        flags.append("ok")
    write_columns(os.path.join(args.out, "farfield.csv"), ["x", "y", "u_minus_h", "tail", "flag"],
                  [pts[:, 0], pts[:, 1], vals, tails, flags])
    _summary(args.out, {"task": "farfield", "order": N, "points": len(pts),
                        "interior_points": flags.count("interior"), "seed": args.seed})
    return EXIT_OK


COMMANDS = {"forward": cmd_forward, "reconstruct": cmd_reconstruct, "sensitivity": cmd_sensitivity, "farfield": cmd_farfield}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"gptlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    np.random.seed(args.seed)
    try:
        if args.order is not None and args.order < 1:
            raise UsageError("--order must be >= 1")
        if not args.radius > 0:
            raise UsageError("--radius must be positive")
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.task](args)
    except InadmissibleDataError as exc:
        print(f"gptlab: inadmissible data: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except SolverError as exc:
        extra = "".join(f", {k}={v}" for k, v in (("mode", exc.mode), ("residual", exc.residual)) if v is not None)
        print(f"gptlab: solver failure: {exc}{extra}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, ExpressionError, FormatError, ValueError, OSError) as exc:
        print(f"gptlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
