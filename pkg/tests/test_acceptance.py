"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import math
import time

import numpy as np

from gptlab import GriddedConductivity, RadialConductivity, contracted_gpts, discrepancies
from gptlab.basis import COS, SIN, DiskGrid
from gptlab.gpt import (
    far_field_eval,
    gpt_boundary_formula,
    gpt_homogeneous_disk,
    gpt_volume_identity,
    positivity_bounds,
)
from gptlab.ntd import ntd_sigma_general
from gptlab.sensitivity import frechet_derivative
from cases import perturbed_radial, random_bump, random_gridded, random_radial, random_radial_above_one, small_grid
from oracles import exterior_coefficient, fd_radial_ntd

SEED = 20240611


def test_criterion_1_homogeneous_disk(report):
    t0 = time.perf_counter()
    spectral = fem = 0.0
    n = np.arange(1, 9)
    for R in (0.5, 1.0):
        grid = DiskGrid.uniform(R, 96, angular_order=8, gauss_order=3)
        for k in (0.5, 2.0, 5.0, 10.0):
            exact = np.array([gpt_homogeneous_disk(k, R, j) for j in n])
            assert np.allclose(exact, 2 * np.pi * n * R ** (2 * n) * (k - 1) / (k + 1), rtol=1e-15)
            a = contracted_gpts(RadialConductivity.constant(k, R), 8)
            b = contracted_gpts(GriddedConductivity.constant(k, grid), 8)
            spectral = max(spectral, np.abs(np.diag(a.cc) / exact - 1).max(), np.abs(np.diag(a.ss) / exact - 1).max())
            fem = max(fem, np.abs(np.diag(b.cc) / exact - 1).max(), np.abs(np.diag(b.ss) / exact - 1).max())
    seconds = time.perf_counter() - t0
    ok = spectral <= 1e-8 and fem <= 1e-3 and seconds < 5
    report(1, ok, f"spectral rel err {spectral:.2e} (<=1e-8), FEM rel err {fem:.2e} (<=1e-3), {seconds:.2f} s (<5 s)")
    assert ok


def test_criterion_2_symmetry(report):
    rng = np.random.default_rng(SEED)
    grid = DiskGrid.uniform(1.0, 24, angular_order=8, gauss_order=3)
    fem_worst = ntd_worst = 0.0
    for _ in range(10):
        sigma = random_gridded(rng, grid, 0.5, 3.0)
        assert 0.5 <= sigma.bounds[0] and sigma.bounds[1] <= 3.0
        M = contracted_gpts(sigma, 4).matrix
        fem_worst = max(fem_worst, np.abs(M - M.T).max() / np.linalg.norm(M))
        L = ntd_sigma_general(sigma).dense
        ntd_worst = max(ntd_worst, np.abs(L - L.T).max() / np.linalg.norm(L))
    spectral_worst = 0.0
    for _ in range(10):
        M = contracted_gpts(random_radial(rng), 4).matrix
        spectral_worst = max(spectral_worst, np.abs(M - M.T).max() / np.linalg.norm(M))
    ok = fem_worst <= 1e-6 and spectral_worst <= 1e-10 and ntd_worst <= 1e-10
    report(2, ok, f"FEM GPT asym {fem_worst:.1e} (<=1e-6), FEM NtD asym {ntd_worst:.1e}, "
                  f"spectral asym {spectral_worst:.1e} (<=1e-10)")
    assert ok


def test_criterion_3_positivity_bounds(report):
    rng = np.random.default_rng(SEED)
    N = 6
    worst_gap = math.inf
    inside = True
    for _ in range(10):
        sigma = random_radial_above_one(rng)
        table = contracted_gpts(sigma, N)
        forms = [np.eye(2 * N)[i] for i in range(2 * N)] + list(rng.normal(size=(5, 2 * N)))
        for a in forms:
            c, s = a[:N], a[N:]
            lo, hi = positivity_bounds(sigma, c, s)
            q = table.quadratic_form(c, s)
            inside &= lo < q < hi
            worst_gap = min(worst_gap, (q - lo) / abs(q), (hi - q) / abs(q))
    report(3, inside, f"110 forms strictly inside bounds: {inside}; smallest relative margin {worst_gap:.2e}")
    assert inside


def test_criterion_4_path_equivalence(report, benchmark):
    table = contracted_gpts(benchmark, 6)
    worst = 0.0
    for n in range(1, 7):
        ref = table.cc[n - 1, n - 1]
        e = np.zeros(n)
        e[-1] = 1.0
        vol = gpt_volume_identity(benchmark, (e, ()), (e, ()))
        bnd = gpt_boundary_formula(benchmark, n, n)
        bnd_s = gpt_boundary_formula(benchmark, n, n, (SIN, SIN))
        worst = max(worst, abs(vol / ref - 1), abs(bnd / ref - 1), abs(bnd_s / ref - 1), abs(vol / bnd - 1))
    ok = worst <= 1e-6
    report(4, ok, f"largest pairwise relative gap {worst:.2e} (<=1e-6) over m=n<=6")
    assert ok


def _fd_case_radial(rng):
    sigma = random_radial(rng)
    gamma, bps = random_bump(rng)
    n = int(rng.integers(1, 7))
    m = n if rng.random() < 0.8 else int(rng.integers(1, 7))
    eps = 1e-4
    plus, minus = perturbed_radial(sigma, gamma, eps, bps), perturbed_radial(sigma, gamma, -eps, bps)
    fd = (contracted_gpts(plus, 6).cc[m - 1, n - 1] - contracted_gpts(minus, 6).cc[m - 1, n - 1]) / (2 * eps)
    grid = DiskGrid.uniform(1.0, 64, angular_order=6, gauss_order=8, breakpoints=bps)
    return frechet_derivative(sigma, gamma, m, n, grid=grid), fd, f"radial m={m} n={n}"


def _fd_case_gridded(rng, grid):
    sigma = random_gridded(rng, grid)
    r, t = grid.mesh
    gamma = np.exp(-((r * np.cos(t) - rng.uniform(-0.5, 0.5)) ** 2 + (r * np.sin(t) - rng.uniform(-0.5, 0.5)) ** 2) / 0.1)
    m, n = (int(v) for v in rng.integers(1, 5, size=2))
    par = tuple(rng.choice([COS, SIN], size=2))
    name = "".join("c" if p == COS else "s" for p in par)
    eps = 1e-4
    fd = (getattr(contracted_gpts(sigma.with_values(sigma.values + eps * gamma), 4), name)[m - 1, n - 1]
          - getattr(contracted_gpts(sigma.with_values(sigma.values - eps * gamma), 4), name)[m - 1, n - 1]) / (2 * eps)
    return frechet_derivative(sigma, gamma, m, n, par), fd, f"gridded {name} m={m} n={n}"


def test_criterion_5_gradient_check(report):
    rng = np.random.default_rng(SEED)
    grid = small_grid(order=6, panels=24)
    cases = [_fd_case_radial(rng) for _ in range(14)] + [_fd_case_gridded(rng, grid) for _ in range(6)]
    worst, failures = 0.0, []
    for value, fd, label in cases:
        err = abs(value - fd)
        budget = 1e-3 * abs(value) + 1e-10
        worst = max(worst, err / max(abs(value), 1e-300) if abs(value) > 1e-10 else 0.0)
        if err > budget:
            failures.append(label)
    ok = not failures
    report(5, ok, f"20 cases, worst relative error {worst:.2e} (<=1e-3); failures: {failures or 'none'}")
    assert ok


def test_criterion_6_far_field(report, benchmark):
    rng = np.random.default_rng(SEED)
    r = rng.uniform(1.05, 10.0, 10)
    th = rng.uniform(-np.pi, np.pi, 10)
    disk = RadialConductivity.constant(2.0)
    table = contracted_gpts(disk, 16)
    homog = max(abs(far_field_eval(disk, [1.0], [], [ri * np.cos(t), ri * np.sin(t)], table=table)
                    + np.cos(t) / (3 * ri)) for ri, t in zip(r, th))
    # benchmark: h = r cos + r^2 sin(2 theta) + r^3 cos(3 theta), oracle from per-mode transmission coefficients
    A = {n: exterior_coefficient(fd_radial_ntd(benchmark.radial, n), n) for n in (1, 2, 3)}
    bt = contracted_gpts(benchmark, 16)
    rb = rng.uniform(1.5, 10.0, 10)
    tb = rng.uniform(-np.pi, np.pi, 10)
    bench = 0.0
    for ri, t in zip(rb, tb):
        oracle = A[1] * np.cos(t) / ri + A[2] * np.sin(2 * t) / ri**2 + A[3] * np.cos(3 * t) / ri**3
        value = far_field_eval(benchmark, [1.0, 0.0, 1.0], [0.0, 1.0], [ri * np.cos(t), ri * np.sin(t)], table=bt)
        bench = max(bench, abs(value - oracle) / abs(oracle))
    ok = homog <= 1e-10 and bench <= 1e-6
    report(6, ok, f"k=2 disk abs err {homog:.1e} (<=1e-10); benchmark rel err vs oracle {bench:.1e} (<=1e-6)")
    assert ok


def test_criterion_7_reconstruction(report, benchmark_run, benchmark):
    sigma, state, seconds = benchmark_run
    eps_m, eps_s = discrepancies(state, benchmark)
    h = state.history_array
    switches = np.flatnonzero(np.diff(h[:, 1])) + 1
    jumps = all(h[i, 2] > h[i - 1, 2] for i in switches) and len(switches) == 5
    ok = eps_s <= 5e-4 and eps_m <= 1e-4 and state.iteration <= 5000 and seconds < 60 and jumps
    report(7, ok, f"eps_sigma {eps_s:.3e} (<=5e-4), eps_M {eps_m:.3e} (<=1e-4), {state.iteration} iterations "
                  f"(<=5000), {seconds:.1f} s (<60 s), stage-switch jumps in eps_M: {jumps}")
    assert ok


def test_criterion_8_radial_structure(report, benchmark):
    rng = np.random.default_rng(SEED)
    worst, equal = 0.0, True
    for sigma in [benchmark, RadialConductivity.constant(3.0)] + [random_radial(rng) for _ in range(8)]:
        t = contracted_gpts(sigma, 6)
        scale = np.linalg.norm(t.matrix)
        off = max(np.abs(t.cs).max(), np.abs(t.sc).max(),
                  np.abs(t.cc - np.diag(np.diag(t.cc))).max(), np.abs(t.ss - np.diag(np.diag(t.ss))).max())
        worst = max(worst, off / scale)
        equal &= np.array_equal(np.diag(t.cc), np.diag(t.ss))
    ok = worst <= 1e-10 and equal
    report(8, ok, f"off-diagonal/cross blocks {worst:.1e}*||M|| (<=1e-10); M^cc_nn == M^ss_nn: {equal}")
    assert ok


def test_criterion_9_b_independence(report, benchmark):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for sigma in [benchmark] + [random_radial(rng) for _ in range(5)]:
        a = contracted_gpts(sigma, 8)
        b = contracted_gpts(sigma, 8, radius=1.5)
        scale = np.linalg.norm(a.matrix)
        for name in ("cc", "cs", "sc", "ss"):
            x, y = getattr(a, name), getattr(b, name)
            # entrywise relative change; entries that vanish must stay at round-off level
            denom = np.where(x != 0, np.abs(x), scale)
            worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    ok = worst <= 1e-8
    report(9, ok, f"largest relative change with R -> 1.5R: {worst:.1e} (<=1e-8)")
    assert ok
