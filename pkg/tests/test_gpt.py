
import numpy as np
import pytest

from gptlab import GriddedConductivity, RadialConductivity
from gptlab.basis import COS, SIN, DiskGrid
from gptlab.gpt import (
    ContractedGPTTable,
    contracted_gpts,
    far_field_eval,
    far_field_series,
    first_order_pt,
    gpt_boundary_formula,
    gpt_homogeneous_disk,
    gpt_volume_identity,
    positivity_bounds,
)
from oracles import exterior_coefficient, fd_radial_ntd, symbolic_homogeneous_gpt

# benchmark M_n from the finite-volume oracle (tests/oracles.py), frozen
BENCHMARK_M = [0.7540019053900066, 1.7092360110064408, 2.9532170151915653,
               4.368148154317868, 5.884270661604292, 7.4631929984753285]
# u - h at (3, 1) for h = r cos(theta), exterior coefficient from the same oracle
BENCHMARK_FARFIELD_31 = -0.03600093910305814


def test_homogeneous_k2():
    t = contracted_gpts(RadialConductivity.constant(2.0), 4)
    n = np.arange(1, 5)
    assert np.allclose(np.diag(t.cc), 2 * np.pi / 3 * n, rtol=1e-10)
    assert np.allclose(np.diag(t.ss), np.diag(t.cc), rtol=0, atol=0)
    assert t.cc[0, 0] == pytest.approx(2.0944, abs=1e-4)


@pytest.mark.parametrize("k, R, n", [(2, 1, 1), (3, 0.5, 2), (0.25, 1.3, 5), (7, 1, 3)])
def test_closed_form_matches_symbolic(k, R, n):
    assert gpt_homogeneous_disk(k, R, n) == pytest.approx(symbolic_homogeneous_gpt(k, R, n), rel=1e-14)


def test_closed_form_examples():
    assert gpt_homogeneous_disk(2, 1, 1) == pytest.approx(2 * np.pi / 3)
    assert gpt_homogeneous_disk(1, 1.7, 4) == 0
    assert gpt_homogeneous_disk(3, 0.5, 2) == pytest.approx(np.pi / 8)
    with pytest.raises(ValueError):
        gpt_homogeneous_disk(-1, 1, 1)


def test_unit_conductivity_gives_zero_table():
    t = contracted_gpts(RadialConductivity.constant(1.0), 5)
    assert t.norm() == 0


def test_benchmark_matches_oracle(benchmark):
    assert np.allclose(contracted_gpts(benchmark, 6).diagonal, BENCHMARK_M, rtol=1e-8)


def test_benchmark_table_structure(benchmark):
    t = contracted_gpts(benchmark, 6)
    assert not t.cs.any() and not t.sc.any()
    assert np.array_equal(t.cc, np.diag(np.diag(t.cc)))
    assert np.array_equal(np.diag(t.cc), np.diag(t.ss))


@pytest.mark.parametrize("n", [1, 2, 4])
def test_path_equivalence_benchmark(benchmark, n):
    t = contracted_gpts(benchmark, 6)
    h = np.eye(n)[n - 1]
    vol = gpt_volume_identity(benchmark, (h, ()), (h, ()))
    bnd = gpt_boundary_formula(benchmark, n, n)
    assert vol == pytest.approx(t.cc[n - 1, n - 1], rel=1e-9)
    assert bnd == pytest.approx(t.cc[n - 1, n - 1], rel=1e-10)


def test_volume_and_boundary_examples():
    k2 = RadialConductivity.constant(2.0)
    one = RadialConductivity.constant(1.0)
    assert gpt_volume_identity(one, ([1.0], ()), ([1.0], ())) == 0
    assert gpt_volume_identity(k2, ([1.0], ()), ([1.0], ())) == pytest.approx(2 * np.pi / 3, rel=1e-10)
    assert gpt_boundary_formula(one, 1, 1) == pytest.approx(0, abs=1e-14)
    assert gpt_boundary_formula(k2, 1, 1) == pytest.approx(2 * np.pi / 3, rel=1e-8)
    assert gpt_boundary_formula(k2, 1, 2) == 0


@pytest.fixture(scope="module")
def nonradial():
    grid = DiskGrid.uniform(1.0, 40, angular_order=6, gauss_order=4)
    return GriddedConductivity.from_function(
        lambda r, t: 1.8 + 0.6 * r * np.cos(t - 0.3) + 0.4 * r**2 * np.sin(2 * t), grid
    )


def test_nonradial_symmetry_and_boundary_formula(nonradial):
    t = contracted_gpts(nonradial, 4)
    assert t.symmetry_defect() < 1e-10
    assert np.abs(t.cs).max() > 1e-3
    for (m, n, p) in [(1, 1, (COS, COS)), (2, 1, (SIN, COS)), (3, 2, (COS, SIN))]:
        block = {"cos": "c", "sin": "s"}
        name = block[p[0]] + block[p[1]]
        value = getattr(t, name)[m - 1, n - 1]
        assert gpt_boundary_formula(nonradial, m, n, p) == pytest.approx(value, rel=1e-8, abs=1e-12)


def test_nonradial_volume_identity(nonradial):
    t = contracted_gpts(nonradial, 3)
    a, b = np.array([0.5, -1.0, 0.2]), np.array([0.0, 0.3, 1.0])
    h1, h2 = (a, b), (b, a)
    vol = gpt_volume_identity(nonradial, h1, h2)
    va, vb = np.concatenate(h1), np.concatenate(h2)
    # the identity pairs the discrete state with the exact grad h: O(h^2) gap
    assert vol == pytest.approx(vb @ t.matrix @ va, rel=1e-3)


def test_farfield_examples():
    k2 = RadialConductivity.constant(2.0)
    assert far_field_eval(k2, [1.0], [], (2.0, 0.0)) == pytest.approx(-1 / 6, rel=1e-12)
    assert far_field_eval(RadialConductivity.constant(1.0), [1.0], [0.5], (0.0, 3.0)) == 0


def test_farfield_benchmark(benchmark):
    assert far_field_eval(benchmark, [1.0], [], (3.0, 1.0)) == pytest.approx(BENCHMARK_FARFIELD_31, rel=1e-8)


def test_farfield_higher_modes_against_oracle(benchmark):
    x = np.array([-1.2, 2.1])
    r, t = np.hypot(*x), np.arctan2(x[1], x[0])
    expected = sum(
        c * exterior_coefficient(fd_radial_ntd(benchmark.radial, n), n) * np.cos(n * t) / r**n
        for n, c in ((1, 0.5), (3, -1.0))
    ) + 2.0 * exterior_coefficient(fd_radial_ntd(benchmark.radial, 2), 2) * np.sin(2 * t) / r**2
    assert far_field_eval(benchmark, [0.5, 0, -1.0], [0, 2.0], x) == pytest.approx(expected, rel=1e-7)


def test_farfield_rejects_interior_points():
    with pytest.raises(ValueError):
        far_field_eval(RadialConductivity.constant(2.0), [1.0], [], (0.5, 0.0))


def test_farfield_truncation_warning():
    table = contracted_gpts(RadialConductivity.constant(3.0), 2)
    with pytest.warns(RuntimeWarning, match="truncated"):
        far_field_eval(None, [0, 1.0], [], (1.05, 0.0), table=table)


def test_farfield_leading_decay(benchmark):
    t = contracted_gpts(benchmark, 8)
    for r in (50.0, 500.0):
        val, _ = far_field_series(t, [1.0], [], (r, 0.0))
        assert val * r == pytest.approx(-t.cc[0, 0] / (2 * np.pi), rel=3 / r)


def test_positivity_examples(benchmark):
    k2 = RadialConductivity.constant(2.0)
    lo, hi = positivity_bounds(k2, [1.0])
    assert (lo, hi) == (pytest.approx(np.pi / 2, rel=1e-12), pytest.approx(np.pi, rel=1e-12))
    assert lo < 2 * np.pi / 3 < hi
    assert positivity_bounds(RadialConductivity.constant(1.0), [1.0]) == (0, 0)
    lo, hi = positivity_bounds(benchmark, [1.0])
    assert lo < contracted_gpts(benchmark, 1).cc[0, 0] < hi


def test_sign_definiteness():
    above = contracted_gpts(RadialConductivity(lambda r: 1 + (r < 0.4) * 0.5, 1.0, breakpoints=(0.4,)), 6)
    below = contracted_gpts(RadialConductivity(lambda r: 1 - 0.5 * r * (1 - r), 1.0), 6)
    assert np.all(np.diag(above.cc) > 0)
    assert np.all(np.diag(below.cc) < 0)


def test_first_order_pt(benchmark):
    pt = first_order_pt(contracted_gpts(RadialConductivity.constant(2.0), 2))
    assert np.allclose(pt.matrix, 2 * np.pi / 3 * np.eye(2), rtol=1e-10)
    assert np.array_equal(first_order_pt(contracted_gpts(RadialConductivity.constant(1.0), 1)).matrix, np.zeros((2, 2)))
    m = first_order_pt(contracted_gpts(benchmark, 1)).matrix
    assert m[0, 1] == m[1, 0] == 0 and m[0, 0] == m[1, 1]


def test_pt_eigenvalues_nonradial(nonradial):
    pt = first_order_pt(contracted_gpts(nonradial, 2))
    assert pt.is_symmetric
    assert np.all(pt.eigenvalues() > 0)


def test_b_independence(benchmark):
    base = contracted_gpts(benchmark, 6)
    inflated = contracted_gpts(benchmark, 6, radius=1.5)
    assert np.allclose(inflated.diagonal, base.diagonal, rtol=1e-8)


def test_gridded_b_independence():
    inner = DiskGrid.uniform(1.0, 60, angular_order=4, gauss_order=3)
    outer = DiskGrid.uniform(1.5, 90, angular_order=4, gauss_order=3)
    f = lambda r, t: np.where(r <= 1.0, 2.0 + 0.5 * r**2 * np.cos(2 * t), 1.0)  # noqa: E731
    a = contracted_gpts(GriddedConductivity.from_function(f, inner), 3)
    b = contracted_gpts(GriddedConductivity.from_function(f, outer), 3)
    assert np.allclose(a.matrix, b.matrix, rtol=0, atol=2e-3 * a.norm())


def test_table_helpers():
    t = ContractedGPTTable.from_matrix(np.arange(16.0).reshape(4, 4))
    assert t.max_order == 2
    assert np.array_equal(t.matrix, np.arange(16.0).reshape(4, 4))
    assert t.truncate(1).cc.shape == (1, 1)
    assert t.quadratic_form([1.0], [0.0]) == t.cc[0, 0]
    with pytest.raises(ValueError):
        ContractedGPTTable(np.eye(2), np.eye(3), np.eye(2), np.eye(2))


def test_order_validation():
    with pytest.raises(ValueError):
        contracted_gpts(RadialConductivity.constant(2.0), 0)
    grid = DiskGrid.uniform(1.0, 4, angular_order=2, gauss_order=2)
    with pytest.raises(ValueError):
        contracted_gpts(GriddedConductivity.constant(2.0, grid), 3)
