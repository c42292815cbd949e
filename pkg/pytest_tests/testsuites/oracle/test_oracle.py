import math

import allure
import numpy as np
import pytest
from ces_spectra.grid import Grid
from ces_spectra.oracle import (
    Scheme,
    build_hamiltonian,
    count_below,
    dkv_hamiltonian,
    lowest_eigenpairs,
    overlap,
    sign_changes,
    solve_tridiagonal,
    suggest_grid,
    verify_spectrum,
)
from ces_spectra.potential import DkvParams
from ces_spectra.spectrum import RootRule, get_level
from parameter_sets import NO_LEVELS, SINGLE_LEVEL
from scipy.linalg import eigh_tridiagonal
from steps.sweeps import admissible_sweep

SWEEP_POINTS = 50


def zero_potential(x):
    return np.zeros_like(x)


@pytest.fixture(scope="module")
def single_level_grid(single_level_params, single_level_state) -> Grid:
    return suggest_grid(single_level_params, [single_level_state], h=1e-2)


@allure.title("Free particle in a box has the discrete Laplacian spectrum")
@pytest.mark.sanity
@pytest.mark.oracle
def test_discrete_laplacian():
    grid = Grid.from_step(0.0, 65.0, 1.0)
    H = build_hamiltonian(zero_potential, grid, Scheme.CENTRAL)
    energies = [pair.energy for pair in lowest_eigenpairs(H, 10)]
    expected = [2 - 2 * math.cos(k * math.pi / 65) for k in range(1, 11)]
    assert energies == pytest.approx(expected, abs=1e-12)
    assert count_below(H, 2.0) == 32


@allure.title("Harmonic oscillator levels with the Numerov scheme")
@pytest.mark.oracle
@pytest.mark.long
def test_harmonic_oscillator():
    grid = Grid.from_step(-10.0, 10.0, 1e-3)
    H = build_hamiltonian(lambda x: x**2, grid, Scheme.NUMEROV)
    pairs = lowest_eigenpairs(H, 3)
    assert [pair.energy for pair in pairs] == pytest.approx([1.0, 3.0, 5.0], abs=1e-6)
    for n, pair in enumerate(pairs):
        assert sign_changes(pair.vector) == n


@allure.title("Oracle finds the single level below the continuum edge")
@pytest.mark.sanity
@pytest.mark.oracle
def test_single_level(single_level_params, single_level_state, single_level_grid):
    H = dkv_hamiltonian(single_level_params, single_level_grid, Scheme.NUMEROV)
    assert count_below(H, SINGLE_LEVEL.edge) == 1
    ground = lowest_eigenpairs(H, 1)[0]
    assert ground.energy == pytest.approx(single_level_state.E_n, abs=1e-4)

    report = verify_spectrum(
        single_level_params, [single_level_state], single_level_grid, scheme=Scheme.NUMEROV
    )
    assert report.passed, f"Failures: {report.failures}, levels: {report.levels}"
    level = report.levels[0]
    assert level.overlap > 1 - 1e-6
    assert level.nodes == level.oracle_nodes == 0


@allure.title("Outer roots do not match the oracle")
@pytest.mark.oracle
@pytest.mark.parametrize("rule", [RootRule.LEFTMOST, RootRule.RIGHTMOST], ids=lambda r: r.value)
def test_outer_roots_fail(single_level_params, single_level_grid, rule):
    state = get_level(single_level_params, 0, rule)
    report = verify_spectrum(single_level_params, [state], single_level_grid, scheme=Scheme.NUMEROV)
    assert not report.passed
    assert report.levels[0].failures, "Outer root passed the level checks"


@allure.title("No analytic levels and no oracle levels")
@pytest.mark.oracle
def test_no_levels():
    p = DkvParams(A=NO_LEVELS.A, B=NO_LEVELS.B)
    grid = suggest_grid(p, [], h=1e-2)
    report = verify_spectrum(p, [], grid, scheme=Scheme.NUMEROV)
    assert report.passed, f"Failures: {report.failures}"
    assert report.oracle_count == report.analytic_count == 0


@allure.title("Levels above n_max are truncated, not missing")
@pytest.mark.oracle
def test_truncated_level_count(two_level_params, two_level_states):
    grid = suggest_grid(two_level_params, two_level_states, h=1e-2)
    ground = two_level_states[:1]

    report = verify_spectrum(two_level_params, ground, grid, scheme=Scheme.NUMEROV, n_max=0)
    assert report.oracle_count == 2
    assert report.truncated and report.expected_count == 1
    assert not report.failures, f"Failures: {report.failures}"
    assert report.as_dict()["truncated"] is True

    report = verify_spectrum(two_level_params, ground, grid, scheme=Scheme.NUMEROV)
    assert not report.truncated
    assert any("level count mismatch" in failure for failure in report.failures)


@allure.title("Discretization error decays with the order of the scheme")
@pytest.mark.oracle
@pytest.mark.long
@pytest.mark.parametrize(
    "scheme, coarse, min_ratio",
    [(Scheme.NUMEROV, 0.1, 12.0), (Scheme.CENTRAL, 0.05, 3.5)],
    ids=["numerov", "central-3pt"],
)
def test_convergence_order(single_level_params, single_level_state, scheme, coarse, min_ratio):
    errors = []
    for h in (coarse, coarse / 2):
        with allure.step(f"Ground energy with h={h}"):
            H = dkv_hamiltonian(single_level_params, Grid.from_step(-20.0, 60.0, h), scheme)
            errors.append(abs(lowest_eigenpairs(H, 1)[0].energy - single_level_state.E_n))
    ratio = errors[0] / errors[1]
    assert ratio >= min_ratio, f"Errors {errors}, ratio {ratio}"


@allure.title("Widening the box does not move the levels")
@pytest.mark.oracle
def test_box_independence(single_level_params, single_level_grid):
    energies = []
    for grid in (single_level_grid, single_level_grid.widened(10.0)):
        H = dkv_hamiltonian(single_level_params, grid, Scheme.NUMEROV)
        energies.append(lowest_eigenpairs(H, 1)[0].energy)
    assert abs(energies[0] - energies[1]) < 1e-8, f"Energies {energies}"


@allure.title("Oracle level count equals the analytic level count")
@pytest.mark.oracle
@pytest.mark.property
@pytest.mark.long
def test_level_count_sweep():
    mismatches = []
    for point in admissible_sweep(SWEEP_POINTS):
        p = point.params
        grid = suggest_grid(p, point.states, h=1e-2)
        oracle_count = count_below(dkv_hamiltonian(p, grid, Scheme.NUMEROV), p.continuum_edge)
        if oracle_count != len(point.states):
            mismatches.append((p, len(point.states), oracle_count))
    assert not mismatches, f"Count mismatches (params, analytic, oracle): {mismatches}"


@allure.title("Potential that cannot be sampled is rejected")
@pytest.mark.oracle
@pytest.mark.parametrize(
    "V",
    [
        lambda x: np.where(np.abs(x) < 0.1, 1e13, 0.0),
        lambda x: np.full_like(x, np.nan),
    ],
    ids=["huge", "nan"],
)
def test_singular_potential(V):
    with pytest.raises(ValueError):
        build_hamiltonian(V, Grid.from_step(-1.0, 1.0, 1e-2), Scheme.CENTRAL)


@allure.title("Number of eigenpairs is limited to 1..10")
@pytest.mark.oracle
@pytest.mark.parametrize("k", [0, 11])
def test_eigenpair_limits(k):
    H = build_hamiltonian(zero_potential, Grid.from_step(0.0, 65.0, 1.0), Scheme.CENTRAL)
    with pytest.raises(ValueError):
        lowest_eigenpairs(H, k)


@allure.title("Tridiagonal solver agrees with a dense solve")
@pytest.mark.oracle
@pytest.mark.parametrize("dominant", [True, False], ids=["dominant", "pivoting"])
def test_solve_tridiagonal(dominant):
    rng = np.random.default_rng(7)
    size = 40
    lower, upper = rng.standard_normal(size - 1), rng.standard_normal(size - 1)
    diag = rng.standard_normal(size) + (4.0 if dominant else 0.0)
    rhs = rng.standard_normal(size)
    dense = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
    expected = np.linalg.solve(dense, rhs)
    actual = np.asarray(solve_tridiagonal(lower, diag, upper, rhs))
    residual = np.max(np.abs(dense @ actual - rhs))
    assert residual < 1e-12 * np.max(np.abs(dense)) * np.max(np.abs(actual))
    if dominant:
        assert actual == pytest.approx(expected, rel=1e-10, abs=1e-12)


@allure.title("Bisection agrees with LAPACK for the 3-point matrix")
@pytest.mark.oracle
def test_matches_lapack(four_level_params, four_level_states):
    grid = suggest_grid(four_level_params, four_level_states, h=5e-2)
    H = dkv_hamiltonian(four_level_params, grid, Scheme.CENTRAL)
    expected = eigh_tridiagonal(
        H.diagonal, H.off_diagonal, eigvals_only=True, select="i", select_range=(0, 4)
    )
    energies = [pair.energy for pair in lowest_eigenpairs(H, 5)]
    assert energies == pytest.approx(list(expected), abs=1e-8)


@allure.title("Eigenvectors are normalized, signed and independent of the worker count")
@pytest.mark.oracle
def test_eigenvectors(two_level_params, two_level_states):
    grid = suggest_grid(two_level_params, two_level_states, h=1e-2)
    H = dkv_hamiltonian(two_level_params, grid, Scheme.NUMEROV)
    serial = lowest_eigenpairs(H, 2)
    threaded = lowest_eigenpairs(H, 2, workers=2)
    assert [pair.energy for pair in serial] == [pair.energy for pair in threaded]
    for n, pair in enumerate(serial):
        with allure.step(f"Eigenvector n={n}"):
            vector = pair.vector
            assert vector.shape == (grid.n_points,)
            assert vector[0] == vector[-1] == 0.0
            assert grid.h * float(np.dot(vector, vector)) == pytest.approx(1.0, rel=1e-12)
            first = np.argmax(np.abs(vector) > 1e-3 * np.max(np.abs(vector)))
            assert vector[first] > 0
            assert sign_changes(vector) == n
    assert overlap(serial[0].vector, serial[1].vector, grid) < 1e-3
