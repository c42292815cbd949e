import allure
import numpy as np
import pytest
from ces_spectra.grid import Grid
from ces_spectra.natanzon import (
    NatanzonMap,
    NatanzonParams,
    naten_residual,
    natanzon_energies,
    natanzon_ode_residual,
    natanzon_potential,
    natanzon_psi,
    natanzon_schrodinger_residual,
    natanzon_thresholds,
    natanzon_x_of_z,
    natanzon_z,
)
from ces_spectra.verification import natanzon_grid, verify_natanzon
from parameter_sets import LOGISTIC, LOGISTIC_LEVELS, logistic_energy
from scipy.special import expit

# R(z) = 1 + z^2, thresholds 2 and 3/2
QUADRATIC = dict(f=20.0, h0=1.0, h1=2.0, a=1.0, c0=1.0, c1=2.0)
QUADRATIC_LEVELS = 2


@pytest.fixture(scope="module")
def logistic() -> NatanzonParams:
    return NatanzonParams(**LOGISTIC)


@pytest.fixture(scope="module")
def quadratic() -> NatanzonParams:
    return NatanzonParams(**QUADRATIC)


@allure.title("Logistic potential has the closed-form energies")
@pytest.mark.sanity
@pytest.mark.natanzon
def test_logistic_energies(logistic):
    energies = natanzon_energies(logistic, 50)
    assert len(energies) == LOGISTIC_LEVELS, f"Energies {energies}"
    expected = [logistic_energy(n) for n in range(LOGISTIC_LEVELS)]
    assert energies == pytest.approx(expected, abs=1e-10)
    assert energies[0] == pytest.approx(-6.2984, abs=1e-4)
    for n, energy in enumerate(energies):
        assert abs(naten_residual(logistic, n, energy)) < 1e-10


@allure.title("Energies solve the Natanzon condition and stay below both thresholds")
@pytest.mark.natanzon
def test_quadratic_energies(quadratic):
    energies = natanzon_energies(quadratic, 50)
    assert len(energies) == QUADRATIC_LEVELS, f"Energies {energies}"
    assert energies == sorted(energies)
    assert max(energies) < min(natanzon_thresholds(quadratic))
    for n, energy in enumerate(energies):
        assert abs(naten_residual(quadratic, n, energy)) < 1e-10


@allure.title("Energy condition is undefined outside the real domain")
@pytest.mark.natanzon
def test_naten_outside_domain(logistic):
    assert naten_residual(logistic, 0, 5.0) is None


@allure.title("Energy condition increases with E below the ceiling")
@pytest.mark.natanzon
@pytest.mark.parametrize("name", ["logistic", "quadratic"])
def test_naten_monotone(request, name):
    params = request.getfixturevalue(name)
    energies = natanzon_energies(params, 50)
    ceiling = min(natanzon_thresholds(params))
    energy_grid = np.linspace(min(energies) - 5.0, ceiling, 2001)
    for n in range(len(energies)):
        values = np.array([naten_residual(params, n, energy) for energy in energy_grid])
        assert np.all(np.diff(values) > 0), f"Level {n} condition is not increasing"
        assert values[0] < 0 < values[-1]


@allure.title("Logistic map integrates to z = 1/(1 + exp(-2x))")
@pytest.mark.natanzon
def test_logistic_map(logistic):
    grid = Grid.from_step(-15.0, 15.0, 1e-2)
    z = natanzon_z(logistic, grid)
    assert z == pytest.approx(expit(2 * grid.points), abs=1e-12)
    x = grid.points
    assert natanzon_potential(logistic, x) == pytest.approx(1 - 40 * z * (1 - z), abs=1e-9)


@allure.title("Integrated map agrees with the quadrature inverse")
@pytest.mark.natanzon
def test_map_inverse(quadratic):
    nmap = NatanzonMap(quadratic, -30.0, 30.0)
    assert natanzon_ode_residual(nmap) < 1e-10
    assert nmap.z(0.0)[0] == pytest.approx(0.5, abs=1e-15)
    for z in (1e-6, 0.1, 0.5, 0.9, 1 - 1e-6):
        x = natanzon_x_of_z(quadratic, z)
        assert nmap.z(x)[0] == pytest.approx(z, rel=1e-9)
    with pytest.raises(ValueError):
        natanzon_x_of_z(quadratic, 1.0)
    with pytest.raises(ValueError):
        nmap.u(np.array([31.0]))


@allure.title("Natanzon wavefunctions solve the Schroedinger equation")
@pytest.mark.natanzon
@pytest.mark.parametrize("name", ["logistic", "quadratic"])
def test_natanzon_wavefunctions(request, name):
    params = request.getfixturevalue(name)
    energies = natanzon_energies(params, 50)
    grid = natanzon_grid(params, energies, 1e-2)
    nmap = NatanzonMap(params, grid.x_min, grid.x_max)
    x = grid.points
    for n, energy in enumerate(energies):
        with allure.step(f"Level n={n}"):
            residual = natanzon_schrodinger_residual(params, n, energy, x, nmap)
            assert residual < 1e-5, f"Residual {residual}"

            psi = natanzon_psi(params, n, energy, x, nmap)
            significant = psi[np.abs(psi) > 1e-8 * np.max(np.abs(psi))]
            changes = int(np.count_nonzero(np.sign(significant[1:]) != np.sign(significant[:-1])))
            assert changes == n, f"psi_{n} has {changes} sign changes"


@allure.title("Natanzon levels agree with the oracle")
@pytest.mark.natanzon
@pytest.mark.oracle
@pytest.mark.parametrize("name", ["logistic", "quadratic"])
def test_verify_natanzon(request, name):
    params = request.getfixturevalue(name)
    report = verify_natanzon(params, 50, h=1e-2)
    assert report.passed, f"Failed checks: {report.failed_checks}"
    assert [row["n"] for row in report.levels] == list(range(len(report.levels)))
    for row in report.levels:
        assert row["delta"] < 1e-4


@allure.title("R(z) must stay positive on [0, 1]")
@pytest.mark.natanzon
@pytest.mark.parametrize(
    "overrides",
    [{"c0": 0.0}, {"c1": -1.0}, {"a": 10.0}],
    ids=["R(0) = 0", "negative R(1)", "R vanishes inside"],
)
def test_invalid_natanzon(overrides):
    with pytest.raises(ValueError):
        NatanzonParams(**{**LOGISTIC, **overrides})


@allure.title("Levels above n_max are reported as truncated")
@pytest.mark.natanzon
@pytest.mark.oracle
def test_verify_natanzon_truncated(logistic):
    report = verify_natanzon(logistic, 1, h=1e-2)
    assert [row["n"] for row in report.levels] == [0, 1]
    count = next(check for check in report.checks if check.name == "level_count")
    assert count.passed, f"Level count check: {count}"
    assert "truncated at n_max=1" in count.detail
    assert report.passed, f"Failed checks: {report.failed_checks}"
