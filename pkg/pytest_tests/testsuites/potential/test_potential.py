import allure
import mpmath
import numpy as np
import pytest
from ces_spectra.common import R_CUTOFF, R_MAX
from ces_spectra.grid import Grid
from ces_spectra.potential import (
    DkvParams,
    PotentialForm,
    SourceKind,
    SourceParams,
    dz_dx,
    eval_dkv,
    eval_source,
    inv_z,
    liouville_residual,
    liouville_target,
    log_z,
    mirror_params,
    source_couplings_for_u2,
    source_liouville_residual,
    z_of_x,
)
from ces_spectra.spectrum import enumerate_levels
from hypothesis import given, settings
from hypothesis import strategies as st
from parameter_sets import ALL_SETS, BOUND_SETS
from steps.sweeps import admissible_sweep

R_GRID = Grid.from_step(R_CUTOFF, R_MAX, 1e-2)
LIOUVILLE_SWEEP_POINTS = 25


@allure.title("z(x) agrees with 50-digit arithmetic")
@pytest.mark.potential
@pytest.mark.parametrize("x", [-300.0, -40.0, -10.0, -1e-3, 0.0, 0.5, 10.0, 300.0])
def test_z_of_x_high_precision(x):
    actual = z_of_x(x)
    with mpmath.workdps(50):
        expected = mpmath.sqrt(1 + mpmath.exp(-2 * mpmath.mpf(x)))
        deviation = float(abs(mpmath.mpf(actual) - expected) / expected)
    assert deviation < 1e-15, f"z({x}) = {actual}, expected {expected}"


@allure.title("z z' = 1 - z^2 and 1/z, ln z are consistent with z")
@pytest.mark.potential
@settings(max_examples=500, deadline=None)
@given(x=st.floats(min_value=-15.0, max_value=15.0, allow_nan=False))
def test_coordinate_identities(x):
    z = z_of_x(x)
    scale = max(1.0, z * z)
    assert abs(dz_dx(x) * z + z * z - 1) / scale < 1e-12
    assert inv_z(x) == pytest.approx(1 / z, rel=1e-14)
    assert log_z(x) == pytest.approx(np.log(z), rel=1e-13, abs=1e-15)


@allure.title("z(x) decreases strictly and stays above 1")
@pytest.mark.potential
def test_z_monotone():
    z = np.asarray(z_of_x(Grid.from_step(-10.0, 10.0, 1e-2).points))
    assert np.all(np.diff(z) < 0), "z(x) must decrease strictly"
    assert np.all(z > 1)


@allure.title("V1(x) + eps = V2(-x) for random couplings")
@pytest.mark.potential
def test_mirror_identity():
    rng = np.random.default_rng(7)
    x = np.linspace(-30.0, 30.0, 1000)
    worst = 0.0
    for _ in range(100):
        p = DkvParams(A=float(rng.uniform(-50.0, 50.0)), B=float(rng.uniform(0.6, 60.0)))
        C, D, eps = mirror_params(p)
        mirrored = DkvParams(A=C, B=D)
        deviation = np.asarray(eval_dkv(p, PotentialForm.V1, x)) + eps
        deviation -= np.asarray(eval_dkv(mirrored, PotentialForm.V2, -x))
        worst = max(worst, float(np.max(np.abs(deviation))))
    assert worst < 1e-12, f"Largest mirror deviation {worst}"


@allure.title("V1 approaches 0 on the left and A - B - 3/4 on the right")
@pytest.mark.potential
@pytest.mark.parametrize("case", ALL_SETS, ids=[case.name for case in ALL_SETS])
def test_asymptotes(case):
    p = DkvParams(A=case.A, B=case.B)
    assert abs(eval_dkv(p, PotentialForm.V1, -40.0)) < 1e-10
    right = eval_dkv(p, PotentialForm.V1, 40.0)
    assert right == pytest.approx(case.A - case.B - 0.75, abs=1e-10)
    assert p.continuum_edge == pytest.approx(case.edge)


@allure.title("Invalid couplings are rejected")
@pytest.mark.potential
@pytest.mark.parametrize(
    "A, B",
    [(10.25, 0.4), (10.25, 0.5), (10.25, -3.0), (float("nan"), 12.5)],
    ids=["b below 1/4", "b equal 1/4", "negative B", "A is NaN"],
)
def test_invalid_couplings(A, B):
    with pytest.raises(ValueError):
        DkvParams(A=A, B=B)


@allure.title("Source potentials are singular at r <= 0")
@pytest.mark.potential
@pytest.mark.parametrize("kind", list(SourceKind), ids=[kind.value for kind in SourceKind])
def test_source_rejects_origin(kind):
    with pytest.raises(ValueError):
        eval_source(SourceParams(a=1.5, b=4.0, kind=kind), 0, np.array([0.0, 0.1]))


@allure.title("Liouville map of U1 reproduces V1 for every level")
@pytest.mark.potential
@pytest.mark.parametrize("case", BOUND_SETS, ids=[case.name for case in BOUND_SETS])
def test_liouville_u1(case):
    p = DkvParams(A=case.A, B=case.B)
    for state in enumerate_levels(p, 10):
        with allure.step(f"Level n={state.n}"):
            residual = liouville_residual(p, state, R_GRID)
            assert residual < 1e-8, f"Liouville residual {residual} for level {state.n}"

            target, form, k2 = liouville_target(SourceParams(a=state.a_n, b=p.b), state.n)
            assert form == PotentialForm.V1
            assert target.A == pytest.approx(p.A, rel=1e-12)
            assert -k2 == pytest.approx(state.E_n, rel=1e-12)


@allure.title("Liouville map holds for random admissible couplings")
@pytest.mark.potential
@pytest.mark.property
def test_liouville_sweep():
    failures = []
    for point in admissible_sweep(LIOUVILLE_SWEEP_POINTS, seed=2024):
        for state in point.states:
            residual = liouville_residual(point.params, state, R_GRID)
            if not residual < 1e-7:
                failures.append((point.params, state.n, residual))
    assert not failures, f"Liouville residuals (params, n, residual): {failures}"


@allure.title("Constant shift of the source potential leaves the map intact")
@pytest.mark.potential
@pytest.mark.parametrize("shift", [-7.5, 0.3, 125.0])
def test_liouville_shift(single_level_params, single_level_state, shift):
    plain = liouville_residual(single_level_params, single_level_state, R_GRID)
    shifted = liouville_residual(single_level_params, single_level_state, R_GRID, shift=shift)
    assert abs(shifted - plain) < 1e-10


@allure.title("Liouville map of U2 lands on V2 and, mirrored, on a V1 level")
@pytest.mark.potential
def test_liouville_u2():
    sp = SourceParams(a=2.2, b=3.0, kind=SourceKind.U2)
    n = 1
    assert sp.supports_level(n)

    residual = source_liouville_residual(sp, n, R_GRID)
    assert residual < 1e-8, f"U2 Liouville residual {residual}"

    C, D, k2 = source_couplings_for_u2(sp, n)
    with allure.step("Mirror the V2 level onto V1"):
        p = DkvParams(A=1.5 - C, B=D)
        _, _, eps = mirror_params(p)
        states = enumerate_levels(p, 5)
        assert len(states) > n, f"V1 couplings {p} have only {len(states)} level(s)"
        assert states[n].E_n == pytest.approx(-k2 - eps, rel=1e-9)


@allure.title("Source support conditions")
@pytest.mark.potential
def test_source_support():
    assert SourceParams(a=2.288, b=6.25).supports_level(0)
    assert not SourceParams(a=2.288, b=6.25).supports_level(1)
    assert SourceParams(a=2.2, b=3.0, kind=SourceKind.U2).supports_level(2)
    assert not SourceParams(a=2.2, b=3.0, kind=SourceKind.U2).supports_level(3)
    with pytest.raises(ValueError):
        source_couplings_for_u2(SourceParams(a=2.2, b=3.0), 0)
