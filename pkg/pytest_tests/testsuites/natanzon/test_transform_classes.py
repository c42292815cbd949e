import allure
import numpy as np
import pytest
from ces_spectra.grid import Grid
from ces_spectra.natanzon import (
    TransformClass,
    TransformKind,
    class_ode_residual,
    dkv_map,
    jacobi_couplings,
    jacobi_master_eval,
    jacobi_piv_eval,
    jacobi_qr,
    master_residual,
    pt_map,
)
from ces_spectra.potential import PotentialForm, eval_dkv, z_of_x

CLASS_CASES = [
    (TransformClass(TransformKind.PI, C=2.0), Grid.from_step(-1.0, 1.0, 1e-2)),
    (TransformClass(TransformKind.PII, C=0.7), Grid.from_step(-3.0, 3.0, 1e-2)),
    (TransformClass(TransformKind.PIII, C=1.5), Grid.from_step(0.05, 2.0, 1e-2)),
    (TransformClass(TransformKind.PIV, C=1.0, D=0.3), Grid.from_step(-5.0, 5.0, 1e-2)),
]


@allure.title("Closed-form maps satisfy their class equation")
@pytest.mark.natanzon
@pytest.mark.parametrize("tc, grid", CLASS_CASES, ids=[tc.kind.value for tc, _ in CLASS_CASES])
def test_class_equation(tc, grid):
    residual = class_ode_residual(tc, pt_map(tc), grid)
    assert residual < 1e-12, f"{tc.kind.value} residual {residual}"


@allure.title("Map of one class violates the equation of another")
@pytest.mark.natanzon
def test_class_equation_mismatch():
    grid = Grid.from_step(-1.0, 1.0, 1e-2)
    tanh_map = pt_map(TransformClass(TransformKind.PII, C=1.0))
    assert class_ode_residual(TransformClass(TransformKind.PI, C=1.0), tanh_map, grid) > 0.1


@allure.title("DKV coordinate is the PIV map with C = 1")
@pytest.mark.natanzon
def test_dkv_map_is_piv():
    grid = Grid.from_step(-20.0, 20.0, 1e-2)
    piv = TransformClass(TransformKind.PIV, C=1.0)
    assert class_ode_residual(piv, dkv_map(), grid) < 1e-12

    with pytest.raises(ValueError, match="overflows"):
        class_ode_residual(piv, dkv_map(), Grid.from_step(-900.0, 0.0, 1e-1))

    mirrored = pt_map(TransformClass(TransformKind.PIV, C=1.0, root_sign=-1))
    x = grid.points
    assert np.asarray(mirrored.z(x)) == pytest.approx(np.asarray(z_of_x(x)), rel=1e-13)


@allure.title("Invalid class constants are rejected")
@pytest.mark.natanzon
@pytest.mark.parametrize(
    "C, root_sign", [(0.0, 1), (-1.0, 1), (1.0, 2)], ids=["zero C", "negative C", "bad sign"]
)
def test_invalid_class(C, root_sign):
    with pytest.raises(ValueError):
        TransformClass(TransformKind.PI, C=C, root_sign=root_sign)


@allure.title("Master equation with Jacobi data reproduces E_n - V1")
@pytest.mark.natanzon
def test_master_equation(four_level_params, four_level_states):
    grid = Grid.from_step(-10.0, 3.0, 1e-2)
    V = lambda x: eval_dkv(four_level_params, PotentialForm.V1, x)  # noqa: E731
    for state in four_level_states:
        with allure.step(f"Level n={state.n}"):
            Q, dQ, R = jacobi_qr(state.alpha_n, state.beta_n, state.n)
            residual = master_residual(dkv_map(), Q, dQ, R, state.E_n, V, grid)
            assert residual < 1e-8, f"Master residual {residual}"

            shifted = master_residual(dkv_map(), Q, dQ, R, state.E_n + 0.25, V, grid)
            assert shifted == pytest.approx(0.25, abs=1e-8)


@allure.title("Collapsed PIV form is the same for every level")
@pytest.mark.natanzon
def test_collapsed_form(four_level_params, four_level_states):
    x = Grid.from_step(-10.0, 10.0, 1e-2).points
    v1 = np.asarray(eval_dkv(four_level_params, PotentialForm.V1, x))
    for state in four_level_states:
        alpha, beta, n = state.alpha_n, state.beta_n, state.n
        collapsed = jacobi_piv_eval(alpha, beta, n, x)
        assert collapsed == pytest.approx(state.E_n - v1, abs=1e-9), f"Level {n}"
        term_by_term = jacobi_master_eval(alpha, beta, n, dkv_map(), x)
        assert term_by_term == pytest.approx(collapsed, abs=1e-8), f"Level {n}"

        A, B, E = jacobi_couplings(alpha, beta, n)
        assert (A, B, E) == pytest.approx(
            (four_level_params.A, four_level_params.B, state.E_n), rel=1e-10
        )
