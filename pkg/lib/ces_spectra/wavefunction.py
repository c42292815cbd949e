"""
    Bound-state wavefunctions of the DKV potential.

    psi_n(x) = z^(1/2) (z+1)^(beta_n/2) (z-1)^(alpha_n/2) P_n^(alpha_n, beta_n)(z),  z = z(x)
"""

import logging
from dataclasses import dataclass
from typing import Union

import allure
import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import simpson
from scipy.special import binom, expit

from ces_spectra.grid import Grid
from ces_spectra.potential import DkvParams, PotentialForm, eval_dkv, inv_z, log_z
from ces_spectra.spectrum import BoundState

logger = logging.getLogger("CesLogger")

ROOT_IMAG_TOL = 1e-8
NEWTON_STEPS = 4

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class JacobiSpec:
    n: int
    alpha: float
    beta: float


@dataclass(frozen=True)
class WavefunctionEval:
    state: BoundState
    norm: float
    domain: Grid

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return psi_eval(self.state, x) / self.norm

    @property
    def samples(self) -> np.ndarray:
        return np.asarray(self(self.domain.points))


def _recurrence_coefficients(k: int, alpha: float, beta: float) -> tuple[float, float, float]:
    """P_k = ((a1 z + a0) P_{k-1} - a2 P_{k-2}) / d for k >= 2, returned as (a1/d, a0/d, a2/d)."""
    ab = alpha + beta
    d = 2 * k * (k + ab) * (2 * k + ab - 2)
    if d == 0:
        raise ZeroDivisionError(f"Jacobi recurrence breaks down at degree {k}")
    e = 2 * k + ab - 1
    a1 = e * (2 * k + ab) * (2 * k + ab - 2)
    a0 = e * (alpha**2 - beta**2)
    a2 = 2 * (k + alpha - 1) * (k + beta - 1) * (2 * k + ab)
    return a1 / d, a0 / d, a2 / d


def jacobi_series(spec: JacobiSpec, z: ArrayLike) -> ArrayLike:
    """Explicit sum over binomials; valid for any real alpha, beta."""
    z = np.asarray(z, dtype=float)
    n, alpha, beta = spec.n, spec.alpha, spec.beta
    lower, upper = (z - 1) / 2, (z + 1) / 2
    total = np.zeros_like(z)
    for k in range(n + 1):
        total = total + binom(n + alpha, n - k) * binom(n + beta, k) * lower**k * upper ** (n - k)
    return total if total.ndim else float(total)


def jacobi_eval(spec: JacobiSpec, z: ArrayLike) -> ArrayLike:
    """
    Evaluate P_n^(alpha, beta)(z) by the three-term recurrence in degree.

    The recurrence is an identity in (alpha, beta), so it holds outside the classical range;
    where one of its denominators vanishes the binomial series is used instead.
    """
    z = np.asarray(z, dtype=float)
    n, alpha, beta = spec.n, spec.alpha, spec.beta
    previous = np.ones_like(z)
    if n == 0:
        return previous if previous.ndim else float(previous)
    current = (alpha - beta) / 2 + (alpha + beta + 2) * z / 2
    try:
        for k in range(2, n + 1):
            a1, a0, a2 = _recurrence_coefficients(k, alpha, beta)
            previous, current = current, (a1 * z + a0) * current - a2 * previous
    except ZeroDivisionError as exc:
        logger.debug(f"{exc}, falling back to series for {spec}")
        return jacobi_series(spec, z)
    return current if current.ndim else float(current)


def jacobi_eval_scaled(spec: JacobiSpec, u: ArrayLike) -> ArrayLike:
    """
    u^n P_n^(alpha, beta)(1/u), finite down to u = 0 where it is the leading coefficient.

    The degree recurrence divided through by z^k; used wherever z itself would overflow.
    """
    u = np.asarray(u, dtype=float)
    n, alpha, beta = spec.n, spec.alpha, spec.beta
    previous = np.ones_like(u)
    if n == 0:
        return previous if previous.ndim else float(previous)
    current = (alpha - beta) / 2 * u + (alpha + beta + 2) / 2
    try:
        for k in range(2, n + 1):
            a1, a0, a2 = _recurrence_coefficients(k, alpha, beta)
            previous, current = current, (a1 + a0 * u) * current - a2 * u**2 * previous
    except ZeroDivisionError as exc:
        logger.debug(f"{exc}, falling back to series for {spec}")
        total = np.zeros_like(u)
        for k in range(n + 1):
            weight = binom(n + alpha, n - k) * binom(n + beta, k)
            total = total + weight * ((1 - u) / 2) ** k * ((1 + u) / 2) ** (n - k)
        current = total
    return current if current.ndim else float(current)


def jacobi_derivative(spec: JacobiSpec, z: ArrayLike) -> ArrayLike:
    if spec.n == 0:
        return np.zeros_like(np.asarray(z, dtype=float))
    shifted = JacobiSpec(spec.n - 1, spec.alpha + 1, spec.beta + 1)
    return (spec.n + spec.alpha + spec.beta + 1) / 2 * np.asarray(jacobi_eval(shifted, z))


def jacobi_polynomial(spec: JacobiSpec) -> Polynomial:
    """Power-basis expansion in z, built with the same recurrence."""
    n, alpha, beta = spec.n, spec.alpha, spec.beta
    previous = Polynomial([1.0])
    if n == 0:
        return previous
    current = Polynomial([(alpha - beta) / 2, (alpha + beta + 2) / 2])
    for k in range(2, n + 1):
        a1, a0, a2 = _recurrence_coefficients(k, alpha, beta)
        previous, current = current, Polynomial([a0, a1]) * current - a2 * previous
    return current


def jacobi_parameters(state: BoundState) -> JacobiSpec:
    return JacobiSpec(n=state.n, alpha=state.alpha_n, beta=state.beta_n)


def polynomial_roots(spec: JacobiSpec, physical: bool = True) -> list[float]:
    """
    Roots of P_n^(alpha, beta) from the companion matrix, Newton-polished.

    For a physical level all n roots are real and lie in (1, inf); anything else means the
    level was built from the wrong cubic root.
    """
    if spec.n == 0:
        return []
    raw = jacobi_polynomial(spec).roots()
    polished = []
    for root in raw:
        if abs(root.imag) > ROOT_IMAG_TOL * (1 + abs(root)):
            if physical:
                raise RuntimeError(f"Complex root {root} of P_n for {spec}")
            continue
        z = float(root.real)
        for _ in range(NEWTON_STEPS):
            slope = jacobi_derivative(spec, z)
            if slope == 0:
                break
            z -= jacobi_eval(spec, z) / slope
        polished.append(z)
    polished.sort()
    if physical and (len(polished) != spec.n or polished[0] <= 1):
        raise RuntimeError(f"Roots {polished} of P_n for {spec} do not all lie in (1, inf)")
    return polished


def node_positions(state: BoundState) -> list[float]:
    """x-images of the polynomial roots, x = -ln(z^2 - 1)/2."""
    return [-0.5 * np.log(z * z - 1) for z in polynomial_roots(jacobi_parameters(state))]


def _log_prefactor(state: BoundState, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """ln of z^(n + 1/2) (z+1)^(beta_n/2) (z-1)^(alpha_n/2), with z^n moved out of P_n."""
    lz = np.asarray(log_z(x))
    log_zp1 = lz + np.log1p(u)
    # ln(z - 1) = ln(z^2 - 1) - ln(z + 1) = -2x - ln(z + 1)
    log_zm1 = -2.0 * x - log_zp1
    return (state.n + 0.5) * lz + 0.5 * state.beta_n * log_zp1 + 0.5 * state.alpha_n * log_zm1


def psi_eval(state: BoundState, x: ArrayLike) -> ArrayLike:
    """Unnormalized psi_n(x), evaluated in log space through u = 1/z."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(inv_z(x))
    poly = np.asarray(jacobi_eval_scaled(jacobi_parameters(state), u))
    with np.errstate(divide="ignore", over="ignore"):
        value = np.sign(poly) * np.exp(_log_prefactor(state, x, u) + np.log(np.abs(poly)))
    return value if value.ndim else float(value)


def log_derivative(state: BoundState, x: ArrayLike) -> ArrayLike:
    """psi_n'/psi_n from the closed form in u = 1/z; singular at the nodes."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(inv_z(x))
    # 1 - u^2 = 1/(1 + exp(2x))
    one_minus_u2 = expit(-2.0 * x)
    spec = jacobi_parameters(state)
    value = -0.5 * one_minus_u2 + 0.5 * state.beta_n * (u - 1.0) - 0.5 * state.alpha_n * (u + 1.0)
    if spec.n > 0:
        shifted = JacobiSpec(spec.n - 1, spec.alpha + 1, spec.beta + 1)
        scale = (spec.n + spec.alpha + spec.beta + 1) / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            # z' P'/P = -(1 - u^2) c R_{n-1}(u)/R_n(u) with R_k(u) = u^k P_k(1/u)
            ratio = np.asarray(jacobi_eval_scaled(shifted, u)) / np.asarray(
                jacobi_eval_scaled(spec, u)
            )
        value = value - one_minus_u2 * scale * ratio
    return value if value.ndim else float(value)


def source_psi(state: BoundState, r: ArrayLike) -> ArrayLike:
    """
    Source-potential wavefunction chi(r) = (coth r - 1)^(alpha/2) (coth r + 1)^(beta/2) P_n(coth r).

    psi(x) = (dx/dr)^(1/2) chi(r) holds with x = ln sinh r and dx/dr = coth r.
    """
    r = np.asarray(r, dtype=float)
    em1 = np.expm1(2 * r)
    coth = 1 + 2 / em1
    log_minus = np.log(2.0) - np.log(em1)
    log_plus = np.log1p(coth)
    poly = np.asarray(jacobi_eval(jacobi_parameters(state), coth))
    with np.errstate(divide="ignore", over="ignore"):
        log_value = 0.5 * state.alpha_n * log_minus + 0.5 * state.beta_n * log_plus
        value = np.sign(poly) * np.exp(log_value + np.log(np.abs(poly)))
    return value if value.ndim else float(value)


def normalize(state: BoundState, grid: Grid) -> float:
    """L2 norm of psi_eval on the grid, composite Simpson rule."""
    psi = np.asarray(psi_eval(state, grid.points))
    norm = float(np.sqrt(simpson(psi**2, dx=grid.h)))
    if not np.isfinite(norm) or norm == 0:
        raise ValueError(f"Level n={state.n} is not normalizable on [{grid.x_min}, {grid.x_max}]")
    return norm


def evaluate(state: BoundState, grid: Grid) -> WavefunctionEval:
    return WavefunctionEval(state=state, norm=normalize(state, grid), domain=grid)


def sample(state: BoundState, grid: Grid) -> np.ndarray:
    return evaluate(state, grid).samples


def node_count(state: BoundState, grid: Grid) -> int:
    """Strict sign changes of psi on the grid; exact zeros are skipped."""
    signs = np.sign(np.asarray(psi_eval(state, grid.points)))
    nonzero = np.nonzero(signs)[0]
    flips = nonzero[1:][signs[nonzero][1:] != signs[nonzero][:-1]]
    if any(i <= 2 or i >= grid.n_points - 3 for i in flips):
        logger.warning(
            f"Sign change of psi_{state.n} within 2 cells of the boundary of "
            f"[{grid.x_min}, {grid.x_max}], the grid is too small"
        )
    return int(flips.size)


def second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Five-point central second derivative at indices 2..N-3."""
    return (
        -values[:-4] + 16 * values[1:-3] - 30 * values[2:-2] + 16 * values[3:-1] - values[4:]
    ) / (12 * h * h)


@allure.step("Check Schroedinger residual of analytic level")
def schrodinger_residual(p: DkvParams, state: BoundState, grid: Grid) -> float:
    """max |-psi'' + (V1 - E_n) psi| / max |psi| over the interior of the grid."""
    x = grid.points
    psi = np.asarray(psi_eval(state, x))
    scale = np.max(np.abs(psi))
    psi = psi / scale
    potential = np.asarray(eval_dkv(p, PotentialForm.V1, x[2:-2]))
    residual = -second_derivative(psi, grid.h) + (potential - state.E_n) * psi[2:-2]
    value = float(np.max(np.abs(residual)))
    logger.info(f"Schroedinger residual of level n={state.n} with step {grid.h}: {value:.3e}")
    return value
