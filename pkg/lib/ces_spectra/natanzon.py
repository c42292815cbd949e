"""
    Change-of-variable framework for solvable potentials and the Natanzon class.

    A map z(x) and a second-order equation F'' + Q F' + R F = 0 for F(z) define E - V(x)
    through a Schwarzian term plus z'^2 [R - Q'/2 - Q^2/4]. The Natanzon class uses
    z' = 2z(1-z)/sqrt(R(z)) with R(z) = a z(z-1) + c0(1-z) + c1 z on (0, 1).
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import allure
import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq
from scipy.special import expit, logit

from ces_spectra.grid import Grid
from ces_spectra.potential import dz_dx, inv_z, z_of_x

logger = logging.getLogger("CesLogger")

ODE_RTOL = 1e-13
ODE_ATOL = 1e-14
MAX_BRACKET_STEPS = 200
# smallest relative tolerance brentq accepts
BRENTQ_RTOL = 4 * np.finfo(float).eps

Function = Callable[[np.ndarray], np.ndarray]


class TransformKind(Enum):
    PI = "PI"
    PII = "PII"
    PIII = "PIII"
    PIV = "PIV"


@dataclass(frozen=True)
class TransformClass:
    kind: TransformKind
    C: float
    D: float = 0.0
    root_sign: int = 1

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"Class constant C must be positive, got {self.C}")
        if self.root_sign not in (1, -1):
            raise ValueError(f"root_sign must be +1 or -1, got {self.root_sign}")

    @property
    def sqrt_c(self) -> float:
        return self.root_sign * math.sqrt(self.C)


@dataclass(frozen=True)
class ZMap:
    """A coordinate map z(x) with its first three derivatives and 1 - z^2, all in x."""

    name: str
    z: Function
    dz: Function
    d2z: Function
    d3z: Function
    one_minus_z2: Function

    def schwarzian(self, x: np.ndarray) -> np.ndarray:
        """z'''/(2z') - (3/4)(z''/z')^2."""
        dz = self.dz(x)
        ratio = self.d2z(x) / dz
        return self.d3z(x) / (2 * dz) - 0.75 * ratio**2


def autonomous_map(
    name: str,
    z: Function,
    rate: Function,
    rate_dz: Function,
    rate_d2z: Function,
    dz: Optional[Function] = None,
    one_minus_z2: Optional[Function] = None,
) -> ZMap:
    """
    Map obeying z' = F(z); higher derivatives follow from z'' = F_z z' and
    z''' = F_zz z'^2 + F_z z''. `dz` may override F(z(x)) with a closed form in x.
    """
    first = dz if dz is not None else (lambda x: rate(z(x)))

    def second(x):
        return rate_dz(z(x)) * first(x)

    def third(x):
        zx = z(x)
        return rate_d2z(zx) * first(x) ** 2 + rate_dz(zx) * second(x)

    return ZMap(
        name=name,
        z=z,
        dz=first,
        d2z=second,
        d3z=third,
        one_minus_z2=one_minus_z2 if one_minus_z2 is not None else (lambda x: 1 - z(x) ** 2),
    )


def dkv_map() -> ZMap:
    """z = (1 + exp(-2x))^(1/2) with z' = 1/z - z."""
    return autonomous_map(
        "DKV",
        z=lambda x: np.asarray(z_of_x(x)),
        rate=lambda z: 1 / z - z,
        rate_dz=lambda z: -1 / z**2 - 1,
        rate_d2z=lambda z: 2 / z**3,
        dz=lambda x: np.asarray(dz_dx(x)),
        one_minus_z2=lambda x: -np.exp(-2 * np.asarray(x, dtype=float)),
    )


def _piii_inverse(sqrt_c: float, x: np.ndarray) -> np.ndarray:
    # x(z) = (artanh(w) - arctan(w)) / sqrt(C) with w = sqrt(z)
    def target(w, xi):
        return (np.arctanh(w) - np.arctan(w)) / sqrt_c - xi

    w = np.empty_like(x)
    for i, xi in enumerate(x.flat):
        if xi * sqrt_c <= 0:
            raise ValueError(f"PIII map is defined for x/sqrt(C) > 0, got x={xi}")
        w.flat[i] = brentq(target, 0.0, 1.0 - 1e-16, args=(xi,), xtol=1e-16, rtol=BRENTQ_RTOL)
    return w**2


def pt_map(tc: TransformClass) -> ZMap:
    """Closed-form (PI, PII, PIV) or inverted (PIII) map of a transformation class."""
    s = tc.sqrt_c
    if tc.kind == TransformKind.PI:
        return ZMap(
            name="PI",
            z=lambda x: np.sin(s * x),
            dz=lambda x: s * np.cos(s * x),
            d2z=lambda x: -(s**2) * np.sin(s * x),
            d3z=lambda x: -(s**3) * np.cos(s * x),
            one_minus_z2=lambda x: np.cos(s * x) ** 2,
        )
    if tc.kind == TransformKind.PII:
        sech2 = lambda x: 1 / np.cosh(s * x) ** 2  # noqa: E731
        return ZMap(
            name="PII",
            z=lambda x: np.tanh(s * x),
            dz=lambda x: s * sech2(x),
            d2z=lambda x: -2 * s**2 * np.tanh(s * x) * sech2(x),
            d3z=lambda x: -2 * s**3 * sech2(x) * (sech2(x) - 2 * np.tanh(s * x) ** 2),
            one_minus_z2=sech2,
        )
    if tc.kind == TransformKind.PIII:
        return autonomous_map(
            "PIII",
            z=lambda x: _piii_inverse(s, np.atleast_1d(np.asarray(x, dtype=float))),
            rate=lambda z: s * (1 - z**2) / np.sqrt(z),
            rate_dz=lambda z: s * (-1.5 * np.sqrt(z) - 0.5 * z**-1.5),
            rate_d2z=lambda z: s * (-0.75 * z**-0.5 + 0.75 * z**-2.5),
        )
    exponent = lambda x: np.exp(2 * s * np.asarray(x, dtype=float) + tc.D)  # noqa: E731
    return autonomous_map(
        "PIV",
        z=lambda x: np.sqrt(1 + exponent(x)),
        rate=lambda z: s * (z - 1 / z),
        rate_dz=lambda z: s * (1 + 1 / z**2),
        rate_d2z=lambda z: -2 * s / z**3,
        dz=lambda x: s * exponent(x) / np.sqrt(1 + exponent(x)),
        one_minus_z2=lambda x: -exponent(x),
    )


def class_ode_residual(tc: TransformClass, z_map: ZMap, grid: Grid) -> float:
    """max |phi(z) z'^2 - C| for the class-defining combination phi of `tc`."""
    x = grid.points
    with np.errstate(over="ignore", invalid="ignore"):
        z = np.asarray(z_map.z(x))
        dz2 = np.asarray(z_map.dz(x)) ** 2
        one_minus_z2 = np.asarray(z_map.one_minus_z2(x))
        if tc.kind == TransformKind.PI:
            combination = dz2 / one_minus_z2
        elif tc.kind == TransformKind.PII:
            combination = dz2 / one_minus_z2**2
        elif tc.kind == TransformKind.PIII:
            combination = z * dz2 / one_minus_z2**2
        else:
            combination = z**2 * dz2 / one_minus_z2**2
    if not np.all(np.isfinite(combination)):
        x_bad = x[np.argmax(~np.isfinite(combination))]
        raise ValueError(
            f"Map {z_map.name} overflows on [{grid.x_min}, {grid.x_max}], first at x={x_bad}"
        )
    return float(np.max(np.abs(combination - tc.C)))


def jacobi_qr(alpha: float, beta: float, n: int) -> tuple[Function, Function, Function]:
    """
    Q, dQ/dz and R of the Jacobi equation
    (1-z^2) P'' + [beta - alpha - (alpha+beta+2) z] P' + n(n+alpha+beta+1) P = 0.
    """
    p, q = beta - alpha, alpha + beta + 2
    eigen = n * (n + alpha + beta + 1)
    return (
        lambda z: (p - q * z) / (1 - z**2),
        lambda z: (-q + 2 * p * z - q * z**2) / (1 - z**2) ** 2,
        lambda z: eigen / (1 - z**2),
    )


def master_residual(
    z_map: ZMap,
    Q: Function,
    dQ: Function,
    R: Function,
    E: float,
    V: Function,
    grid: Grid,
) -> float:
    """max |Schwarzian + z'^2 [R - Q'/2 - Q^2/4] - (E - V(x))| on the grid."""
    x = grid.points
    z = np.asarray(z_map.z(x))
    rhs = z_map.schwarzian(x) + np.asarray(z_map.dz(x)) ** 2 * (R(z) - dQ(z) / 2 - Q(z) ** 2 / 4)
    return float(np.max(np.abs(rhs - (E - np.asarray(V(x))))))


def jacobi_master_eval(alpha: float, beta: float, n: int, z_map: ZMap, x) -> np.ndarray:
    """E - V(x) for F = P_n^(alpha, beta), written term by term."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z_map.z(x))
    dz2 = np.asarray(z_map.dz(x)) ** 2
    one_minus_z2 = np.asarray(z_map.one_minus_z2(x))
    weight = dz2 / one_minus_z2**2
    return (
        z_map.schwarzian(x)
        + dz2 / one_minus_z2 * n * (n + alpha + beta + 1)
        + weight * (0.5 * (alpha + beta + 2) - 0.25 * (beta - alpha) ** 2)
        + weight * z * 0.5 * (beta - alpha) * (beta + alpha)
        + weight * z**2 * (0.25 - ((alpha + beta + 1) / 2) ** 2)
    )


def jacobi_piv_eval(alpha: float, beta: float, n: int, x) -> np.ndarray:
    """Collapsed form of jacobi_master_eval on the DKV map, in powers of 1/z."""
    u = np.asarray(inv_z(x))
    shift = (n + (alpha + beta + 1) / 2) ** 2
    return (
        -shift
        + 0.5 * (beta - alpha) * (beta + alpha) * u
        + 0.75 * u**4
        + (shift - ((alpha + beta) / 2) ** 2 - 0.75 - 0.25 * (beta - alpha) ** 2) * u**2
    )


def jacobi_couplings(alpha: float, beta: float, n: int) -> tuple[float, float, float]:
    """(A, B, E_n) of the DKV potential read off the collapsed form."""
    shift = (n + (alpha + beta + 1) / 2) ** 2
    A = -(shift - ((alpha + beta) / 2) ** 2 - 0.75 - 0.25 * (beta - alpha) ** 2)
    B = 0.5 * (beta - alpha) * (beta + alpha)
    return A, B, -shift


@dataclass(frozen=True)
class NatanzonParams:
    f: float
    h0: float
    h1: float
    a: float
    c0: float
    c1: float

    def __post_init__(self):
        if not (self.c0 > 0 and self.c1 > 0):
            raise ValueError(f"R(z) must be positive on [0, 1], got R(0)={self.c0}, R(1)={self.c1}")
        if self.a > 0:
            vertex = (self.c0 - self.c1 + self.a) / (2 * self.a)
            if 0 < vertex < 1 and not self.r_of_z(vertex) > 0:
                raise ValueError(f"R(z) vanishes inside (0, 1) at z={vertex} for {self}")

    def r_of_z(self, z, w=None):
        w = 1 - z if w is None else w
        return -self.a * z * w + self.c0 * w + self.c1 * z

    def exponents(self, E: float) -> Optional[tuple[float, float, float]]:
        """(alpha, beta, delta) at energy E, or None if a radicand is negative."""
        radicands = (
            self.f + 1 - self.a * E,
            self.h0 + 1 - self.c0 * E,
            self.h1 + 1 - self.c1 * E,
        )
        if min(radicands) < 0:
            return None
        alpha, beta, delta = (math.sqrt(r) for r in radicands)
        return alpha, beta, delta


def natanzon_thresholds(params: NatanzonParams) -> tuple[float, float]:
    """V(-inf) and V(+inf)."""
    return (params.h0 + 1) / params.c0, (params.h1 + 1) / params.c1


class NatanzonMap:
    """
    z(x) from z' = 2z(1-z)/sqrt(R(z)) with z(0) = 1/2.

    The equation is integrated for u = logit(z), u' = 2/sqrt(R); each half-line carries
    the deviation of u from its asymptotic slope 2/sqrt(c0) or 2/sqrt(c1).
    """

    def __init__(self, params: NatanzonParams, x_min: float = -30.0, x_max: float = 30.0):
        self.params = params
        self.x_min = min(x_min, 0.0)
        self.x_max = max(x_max, 0.0)
        self._right = self._integrate(self.x_max, 2 / math.sqrt(params.c1))
        self._left = self._integrate(self.x_min, 2 / math.sqrt(params.c0))

    def _integrate(self, x_end: float, slope: float):
        if x_end == 0:
            return None
        params = self.params

        def rhs(x, y):
            return [2 / math.sqrt(params.r_of_z(expit(y[0] + slope * x))) - slope]

        solution = solve_ivp(
            rhs,
            (0.0, x_end),
            [0.0],
            method="RK45",
            rtol=ODE_RTOL,
            atol=ODE_ATOL,
            dense_output=True,
        )
        if not solution.success:
            raise RuntimeError(f"Integration of z(x) for {params} failed: {solution.message}")
        logger.debug(f"z(x) on [0, {x_end}] integrated in {solution.t.size} steps")
        return solution, slope

    def u(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size and (x.min() < self.x_min or x.max() > self.x_max):
            raise ValueError(f"x outside the integrated span [{self.x_min}, {self.x_max}]")
        u = np.zeros_like(x)
        for branch, mask in ((self._right, x > 0), (self._left, x < 0)):
            if branch is not None and mask.any():
                solution, slope = branch
                u[mask] = solution.sol(x[mask])[0] + slope * x[mask]
        return u

    def z(self, x) -> np.ndarray:
        return expit(self.u(x))

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Accepted integration steps as (x, u)."""
        xs, us = [np.zeros(1)], [np.zeros(1)]
        for branch in (self._left, self._right):
            if branch is not None:
                solution, slope = branch
                xs.append(solution.t)
                us.append(solution.y[0] + slope * solution.t)
        x, u = np.concatenate(xs), np.concatenate(us)
        order = np.argsort(x)
        return x[order], u[order]


def natanzon_x_of_u(params: NatanzonParams, u: float) -> float:
    value, _ = quad(
        lambda v: math.sqrt(params.r_of_z(expit(v), expit(-v))) / 2,
        0.0,
        u,
        epsabs=1e-14,
        epsrel=1e-14,
        limit=200,
    )
    return value


def natanzon_x_of_z(params: NatanzonParams, z: float) -> float:
    """Inverse map x(z) = integral of sqrt(R)/(2z(1-z)) from 1/2 to z."""
    if not 0 < z < 1:
        raise ValueError(f"z must lie in (0, 1), got {z}")
    return natanzon_x_of_u(params, float(logit(z)))


def natanzon_z(params: NatanzonParams, grid: Grid) -> np.ndarray:
    return NatanzonMap(params, grid.x_min, grid.x_max).z(grid.points)


def natanzon_ode_residual(nmap: NatanzonMap) -> float:
    """Largest deviation of the accepted steps from the quadrature inverse x(u)."""
    x, u = nmap.steps()
    return max(abs(xi - natanzon_x_of_u(nmap.params, ui)) for xi, ui in zip(x, u))


def potential_in_z(params: NatanzonParams, z, w=None) -> np.ndarray:
    """
    Natanzon potential as a function of z; w = 1 - z may be passed separately.

    With F = 2z(1-z) R^(-1/2) the Schwarzian part is F_z^2/4 - F F_zz/2.
    """
    z = np.asarray(z, dtype=float)
    w = 1 - z if w is None else np.asarray(w, dtype=float)
    R = params.r_of_z(z, w)
    dR = params.a * (z - w) - params.c0 + params.c1
    d2R = 2 * params.a
    g, dg, d2g = 2 * z * w, 2 * (w - z), -4.0
    F = g * R**-0.5
    dF = dg * R**-0.5 - 0.5 * g * dR * R**-1.5
    d2F = d2g * R**-0.5 - dg * dR * R**-1.5 - 0.5 * g * d2R * R**-1.5 + 0.75 * g * dR**2 * R**-2.5
    numerator = -params.f * z * w + params.h0 * w + params.h1 * z
    return dF**2 / 4 - F * d2F / 2 + numerator / R


def natanzon_potential(params: NatanzonParams, x, nmap: Optional[NatanzonMap] = None):
    x = np.asarray(x, dtype=float)
    u = _ensure_map(params, x, nmap).u(x)
    return potential_in_z(params, expit(u), expit(-u))


def naten_residual(params: NatanzonParams, n: int, E: float) -> Optional[float]:
    """alpha - beta - delta - (2n + 1) at E, or None outside the real domain."""
    exponents = params.exponents(E)
    if exponents is None:
        return None
    alpha, beta, delta = exponents
    return alpha - beta - delta - (2 * n + 1)


def _energy_ceiling(params: NatanzonParams) -> float:
    ceiling = min(natanzon_thresholds(params))
    if params.a > 0:
        ceiling = min(ceiling, (params.f + 1) / params.a)
    return ceiling


def _find_level(params: NatanzonParams, n: int, ceiling: float) -> Optional[float]:
    upper = ceiling
    top = naten_residual(params, n, upper)
    if top is None or top <= 0:
        return None
    step = 1e-3 * max(1.0, abs(ceiling))
    for _ in range(MAX_BRACKET_STEPS):
        lower = ceiling - step
        value = naten_residual(params, n, lower)
        if value is None:
            logger.warning(f"Radicand of level {n} turned negative at E={lower}, no bracket")
            return None
        if value < 0:
            return brentq(
                lambda e: naten_residual(params, n, e), lower, upper, xtol=1e-14, rtol=BRENTQ_RTOL
            )
        upper = lower
        step *= 2
    return None


@allure.step("Solve Natanzon energy condition")
def natanzon_energies(params: NatanzonParams, n_max: int) -> list[float]:
    """Roots of 2n+1 = alpha - beta - delta for n = 0..n_max, stopping at the first miss."""
    ceiling = _energy_ceiling(params)
    energies = []
    for n in range(n_max + 1):
        energy = _find_level(params, n, ceiling)
        if energy is None:
            break
        energies.append(float(energy))
    logger.info(f"Natanzon {params}: energies {energies}")
    return energies


def _hypergeometric_polynomial(n: int, alpha: float, beta: float) -> Polynomial:
    """F(-n, alpha - n; beta + 1; z) as a degree-n polynomial."""
    coeffs = [1.0]
    for k in range(n):
        coeffs.append(coeffs[-1] * (-n + k) * (alpha - n + k) / ((beta + 1 + k) * (k + 1)))
    return Polynomial(coeffs)


def _level_exponents(params: NatanzonParams, E: float) -> tuple[float, float, float]:
    exponents = params.exponents(E)
    if exponents is None:
        raise ValueError(f"Energy {E} is outside the bound-state domain of {params}")
    return exponents


def _log_prefactor(params: NatanzonParams, beta: float, delta: float, u: np.ndarray):
    """ln of R^(1/4) (1-z)^(delta/2) z^(beta/2), with ln z and ln(1-z) taken from u."""
    log_z, log_w = -np.logaddexp(0, -u), -np.logaddexp(0, u)
    R = params.r_of_z(expit(u), expit(-u))
    return 0.25 * np.log(R) + 0.5 * delta * log_w + 0.5 * beta * log_z


def _ensure_map(params: NatanzonParams, x: np.ndarray, nmap: Optional[NatanzonMap]):
    if nmap is not None:
        return nmap
    return NatanzonMap(params, float(np.min(x)) - 1, float(np.max(x)) + 1)


def natanzon_psi(
    params: NatanzonParams, n: int, E: float, x, nmap: Optional[NatanzonMap] = None
) -> np.ndarray:
    """Unnormalized psi_n = R^(1/4) (1-z)^(delta/2) z^(beta/2) F(-n, alpha-n; beta+1; z)."""
    x = np.asarray(x, dtype=float)
    u = _ensure_map(params, x, nmap).u(x)
    alpha, beta, delta = _level_exponents(params, E)
    polynomial = _hypergeometric_polynomial(n, alpha, beta)
    return np.exp(_log_prefactor(params, beta, delta, u)) * polynomial(expit(u))


def natanzon_schrodinger_residual(
    params: NatanzonParams, n: int, E: float, x, nmap: Optional[NatanzonMap] = None
) -> float:
    """
    max |-psi'' + (V - E) psi| / max |psi|, with psi'' taken analytically in z:
    psi'' = F^2 Psi_zz + F F_z Psi_z where F = z'.
    """
    x = np.asarray(x, dtype=float)
    u = _ensure_map(params, x, nmap).u(x)
    alpha, beta, delta = _level_exponents(params, E)
    z, w = expit(u), expit(-u)
    R = params.r_of_z(z, w)
    dR = params.a * (z - w) - params.c0 + params.c1
    d2R = 2 * params.a
    F = 2 * z * w * R**-0.5
    dF = 2 * (w - z) * R**-0.5 - z * w * dR * R**-1.5
    dL = dR / (4 * R) - delta / (2 * w) + beta / (2 * z)
    d2L = d2R / (4 * R) - dR**2 / (4 * R**2) - delta / (2 * w**2) - beta / (2 * z**2)
    H = _hypergeometric_polynomial(n, alpha, beta)
    h, dh, d2h = H(z), H.deriv(1)(z), H.deriv(2)(z)
    # Psi = exp(L) H; the factor exp(L) is applied at the end
    second = F**2 * ((d2L + dL**2) * h + 2 * dL * dh + d2h) + F * dF * (dL * h + dh)
    reduced = -second + (potential_in_z(params, z, w) - E) * h
    scale = np.exp(_log_prefactor(params, beta, delta, u))
    return float(np.max(np.abs(reduced * scale)) / np.max(np.abs(h * scale)))
