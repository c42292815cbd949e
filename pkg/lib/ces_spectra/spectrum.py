"""
    Cubic energy condition of the DKV potential and its bound levels.

    For level n the condition is solved in t = a + n:

        (2n+1) t^3 - (A + n^2 + n - 1/2) t^2 + b^2 = 0

    Of the three roots only the middle one can lie in the normalizability window
    n + 1/2 < t < sqrt(b); it gives E_n = -(a_n - 1/2)^2.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import allure
import numpy as np

from ces_spectra.common import WINDOW_MARGIN
from ces_spectra.potential import DkvParams

logger = logging.getLogger("CesLogger")

NEWTON_STEPS = 8
REAL_ROOT_TOL = 1e-10


class LevelNotFoundError(LookupError):
    pass


class RootRule(Enum):
    MIDDLE = "middle"
    LEFTMOST = "leftmost"
    RIGHTMOST = "rightmost"


@dataclass(frozen=True)
class ScaledRoots:
    tau: float
    mu: float
    T: float
    X: Optional[float] = None
    Y: Optional[float] = None
    Z: Optional[float] = None


@dataclass(frozen=True)
class CubicTriple:
    coeffs: tuple[float, float, float, float]
    roots: tuple[complex, complex, complex]
    n: int
    b: float

    @property
    def all_real(self) -> bool:
        return all(root.imag == 0 for root in self.roots)

    @property
    def real_roots(self) -> list[float]:
        return [root.real for root in self.roots if root.imag == 0]

    @property
    def window(self) -> tuple[float, float]:
        """Open interval of t = a + n giving a normalizable level."""
        return self.n + 0.5, math.sqrt(self.b)

    @property
    def scaled(self) -> ScaledRoots:
        return scaled_roots(self)


@dataclass(frozen=True)
class BoundState:
    n: int
    a_n: float
    E_n: float
    c: float
    s: float
    alpha_n: float
    beta_n: float

    @classmethod
    def from_root(cls, n: int, a: float, b: float) -> "BoundState":
        """Level record of root a; no admissibility check is made."""
        c = a + n
        s = b / c
        return cls(
            n=n, a_n=a, E_n=-((a - 0.5) ** 2), c=c, s=s, alpha_n=s - c, beta_n=-s - c
        )

    @property
    def left_rate(self) -> float:
        """psi ~ exp(left_rate * x) as x -> -inf."""
        return self.a_n - 0.5

    @property
    def right_rate(self) -> float:
        """psi ~ exp(-right_rate * x) as x -> +inf."""
        return self.alpha_n

    @property
    def is_normalizable(self) -> bool:
        return self.left_rate > 0 and self.right_rate > 0


@dataclass(frozen=True)
class LevelScan:
    n: int
    triple: CubicTriple
    state: Optional[BoundState]
    coupling_bound_ok: bool


@dataclass(frozen=True)
class RootCertificate:
    x_in_window: bool
    z_negative: bool
    y_above_one: bool
    tau_residual: float
    closed_form_residual: float

    @property
    def holds(self) -> bool:
        return (
            self.x_in_window
            and self.z_negative
            and self.y_above_one
            and self.tau_residual < 1e-10
            and self.closed_form_residual < 1e-10
        )


def cubic_coefficients(p: DkvParams, n: int) -> tuple[float, float, float, float]:
    if n < 0:
        raise ValueError(f"Level index must be non-negative, got {n}")
    return float(2 * n + 1), -(p.A + n * n + n - 0.5), 0.0, p.b**2


def coupling_from_root(n: int, b: float, t: float) -> float:
    """Coupling A for which t = a + n solves the level-n cubic."""
    return (2 * n + 1) * t + b**2 / t**2 - n * n - n + 0.5


def coupling_from_energy(B: float, n: int, sqrt_eps: float) -> float:
    """Coupling A reproduced by the superpotential route from sqrt(-E_n)."""
    c = n + sqrt_eps + 0.5
    s = B / (2 * c)
    return s**2 + (2 * n + 1) * c - (n + 0.5) ** 2 + 0.75


def coupling_window(b: float, n: int) -> Optional[tuple[float, float]]:
    """
    Open interval of A for which level n exists.

    The curve A(t) = coupling_from_root(n, b, t) decreases across the whole window
    (n + 1/2, sqrt(b)), so the level exists iff A(sqrt(b)) < A < A(n + 1/2).

    Returns:
        (A_low, A_high), or None when the window in t is empty
    """
    lo, hi = n + 0.5, math.sqrt(b)
    if not hi > lo:
        return None
    return coupling_from_root(n, b, hi), coupling_from_root(n, b, lo)


def _cube_root(x: float) -> float:
    return math.copysign(abs(x) ** (1 / 3), x)


def _depressed_roots(p: float, q: float) -> list[complex]:
    """Roots of t^3 + p t + q = 0."""
    d = p**3 / 27 + q**2 / 4
    if p == 0 and q == 0:
        return [0j, 0j, 0j]
    if d > 0:
        sign = 1.0 if q >= 0 else -1.0
        u = -sign * _cube_root(abs(q) / 2 + math.sqrt(d))
        real = u - p / (3 * u)
        root = cmath.sqrt(-3 * real**2 - 4 * p)
        return [complex(real), (-real + root) / 2, (-real - root) / 2]
    # three real roots
    m = 2 * math.sqrt(-p / 3)
    cos_arg = 3 * q / (2 * p) * math.sqrt(-3 / p)
    theta = math.acos(min(1.0, max(-1.0, cos_arg))) / 3
    return [complex(m * math.cos(theta - 2 * math.pi * k / 3)) for k in range(3)]


def _polish(coeffs: Sequence[float], root: complex) -> complex:
    c3, c2, c1, c0 = coeffs
    best, best_value = root, abs(((c3 * root + c2) * root + c1) * root + c0)
    t = root
    for _ in range(NEWTON_STEPS):
        value = ((c3 * t + c2) * t + c1) * t + c0
        slope = (3 * c3 * t + 2 * c2) * t + c1
        if slope == 0:
            break
        t = t - value / slope
        residual = abs(((c3 * t + c2) * t + c1) * t + c0)
        if residual < best_value:
            best, best_value = t, residual
        else:
            break
    return best


def solve_cubic(coeffs: Sequence[float]) -> tuple[complex, complex, complex]:
    """
    All three roots of c3 t^3 + c2 t^2 + c1 t + c0, sorted by real part.

    Trigonometric form when the roots are real, Cardano otherwise; every root is then
    Newton-polished. Imaginary parts below 1e-10 are dropped.
    """
    c3, c2, c1, c0 = (float(c) for c in coeffs)
    if c3 == 0:
        raise ValueError("Leading coefficient of a cubic must be non-zero")
    b, c, d = c2 / c3, c1 / c3, c0 / c3
    p = c - b * b / 3
    q = d - b * c / 3 + 2 * b**3 / 27
    roots = []
    for t in _depressed_roots(p, q):
        root = _polish((c3, c2, c1, c0), t - b / 3)
        if abs(root.imag) < REAL_ROOT_TOL:
            root = complex(root.real, 0.0)
        roots.append(root)
    roots.sort(key=lambda z: (z.real, z.imag))
    return roots[0], roots[1], roots[2]


def build_triple(p: DkvParams, n: int) -> CubicTriple:
    coeffs = cubic_coefficients(p, n)
    return CubicTriple(coeffs=coeffs, roots=solve_cubic(coeffs), n=n, b=p.b)


def scaled_roots(triple: CubicTriple) -> ScaledRoots:
    beta = math.sqrt(triple.b)
    n = triple.n
    tau = -triple.coeffs[1] / triple.b
    mu = (2 * n + 1) / beta
    T = (n + 0.5) / beta
    if not triple.all_real:
        return ScaledRoots(tau=tau, mu=mu, T=T)
    Z, X, Y = (root.real / beta for root in triple.roots)
    return ScaledRoots(tau=tau, mu=mu, T=T, X=X, Y=Y, Z=Z)


def select_physical_root(
    triple: CubicTriple, rule: RootRule = RootRule.MIDDLE
) -> Optional[float]:
    """
    Root a = t - n of the level, or None when the level does not exist.

    Only the middle rule yields physical levels; the outer rules pick the leftmost or
    rightmost root unconditionally and serve as negative controls.
    """
    if not triple.all_real:
        return None
    left, middle, right = (root.real for root in triple.roots)
    if rule == RootRule.LEFTMOST:
        return left - triple.n
    if rule == RootRule.RIGHTMOST:
        return right - triple.n
    lo, hi = triple.window
    if lo + WINDOW_MARGIN < middle < hi - WINDOW_MARGIN:
        return middle - triple.n
    return None


def energy_of(a_n: float) -> float:
    if not a_n > 0.5:
        raise ValueError(f"Root a_n = {a_n} is not above 1/2, the level would not be bound")
    return -((a_n - 0.5) ** 2)


def root_certificate(triple: CubicTriple) -> RootCertificate:
    """Check that the outer scaled roots lie outside the window when the middle one is inside."""
    scaled = triple.scaled
    if scaled.X is None:
        raise ValueError(f"Level {triple.n} cubic has complex roots, no certificate applies")
    X, Y, Z = scaled.X, scaled.Y, scaled.Z
    x_in_window = scaled.T < X < 1
    if not x_in_window:
        raise ValueError(f"Middle scaled root {X} is outside ({scaled.T}, 1)")
    mu, tau = scaled.mu, scaled.tau
    tau_residual = max(abs(mu * xi + 1 / xi**2 - tau) / max(1.0, abs(tau)) for xi in (X, Y, Z))
    root = math.sqrt(1 + 4 * mu * X**3)
    closed_y = (1 + root) / (2 * mu * X**2)
    # (1 - root)/(2 mu X^2) without the cancellation for small X
    closed_z = -2 * X / (1 + root)
    closed_form_residual = max(abs(closed_y - Y) / abs(Y), abs(closed_z - Z) / abs(Z))
    return RootCertificate(
        x_in_window=x_in_window,
        z_negative=Z < 0,
        y_above_one=Y > 1,
        tau_residual=tau_residual,
        closed_form_residual=closed_form_residual,
    )


def scan_levels(
    p: DkvParams, n_max: int, rule: RootRule = RootRule.MIDDLE
) -> list[LevelScan]:
    """
    Level-by-level scan for n = 0..n_max.

    The scan stops after the first n without a level; that scan is still returned so the
    caller can report its roots.
    """
    scans = []
    for n in range(n_max + 1):
        triple = build_triple(p, n)
        a = select_physical_root(triple, rule)
        bound_ok = p.A > 2 * (n + 0.5) ** 2 + 0.75
        state = BoundState.from_root(n, a, p.b) if a is not None else None
        scans.append(LevelScan(n=n, triple=triple, state=state, coupling_bound_ok=bound_ok))
        logger.debug(
            f"n={n}: roots {[complex(r) for r in triple.roots]}, selected {a}, "
            f"A > 2(n+1/2)^2+3/4: {bound_ok}"
        )
        if state is None:
            break
    return scans


@allure.step("Enumerate bound levels")
def enumerate_levels(
    p: DkvParams, n_max: int, rule: RootRule = RootRule.MIDDLE
) -> list[BoundState]:
    states = [scan.state for scan in scan_levels(p, n_max, rule) if scan.state is not None]
    logger.info(
        f"A={p.A}, B={p.B}: {len(states)} level(s) with energies {[s.E_n for s in states]}"
    )
    return states


def get_level(p: DkvParams, n: int, rule: RootRule = RootRule.MIDDLE) -> BoundState:
    states = enumerate_levels(p, n, rule)
    if len(states) <= n:
        raise LevelNotFoundError(f"Level n={n} does not exist for A={p.A}, B={p.B}")
    return states[n]


def level_count(p: DkvParams) -> int:
    """Number of bound levels; the window in t is empty once n + 1/2 >= sqrt(b)."""
    n_max = int(np.floor(math.sqrt(p.b) - 0.5)) + 1
    return len(enumerate_levels(p, max(n_max, 0)))
