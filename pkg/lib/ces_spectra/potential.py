"""
    Potentials of the DKV family, the source potentials U1/U2 and the coordinate map z(x).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Union

import allure
import numpy as np

from ces_spectra.common import R_CUTOFF
from ces_spectra.grid import Grid

if TYPE_CHECKING:
    from ces_spectra.spectrum import BoundState

logger = logging.getLogger("CesLogger")

FIXED_G3 = -0.75
MIN_B = 0.25

ArrayLike = Union[float, np.ndarray]


class PotentialForm(Enum):
    V1 = "V1"
    V2 = "V2"


class SourceKind(Enum):
    U1 = "U1"
    U2 = "U2"


@dataclass(frozen=True)
class DkvParams:
    A: float
    B: float

    def __post_init__(self):
        if not self.B / 2 > MIN_B:
            raise ValueError(f"Coupling b = B/2 must exceed {MIN_B}, got B={self.B}")
        if not np.isfinite(self.A):
            raise ValueError(f"Coupling A must be finite, got {self.A}")

    @property
    def b(self) -> float:
        return self.B / 2

    @property
    def fixed_g3(self) -> float:
        return FIXED_G3

    @property
    def right_asymptote(self) -> float:
        return self.A - self.B + FIXED_G3

    @property
    def continuum_edge(self) -> float:
        """Lowest continuum threshold, min(V(-inf), V(+inf))."""
        return min(0.0, self.right_asymptote)


@dataclass(frozen=True)
class GeneralCouplings:
    g0: float
    g1: float
    g2: float
    g3: float

    @classmethod
    def for_form(cls, p: DkvParams, which: PotentialForm) -> "GeneralCouplings":
        if which == PotentialForm.V1:
            return cls(0.0, -p.B, p.A, FIXED_G3)
        return cls(-p.B, 0.0, p.A, FIXED_G3)


@dataclass(frozen=True)
class SourceParams:
    a: float
    b: float
    kind: SourceKind = SourceKind.U1

    def supports_level(self, n: int) -> bool:
        if self.kind == SourceKind.U1:
            return self.b > (self.a + n) ** 2
        return self.b > self.a > n


def _result(value: np.ndarray) -> ArrayLike:
    return value if value.ndim else float(value)


def z_of_x(x: ArrayLike) -> ArrayLike:
    """
    Coordinate map z = (1 + exp(-2x))^(1/2), evaluated without overflow for large negative x.

    Args:
        x: coordinate or array of coordinates
    Returns:
        z in (1, inf), same shape as x
    """
    x = np.asarray(x, dtype=float)
    t = np.exp(-2.0 * np.abs(x))
    with np.errstate(over="ignore"):
        scale = np.exp(np.maximum(-x, 0.0))
    return _result(np.sqrt(1.0 + t) * scale)


def inv_z(x: ArrayLike) -> ArrayLike:
    """1/z(x); never overflows."""
    x = np.asarray(x, dtype=float)
    t = np.exp(-2.0 * np.abs(x))
    return _result(np.exp(np.minimum(x, 0.0)) / np.sqrt(1.0 + t))


def log_z(x: ArrayLike) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    return _result(0.5 * np.log1p(np.exp(-2.0 * np.abs(x))) + np.maximum(-x, 0.0))


def dz_dx(x: ArrayLike) -> ArrayLike:
    """z' = (1 - z^2)/z = -exp(-2x)/z."""
    x = np.asarray(x, dtype=float)
    t = np.exp(-2.0 * np.abs(x))
    with np.errstate(over="ignore"):
        value = np.where(
            x >= 0, -t / np.sqrt(1.0 + t), -np.exp(np.maximum(-x, 0.0)) / np.sqrt(1.0 + t)
        )
    return _result(value)


def eval_general(g: GeneralCouplings, x: ArrayLike) -> ArrayLike:
    """g0/(e^x z) + g1/z + g2/z^2 + g3/z^4, using 1/(e^x z(x)) = 1/z(-x)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(inv_z(x))
    mirrored = np.asarray(inv_z(-x))
    return _result(g.g0 * mirrored + g.g1 * u + g.g2 * u**2 + g.g3 * u**4)


def eval_dkv(p: DkvParams, which: PotentialForm, x: ArrayLike) -> ArrayLike:
    return eval_general(GeneralCouplings.for_form(p, which), x)


def mirror_params(p: DkvParams) -> tuple[float, float, float]:
    """
    Couplings (C, D) of the V2 form equivalent to V1 of `p` under x -> -x.

    V1(x) + eps = V2(-x) holds pointwise, so a V1 level E maps to the V2 level E + eps.

    Returns:
        (C, D, eps)
    """
    eps = -p.A + 0.75
    return -p.A + 1.5, p.B, eps


def eval_source(sp: SourceParams, n: int, r: ArrayLike) -> tuple[ArrayLike, float]:
    """
    Source potential U1 or U2 at radius r and the matching energy parameter kappa^2.

    Returns:
        (U(r), kappa^2) where the level energy is -kappa^2
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError(f"Source potentials are singular at r <= 0, got min r = {r.min()}")
    inv_sinh2 = 1.0 / np.sinh(r) ** 2
    if sp.kind == SourceKind.U1:
        value = -2 * sp.b / np.tanh(r) + sp.a * (sp.a - 1) * inv_sinh2
        c = sp.a + n
        kappa2 = c**2 + sp.b**2 / c**2
    else:
        value = (
            -(2 * sp.a + 1) * sp.b * np.cosh(r) * inv_sinh2
            + (sp.a * (sp.a + 1) + sp.b**2) * inv_sinh2
        )
        kappa2 = (sp.a - n) ** 2
    return _result(value), kappa2


def source_couplings_for_u2(sp: SourceParams, n: int) -> tuple[float, float, float]:
    """
    V2 couplings reached from U2 at level n through x = ln sinh r.

    Returns:
        (C, D, k^2) with the V2 level energy -k^2
    """
    if sp.kind != SourceKind.U2:
        raise ValueError(f"Expected U2 source parameters, got {sp.kind.value}")
    D = (2 * sp.a + 1) * sp.b
    C = (sp.a - n) ** 2 - sp.a * (sp.a + 1) - sp.b**2 + 0.5
    k2 = (sp.a + 0.5) ** 2 + sp.b**2
    return C, D, k2


def liouville_target(sp: SourceParams, n: int) -> tuple[DkvParams, PotentialForm, float]:
    """Target potential and energy -k^2 of the Liouville map of a source level."""
    if sp.kind == SourceKind.U2:
        C, D, k2 = source_couplings_for_u2(sp, n)
        return DkvParams(A=C, B=D), PotentialForm.V2, k2
    c = sp.a + n
    A = c**2 + sp.b**2 / c**2 - sp.a * (sp.a - 1) + 0.5
    return DkvParams(A=A, B=2 * sp.b), PotentialForm.V1, (sp.a - 0.5) ** 2


def source_params_for_level(p: DkvParams, state: "BoundState") -> SourceParams:
    return SourceParams(a=state.a_n, b=p.b, kind=SourceKind.U1)


def _liouville_difference(
    sp: SourceParams,
    n: int,
    target: DkvParams,
    form: PotentialForm,
    k2: float,
    r: np.ndarray,
    shift: float = 0.0,
) -> np.ndarray:
    u, kappa2 = eval_source(sp, n, r)
    coth = 1.0 / np.tanh(r)
    # x = ln sinh r: x' = coth r, x''/x' = (1 - coth^2)/coth, x'''/x' = 2 (coth^2 - 1)
    ratio2 = (1.0 - coth**2) / coth
    ratio3 = 2.0 * (coth**2 - 1.0)
    schwarzian = 0.75 * ratio2**2 - 0.5 * ratio3
    x = np.log(np.sinh(r))
    rhs = coth**2 * (np.asarray(eval_dkv(target, form, x)) + k2) + schwarzian
    return (np.asarray(u) + shift) + (kappa2 - shift) - rhs


def _r_points(grid: Grid, r_cutoff: float) -> np.ndarray:
    r = grid.points
    r = r[r >= r_cutoff]
    if r.size == 0:
        raise ValueError(f"Grid [{grid.x_min}, {grid.x_max}] lies entirely below r = {r_cutoff}")
    return r


def liouville_residual(
    p: DkvParams,
    state: "BoundState",
    grid: Grid,
    r_cutoff: float = R_CUTOFF,
    shift: float = 0.0,
) -> float:
    """
    Max deviation between both sides of the Liouville correspondence U1 <-> V1 for a level.

    The grid is a mesh in r; points below `r_cutoff` are skipped. `shift` is added to the
    source potential and subtracted from kappa^2, which leaves the correspondence intact.
    """
    sp = source_params_for_level(p, state)
    k2 = (state.a_n - 0.5) ** 2
    r = _r_points(grid, r_cutoff)
    residual = _liouville_difference(sp, state.n, p, PotentialForm.V1, k2, r, shift)
    return float(np.max(np.abs(residual)))


@allure.step("Check Liouville map of source potential")
def source_liouville_residual(sp: SourceParams, n: int, grid: Grid, r_cutoff: float = R_CUTOFF):
    target, form, k2 = liouville_target(sp, n)
    logger.info(
        f"{sp.kind.value}(a={sp.a}, b={sp.b}) level {n} maps to {form.value} "
        f"with couplings ({target.A}, {target.B}) and energy {-k2}"
    )
    r = _r_points(grid, r_cutoff)
    return float(np.max(np.abs(_liouville_difference(sp, n, target, form, k2, r))))
