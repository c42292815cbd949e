"""
    Superpotentials of the DKV potential V1 and their partner potentials.

    In the variable z(x) every superpotential has the form

        W(z) = C0' + w1/z - 1/(2 z^2) + sum_i (g_i^2 - 1)/(1 + g_i z)

    with one pole factor per node c_i of psi_n (g_i = -1/c_i). V- = W^2 - W' reproduces
    V1 - E_n; V+ = W^2 + W' is the partner.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import allure
import numpy as np
from scipy.special import expit

from ces_spectra.common import NODE_MASK
from ces_spectra.grid import Grid
from ces_spectra.potential import DkvParams, PotentialForm, eval_dkv, inv_z
from ces_spectra.spectrum import BoundState

logger = logging.getLogger("CesLogger")

SINGULAR_RADIUS = 1e-6


@dataclass(frozen=True)
class SuperpotentialSpec:
    n: int
    B1: float
    C0: float
    C0_prime: float
    g_list: tuple[float, ...]
    constant_term: float
    inv_z_coeff: float
    inv_z2_coeff: float = -0.5

    @property
    def nodes(self) -> list[float]:
        """x-positions of the poles 1 + g_i z = 0."""
        return [-0.5 * np.log(1.0 / g**2 - 1.0) for g in self.g_list]


@dataclass(frozen=True)
class AlgebraicResiduals:
    node: tuple[float, ...]
    inv_z: float
    inv_z2: float
    constant: float

    @property
    def largest(self) -> float:
        terms = [self.inv_z, self.inv_z2, self.constant, *self.node]
        return max(abs(term) for term in terms)


@dataclass(frozen=True)
class SampledPotential:
    x: np.ndarray
    values: np.ndarray
    singular: np.ndarray


def ground_superpotential(p: DkvParams, state0: BoundState) -> SuperpotentialSpec:
    if state0.n != 0:
        raise ValueError(f"Ground superpotential needs the n=0 level, got n={state0.n}")
    return excited_superpotential(p, state0, [])


def excited_superpotential(
    p: DkvParams, state: BoundState, roots: Sequence[float]
) -> SuperpotentialSpec:
    """
    Singular superpotential -psi_n'/psi_n written through the node roots c_i of P_n.

    Args:
        p: couplings of V1
        state: level n
        roots: the n roots of P_n^(alpha_n, beta_n) in z
    """
    if len(roots) != state.n:
        raise ValueError(f"Level n={state.n} needs {state.n} node roots, got {len(roots)}")
    C0 = state.n + state.a_n - 0.5
    B1 = p.B / (1 + 2 * C0)
    g_list = tuple(-1.0 / c for c in roots)
    C0_prime = state.n - C0
    return SuperpotentialSpec(
        n=state.n,
        B1=B1,
        C0=C0,
        C0_prime=C0_prime,
        g_list=g_list,
        constant_term=C0_prime,
        inv_z_coeff=B1 - sum(g_list),
    )


def truncated_superpotential(spec: SuperpotentialSpec) -> SuperpotentialSpec:
    """B1/z - 1/(2z^2) - C0 without the node factors; it only carries the ground level."""
    return SuperpotentialSpec(
        n=spec.n,
        B1=spec.B1,
        C0=spec.C0,
        C0_prime=spec.C0_prime,
        g_list=(),
        constant_term=-spec.C0,
        inv_z_coeff=spec.B1,
    )


def evaluate(spec: SuperpotentialSpec, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    W(x) and W'(x), both written in u = 1/z with u' = u (1 - u^2); a node factor
    (g^2 - 1)/(1 + g z) becomes (g^2 - 1) u/(u + g).

    Returns:
        (W, W', singular) where singular marks points within 1e-6 of a pole; W and W'
        are NaN there
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.asarray(inv_z(x))
    # 1 - u^2 = 1/(1 + exp(2x))
    du_dx = u * expit(-2.0 * x)
    w = spec.constant_term + spec.inv_z_coeff * u + spec.inv_z2_coeff * u**2
    dw_du = spec.inv_z_coeff + 2 * spec.inv_z2_coeff * u
    singular = np.zeros(x.shape, dtype=bool)
    for g, node in zip(spec.g_list, spec.nodes):
        singular |= np.abs(x - node) < SINGULAR_RADIUS
        pole = u + g
        with np.errstate(divide="ignore", invalid="ignore"):
            w = w + (g * g - 1) * u / pole
            dw_du = dw_du + g * (g * g - 1) / pole**2
    dw = du_dx * dw_du
    w = np.where(singular, np.nan, w)
    dw = np.where(singular, np.nan, dw)
    return w, dw, singular


def _node_mask(spec: SuperpotentialSpec, x: np.ndarray, radius: float) -> np.ndarray:
    mask = np.ones(x.shape, dtype=bool)
    for node in spec.nodes:
        mask &= np.abs(x - node) >= radius
    return mask


def minus_potential(spec: SuperpotentialSpec, grid: Grid) -> SampledPotential:
    x = grid.points
    w, dw, singular = evaluate(spec, x)
    return SampledPotential(x=x, values=w**2 - dw, singular=singular)


def partner_potential(
    spec: SuperpotentialSpec, grid: Grid, node_mask: float = NODE_MASK
) -> SampledPotential:
    """V+ = W^2 + W'; points within `node_mask` of a pole of W are flagged singular."""
    x = grid.points
    w, dw, _ = evaluate(spec, x)
    return SampledPotential(x=x, values=w**2 + dw, singular=~_node_mask(spec, x, node_mask))


def susy_residual(
    spec: SuperpotentialSpec,
    p: DkvParams,
    E: float,
    grid: Grid,
    node_mask: float = NODE_MASK,
    x: Optional[np.ndarray] = None,
) -> float:
    """max |W^2 - W' - V1 + E| over the grid, skipping points within `node_mask` of a node."""
    x = grid.points if x is None else np.asarray(x, dtype=float)
    x = x[_node_mask(spec, x, node_mask)]
    w, dw, _ = evaluate(spec, x)
    residual = w**2 - dw - np.asarray(eval_dkv(p, PotentialForm.V1, x)) + E
    return float(np.max(np.abs(residual)))


def algebraic_residuals(spec: SuperpotentialSpec, p: DkvParams, E: float) -> AlgebraicResiduals:
    """
    Residuals of the coefficient conditions behind W^2 - W' = V1 - E.

    node[i]: cancellation of the simple pole at z = -1/g_i;
    inv_z, inv_z2, constant: matching of the 1/z, 1/z^2 and z^0 terms against -B, A and -E.
    """
    K = spec.C0_prime
    w1 = spec.inv_z_coeff
    g = np.asarray(spec.g_list, dtype=float)
    G = g**2 - 1
    node = []
    for i, gi in enumerate(g):
        others = sum(G[j] / (gi - g[j]) for j in range(len(g)) if j != i)
        node.append(float(-2 * w1 * gi - gi**2 + 2 * K - (gi**2 + 1) + 2 * gi * others))
    inv_z_residual = 2 * K * w1 - w1 + float(np.sum(G * (2 * g + 2 * w1))) + p.B
    inv_z2_residual = w1**2 - K - float(np.sum(G)) + 1 - p.A
    constant_residual = K**2 + E
    return AlgebraicResiduals(
        node=tuple(node),
        inv_z=float(inv_z_residual),
        inv_z2=float(inv_z2_residual),
        constant=float(constant_residual),
    )


@allure.step("Check superpotential of level")
def check_superpotential(
    p: DkvParams, state: BoundState, roots: Sequence[float], grid: Grid
) -> dict:
    spec = excited_superpotential(p, state, roots)
    algebraic = algebraic_residuals(spec, p, state.E_n)
    report = {
        "n": state.n,
        "B1": spec.B1,
        "C0": spec.C0,
        "C0_prime": spec.C0_prime,
        "g": list(spec.g_list),
        "residual": susy_residual(spec, p, state.E_n, grid),
        "algebraic_residual": algebraic.largest,
        "b1_relation": abs(spec.B1 * (1 + 2 * spec.C0) - p.B),
    }
    logger.info(f"Superpotential of level {state.n}: {report}")
    return report
