"""
    Finite-difference Schroedinger eigensolver used as ground truth for the analytic levels.

    -psi'' + V psi = E psi on a uniform grid with Dirichlet walls. The 3-point scheme gives a
    symmetric tridiagonal matrix T and the eigenvalues below E are counted from the negative
    pivots of T - E. For the Numerov scheme the substitution phi = u psi, u = 1 + h^2 (E - V)/12,
    yields a symmetric tridiagonal S(E) with the same off-diagonal and a diagonal decreasing in
    E, so its negative inertia counts the Numerov eigenvalues below E in the same way.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import allure
import numpy as np
from scipy.integrate import simpson

from ces_spectra.common import (
    DECAY_LENGTHS,
    ENERGY_TOL,
    INVERSE_ITERATIONS,
    MAX_BISECTION_STEPS,
    MAX_EIGENPAIRS,
    OVERLAP_TOL,
    SCHEME,
    STEP,
    X_MAX,
    X_MIN,
)
from ces_spectra.grid import Grid
from ces_spectra.potential import DkvParams, PotentialForm, eval_dkv
from ces_spectra.spectrum import BoundState
from ces_spectra.wavefunction import node_count, psi_eval

logger = logging.getLogger("CesLogger")

MAX_POTENTIAL = 1e12
SIGNIFICANT_COMPONENT = 1e-3
NODE_FLOOR = 1e-10
ABS_ENERGY_TOL = 1e-14
START_SEED = 20240517

PotentialFunction = Callable[[np.ndarray], np.ndarray]


class Scheme(Enum):
    CENTRAL = "central-3pt"
    NUMEROV = "numerov"


@dataclass(frozen=True)
class DiscreteHamiltonian:
    """
    Tridiagonal discretization on the interior points of `grid`.

    `diagonal` and `off_diagonal` are the 3-point matrix; the Numerov scheme builds its
    energy-dependent diagonal from `potential` on demand.
    """

    grid: Grid
    potential: np.ndarray
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    scheme: Scheme

    @property
    def size(self) -> int:
        return self.diagonal.size

    @property
    def coupling(self) -> float:
        return -1.0 / self.grid.h**2

    def shifted_diagonal(self, E: float) -> np.ndarray:
        """Diagonal of the matrix whose negative inertia counts the eigenvalues below E."""
        if self.scheme == Scheme.CENTRAL:
            return self.diagonal - E
        h2 = self.grid.h**2
        f = E - self.potential
        return (2.0 / h2) * (1.0 - 5.0 * h2 * f / 12.0) / self.weights(E)

    def weights(self, E: float) -> np.ndarray:
        """u with psi = phi/u; identically 1 for the 3-point scheme."""
        if self.scheme == Scheme.CENTRAL:
            return np.ones_like(self.potential)
        return 1.0 + self.grid.h**2 * (E - self.potential) / 12.0

    def spectral_bounds(self) -> tuple[float, float]:
        """Interval containing the low spectrum; the upper end covers the 3-point band edge."""
        lo = float(self.potential.min()) - 1.0
        return lo, float(self.potential.max()) + 6.0 / self.grid.h**2 + 1.0


@dataclass(frozen=True)
class Eigenpair:
    energy: float
    vector: np.ndarray


@dataclass
class LevelCheck:
    n: int
    energy: float
    oracle_energy: Optional[float] = None
    delta: Optional[float] = None
    overlap: Optional[float] = None
    nodes: Optional[int] = None
    oracle_nodes: Optional[int] = None
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "energy": self.energy,
            "oracle_energy": self.oracle_energy,
            "delta": self.delta,
            "overlap": self.overlap,
            "nodes": self.nodes,
            "oracle_nodes": self.oracle_nodes,
            "passed": self.passed,
            "failures": list(self.failures),
        }


@dataclass
class SpectrumReport:
    A: float
    B: float
    scheme: Scheme
    grid: Grid
    edge: float
    analytic_count: int
    oracle_count: int
    n_max: Optional[int] = None
    levels: list[LevelCheck] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures and all(level.passed for level in self.levels)

    @property
    def expected_count(self) -> int:
        """Oracle levels the analytic list should hold, at most n_max + 1."""
        if self.n_max is None:
            return self.oracle_count
        return min(self.oracle_count, self.n_max + 1)

    @property
    def truncated(self) -> bool:
        return self.expected_count < self.oracle_count

    def as_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "scheme": self.scheme.value,
            "grid": {
                "x_min": self.grid.x_min,
                "x_max": self.grid.x_max,
                "h": self.grid.h,
                "n_points": self.grid.n_points,
            },
            "continuum_edge": self.edge,
            "analytic_count": self.analytic_count,
            "oracle_count": self.oracle_count,
            "n_max": self.n_max,
            "truncated": self.truncated,
            "levels": [level.as_dict() for level in self.levels],
            "passed": self.passed,
            "failures": list(self.failures),
        }


def sample_potential(V: PotentialFunction, grid: Grid) -> np.ndarray:
    values = np.asarray(V(grid.points), dtype=float)
    if values.shape != (grid.n_points,):
        values = np.broadcast_to(values, (grid.n_points,)).copy()
    bad = ~np.isfinite(values) | (np.abs(values) > MAX_POTENTIAL)
    if np.any(bad):
        x_bad = grid.points[np.argmax(bad)]
        raise ValueError(
            f"Potential is singular on the grid: |V| > {MAX_POTENTIAL:g} or non-finite at x={x_bad}"
        )
    return values


def build_hamiltonian(
    V: PotentialFunction, grid: Grid, scheme: Scheme = Scheme(SCHEME)
) -> DiscreteHamiltonian:
    potential = sample_potential(V, grid)[1:-1]
    h2 = grid.h**2
    diagonal = 2.0 / h2 + potential
    off_diagonal = np.full(potential.size - 1, -1.0 / h2)
    logger.debug(
        f"Hamiltonian ({scheme.value}) on [{grid.x_min}, {grid.x_max}], h={grid.h}, "
        f"{potential.size} unknowns"
    )
    return DiscreteHamiltonian(
        grid=grid,
        potential=potential,
        diagonal=diagonal,
        off_diagonal=off_diagonal,
        scheme=scheme,
    )


def dkv_hamiltonian(
    p: DkvParams, grid: Grid, scheme: Scheme = Scheme(SCHEME)
) -> DiscreteHamiltonian:
    return build_hamiltonian(lambda x: eval_dkv(p, PotentialForm.V1, x), grid, scheme)


def _pivot_floor(H: DiscreteHamiltonian) -> float:
    return np.finfo(float).tiny * max(1.0, H.coupling**2)


def count_below(H: DiscreteHamiltonian, E: float) -> int:
    """Number of eigenvalues strictly below E, from the Sturm sequence of pivots."""
    off2 = H.coupling**2
    pivmin = _pivot_floor(H)
    count = 0
    # zero off-diagonal coupling for the first pivot
    q = math.inf
    for d in H.shifted_diagonal(E).tolist():
        q = d - off2 / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0:
            count += 1
    return count


def _bracket(H: DiscreteHamiltonian, k: int) -> tuple[float, float]:
    lo, hi = H.spectral_bounds()
    while count_below(H, lo) > 0:
        lo -= hi - lo
    while count_below(H, hi) < k:
        hi += hi - lo
    return lo, hi


def _bisect(H: DiscreteHamiltonian, index: int, lo: float, hi: float) -> float:
    """Eigenvalue number `index` (0-based) inside [lo, hi]."""
    for _ in range(MAX_BISECTION_STEPS):
        if hi - lo <= max(ABS_ENERGY_TOL, 4 * np.finfo(float).eps * max(abs(lo), abs(hi))):
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if count_below(H, mid) > index:
            hi = mid
        else:
            lo = mid
    raise RuntimeError(
        f"Bisection for eigenvalue {index} did not converge in {MAX_BISECTION_STEPS} steps, "
        f"last bracket [{lo}, {hi}]"
    )


def solve_tridiagonal(
    lower: Sequence[float], diag: Sequence[float], upper: Sequence[float], rhs: Sequence[float]
) -> list[float]:
    """
    Gaussian elimination with partial pivoting for a tridiagonal system.

    Row interchanges create a second superdiagonal, stored in place of `lower`. Zero pivots
    are replaced by the smallest normal number, so nearly singular shifts used by inverse
    iteration still give a usable direction.

    Args:
        lower: sub-diagonal, n - 1 entries
        diag: main diagonal, n entries
        upper: super-diagonal, n - 1 entries
        rhs: right-hand side, n entries
    Returns:
        solution as a list
    """
    n = len(diag)
    dl, d, du, b = list(lower), list(diag), list(upper), list(rhs)
    tiny = np.finfo(float).tiny
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] == 0:
                d[i] = tiny
            fact = dl[i] / d[i]
            d[i + 1] -= fact * du[i]
            b[i + 1] -= fact * b[i]
            dl[i] = 0.0
        else:
            fact = d[i] / dl[i]
            d[i] = dl[i]
            temp = d[i + 1]
            d[i + 1] = du[i] - fact * temp
            if i < n - 2:
                dl[i] = du[i + 1]
                du[i + 1] = -fact * dl[i]
            du[i] = temp
            b[i], b[i + 1] = b[i + 1], b[i] - fact * b[i + 1]
    if d[n - 1] == 0:
        d[n - 1] = tiny
    x = [0.0] * n
    x[n - 1] = b[n - 1] / d[n - 1]
    if n > 1:
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (b[i] - du[i] * x[i + 1] - dl[i] * x[i + 2]) / d[i]
    return x


def _fix_sign(vector: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(vector))
    first = np.argmax(np.abs(vector) > SIGNIFICANT_COMPONENT * scale)
    return -vector if vector[first] < 0 else vector


def _inverse_iteration(H: DiscreteHamiltonian, E: float, index: int) -> np.ndarray:
    m = H.size
    off = [H.coupling] * (m - 1)
    diag = H.shifted_diagonal(E).tolist()
    rng = np.random.default_rng(START_SEED + index)
    phi = rng.standard_normal(m)
    for _ in range(INVERSE_ITERATIONS):
        phi = np.asarray(solve_tridiagonal(off, diag, off, phi.tolist()))
        phi = phi / np.linalg.norm(phi)
    psi = phi / H.weights(E)
    vector = np.concatenate(([0.0], psi, [0.0]))
    vector = vector / math.sqrt(H.grid.h * float(np.dot(vector, vector)))
    return _fix_sign(vector)


@allure.step("Diagonalize discrete Hamiltonian")
def lowest_eigenpairs(
    H: DiscreteHamiltonian, k: int, workers: Optional[int] = None
) -> list[Eigenpair]:
    """
    The k lowest eigenvalues by Sturm bisection, with inverse-iteration eigenvectors.

    Vectors cover the whole grid (zero at the walls), satisfy h * sum(psi^2) = 1 and have
    their first significant component positive.

    Args:
        H: discrete Hamiltonian
        k: number of pairs, 1..10
        workers: threads used for the independent bisections; None runs them serially
    """
    if not 1 <= k <= MAX_EIGENPAIRS:
        raise ValueError(f"Number of eigenpairs must be in [1, {MAX_EIGENPAIRS}], got {k}")
    if k > H.size:
        raise ValueError(f"Requested {k} eigenpairs from a {H.size}x{H.size} matrix")
    lo, hi = _bracket(H, k)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            energies = list(executor.map(lambda j: _bisect(H, j, lo, hi), range(k)))
    else:
        energies = [_bisect(H, j, lo, hi) for j in range(k)]
    pairs = [
        Eigenpair(energy=energy, vector=_inverse_iteration(H, energy, j))
        for j, energy in enumerate(energies)
    ]
    logger.info(f"Lowest {k} eigenvalue(s) ({H.scheme.value}, h={H.grid.h}): {energies}")
    return pairs


def suggest_grid(p: DkvParams, states: Sequence[BoundState], h: float = STEP) -> Grid:
    """Box holding DECAY_LENGTHS decay lengths of the slowest tail on each side."""
    x_min, x_max = X_MIN, X_MAX
    normalizable = [state for state in states if state.is_normalizable]
    if normalizable:
        left = min(state.left_rate for state in normalizable)
        right = min(state.right_rate for state in normalizable)
        x_min = min(x_min, -DECAY_LENGTHS / left)
        x_max = max(x_max, DECAY_LENGTHS / right)
    logger.debug(f"Grid for A={p.A}, B={p.B}: [{x_min}, {x_max}] with step {h}")
    return Grid.from_step(x_min, x_max, h)


def overlap(psi_a: np.ndarray, psi_b: np.ndarray, grid: Grid) -> float:
    """|<a|b>| / (|a| |b|) with Simpson quadrature."""
    norm = simpson(psi_a**2, dx=grid.h) * simpson(psi_b**2, dx=grid.h)
    return float(abs(simpson(psi_a * psi_b, dx=grid.h)) / math.sqrt(norm))


def sign_changes(vector: np.ndarray) -> int:
    """Sign changes of a grid vector, ignoring components below NODE_FLOOR of its maximum."""
    significant = vector[np.abs(vector) > NODE_FLOOR * np.max(np.abs(vector))]
    return int(np.count_nonzero(np.sign(significant[1:]) != np.sign(significant[:-1])))


def _check_level(
    state: BoundState,
    pairs: Sequence[Eigenpair],
    grid: Grid,
    tol: float,
    overlap_tol: float,
) -> LevelCheck:
    check = LevelCheck(n=state.n, energy=state.E_n)
    if state.n >= len(pairs):
        check.failures.append(
            f"no oracle eigenvalue below the continuum edge for level n={state.n}"
        )
        return check
    pair = pairs[state.n]
    check.oracle_energy = pair.energy
    check.delta = abs(state.E_n - pair.energy)
    check.oracle_nodes = sign_changes(pair.vector)
    if not check.delta < tol:
        check.failures.append(f"energy mismatch |dE|={check.delta:.3e} >= {tol:g}")
    if not state.is_normalizable:
        check.failures.append(
            f"non-normalizable asymptotics: left rate {state.left_rate:.6g}, "
            f"right rate {state.right_rate:.6g}"
        )
        return check
    analytic = np.asarray(psi_eval(state, grid.points))
    if not np.all(np.isfinite(analytic)):
        check.failures.append("analytic wavefunction overflows on the grid")
        return check
    check.overlap = overlap(analytic, pair.vector, grid)
    check.nodes = node_count(state, grid)
    if not check.overlap > 1.0 - overlap_tol:
        check.failures.append(f"overlap {check.overlap:.12f} <= 1 - {overlap_tol:g}")
    if not check.nodes == check.oracle_nodes == state.n:
        check.failures.append(
            f"node count mismatch: analytic {check.nodes}, oracle {check.oracle_nodes}, "
            f"expected {state.n}"
        )
    return check


@allure.step("Verify analytic spectrum against the oracle")
def verify_spectrum(
    p: DkvParams,
    analytic: Sequence[BoundState],
    grid: Optional[Grid] = None,
    tol: float = ENERGY_TOL,
    scheme: Scheme = Scheme(SCHEME),
    overlap_tol: float = OVERLAP_TOL,
    workers: Optional[int] = None,
    n_max: Optional[int] = None,
) -> SpectrumReport:
    """
    Compare analytic levels with the oracle diagonalization of V1.

    Level n is matched with the n-th oracle eigenvalue; only eigenvalues below the continuum
    edge count as oracle levels. When the analytic list was cut at `n_max`, the oracle levels
    above it are reported as truncated, not as missing.
    """
    grid = grid or suggest_grid(p, analytic)
    H = dkv_hamiltonian(p, grid, scheme)
    edge = p.continuum_edge
    oracle_count = count_below(H, edge)
    report = SpectrumReport(
        A=p.A,
        B=p.B,
        scheme=scheme,
        grid=grid,
        edge=edge,
        analytic_count=len(analytic),
        oracle_count=oracle_count,
        n_max=n_max,
    )
    k = min(MAX_EIGENPAIRS, oracle_count)
    pairs = lowest_eigenpairs(H, k, workers) if k and analytic else []
    for state in analytic:
        report.levels.append(_check_level(state, pairs, grid, tol, overlap_tol))
    if report.truncated:
        logger.info(
            f"{oracle_count} oracle level(s) below {edge}, analytic list cut at n_max={n_max}"
        )
    if report.expected_count != len(analytic):
        report.failures.append(
            f"level count mismatch: {len(analytic)} analytic, {report.expected_count} oracle "
            f"below {edge}"
        )
    logger.info(
        f"Oracle verification A={p.A}, B={p.B}: {oracle_count} oracle level(s), "
        f"{len(analytic)} analytic, passed={report.passed}"
    )
    return report
