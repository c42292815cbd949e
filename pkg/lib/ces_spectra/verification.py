"""
    Aggregated residual checks behind `ces-spectra verify` and `ces-spectra natanzon`.

    Every check yields a CheckResult; a check whose computation raises is recorded as failed
    with the error message instead of aborting the run.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import allure
import numpy as np

from ces_spectra.common import (
    CLASS_ODE_TOL,
    DECAY_LENGTHS,
    ENERGY_TOL,
    NATANZON_PSI_TOL,
    NATANZON_TOL,
    OVERLAP_TOL,
    R_CUTOFF,
    R_MAX,
    RESIDUAL_TOL,
    SCHRODINGER_TOL,
    STEP,
    SUSY_TOL,
)
from ces_spectra.grid import Grid
from ces_spectra.natanzon import (
    NatanzonMap,
    NatanzonParams,
    TransformClass,
    TransformKind,
    class_ode_residual,
    dkv_map,
    jacobi_master_eval,
    naten_residual,
    natanzon_energies,
    natanzon_ode_residual,
    natanzon_potential,
    natanzon_schrodinger_residual,
    natanzon_thresholds,
)
from ces_spectra.oracle import (
    Scheme,
    SpectrumReport,
    build_hamiltonian,
    count_below,
    lowest_eigenpairs,
    verify_spectrum,
)
from ces_spectra.potential import DkvParams, PotentialForm, eval_dkv, liouville_residual
from ces_spectra.spectrum import BoundState, coupling_from_energy
from ces_spectra.susy import algebraic_residuals, excited_superpotential, susy_residual
from ces_spectra.wavefunction import jacobi_parameters, polynomial_roots, schrodinger_residual

logger = logging.getLogger("CesLogger")

MASTER_X_MIN = -10.0
MASTER_X_MAX = 10.0
MASTER_STEP = 1e-2
NATANZON_MIN_HALF_WIDTH = 20.0
COUPLING_REL_TOL = 1e-10
COUNT_TOL = 0.5


@dataclass(frozen=True)
class Tolerances:
    energy: float = ENERGY_TOL
    overlap: float = OVERLAP_TOL
    residual: float = RESIDUAL_TOL
    schrodinger: float = SCHRODINGER_TOL
    susy: float = SUSY_TOL
    class_ode: float = CLASS_ODE_TOL
    natanzon: float = NATANZON_TOL
    natanzon_psi: float = NATANZON_PSI_TOL

    def with_overrides(self, **overrides: Optional[float]) -> "Tolerances":
        updates = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **updates)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: Optional[float]
    tolerance: float
    level: Optional[int] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.value is not None and self.value < self.tolerance

    def as_dict(self) -> dict:
        value = self.value
        if value is not None and not math.isfinite(value):
            value = None
        return {
            "name": self.name,
            "level": self.level,
            "value": value,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    command: str
    parameters: dict
    checks: list[CheckResult] = field(default_factory=list)
    levels: list[dict] = field(default_factory=list)
    oracle: Optional[SpectrumReport] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> list[str]:
        return [
            check.name if check.level is None else f"{check.name}[n={check.level}]"
            for check in self.checks
            if not check.passed
        ]

    def as_dict(self) -> dict:
        report = {
            "command": self.command,
            "parameters": dict(self.parameters),
            "passed": self.passed,
            "failed_checks": self.failed_checks,
            "checks": [check.as_dict() for check in self.checks],
            "levels": list(self.levels),
        }
        if self.oracle is not None:
            report["oracle"] = self.oracle.as_dict()
        return report


def run_check(
    name: str, compute: Callable[[], float], tolerance: float, level: Optional[int] = None
) -> CheckResult:
    try:
        value = float(compute())
    except (ValueError, RuntimeError, ZeroDivisionError) as exc:
        logger.warning(f"Check {name} (level {level}) could not be computed: {exc}")
        return CheckResult(name, None, tolerance, level, detail=str(exc))
    result = CheckResult(name, value, tolerance, level)
    logger.info(
        f"Check {name} (level {level}): {value:.3e} vs {tolerance:g} -> "
        f"{'passed' if result.passed else 'FAILED'}"
    )
    return result


def _coupling_deviation(p: DkvParams, state: BoundState) -> float:
    return abs(coupling_from_energy(p.B, state.n, state.a_n - 0.5) - p.A) / max(1.0, abs(p.A))


def _susy_checks(p: DkvParams, state: BoundState, grid: Grid, tol: Tolerances) -> list:
    try:
        roots = polynomial_roots(jacobi_parameters(state))
        spec = excited_superpotential(p, state, roots)
    except (ValueError, RuntimeError) as exc:
        return [
            CheckResult("susy", None, tol.susy, state.n, detail=str(exc)),
            CheckResult("susy_algebraic", None, tol.susy, state.n, detail=str(exc)),
        ]
    return [
        run_check("susy", lambda: susy_residual(spec, p, state.E_n, grid), tol.susy, state.n),
        run_check(
            "susy_algebraic",
            lambda: algebraic_residuals(spec, p, state.E_n).largest,
            tol.susy,
            state.n,
        ),
    ]


def _map_grid() -> Grid:
    """Window where z(x) of the DKV map and its derivatives stay finite."""
    return Grid.from_step(MASTER_X_MIN, MASTER_X_MAX, MASTER_STEP)


def _master_deviation(p: DkvParams, state: BoundState) -> float:
    grid = _map_grid()
    x = grid.points
    lhs = jacobi_master_eval(state.alpha_n, state.beta_n, state.n, dkv_map(), x)
    rhs = state.E_n - np.asarray(eval_dkv(p, PotentialForm.V1, x))
    return float(np.max(np.abs(lhs - rhs)))


def level_checks(
    p: DkvParams, state: BoundState, grid: Grid, tol: Tolerances
) -> list[CheckResult]:
    r_grid = Grid.from_step(R_CUTOFF, R_MAX, 1e-2)
    checks = [
        run_check(
            "schrodinger",
            lambda: schrodinger_residual(p, state, grid),
            tol.schrodinger,
            state.n,
        ),
        run_check(
            "liouville", lambda: liouville_residual(p, state, r_grid), tol.residual, state.n
        ),
        run_check(
            "coupling_reproduction",
            lambda: _coupling_deviation(p, state),
            COUPLING_REL_TOL,
            state.n,
        ),
        run_check("master", lambda: _master_deviation(p, state), tol.residual, state.n),
    ]
    return checks + _susy_checks(p, state, grid, tol)


def _level_count_check(
    oracle_count: int, analytic_count: int, n_max: Optional[int], detail: str = ""
) -> CheckResult:
    """Analytic count against the oracle count, capped at n_max + 1 when the scan was cut."""
    expected = oracle_count if n_max is None else min(oracle_count, n_max + 1)
    if expected < oracle_count:
        note = f"truncated at n_max={n_max}, {oracle_count} oracle level(s) below the edge"
        detail = f"{detail}; {note}" if detail else note
    mismatch = float(abs(expected - analytic_count))
    return CheckResult("level_count", mismatch, COUNT_TOL, detail=detail)


def _oracle_checks(report: SpectrumReport, tol: Tolerances) -> list[CheckResult]:
    checks = []
    for level in report.levels:
        detail = "; ".join(level.failures)
        checks.append(CheckResult("oracle_energy", level.delta, tol.energy, level.n, detail))
        misfit = None if level.overlap is None else 1.0 - level.overlap
        checks.append(CheckResult("oracle_overlap", misfit, tol.overlap, level.n, detail))
        if level.nodes is None or level.oracle_nodes is None:
            nodes = None
        else:
            nodes = float(abs(level.nodes - level.n) + abs(level.oracle_nodes - level.n))
        checks.append(CheckResult("oracle_nodes", nodes, COUNT_TOL, level.n, detail))
    checks.append(
        _level_count_check(
            report.oracle_count, report.analytic_count, report.n_max, "; ".join(report.failures)
        )
    )
    return checks


@allure.step("Verify DKV levels")
def verify_dkv(
    p: DkvParams,
    states: Sequence[BoundState],
    grid: Optional[Grid] = None,
    tol: Tolerances = Tolerances(),
    scheme: Scheme = Scheme.NUMEROV,
    workers: Optional[int] = None,
    parameters: Optional[dict] = None,
    n_max: Optional[int] = None,
) -> VerificationReport:
    """Oracle comparison, per-level residuals and the PIV class check of the DKV map."""
    oracle = verify_spectrum(
        p,
        states,
        grid,
        tol=tol.energy,
        scheme=scheme,
        overlap_tol=tol.overlap,
        workers=workers,
        n_max=n_max,
    )
    report = VerificationReport(
        command="verify",
        parameters=parameters or {"A": p.A, "B": p.B},
        oracle=oracle,
    )
    report.checks.extend(_oracle_checks(oracle, tol))
    for state in states:
        report.checks.extend(level_checks(p, state, oracle.grid, tol))
        report.levels.append(
            {
                "n": state.n,
                "a_n": state.a_n,
                "E_n": state.E_n,
                "alpha_n": state.alpha_n,
                "beta_n": state.beta_n,
            }
        )
    report.checks.append(
        run_check(
            "class_ode",
            lambda: class_ode_residual(
                TransformClass(TransformKind.PIV, C=1.0), dkv_map(), _map_grid()
            ),
            tol.class_ode,
        )
    )
    logger.info(f"Verification of A={p.A}, B={p.B}: passed={report.passed}")
    return report


def natanzon_grid(params: NatanzonParams, energies: Sequence[float], h: float = STEP) -> Grid:
    """Symmetric box holding DECAY_LENGTHS decay lengths of the slowest level on each side."""
    half_width = NATANZON_MIN_HALF_WIDTH
    for energy in energies:
        exponents = params.exponents(energy)
        if exponents is None:
            continue
        _, beta, delta = exponents
        rates = [beta / math.sqrt(params.c0), delta / math.sqrt(params.c1)]
        if min(rates) > 0:
            half_width = max(half_width, DECAY_LENGTHS / min(rates))
    return Grid.from_step(-half_width, half_width, h)


@allure.step("Verify Natanzon levels")
def verify_natanzon(
    params: NatanzonParams,
    n_max: int,
    tol: Tolerances = Tolerances(),
    h: float = STEP,
    scheme: Scheme = Scheme.NUMEROV,
    grid: Optional[Grid] = None,
) -> VerificationReport:
    """Energy condition residuals, z-map residual, wavefunction residuals and oracle deltas."""
    energies = natanzon_energies(params, n_max)
    grid = grid or natanzon_grid(params, energies, h)
    nmap = NatanzonMap(params, grid.x_min, grid.x_max)
    report = VerificationReport(
        command="natanzon",
        parameters={
            "f": params.f,
            "h0": params.h0,
            "h1": params.h1,
            "a": params.a,
            "c0": params.c0,
            "c1": params.c1,
            "n_max": n_max,
        },
    )
    report.checks.append(run_check("z_ode", lambda: natanzon_ode_residual(nmap), tol.natanzon))

    H = build_hamiltonian(lambda x: natanzon_potential(params, x, nmap), grid, scheme)
    edge = min(natanzon_thresholds(params))
    oracle_count = count_below(H, edge)
    k = min(oracle_count, 10)
    oracle_energies = [pair.energy for pair in lowest_eigenpairs(H, k)] if k else []
    report.checks.append(_level_count_check(oracle_count, len(energies), n_max))

    for n, energy in enumerate(energies):
        residual = naten_residual(params, n, energy)
        report.checks.append(
            CheckResult("naten", None if residual is None else abs(residual), tol.natanzon, n)
        )
        report.checks.append(
            run_check(
                "schrodinger",
                lambda: natanzon_schrodinger_residual(params, n, energy, grid.points, nmap),
                tol.natanzon_psi,
                n,
            )
        )
        oracle_energy = oracle_energies[n] if n < len(oracle_energies) else None
        delta = None if oracle_energy is None else abs(energy - oracle_energy)
        report.checks.append(CheckResult("oracle_energy", delta, tol.energy, n))
        report.levels.append(
            {
                "n": n,
                "E_n": energy,
                "naten_residual": residual,
                "oracle_energy": oracle_energy,
                "delta": delta,
            }
        )
    logger.info(f"Natanzon verification {params}: passed={report.passed}")
    return report
