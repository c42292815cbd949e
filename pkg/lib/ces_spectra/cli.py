"""
    Command line of ces-spectra.

    Exit codes: 0 all checks passed, 1 a verification check failed, 2 invalid parameters,
    3 requested level does not exist.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml
from scipy.integrate import simpson

from ces_spectra.common import N_MAX, OUTPUT_DIR, SCHEME, STEP, SUSY_TOL, X_MAX, X_MIN
from ces_spectra.grid import Grid
from ces_spectra.natanzon import NatanzonMap, NatanzonParams, natanzon_potential, natanzon_psi
from ces_spectra.oracle import Scheme, suggest_grid
from ces_spectra.potential import DkvParams, PotentialForm, eval_dkv
from ces_spectra.report_formatters import OutputFormat, attach_output, to_csv, to_json, to_table
from ces_spectra.spectrum import (
    BoundState,
    LevelNotFoundError,
    RootRule,
    enumerate_levels,
    get_level,
    scan_levels,
)
from ces_spectra.susy import (
    algebraic_residuals,
    evaluate as evaluate_superpotential,
    excited_superpotential,
    minus_potential,
    partner_potential,
    susy_residual,
)
from ces_spectra.verification import (
    Tolerances,
    VerificationReport,
    natanzon_grid,
    verify_dkv,
    verify_natanzon,
)
from ces_spectra.wavefunction import (
    jacobi_parameters,
    node_positions,
    polynomial_roots,
    sample,
)

logger = logging.getLogger("CesLogger")

LOG_FORMAT = "%(asctime)s [%(levelname)4s] %(message)s"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_NO_LEVEL = 3

COMMANDS = ("spectrum", "wavefunction", "verify", "susy", "natanzon")
CHECK_HEADER = ["check", "n", "value", "tolerance", "passed"]


@dataclass(frozen=True)
class RunConfig:
    command: str
    A: float = 10.25
    B: float = 12.5
    n: int = 0
    n_max: int = N_MAX
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    h: float = STEP
    scheme: str = SCHEME
    output: str = OutputFormat.TABLE.value
    select: str = RootRule.MIDDLE.value
    tol: Optional[float] = None
    overlap_tol: Optional[float] = None
    residual_tol: Optional[float] = None
    workers: Optional[int] = None
    samples: bool = False
    stamp: bool = False
    file: Optional[str] = None
    verbose: bool = False
    config: Optional[str] = None
    f: float = 40.0
    h0: float = 0.0
    h1: float = 0.0
    a: float = 0.0
    c0: float = 1.0
    c1: float = 1.0

    @classmethod
    def from_namespace(cls, args: argparse.Namespace) -> "RunConfig":
        names = {item.name for item in fields(cls)}
        return cls(**{key: value for key, value in vars(args).items() if key in names})

    @property
    def output_format(self) -> OutputFormat:
        return OutputFormat(self.output)

    @property
    def rule(self) -> RootRule:
        return RootRule(self.select)

    @property
    def scheme_kind(self) -> Scheme:
        return Scheme(self.scheme)

    @property
    def tolerances(self) -> Tolerances:
        return Tolerances().with_overrides(
            energy=self.tol, overlap=self.overlap_tol, residual=self.residual_tol
        )

    def dkv_params(self) -> DkvParams:
        return DkvParams(A=self.A, B=self.B)

    def natanzon_params(self) -> NatanzonParams:
        return NatanzonParams(f=self.f, h0=self.h0, h1=self.h1, a=self.a, c0=self.c0, c1=self.c1)

    def dkv_grid(self, p: DkvParams, states: Sequence[BoundState]) -> Grid:
        if self.x_min is None and self.x_max is None:
            return suggest_grid(p, states, self.h)
        x_min = X_MIN if self.x_min is None else self.x_min
        x_max = X_MAX if self.x_max is None else self.x_max
        return Grid.from_step(x_min, x_max, self.h)

    def parameters(self) -> dict:
        if self.command == "natanzon":
            keys = ("f", "h0", "h1", "a", "c0", "c1", "n_max", "h", "scheme")
        else:
            keys = ("A", "B", "n", "n_max", "x_min", "x_max", "h", "scheme", "select")
        return {key: getattr(self, key) for key in keys}


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML file with flag defaults (keys as flag names)")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument(
        "--output",
        choices=[item.value for item in OutputFormat],
        default=OutputFormat.TABLE.value,
        help="output format",
    )
    parser.add_argument("--file", help=f"write output to this file, relative to {OUTPUT_DIR}")
    parser.add_argument("--stamp", action="store_true", help="add a UTC timestamp to JSON")
    parser.add_argument("--n-max", type=int, default=N_MAX, help="highest level index scanned")
    parser.add_argument("--h", type=float, default=STEP, help="grid step")
    parser.add_argument(
        "--scheme",
        choices=[item.value for item in Scheme],
        default=SCHEME,
        help="oracle discretization",
    )


def _add_dkv_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--A", type=float, default=10.25, help="coupling A")
    parser.add_argument("--B", type=float, default=12.5, help="coupling B, must exceed 1/2")
    parser.add_argument(
        "--x-min", type=float, default=None, help=f"left grid end (derived, at most {X_MIN})"
    )
    parser.add_argument(
        "--x-max", type=float, default=None, help=f"right grid end (derived, at least {X_MAX})"
    )
    parser.add_argument(
        "--select",
        choices=[item.value for item in RootRule],
        default=RootRule.MIDDLE.value,
        help="cubic root rule; leftmost and rightmost are negative controls",
    )


def _add_tolerance_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, default=None, help="energy tolerance override")
    parser.add_argument("--overlap-tol", type=float, default=None, help="1 - overlap tolerance")
    parser.add_argument("--residual-tol", type=float, default=None, help="residual tolerance")
    parser.add_argument("--workers", type=int, default=None, help="threads for bisection")


def build_parser(config_defaults: Optional[dict] = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ces-spectra",
        description="Spectra of conditionally exactly solvable potentials and their checks",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "levels from the cubic energy condition",
        "wavefunction": "normalized wavefunction samples of one level as CSV",
        "verify": "oracle comparison and residual checks of all levels",
        "susy": "superpotential of one level and its residuals",
        "natanzon": "energies and checks of a Natanzon potential",
    }
    for command in COMMANDS:
        sub = subparsers.add_parser(
            command, help=helps[command], formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        _add_common_arguments(sub)
        if command == "natanzon":
            for name, default in (("f", 40.0), ("h0", 0.0), ("h1", 0.0), ("a", 0.0)):
                sub.add_argument(f"--{name}", type=float, default=default)
            sub.add_argument("--c0", type=float, default=1.0, help="R(0), positive")
            sub.add_argument("--c1", type=float, default=1.0, help="R(1), positive")
            sub.add_argument("--samples", action="store_true", help="CSV of V and psi_n")
            _add_tolerance_arguments(sub)
        else:
            _add_dkv_arguments(sub)
        if command in ("wavefunction", "susy"):
            sub.add_argument("--n", type=int, default=0, help="level index")
        if command == "susy":
            sub.add_argument("--samples", action="store_true", help="CSV of W, V- and V+")
        if command == "verify":
            _add_tolerance_arguments(sub)
        if config_defaults:
            sub.set_defaults(**config_defaults)
    return parser


def load_config(path: str) -> dict:
    """Flag defaults from YAML; keys use flag names with '-' or '_'."""
    with open(path, "r") as file:
        content = yaml.safe_load(file) or {}
    if not isinstance(content, dict):
        raise ValueError(f"Config {path} must be a mapping, got {type(content).__name__}")
    return {str(key).replace("-", "_"): value for key, value in content.items()}


def _emit(cfg: RunConfig, text: str, name: str) -> None:
    attach_output(name, text, cfg.output_format)
    if cfg.file:
        path = Path(cfg.file)
        if not path.is_absolute():
            path = Path(OUTPUT_DIR) / path
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as file:
            file.write(text)
        logger.info(f"{name} written to {path}")
        return
    sys.stdout.write(text)


def _json(cfg: RunConfig, payload: dict) -> str:
    if cfg.stamp:
        payload = dict(payload, stamp=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))
    return to_json(payload)


def cmd_spectrum(cfg: RunConfig) -> int:
    p = cfg.dkv_params()
    header = [
        "n", "t1", "t2", "t3", "a_n", "a_low", "a_high", "E_n", "alpha_n", "beta_n", "A_bound_ok"
    ]
    rows = []
    levels = []
    preconditions = []
    for scan in scan_levels(p, cfg.n_max, cfg.rule):
        state = scan.state
        preconditions.append(
            {"n": scan.n, "coupling_bound_ok": scan.coupling_bound_ok, "found": state is not None}
        )
        if state is None:
            continue
        roots = [root.real for root in scan.triple.roots]
        lo, hi = scan.triple.window
        window = (lo - scan.n, hi - scan.n)
        rows.append(
            [
                state.n,
                *roots,
                state.a_n,
                *window,
                state.E_n,
                state.alpha_n,
                state.beta_n,
                scan.coupling_bound_ok,
            ]
        )
        levels.append(
            {
                "n": state.n,
                "roots": roots,
                "a_n": state.a_n,
                "window": list(window),
                "E_n": state.E_n,
                "alpha_n": state.alpha_n,
                "beta_n": state.beta_n,
                "coupling_bound_ok": scan.coupling_bound_ok,
            }
        )
    if cfg.output_format == OutputFormat.JSON:
        payload = {
            "command": "spectrum",
            "parameters": cfg.parameters(),
            "levels": levels,
            "preconditions": preconditions,
        }
        text = _json(cfg, payload)
    elif cfg.output_format == OutputFormat.CSV:
        text = to_csv(header, rows)
    else:
        text = to_table(header, rows)
    _emit(cfg, text, "Spectrum")
    return EXIT_OK


def cmd_wavefunction(cfg: RunConfig) -> int:
    p = cfg.dkv_params()
    state = get_level(p, cfg.n, cfg.rule)
    grid = cfg.dkv_grid(p, [state])
    values = sample(state, grid)
    if cfg.output_format == OutputFormat.JSON:
        level = {
            "n": state.n,
            "E_n": state.E_n,
            "nodes": node_positions(state),
            "x_min": grid.x_min,
            "x_max": grid.x_max,
            "n_points": grid.n_points,
        }
        text = _json(
            cfg, {"command": "wavefunction", "parameters": cfg.parameters(), "levels": [level]}
        )
    else:
        text = to_csv(["x", f"psi_{state.n}"], zip(grid.points.tolist(), values.tolist()))
    _emit(cfg, text, f"Wavefunction n={state.n}")
    return EXIT_OK


def _check_rows(report: VerificationReport) -> list:
    return [
        [check.name, check.level, check.value, check.tolerance, check.passed]
        for check in report.checks
    ]


def _report_text(cfg: RunConfig, report: VerificationReport, level_header: Sequence[str]) -> str:
    if cfg.output_format == OutputFormat.JSON:
        payload = report.as_dict()
        payload["parameters"] = cfg.parameters()
        return _json(cfg, payload)
    if cfg.output_format == OutputFormat.CSV:
        return to_csv(CHECK_HEADER, _check_rows(report))
    level_rows = [[row.get(key) for key in level_header] for row in report.levels]
    return f"{to_table(level_header, level_rows)}\n{to_table(CHECK_HEADER, _check_rows(report))}"


def _finish(report: VerificationReport) -> int:
    if report.passed:
        return EXIT_OK
    logger.error(f"Failed checks: {', '.join(report.failed_checks)}")
    return EXIT_FAILED


def cmd_verify(cfg: RunConfig) -> int:
    p = cfg.dkv_params()
    states = enumerate_levels(p, cfg.n_max, cfg.rule)
    report = verify_dkv(
        p,
        states,
        grid=cfg.dkv_grid(p, states),
        tol=cfg.tolerances,
        scheme=cfg.scheme_kind,
        workers=cfg.workers,
        parameters=cfg.parameters(),
        n_max=cfg.n_max,
    )
    text = _report_text(cfg, report, ["n", "a_n", "E_n", "alpha_n", "beta_n"])
    _emit(cfg, text, "Verification report")
    return _finish(report)


def cmd_susy(cfg: RunConfig) -> int:
    p = cfg.dkv_params()
    state = get_level(p, cfg.n, cfg.rule)
    grid = cfg.dkv_grid(p, [state])
    spec = excited_superpotential(p, state, polynomial_roots(jacobi_parameters(state)))
    residual = susy_residual(spec, p, state.E_n, grid)
    algebraic = algebraic_residuals(spec, p, state.E_n).largest
    passed = residual < SUSY_TOL and algebraic < SUSY_TOL
    if cfg.samples or cfg.output_format == OutputFormat.CSV:
        minus = minus_potential(spec, grid)
        plus = partner_potential(spec, grid)
        w, _, _ = evaluate_superpotential(spec, grid.points)
        v1 = np.asarray(eval_dkv(p, PotentialForm.V1, grid.points))
        columns = (grid.points, w, v1 - state.E_n, minus.values, plus.values)
        rows = zip(*(column.tolist() for column in columns))
        text = to_csv(["x", "W", "V1_minus_E", "V_minus", "V_plus"], rows)
    else:
        level = {
            "n": state.n,
            "E_n": state.E_n,
            "B1": spec.B1,
            "C0": spec.C0,
            "C0_prime": spec.C0_prime,
            "g": list(spec.g_list),
            "nodes": spec.nodes,
            "residual": residual,
            "algebraic_residual": algebraic,
        }
        if cfg.output_format == OutputFormat.JSON:
            payload = {
                "command": "susy",
                "parameters": cfg.parameters(),
                "passed": passed,
                "levels": [level],
            }
            text = _json(cfg, payload)
        else:
            text = to_table(list(level), [list(level.values())])
    _emit(cfg, text, f"Superpotential n={state.n}")
    if not passed:
        logger.error(
            f"Superpotential residuals {residual:.3e}, {algebraic:.3e} exceed {SUSY_TOL:g}"
        )
        return EXIT_FAILED
    return EXIT_OK


def _natanzon_samples(cfg: RunConfig, params: NatanzonParams, report: VerificationReport) -> str:
    energies = [row["E_n"] for row in report.levels]
    grid = natanzon_grid(params, energies, cfg.h)
    nmap = NatanzonMap(params, grid.x_min, grid.x_max)
    x = grid.points
    columns = [x, natanzon_potential(params, x, nmap)]
    for n, energy in enumerate(energies):
        psi = natanzon_psi(params, n, energy, x, nmap)
        columns.append(psi / np.sqrt(simpson(psi**2, dx=grid.h)))
    header = ["x", "V"] + [f"psi_{n}" for n in range(len(energies))]
    return to_csv(header, zip(*(column.tolist() for column in columns)))


def cmd_natanzon(cfg: RunConfig) -> int:
    params = cfg.natanzon_params()
    report = verify_natanzon(
        params, cfg.n_max, tol=cfg.tolerances, h=cfg.h, scheme=cfg.scheme_kind
    )
    if cfg.samples:
        text = _natanzon_samples(cfg, params, report)
    else:
        text = _report_text(cfg, report, ["n", "E_n", "naten_residual", "oracle_energy", "delta"])
    _emit(cfg, text, "Natanzon report")
    return _finish(report)


HANDLERS = {
    "spectrum": cmd_spectrum,
    "wavefunction": cmd_wavefunction,
    "verify": cmd_verify,
    "susy": cmd_susy,
    "natanzon": cmd_natanzon,
}


def _config_defaults(argv: Sequence[str]) -> Optional[dict]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return load_config(known.config) if known.config else None


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser(_config_defaults(argv))
    except (OSError, ValueError, yaml.YAMLError) as exc:
        logging.basicConfig(stream=sys.stderr, format=LOG_FORMAT)
        logger.error(f"Invalid config: {exc}")
        return EXIT_INVALID
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    cfg = RunConfig.from_namespace(args)
    logging.basicConfig(
        stream=sys.stderr, level=logging.DEBUG if cfg.verbose else logging.INFO, format=LOG_FORMAT
    )
    logger.info(f"ces-spectra {cfg.command} with {cfg.parameters()}")
    try:
        return HANDLERS[cfg.command](cfg)
    except LevelNotFoundError as exc:
        logger.error(str(exc))
        return EXIT_NO_LEVEL
    except ValueError as exc:
        logger.error(f"Invalid parameters: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
