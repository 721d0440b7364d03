"""Command-line entry point: budget, sweep, optimize, validate and params."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .budget_engine import (
    DEFAULT_F_HI,
    DEFAULT_F_LO,
    DEFAULT_POINTS,
    BudgetAssembler,
    find_minimum,
    resonance_grid,
    voltage_sweep,
)
from .design_optimizer import ParamSpace, optimize, sensitivity_table
from .errors import NoiseBudgetError, UsageError
from .langevin_oracle import SimConfig, compare_to_analytic, report_json, simulate
from .models import DESIGN_CONFIG_PATH, TWO_PI, SystemConfig, load_config
from .settings import get_settings

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CSV_FLOAT_FORMAT = "%.17g"

console = Console(stderr=True)
stdout_console = Console()


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors map to exit 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _configure_logging(verbose: bool):
    level = "DEBUG" if verbose else get_settings().log_level
    logging.basicConfig(format=LOG_FORMAT, level=getattr(logging, level), stream=sys.stderr, force=True)


def _load(args) -> SystemConfig:
    config = load_config(args.config)
    if args.temperature is not None:
        config = config.with_temperature(args.temperature)
    if getattr(args, "include_uncertain", False):
        config = config.replace("budget.include_uncertain", True)
    logger.debug(f"Resolved config from {args.config}: {config.model_dump(mode='json')}")
    return config


def _write_frame(frame: pd.DataFrame, out: Optional[str], fmt: str, extra: Optional[Dict] = None):
    if fmt == "json":
        payload = dict(extra or {})
        payload["data"] = frame.to_dict(orient="list")
        _write_text(json.dumps(payload, indent=2), out)
        return
    if out is None:
        frame.to_csv(sys.stdout, index=False, float_format=CSV_FLOAT_FORMAT)
    else:
        frame.to_csv(out, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.info(f"Wrote {len(frame)} rows to {out}")


def _write_text(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text + "\n")
    else:
        Path(out).write_text(text + "\n")
        logger.info(f"Wrote {out}")


def cmd_budget(args) -> int:
    config = _load(args)
    grid = resonance_grid(config, kind=args.grid, n=args.points, f_lo=args.f_lo, f_hi=args.f_hi)
    budget = BudgetAssembler(config).assemble(grid)
    frame = budget.to_frame()

    summary = {"f_z_eff_hz": budget.meta["f_z_eff_hz"], "G": budget.meta["G"]}
    if grid.kind == "refined":
        f_min, amp_min = find_minimum(budget)
        summary.update(f_min_hz=f_min, amp_min=amp_min)
    _write_frame(frame, args.out, args.format, extra={"summary": summary, "meta": budget.meta})

    lines = [f"f_z_eff = {summary['f_z_eff_hz'] / 1e9:.6f} GHz", f"G = {summary['G']:.4e} Hz/m"]
    if "amp_min" in summary:
        lines.append(f"minimum = {summary['amp_min']:.3e} N/rtHz at {summary['f_min_hz'] / 1e9:.6f} GHz")
    console.print(Panel("\n".join(lines), title="Force-noise budget", border_style="blue"))
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    envelope = voltage_sweep(config, args.vlo, args.vhi, args.vsteps, n=args.points)
    frame = envelope.to_frame()
    _write_frame(frame, args.out, args.format, extra={"skipped_voltages": envelope.skipped})
    if args.envelope_out:
        envelope.envelope_frame().to_csv(args.envelope_out, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.info(f"Wrote broadband envelope to {args.envelope_out}")

    table = Table(title="Voltage sweep")
    table.add_column("V0 [V]", style="cyan")
    table.add_column("f_min [GHz]", style="blue")
    table.add_column("floor [N/rtHz]", style="green")
    for row in frame.itertuples(index=False):
        table.add_row(f"{row.voltage_v:.3f}", f"{row.f_min_hz / 1e9:.4f}", f"{row.amp_min:.3e}")
    console.print(table)
    if envelope.skipped:
        console.print(f"Skipped unstable voltages: {envelope.skipped}", style="yellow")
    return 0


def cmd_optimize(args) -> int:
    config = _load(args)
    space = ParamSpace.from_strings(args.param)
    band = tuple(args.band) if args.band else None
    result = optimize(config, space, args.objective, budget_evals=args.evals, seed=args.seed, band=band)
    payload = result.to_dict()
    payload["best_config"] = result.best_config.model_dump(mode="json")
    if args.sensitivity:
        table = sensitivity_table(result.best_config, space, args.sensitivity, args.objective, band=band)
        payload["sensitivity"] = table.to_dict(orient="records")
    if args.format == "json":
        _write_text(json.dumps(payload, indent=2), args.out)
    else:
        trace = pd.DataFrame(result.trace, columns=["evaluation", "objective"])
        trace["running_min"] = result.running_min
        _write_frame(trace, args.out, "csv")

    table = Table(title=f"Optimum ({result.objective}, {result.evaluations} evaluations)")
    table.add_column("Parameter", style="cyan")
    table.add_column("Value", style="green")
    for name, value in result.best_params.items():
        table.add_row(name, f"{value:.6g}")
    table.add_row("objective", f"{result.best_objective:.4e}")
    console.print(table)
    return 0


def cmd_validate(args) -> int:
    sim = SimConfig(seed=args.seed, n_trajectories=args.trajectories)
    result = simulate(sim)
    report = compare_to_analytic(result)
    _write_text(report_json(report), args.out)
    style = "bold green" if report["passed"] else "bold red"
    console.print(
        f"Oracle {'PASSED' if report['passed'] else 'FAILED'}: max deviation "
        f"{report['max_abs_deviation']:.3f} over {report['n_bins']} bins",
        style=style,
    )
    return 0 if report["passed"] else 3


def derived_parameters(config: SystemConfig) -> Dict:
    """Resolved mode frequencies, coupling, cavity rates and damping breakdown."""
    assembler = BudgetAssembler(config)
    modes = assembler.modes
    return {
        "f_z_hz": modes.omega_z / TWO_PI,
        "f_plus_hz": modes.omega_plus / TWO_PI,
        "f_minus_hz": modes.omega_minus / TWO_PI,
        "f_c_hz": modes.omega_c / TWO_PI,
        "omega_z": modes.omega_z,
        "omega_ba": assembler.omega_ba,
        "f_z_eff_hz": assembler.omega_z_eff / TWO_PI,
        "G": assembler.G,
        "antenna_length_m": assembler.antenna_length,
        "kappa": config.cavity.kappa,
        "kappa_in": config.cavity.kappa_in,
        "kappa_add": config.cavity.kappa_add,
        "gamma": assembler.damping.to_dict(),
    }


def cmd_params(args) -> int:
    config = _load(args)
    params = derived_parameters(config)
    if args.format == "json":
        _write_text(json.dumps(params, indent=2), args.out)
        return 0
    table = Table(title="Derived parameters")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    for key, value in params.items():
        if isinstance(value, dict):
            for sub, sub_value in value.items():
                table.add_row(f"{key}.{sub}", f"{sub_value:.6g}")
        else:
            table.add_row(key, f"{value:.6g}")
    stdout_console.print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    verbosity = _Parser(add_help=False)
    verbosity.add_argument("--verbose", action="store_true", help="Debug logging")
    common = _Parser(add_help=False, parents=[verbosity])
    common.add_argument("--config", default=str(DESIGN_CONFIG_PATH), help="INI (.cfg) or JSON config file")
    common.add_argument("--temperature", type=float, help="Set trap, cavity and magnet temperatures [K]")

    parser = _Parser(prog="electron-force-budget", description="Force-noise budget of a cavity-coupled trapped electron")
    sub = parser.add_subparsers(dest="command", required=True)

    budget = sub.add_parser("budget", parents=[common], help="Assemble the budget on a frequency grid")
    budget.add_argument("--out", help="Output file (default: stdout)")
    budget.add_argument("--grid", choices=["lin", "log", "refined"], default="refined")
    budget.add_argument("--points", type=int, default=DEFAULT_POINTS)
    budget.add_argument("--f-lo", type=float, default=DEFAULT_F_LO, help="Lower grid edge [Hz]")
    budget.add_argument("--f-hi", type=float, default=DEFAULT_F_HI, help="Upper grid edge [Hz]")
    budget.add_argument("--include-uncertain", action="store_true", help="Add Barkhausen and TLS to the total")
    budget.add_argument("--format", choices=["csv", "json"], default="csv")
    budget.set_defaults(handler=cmd_budget)

    sweep = sub.add_parser("sweep", parents=[common], help="Minimum floor across trap voltages")
    sweep.add_argument("--vlo", type=float, default=10.0)
    sweep.add_argument("--vhi", type=float, default=50.0)
    sweep.add_argument("--vsteps", type=int, default=21)
    sweep.add_argument("--points", type=int, default=DEFAULT_POINTS)
    sweep.add_argument("--out", help="Per-voltage minima (default: stdout)")
    sweep.add_argument("--envelope-out", help="Write the broadband envelope CSV here")
    sweep.add_argument("--include-uncertain", action="store_true")
    sweep.add_argument("--format", choices=["csv", "json"], default="csv")
    sweep.set_defaults(handler=cmd_sweep)

    opt = sub.add_parser("optimize", parents=[common], help="Search design parameters")
    opt.add_argument("--param", action="append", required=True, help="name:lo:hi[:log|linear], repeatable")
    opt.add_argument("--objective", choices=["min_floor", "band_min"], default="min_floor")
    opt.add_argument("--band", type=float, nargs=2, metavar=("F_LO", "F_HI"))
    opt.add_argument("--evals", type=int, default=60)
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--sensitivity", type=int, default=0, help="Points per axis for a sensitivity table")
    opt.add_argument("--include-uncertain", action="store_true")
    opt.add_argument("--out")
    opt.add_argument("--format", choices=["csv", "json"], default="json")
    opt.set_defaults(handler=cmd_optimize)

    validate = sub.add_parser("validate", parents=[verbosity], help="Run the time-domain oracle")
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--trajectories", type=int, default=64)
    validate.add_argument("--out", help="Report file (default: stdout)")
    validate.set_defaults(handler=cmd_validate)

    params = sub.add_parser("params", parents=[common], help="Print derived quantities")
    params.add_argument("--format", choices=["table", "json"], default="table")
    params.add_argument("--out")
    params.set_defaults(handler=cmd_params)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        console.print(f"Error: {e}", style="bold red")
        return e.exit_code
    except SystemExit as e:
        return int(e.code or 0)

    _configure_logging(args.verbose)
    try:
        return args.handler(args)
    except NoiseBudgetError as e:
        logger.error(f"{type(e).__name__}: {e}")
        console.print(f"Error: {e}", style="bold red")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        console.print(f"Fatal error: {e}", style="bold red")
        return 3


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
