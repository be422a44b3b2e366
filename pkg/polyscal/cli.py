"""
Command-line entry point

    polyscal solve --config scenarios/flat-cube-slice.json
    polyscal verify comparison --config scenarios/saddle-cube-comparison.json
    polyscal regress --bundle runs/flat-cube-slice/bundle.json
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from loguru import logger
from tabulate import tabulate

from .config import settings
from .errors import PolyscalError
from .monitoring import start_metrics_server
from .runner import (
    EXIT_FAIL,
    EXIT_PASS,
    exit_code,
    load_baseline,
    load_bundle,
    load_scenario,
    regress,
    run_many,
    run_safe,
    snapshot_baseline,
    with_kind,
    write_baseline,
)
from .schemas import RunBundle, ScenarioKind

LOG_FORMAT = "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>"

_COMMAND_KINDS = {
    "solve": ScenarioKind.SOLVE,
    "foliate": ScenarioKind.FOLIATE,
    "curvature": ScenarioKind.CURVATURE,
    "wedge": ScenarioKind.VERIFY_WEDGE,
    "comparison": ScenarioKind.VERIFY_COMPARISON,
    "gaussbonnet": ScenarioKind.VERIFY_GAUSSBONNET,
    "evolution": ScenarioKind.VERIFY_EVOLUTION,
}


def configure_logging(verbose: bool = False) -> None:
    logger.remove()
    logger.add(sys.stderr, format=LOG_FORMAT, level="DEBUG" if verbose else settings.log_level)


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    """Options accepted before or after the subcommand"""
    default = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    parser.add_argument(
        "--config",
        nargs="+",
        default=default([]),
        help="Scenario JSON file(s)"
    )
    parser.add_argument(
        "--out-dir",
        default=default(None),
        help=f"Output directory for run artifacts (default: {settings.out_dir})"
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=default(None),
        help=f"Worker threads for scenario sweeps (default: {settings.threads})"
    )
    parser.add_argument(
        "--h-override",
        type=float,
        default=default(None),
        help="Mesh size used instead of the scenario's"
    )
    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        default=default(False),
        help="Debug logging"
    )


def _output_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--out",
        help="Bundle JSON path (single scenario only)"
    )
    parser.add_argument(
        "--mesh-out",
        help="Mesh OBJ path (single scenario only)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyscal",
        description="Capillary surfaces in cone- and prism-type Riemannian polyhedra"
    )
    _global_options(parser, suppress=False)
    shared = argparse.ArgumentParser(add_help=False)
    _global_options(shared, suppress=True)

    commands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "Minimize the capillary energy from the scenario's initial surface"),
        ("foliate", "Continue a CMC capillary foliation and check its dynamics"),
        ("curvature", "Report scalar curvature sign, face mean convexity and edge angles"),
    ):
        _output_options(commands.add_parser(name, parents=[shared], help=help_text))

    verify = commands.add_parser("verify", parents=[shared], help="Run a verification scenario")
    verify.add_argument(
        "check",
        choices=["wedge", "comparison", "gaussbonnet", "evolution"],
        help="Which verification to run"
    )
    _output_options(verify)

    reg = commands.add_parser("regress", parents=[shared],
                              help="Compare run bundles against stored baselines")
    reg.add_argument(
        "--bundle",
        nargs="+",
        default=[],
        help="Existing bundle JSON file(s); with --config the scenarios are run first"
    )
    reg.add_argument(
        "--baseline",
        help="Baseline name or file (default: the scenario's baseline, else its name)"
    )
    reg.add_argument(
        "--baseline-dir",
        default=settings.baseline_dir,
        help=f"Baseline directory (default: {settings.baseline_dir})"
    )
    reg.add_argument(
        "--update",
        action="store_true",
        help="Write the bundles' values as new baselines instead of comparing"
    )
    return parser


def _headline(bundle: RunBundle) -> str:
    """Most telling number of a bundle for the summary table"""
    r = bundle.results
    if bundle.error:
        return bundle.error
    picks: Dict[ScenarioKind, Any] = {
        ScenarioKind.SOLVE: ("F", r.get("energy_report", {}).get("energy")),
        ScenarioKind.FOLIATE: ("min H'-CH", r.get("dynamics", {}).get("min_residual")),
        ScenarioKind.VERIFY_WEDGE: ("alpha", r.get("corner_angle")),
        ScenarioKind.VERIFY_COMPARISON: ("L", r.get("ledger", {}).get("L")),
        ScenarioKind.VERIFY_GAUSSBONNET: ("GB residual", r.get("defect_residual")),
        ScenarioKind.VERIFY_EVOLUTION: ("dH/dt rel. error", r.get("evolution", {}).get("interior_relative")),
        ScenarioKind.CURVATURE: ("min R", r.get("scalar", {}).get("min_scalar")),
    }
    label, value = picks[bundle.kind]
    return f"{label} = {value:.6g}" if isinstance(value, (int, float)) else f"{label} = n/a"


def print_summary(bundles: Sequence[RunBundle]) -> None:
    rows = [[b.scenario, b.kind.value, b.status, b.exit_code, _headline(b)] for b in bundles]
    print(tabulate(rows, headers=["scenario", "kind", "status", "exit", "result"], tablefmt="github"))


def _run_command(args: argparse.Namespace, kind: ScenarioKind) -> int:
    if not args.config:
        logger.error("No scenario given; pass one or more files with --config")
        return EXIT_FAIL
    scenarios = [with_kind(load_scenario(path), kind) for path in args.config]
    single = len(scenarios) == 1
    if not single and (args.out or args.mesh_out):
        logger.error("--out and --mesh-out need a single scenario")
        return EXIT_FAIL
    if single:
        bundles = [run_safe(scenarios[0], args.out_dir, args.h_override, args.out, args.mesh_out)]
    else:
        bundles = run_many(scenarios, args.threads, args.out_dir, args.h_override)
    print_summary(bundles)
    return exit_code(bundles)


def _regress_command(args: argparse.Namespace) -> int:
    bundles: List[RunBundle] = [load_bundle(path) for path in args.bundle]
    baseline_names: List[Optional[str]] = [None] * len(bundles)
    if args.config:
        scenarios = [load_scenario(path) for path in args.config]
        bundles += run_many(scenarios, args.threads, args.out_dir, args.h_override)
        baseline_names += [s.baseline for s in scenarios]
    if not bundles:
        logger.error("Nothing to compare; pass --bundle or --config")
        return EXIT_FAIL

    if args.update:
        for bundle in bundles:
            path = write_baseline(snapshot_baseline(bundle), args.baseline_dir)
            logger.info(f"Baseline for '{bundle.scenario}' written to {path}")
        return EXIT_PASS

    rows, worst = [], EXIT_PASS
    for bundle, name in zip(bundles, baseline_names):
        baseline = load_baseline(args.baseline or name or bundle.scenario, args.baseline_dir)
        report = regress(bundle, baseline)
        largest = max(report.diffs.items(), key=lambda kv: kv[1], default=("-", 0.0))
        rows.append([bundle.scenario, "pass" if report.passed else "fail", len(report.diffs),
                     ", ".join(report.failed + report.missing) or "-", f"{largest[0]} ({largest[1]:.3g})"])
        if not report.passed:
            worst = max(worst, EXIT_FAIL)
    print(tabulate(rows, headers=["scenario", "status", "fields", "failed", "largest diff"], tablefmt="github"))
    return worst


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and return the process exit code"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    start_metrics_server()

    try:
        if args.command == "regress":
            return _regress_command(args)
        kind = _COMMAND_KINDS[args.check if args.command == "verify" else args.command]
        return _run_command(args, kind)
    except PolyscalError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
