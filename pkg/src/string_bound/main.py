"""
main.py

Entry point for StringBound.

Subcommands:
    simulate       run the penalized string equation and write a trajectory file
    sample         draw paths from nu or nu_n and write them as CSV
    verify         run verification tests and write JSON reports plus a summary
    contact-stats  extract contact records from a trajectory file
    export         convert a trajectory file to CSV or Excel
    plot           render a trajectory file to PNG
    view           open the interactive viewer

Exit codes: 0 success, 1 a verification test failed, 2 usage or config
error, 3 runtime error. Diagnostics go to stderr and to a rotating log file
under <output directory>/logs; data goes to files only.
"""

import argparse
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List, Optional

from builders import build_sim_config, build_test_plan, domain_from_descriptor
from config import ConfigError, default_run_config, load_run_config
from integrator import run
from observables import contact_set, default_gap_nodes
from pathspace import sample_invariant_batch
from seeding import PURPOSE_BRIDGE, spawn_stream
from trajectory_io import (
    export_trajectory,
    read_trajectory,
    samples_frame,
    save_frame,
    write_contact_records,
    write_reports,
    write_trajectory,
)
from verify import FAIL, INCONCLUSIVE
from tasks import run_plan

logger = logging.getLogger("StringBound")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

log_formatter = logging.Formatter(
    "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)


def setup_logging(output_dir: Path, verbose: bool = False) -> None:
    """Console handler on stderr plus a rotating file in output_dir/logs."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(log_formatter)
    handlers: List[logging.Handler] = [console_handler]

    log_dir = output_dir / "logs"
    problem = None
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        # File handler with rotation (max 1MB per file, keep last 3 files)
        file_handler = RotatingFileHandler(
            log_dir / "stringbound.log", maxBytes=1_000_000, backupCount=3
        )
        file_handler.setFormatter(log_formatter)
        handlers.append(file_handler)
    except OSError as e:
        problem = e

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO, handlers=handlers, force=True
    )
    if problem is not None:
        logger.warning("Cannot open log file in %s: %s", log_dir, problem)


# Handle unexpected exceptions
def handle_exception(exc_type, exc_value, exc_traceback):
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return
    logger.error(
        "Unhandled exception",
        exc_info=(exc_type, exc_value, exc_traceback)
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stringbound",
        description="Penalized reflected random strings: simulation and verification.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True

    def with_config(p: argparse.ArgumentParser, required: bool = True) -> None:
        p.add_argument("--config", type=Path, required=required, help="run-config TOML file")
        p.add_argument("--output-dir", type=Path, help="override [output].directory")

    p = sub.add_parser("simulate", help="run the integrator and write a trajectory file")
    with_config(p)
    p.add_argument("--out", type=Path, help="trajectory file (default <output>/trajectory.rstr)")

    p = sub.add_parser("sample", help="draw paths from nu or nu_n")
    with_config(p)
    p.add_argument("--mode", choices=["nu", "nu_n"], default="nu_n")
    p.add_argument("--strategy", choices=["rejection", "importance"], default="rejection")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--out", type=Path, help="CSV file (default <output>/samples.csv)")

    p = sub.add_parser("verify", help="run verification tests")
    with_config(p)
    p.add_argument("--tests", help="comma-separated test names (default [verify].tests)")
    p.add_argument("--workers", type=int, help="parallel tests (default [verify].workers)")
    p.add_argument("--excel", action="store_true", help="also write summary.xlsx")

    p = sub.add_parser("contact-stats", help="contact records of a trajectory file")
    p.add_argument("trajectory", type=Path)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gap-nodes", type=int)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("export", help="convert a trajectory file to a table")
    p.add_argument("trajectory", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=["csv", "xlsx"], default="csv")

    p = sub.add_parser("plot", help="render a trajectory file to PNG")
    p.add_argument("trajectory", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--eps", type=float)

    p = sub.add_parser("view", help="open the interactive viewer")
    p.add_argument("--config", type=Path, help="run-config TOML file for the domain and potential")
    return parser


def _load(args) -> dict:
    return load_run_config(args.config) if getattr(args, "config", None) else default_run_config()


def _output_dir(args, config: dict) -> Path:
    if getattr(args, "output_dir", None):
        return args.output_dir
    return Path(config.get("output", {}).get("directory", "runs"))


def cmd_simulate(args, config: dict, output: Path) -> int:
    cfg = build_sim_config(config)
    traj = run(cfg)
    target = args.out or output / "trajectory.rstr"
    target.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory(traj, target)
    return EXIT_OK


def cmd_sample(args, config: dict, output: Path) -> int:
    cfg = build_sim_config(config)
    rng = spawn_stream(cfg.seed, PURPOSE_BRIDGE, 0)
    batch = sample_invariant_batch(
        cfg.grid, cfg.dom, cfg.pot, args.mode, args.strategy, rng, args.count,
        n=cfg.n if args.mode == "nu_n" else None,
    )
    target = args.out or output / "samples.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    save_frame(samples_frame(batch, cfg.grid), target)
    return EXIT_OK


def cmd_verify(args, config: dict, output: Path) -> int:
    names = [name.strip() for name in args.tests.split(",")] if args.tests else None
    plan = build_test_plan(config, names)
    if not plan:
        raise ConfigError("no verification tests requested")
    workers = args.workers or int(config.get("verify", {}).get("workers", 1))
    reports = run_plan(plan, workers)
    excel = args.excel or bool(config.get("output", {}).get("excel", False))
    summary = write_reports(reports, output / "reports", excel=excel)
    for report in reports:
        logger.info("%-14s %s", report.test_name, report.verdict)
    logger.info("Summary written to %s", summary)
    if any(report.verdict == INCONCLUSIVE for report in reports):
        logger.warning("Some tests were inconclusive; see the report notes")
    return EXIT_FAILED if any(report.verdict == FAIL for report in reports) else EXIT_OK


def cmd_contact_stats(args) -> int:
    traj = read_trajectory(args.trajectory)
    dom = domain_from_descriptor(traj.descriptor)
    gap_nodes = args.gap_nodes if args.gap_nodes is not None else default_gap_nodes(traj.grid)
    records = contact_set(traj, dom, args.eps, gap_nodes)
    write_contact_records(records, traj.grid, args.out)
    return EXIT_OK


def cmd_export(args) -> int:
    export_trajectory(read_trajectory(args.trajectory), args.out, args.format)
    return EXIT_OK


def cmd_plot(args) -> int:
    from plotting import save_trajectory_plot

    traj = read_trajectory(args.trajectory)
    save_trajectory_plot(traj, domain_from_descriptor(traj.descriptor), args.out, args.eps)
    return EXIT_OK


def cmd_view(args, config: dict) -> int:
    from PyQt5 import QtGui, QtWidgets

    from ui import StringViewer

    app = QtWidgets.QApplication.instance() or QtWidgets.QApplication(sys.argv)
    app.setFont(QtGui.QFont("Segoe UI", 10))
    window = StringViewer(config)
    window.show()
    return app.exec_()


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        config = _load(args) if args.command in ("simulate", "sample", "verify", "view") else default_run_config()
    except ConfigError as e:
        setup_logging(Path("runs"), args.verbose)
        logger.error("Configuration error: %s", e)
        return EXIT_USAGE
    output = _output_dir(args, config)
    setup_logging(output, args.verbose)
    sys.excepthook = handle_exception
    logger.info("Starting StringBound %s", args.command)

    try:
        if args.command == "simulate":
            return cmd_simulate(args, config, output)
        if args.command == "sample":
            return cmd_sample(args, config, output)
        if args.command == "verify":
            return cmd_verify(args, config, output)
        if args.command == "contact-stats":
            return cmd_contact_stats(args)
        if args.command == "export":
            return cmd_export(args)
        if args.command == "plot":
            return cmd_plot(args)
        return cmd_view(args, config)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_USAGE
    except Exception as e:
        logger.error("%s failed: %s", args.command, e, exc_info=args.verbose)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
