from __future__ import annotations

import argparse
import logging
import os
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from dyad_influence.application.commands import AnalyzeCommand, PipelineConfig, SimulateCommand, SurrogateCommand
from dyad_influence.application.report import render_plots, threshold_table
from dyad_influence.application.services import DyadAnalysisError, DyadAnalysisService, FixtureService, SimulationService
from dyad_influence.domain.errors import AnalysisError, ConfigError, FixtureNotFoundError, ParseError
from dyad_influence.infrastructure.coefficients.file import CsvSegmentTableSource
from dyad_influence.infrastructure.fixtures.file import JsonFixtureRepository
from dyad_influence.infrastructure.fixtures.in_memory import InMemoryFixtureWorkspace
from dyad_influence.infrastructure.reports.file import DirectoryReport
from dyad_influence.infrastructure.trials.file import CsvTrialRepository
from dyad_influence.ports.reports import encode_table

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

LOG_LEVEL_VAR = "DYAD_INFLUENCE_LOG_LEVEL"
WORKERS_VAR = "DYAD_INFLUENCE_WORKERS"


def _env_workers() -> int:
    raw = os.environ.get(WORKERS_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise SystemExit(f"{WORKERS_VAR} must be an integer, got {raw!r}")


def _repository(input_dir: Path, config: PipelineConfig) -> CsvTrialRepository:
    return CsvTrialRepository(input_dir, segment_source=CsvSegmentTableSource(config.coefficient_table))


def run_analyze(args: argparse.Namespace) -> int:
    command = AnalyzeCommand(
        input_dir=args.input,
        out_dir=args.out,
        config=PipelineConfig.load(args.config),
        seed=args.seed,
        workers=args.workers or _env_workers(),
    )
    config = command.config.with_seed(command.seed)
    session = _repository(command.input_dir, config).load_session()
    report_dir = DirectoryReport(command.out_dir)
    report_dir.reset_run_log()
    service = DyadAnalysisService(writer=report_dir, workers=command.workers)
    try:
        report = service.run_analysis(session.trials, config, session.unreadable)
    except DyadAnalysisError as exc:
        logging.error("%s", exc)
        return EXIT_PARTIAL
    service.write_report(report, report_dir, report_dir)
    logging.info(
        "Analysed %d dyads (%d failures); report in %s",
        len(report.spectra),
        len(report.failures),
        command.out_dir,
    )
    return EXIT_PARTIAL if report.has_failures else EXIT_OK


def run_simulate(args: argparse.Namespace) -> int:
    command = SimulateCommand(
        config=SimulateCommand.load_sim_config(args.config),
        n_trials=args.trials,
        n_dyads=args.dyads,
        swap_roles=args.swap_roles,
        out_dir=args.out,
    )
    SimulationService(CsvTrialRepository(command.out_dir)).simulate_session(command)
    return EXIT_OK


def run_surrogate(args: argparse.Namespace) -> int:
    base = PipelineConfig.load(args.config)
    command = SurrogateCommand(
        input_dir=args.input,
        out_file=args.out,
        config=base,
        n_perm=args.n_perm if args.n_perm is not None else base.surrogate.n_perm,
        seed=args.seed if args.seed is not None else base.surrogate.seed,
        workers=args.workers or _env_workers(),
    )
    config = command.config.model_copy(
        update={"surrogate": command.config.surrogate.model_copy(update={"n_perm": command.n_perm, "seed": command.seed})}
    )
    trials = _repository(command.input_dir, config).list_trials()
    threshold = DyadAnalysisService(workers=command.workers).build_surrogate(trials, config)
    command.out_file.parent.mkdir(parents=True, exist_ok=True)
    command.out_file.write_bytes(encode_table(threshold_table(threshold)))
    logging.info("Wrote %d-permutation threshold to %s", threshold.n_perm, command.out_file)
    return EXIT_OK


def run_report(args: argparse.Namespace) -> int:
    report_dir = DirectoryReport(args.dir)
    if not report_dir.list_tables():
        raise ConfigError(f"{args.dir} holds no report tables")
    written = render_plots(report_dir, report_dir)
    logging.info("Rendered %d plots into %s", len(written), args.dir)
    return EXIT_OK


def run_verify(args: argparse.Namespace) -> int:
    service = FixtureService(JsonFixtureRepository(args.fixtures_dir), InMemoryFixtureWorkspace())
    if args.record:
        fixture = service.record_fixture(args.fixture_id)
        logging.info("Recorded %d digests for fixture %s", len(fixture.digests), fixture.id)
        return EXIT_OK
    result = service.verify_fixture(args.fixture_id)
    for line in result.lines():
        print(line)
    return EXIT_OK if result.passed else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyad-influence",
        description="Directional influence between the partners of a haptic dyad from interaction forces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="run the full pipeline on a session directory")
    analyze.add_argument("--input", type=Path, required=True, help="session directory with manifest.txt")
    analyze.add_argument("--config", type=Path, default=None, help="JSON pipeline config (defaults when omitted)")
    analyze.add_argument("--out", type=Path, required=True, help="report directory")
    analyze.add_argument("--seed", type=int, default=None, help="override the surrogate seed")
    analyze.add_argument("--workers", type=int, default=None, help=f"thread pool size (default ${WORKERS_VAR} or 1)")
    analyze.set_defaults(handler=run_analyze)

    simulate = sub.add_parser("simulate", help="write a seeded synthetic session")
    simulate.add_argument("--config", type=Path, default=None, help="JSON simulation config")
    simulate.add_argument("--trials", type=int, default=9, help="trials per dyad")
    simulate.add_argument("--dyads", type=int, default=1)
    simulate.add_argument(
        "--swap-roles", action="store_true", help="partners exchange roles for the second half of the trials"
    )
    simulate.add_argument("--out", type=Path, required=True)
    simulate.set_defaults(handler=run_simulate)

    surrogate = sub.add_parser("surrogate", help="compute only the permutation null threshold")
    surrogate.add_argument("--input", type=Path, required=True)
    surrogate.add_argument("--config", type=Path, default=None)
    surrogate.add_argument("--n-perm", dest="n_perm", type=int, default=None, help="surrogate pairs (default 506)")
    surrogate.add_argument("--seed", type=int, default=None)
    surrogate.add_argument("--out", type=Path, required=True, help="threshold CSV")
    surrogate.add_argument("--workers", type=int, default=None)
    surrogate.set_defaults(handler=run_surrogate)

    report = sub.add_parser("report", help="re-render the SVG plots of an existing report")
    report.add_argument("--dir", type=Path, required=True)
    report.set_defaults(handler=run_report)

    verify = sub.add_parser("verify", help="regenerate a fixture and compare it with its manifest")
    verify.add_argument("fixture_id")
    verify.add_argument("--fixtures-dir", dest="fixtures_dir", type=Path, default=Path("fixtures"))
    verify.add_argument("--record", action="store_true", help="store fresh digests instead of comparing")
    verify.set_defaults(handler=run_verify)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ParseError, FixtureNotFoundError) as exc:
        logging.error("%s", exc)
        return EXIT_CONFIG
    except ValidationError as exc:
        logging.error("Invalid arguments: %s", exc)
        return EXIT_CONFIG
    except AnalysisError as exc:
        logging.error("Analysis failed: %s", exc, exc_info=True)
        return EXIT_PARTIAL


def main(argv: Optional[List[str]] = None) -> None:
    """
    Command-line entry point.

    Optional environment variables:
    - DYAD_INFLUENCE_LOG_LEVEL   (default: INFO)
    - DYAD_INFLUENCE_WORKERS     (default: 1)
    """

    level = os.environ.get(LOG_LEVEL_VAR, "INFO").upper()
    if not isinstance(logging.getLevelName(level), int):
        raise SystemExit(f"Unknown log level in {LOG_LEVEL_VAR}: {level}")
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s %(message)s")
    raise SystemExit(run(argv))


if __name__ == "__main__":
    main()
