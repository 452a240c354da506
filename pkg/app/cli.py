"""
Command line for the optimizer.

Examples:
  python -m app.cli gen-config --profile desk --seed 3 config.json
  python -m app.cli run sweep.json
  python -m app.cli props config.json --seeds 20 --report props.json
  python -m app.cli compare results_a.csv results_b.csv
"""

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from .models.beamforming import ScaOptions
from .models.database import SessionLocal, init_db
from .models.experiment import ExperimentSpec, PropertySuiteOptions
from .services.experiment_service import compare, run_sweep
from .services.property_suite import run_property_suite
from .services.scenario import load_config, profile_config, save_config

logger = logging.getLogger(__name__)


def _gen_config(args) -> int:
    config = profile_config(args.profile, seed=args.seed)
    save_config(config, args.output)
    logger.info(f"Wrote {args.profile} config to {args.output}")
    return 0


def _run(args) -> int:
    spec = ExperimentSpec.model_validate_json(Path(args.spec).read_text())
    if args.output:
        spec = spec.model_copy(update={"output": Path(args.output)})
    db = None
    if args.store:
        init_db()
        db = SessionLocal()
    try:
        outcome = run_sweep(spec, db=db, workers=args.workers)
    finally:
        if db is not None:
            db.close()
    print(f"{len(outcome.rows)} rows -> {outcome.csv_path} (summary {outcome.summary_path}, sweep {outcome.sweep_id})")
    return 0


def _props(args) -> int:
    config = load_config(args.config) if args.config else profile_config("desk")
    options = PropertySuiteOptions(
        seeds=args.seeds,
        fuzz_draws=args.fuzz_draws,
        sca=ScaOptions(restarts=args.restarts, seed=args.seed),
        report_path=Path(args.report) if args.report else None,
    )
    report = run_property_suite(config, options)
    for check in report.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}")
    print(f"{'all checks passed' if report.passed else 'failed: ' + ', '.join(report.failed())} ({report.runtime_s:.1f} s)")
    return 0 if report.passed else 1


def _compare(args) -> int:
    table = compare(args.csv)
    print(table.to_string(index=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.cli",
        description="IRS-aided WPCN beamforming and time allocation experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-config", help="Write a named parameter profile as a JSON config")
    gen.add_argument("output", help="Config file to write")
    gen.add_argument("--profile", choices=["desk", "full", "near_far"], default="desk")
    gen.add_argument("--seed", type=int, default=0, help="Channel seed (default: 0)")
    gen.set_defaults(handler=_gen_config)

    run = sub.add_parser("run", help="Run an experiment sweep from a JSON spec")
    run.add_argument("spec", help="ExperimentSpec JSON file")
    run.add_argument("--output", help="Override the results CSV path")
    run.add_argument("--workers", type=int, default=None, help="Worker processes (default: IRS_WPCN_WORKERS or 1)")
    run.add_argument("--store", action="store_true", help="Also persist rows to DATABASE_URL")
    run.set_defaults(handler=_run)

    props = sub.add_parser("props", help="Run the property suite; exit code 0 iff every check passes")
    props.add_argument("config", nargs="?", help="Base config JSON (default: desk profile)")
    props.add_argument("--seeds", type=int, default=20, help="Seeded scenarios per check (default: 20)")
    props.add_argument("--restarts", type=int, default=5, help="SCA restarts for the static scheme (default: 5)")
    props.add_argument("--fuzz-draws", type=int, default=100_000, help="Samples per algebraic fuzz (default: 100000)")
    props.add_argument("--seed", type=int, default=0, help="Solver seed (default: 0)")
    props.add_argument("--report", help="Write the JSON report here")
    props.set_defaults(handler=_props)

    cmp_ = sub.add_parser("compare", help="Mean throughput per axis value and scheme across result files")
    cmp_.add_argument("csv", nargs="+", help="Results CSV files")
    cmp_.set_defaults(handler=_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        return args.handler(args)
    except (ValidationError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
