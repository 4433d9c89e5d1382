#app.py
"""Command-line front end: zero correlations of Gaussian random polynomials.

    python app.py theory-curve --m 1 --grid 0.1:5:0.1 --out h.csv
    python app.py empirical-pc --degree 500 --samples 10000 --workers 8 --out pc.csv
    python app.py szego-check --m 2 --degree 25,100,400,1600
    python app.py gn --gram '[[1, 0], [0, 1]]'
    python app.py self-test --quick
"""
import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

# ---------- Constants (single source of truth)
PROG = "zerocorr"
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_ACCEPTANCE = 4
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# ---------- Services & config
from utils.config import COMMANDS, PROJECTIONS, build_run_config, default_log_level, load_config_file
from utils.errors import AcceptanceFailure, ConfigValidationError, ConvergenceError, DomainError
from records.models import ResultRecord, RunConfig
from records.record_writer import write_record
from services.experiment_service import (
    cmd_empirical_pc,
    cmd_gn,
    cmd_self_test,
    cmd_szego_check,
    cmd_theory_curve,
)

logger = logging.getLogger(__name__)

HANDLERS: Dict[str, Callable[[RunConfig], ResultRecord]] = {
    "theory-curve": cmd_theory_curve,
    "empirical-pc": cmd_empirical_pc,
    "szego-check": cmd_szego_check,
    "gn": cmd_gn,
    "self-test": cmd_self_test,
}

# flags whose value maps straight onto a RunConfig field
_CONFIG_FLAGS = ("m", "degree", "samples", "seed", "radius", "bins", "grid", "grid_step",
                 "projection", "gram", "vectors", "out", "workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Zero correlations of Gaussian random polynomials.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "theory-curve": "closed-form scaling-limit pair correlation on a radial grid",
        "empirical-pc": "Monte Carlo pair correlation of rescaled SU(2) zeros",
        "szego-check": "sup error of the scaled Szego kernel modulus against its limit",
        "gn": "expected product of log|linear forms| for a Gram matrix or vector list",
        "self-test": "run the acceptance suite; exit 4 on any failure",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        # default=None everywhere: an absent flag must not override the config file
        p.add_argument("--m", type=int, default=None, help="complex dimension m (default 1)")
        p.add_argument("--degree", default=None,
                       help="polynomial degree N; a comma list for szego-check (default 500)")
        p.add_argument("--samples", type=int, default=None, help="number of Monte Carlo samples")
        p.add_argument("--seed", type=int, default=None, help="64-bit master seed (default 42)")
        p.add_argument("--radius", type=float, default=None, help="window radius in scaled units")
        p.add_argument("--bins", default=None, help="bin edges 'start:stop:step' or 'a,b,c'")
        p.add_argument("--grid", default=None, help="radial grid 'start:stop:step' or 'a,b,c'")
        p.add_argument("--grid-step", type=float, default=None, dest="grid_step",
                       help="lattice step of the szego-check sup grid (default 0.25)")
        p.add_argument("--projection", choices=PROJECTIONS, default=None,
                       help="root rescaling map for empirical-pc (default equal-area)")
        p.add_argument("--gram", default=None, help="Gram matrix as JSON rows")
        p.add_argument("--vectors", default=None, help="unit vectors as JSON rows")
        p.add_argument("--out", default=None, help="output path (.csv or .json); '-' for stdout")
        p.add_argument("--config", default=None, help="JSON config file; flags override its values")
        p.add_argument("--workers", type=int, default=None, help="worker threads (env ZEROCORR_WORKERS)")
        p.add_argument("--quick", action="store_true", default=None, help="reduced sample counts for self-test")
        p.add_argument("--log-level", default=None, dest="log_level", help="logging level (env ZEROCORR_LOG_LEVEL)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(args.log_level or default_log_level()).upper(), format=LOG_FORMAT,
                        stream=sys.stderr)
    try:
        cli_values = {key: getattr(args, key) for key in _CONFIG_FLAGS}
        cli_values["quick"] = args.quick
        cfg = build_run_config(args.command, load_config_file(args.config), cli_values)
        logger.info("running %s", cfg.command)
        record = HANDLERS[cfg.command](cfg)
    except (ConfigValidationError, DomainError) as e:
        logger.error("invalid configuration: %s", e)
        return EXIT_CONFIG
    except ConvergenceError as e:
        logger.error("numerical non-convergence: %s", e)
        return EXIT_CONVERGENCE
    except AcceptanceFailure as e:
        logger.error("acceptance failure: %s", e)
        return EXIT_ACCEPTANCE

    write_record(record, cfg.out)
    if cfg.command == "self-test" and not record.summary.get("all_passed", False):
        logger.error("self-test: at least one acceptance criterion failed")
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
