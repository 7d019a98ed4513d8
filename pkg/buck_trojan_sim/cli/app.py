import argparse
import logging
import sys
from typing import List, Optional

from buck_trojan_sim.cli import commands
from buck_trojan_sim.errors import SimulatorError

logger = logging.getLogger(__name__)

DEFAULT_OUT = "./out"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buck-trojan-sim",
        description="Buck converter transient simulator with a PWM-locking trojan and parity-capacitor mitigation",
    )
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Simulate a scenario, write <label>.csv and <label>.summary.json")
    run.add_argument("scenario")
    run.add_argument("--out", default=DEFAULT_OUT)

    sweep = sub.add_parser("sweep", help="Simulate a scenario once per value of one numeric key")
    sweep.add_argument("scenario")
    sweep.add_argument("--param", required=True, help="Dotted scenario key, e.g. mitigation.parity_cap_pf")
    sweep.add_argument("--values", required=True, help="Comma-separated values")
    sweep.add_argument("--out", default=DEFAULT_OUT)
    sweep.add_argument("--jobs", type=int, default=0, help="Worker processes, 0 for one per CPU")

    check = sub.add_parser("check", help="Compare a simulation against the analytic oracles")
    check.add_argument("scenario")

    for p in (run, sweep, check):
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="Only log warnings and errors")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "run":
            return commands.cmd_run(args.scenario, args.out)
        if args.command == "sweep":
            return commands.cmd_sweep(args.scenario, args.param, args.values, args.out, args.jobs)
        return commands.cmd_check(args.scenario)
    except SimulatorError as e:
        logger.debug(f"{type(e).__name__}: {e.detail}")
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
