import argparse
import logging
import sys
from typing import List, Optional

from .utils.logging_utils import init_logging, log
from .handlers import (
    cfl_command, compare_command, converge_command,
    energy_command, run_command, spectrum_command,
)

COMMANDS = {
    "run": (run_command, "simulate one formulation"),
    "compare": (compare_command, "check the equivalence of two formulations"),
    "energy": (energy_command, "audit the discrete energy of a run"),
    "cfl": (cfl_command, "scan time steps for the explicit stability threshold"),
    "converge": (converge_command, "error table under mesh refinement"),
    "spectrum": (spectrum_command, "extreme generalized eigenvalues"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavelab", description="Finite element wave formulation lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (handler, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (default: output.dir of the config)")
        p.add_argument("--export-matrices", action="store_true", help="write every assembled block")
        p.add_argument("--tol", type=float, default=None, help="assertion tolerance (default: study.tol)")
        p.add_argument("--seed", type=int, default=0, help="seed of the randomized eigenvalue iterations")
        p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        p.add_argument("--log-file", default="logs/wavelab.log")
        p.set_defaults(handler=handler)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    init_logging(args.log_file, level=getattr(logging, args.log_level))
    log.info("✅ Logger initialized.")
    return args.handler(args)


# --- Launch ---
if __name__ == "__main__":
    sys.exit(main())
