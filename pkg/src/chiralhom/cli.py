"""Command-line entry point: ``chiralhom <experiment> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load
from .energy import EnergyError
from .experiments import EXPERIMENTS
from .magnetization import MagnetizationError
from .microstructure import MicrostructureError
from .report import write_json

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("chiralhom")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chiralhom", description="Stochastic homogenization experiments for chiral magnets")
    sub = p.add_subparsers(dest="command", required=True, metavar="EXPERIMENT")
    for name, fn in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0] if fn.__doc__ else name)
        sp.add_argument("--config", required=True, type=Path, help="JSON run configuration")
        sp.add_argument("--out", type=Path, default=None, help="output directory (default: config output_dir or ./out/<experiment>)")
        sp.add_argument("--seed", type=int, action="append", default=None, help="override seeds (repeatable)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for independent runs")
        sp.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load(args.config)
        if args.seed:
            if len(set(args.seed)) != len(args.seed):
                raise ConfigError("--seed values must be distinct")
            cfg["seeds"] = list(args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        out = args.out or Path(cfg.get("output_dir", "out")) / args.command
        out.mkdir(parents=True, exist_ok=True)
        log.info("running %s -> %s", args.command, out)
        report = EXPERIMENTS[args.command](cfg, out, args.threads)
        write_json(out / "report.json", report.to_dict())
    except (ConfigError, OSError, MicrostructureError, EnergyError, MagnetizationError) as exc:
        print(f"chiralhom: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for line in report.summary_lines():
        print(line, file=sys.stderr)
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"{args.command}: {'PASS' if report.passed else 'FAIL'} ({out / 'report.json'})")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
