"""Command line entry point: ``robustirs {train,sweep,benchmark,verify}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .agent import NumericalFailure
from .config import ConfigError, ExperimentConfig, load_config

log = logging.getLogger("robustirs")


def _load(path):
    return ExperimentConfig() if path is None else load_config(path)


def cmd_train(cfg, args):
    from .harness import run_training

    out = run_training(cfg, args.out, args.seed_offset)
    summary = json.loads((out / "trend_summary.json").read_text())
    print(f"wrote {out}")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_sweep(cfg, args):
    from .harness import read_csv, run_sweep

    path = run_sweep(cfg, args.out, args.seed_offset)
    print(f"wrote {path}")
    for row in read_csv(path):
        print(f"  {row['parameter']}={row['value']}: mean {float(row['mean_power']):.4g} W "
              f"+/- {float(row['std_power']):.3g} ({row['feasible']}/{row['draws']} feasible)")
    return 0


def cmd_benchmark(cfg, args):
    from .harness import read_csv, run_benchmark

    path = run_benchmark(cfg, args.out, args.seed_offset)
    print(f"wrote {path}")
    for row in read_csv(path):
        print(f"  MN={row['MN']}: sdr {float(row['sdr_ms']):.2f} ms, drl {float(row['drl_ms']):.3f} ms "
              f"[{row['actor']}, {row['status']}]")
    return 0


def cmd_verify(cfg, args):
    from .verify import run_verification

    report = run_verification(cfg, args.out or cfg.output_dir)
    for c in report["checks"]:
        print(f"  {'PASS' if c['passed'] else 'FAIL'} {c['name']}: measured {c['measured']} "
              f"(tolerance {c['tolerance']})")
    print("verification", "passed" if report["passed"] else "FAILED")
    return 0 if report["passed"] else 1


COMMANDS = {
    "train": (cmd_train, "train both agent modes for every seed and aggregate the runs"),
    "sweep": (cmd_sweep, "transmit power of the robust optimizer across one parameter"),
    "benchmark": (cmd_benchmark, "time the SDR pipeline against one agent decision"),
    "verify": (cmd_verify, "run the invariant checks and write a pass/fail report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustirs", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="JSON config file (defaults when omitted)")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("--seed-offset", type=int, default=0, help="added to every configured seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = _load(args.config)
        return COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
