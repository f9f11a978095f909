"""Command-line entry point: ``starloc <subcommand> [--config F] [--seed S] [--out P] [--profile desk|paper]``."""

import argparse
import logging
import os
import sys

from ..errors import ConfigError
from .config import load_config
from .sweeps import (
    SweepResult,
    run_crlb_sweep,
    run_design_study,
    run_imperfect_h4_study,
    run_mpc_study,
    simulate,
    write_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

COMMANDS = {
    "crlb-sweep": "crlb",
    "monte-carlo": "monte-carlo",
    "design-check": "design",
    "imperfect-h4": "imperfect-h4",
    "mpc-study": "mpc",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="starloc", description="STAR-RIS indoor/outdoor localization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", help="output CSV; multi-sweep studies write <stem>_<label>.csv")
        p.add_argument("--profile", choices=("desk", "paper"), default="desk")
        p.add_argument("--workers", type=int, default=1, help="worker processes for the trials")
        p.add_argument("--trials", type=int, help="override the number of trials")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _out_paths(out, labels):
    if out is None:
        out = "starloc.csv"
    if len(labels) == 1:
        return {labels[0]: out}
    stem, ext = os.path.splitext(out)
    return {label: f"{stem}_{label}{ext or '.csv'}" for label in labels}


def _summarize(label, rows, stream):
    for r in rows:
        est = "" if r.est_rmse_u1 is None else f"  est {r.est_rmse_u1:.4g} / {r.est_rmse_u2:.4g} ({r.trials_ok} ok)"
        crlb = "flagged" if r.crlb_rmse_u1 is None else f"crlb {r.crlb_rmse_u1:.4g} / {r.crlb_rmse_u2:.4g}"
        print(f"[{label}] {r.snr_db:6.1f} dB  {crlb}{est}", file=stream)


def run(argv=None, stream=sys.stdout):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.profile, seed=args.seed, trials=args.trials, workers=args.workers,
                          study=COMMANDS[args.command])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "crlb-sweep":
        sweeps = {"crlb": SweepResult("crlb", cfg, run_crlb_sweep(cfg))}
    elif args.command == "monte-carlo":
        sweeps = {"monte-carlo": simulate(cfg)}
    elif args.command == "design-check":
        sweeps = run_design_study(cfg)
    elif args.command == "imperfect-h4":
        sweeps = run_imperfect_h4_study(cfg)
    else:
        sweeps = run_mpc_study(cfg)
    paths = _out_paths(args.out, list(sweeps))
    for label, res in sweeps.items():
        write_csv(res.rows, paths[label])
        _summarize(label, res.rows, stream)
        for key, value in res.info.items():
            print(f"[{label}] {key} = {value!r}", file=stream)
        if res.mismatch is not None:
            flags = int((res.mismatch > 0.5).sum())
            if flags:
                print(f"[{label}] rank-one mismatch warnings: {flags}", file=stream)
        print(f"[{label}] wrote {paths[label]}", file=stream)
    if all(res.all_flagged for res in sweeps.values()):
        print("every sweep point was flagged", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
