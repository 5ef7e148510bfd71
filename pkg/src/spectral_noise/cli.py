"""Command line interface.

    spectral-noise run --config run.ini [--seed N] [--out DIR] [--threads N]
    spectral-noise sweep --config run.ini [...]
    spectral-noise validate-config --config run.ini

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .pipeline import NumericalFailure, run, sweep, sweep_configs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="spectral-noise", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "execute the configured pipeline"),
                           ("sweep", "run the pipeline for every S in [sweep]"),
                           ("validate-config", "check a config file and exit")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="INI config file")
        sp.add_argument("--seed", type=int, default=None, help="root seed (overrides config)")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads/processes")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(["--seed: must be an unsigned 64-bit integer"])
            cfg = cfg.replace(seed=args.seed)
        if args.out is not None:
            cfg = cfg.replace(out=args.out)
        if args.threads < 1:
            raise ConfigError(["--threads: must be >= 1"])
        if args.command == "sweep" and not cfg.sweep_S:
            raise ConfigError(["[sweep] S: no values given"])
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate-config":
        print(f"ok: pipeline={cfg.pipeline}")
        return EXIT_OK
    workers = args.threads if args.threads > 1 else None
    try:
        if args.command == "run":
            summary = run(cfg, cfg.out, workers)
            print(json.dumps({k: summary[k] for k in summary if k != "parameters"},
                             sort_keys=True, default=str))
            return EXIT_OK
        rows = sweep(sweep_configs(cfg), cfg.out, threads=args.threads)
        for r in rows:
            print(f"S={r['S']:g}\talpha={r['alpha']:.4f}\tD_H={r['D_H']}\t{r['status']}")
        return EXIT_OK
    except NumericalFailure as exc:
        print(f"numerical failure in stage '{exc.stage}': {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
