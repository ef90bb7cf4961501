"""Command line: ``lab run``, ``lab oracle`` and ``lab list``."""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigInvalid, LabError
from .harness import KINDS, load_config, run, with_overrides
from .harness.experiments import DESCRIPTIONS

EXIT_OK, EXIT_CONFIG, EXIT_MODULE = 0, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="lab", description="Critical Hawkes process laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--replications", type=int)
    r.add_argument("--out")
    r.add_argument("--workers", type=int, help="worker processes (default LAB_THREADS or CPU count)")
    o = sub.add_parser("oracle", help="run a grid_oracle config")
    o.add_argument("config")
    o.add_argument("--out")
    sub.add_parser("list", help="list experiment kinds")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        for k in KINDS:
            print(f"{k:16s} {DESCRIPTIONS[k]}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command == "oracle":
            if cfg.kind != "grid_oracle":
                raise ConfigInvalid("kind", "lab oracle needs kind = grid_oracle")
            cfg = with_overrides(cfg, out=args.out)
            result = run(cfg)
        else:
            cfg = with_overrides(cfg, args.seed, args.replications, args.out)
            result = run(cfg, workers=args.workers)
    except ConfigInvalid as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LabError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_MODULE
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    print(f"wrote {result.artifacts['summary.json']}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
