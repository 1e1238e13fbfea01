"""``simulate`` command line entry point."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .config import MODES, ConfigError, load_config
from .runner import RunError, run

EXIT_CONFIG, EXIT_DYNAMICS, EXIT_IO = 2, 3, 4


def build_parser():
    p = argparse.ArgumentParser(prog="simulate",
                                description="Atom-field dynamics: exact, mean-field and collisional runs.")
    p.add_argument("--config", required=True, help="key=value configuration file")
    p.add_argument("--mode", choices=MODES, help="overrides the mode in the config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--depolarization-guard", type=float, metavar="EPS",
                   help="threshold on |p1 - pm1| below which collisional runs stop")
    return p


def _fail(code, kind, message, **extra):
    print(json.dumps({"status": "error", "kind": kind, "message": str(message), **extra}),
          file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg = replace(cfg, mode=args.mode)
        if args.out:
            cfg = replace(cfg, out=args.out)
        if args.depolarization_guard is not None:
            if not args.depolarization_guard >= 0:
                raise ConfigError("--depolarization-guard must be nonnegative")
            cfg = replace(cfg, rhs=replace(cfg.rhs, depolarization_guard=args.depolarization_guard))
    except ConfigError as err:
        return _fail(EXIT_CONFIG, "config", err, line=err.line)
    except OSError as err:
        return _fail(EXIT_IO, "io", err)

    try:
        res = run(cfg)
    except RunError as err:
        return _fail(EXIT_DYNAMICS, "dynamics", err, time=err.time, files=err.files)
    except ValueError as err:
        return _fail(EXIT_CONFIG, "config", err)
    except OSError as err:
        return _fail(EXIT_IO, "io", err)
    for name, path in res.files.items():
        print(f"{name}\t{path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
