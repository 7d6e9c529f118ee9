"""Command line interface.

Exit codes: 0 success, 2 config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import engine
from .scenario import SHIPPED_PROFILES, ProfileError, shipped_profile

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

log = logging.getLogger("elaafade")


def _load(args) -> engine.SimulationConfig:
    cfg = engine.load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = engine.parse_config({**cfg.model_dump(mode="json"), "seed": args.seed}, cfg.base_dir)
    return cfg


def cmd_generate(args) -> int:
    cfg = _load(args)
    t0 = time.perf_counter()
    real = engine.generate(cfg)
    manifest = engine.write_outputs(real, args.out)
    log.info("generated %d MT channel(s) in %.2f s -> %s (%d files)", len(real.channels),
             time.perf_counter() - t0, args.out, len(manifest["files"]))
    return EXIT_OK


def cmd_rss(args) -> int:
    cfg = _load(args)
    real = engine.generate(cfg)
    engine.write_outputs(real, args.out, ["rss"])
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _load(args)
    engine.stats(cfg, args.trials, args.out)
    print(Path(args.out, "summary.txt").read_text(), end="")
    return EXIT_OK


def cmd_profile_dump(args) -> int:
    print(json.dumps(shipped_profile(args.name).model_dump(mode="json"), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elaafade",
                                     description="Near-field fading channels for extremely large arrays.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate one channel realization")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="Monte Carlo validation report")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("rss", help="write normalized RSS maps only")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_rss)

    p = sub.add_parser("profile", help="scenario profiles")
    profile_sub = p.add_subparsers(dest="profile_command", required=True)
    d = profile_sub.add_parser("dump", help="print a shipped profile as JSON")
    d.add_argument("--name", required=True, choices=SHIPPED_PROFILES)
    d.set_defaults(func=cmd_profile_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (engine.ConfigError, ProfileError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
