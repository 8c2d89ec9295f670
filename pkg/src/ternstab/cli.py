"""Command line entry point: ``ternstab run|sweep|selftest``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig
from .report import EXIT_INVALID, EXIT_OK, run, sweep
from .selftest import run_suites


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "format", None):
        cfg = replace(cfg, output_format=args.format)
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ternstab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "selftest"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat 'section.key = value' config file")
        p.add_argument("--seed", type=int, help="master seed override")
        if name != "selftest":
            p.add_argument("--out", help="output path (relative paths honour TERNSTAB_OUTPUT_DIR)")
            p.add_argument("--format", choices=("csv", "json"))
            p.add_argument("--jobs", type=int, default=1)
        else:
            p.add_argument("--tamper-norm", type=float, default=None,
                           help="inflate product norms by this factor (fault injection)")
    args = parser.parse_args(argv)

    try:
        cfg = _load(args)
        if args.command == "selftest":
            if args.config:
                cfg.validate()
            probe_kwargs = dict(element_count=cfg.element_count, r_min=cfg.r_min,
                                r_max=cfg.r_max, mu_count=cfg.mu_count,
                                triple_count=cfg.triple_count)
            results = run_suites(args.seed or 0, probe_kwargs, args.tamper_norm)
            failed = sum(not r.ok for r in results)
            print(f"{len(results) - failed}/{len(results)} suites passed")
            return EXIT_OK if failed == 0 else 1
        if args.command == "run":
            cfg.validate()
            code, path = run(cfg, args.out, args.format)
            print(f"wrote {path} (exit {code})")
            return code
        path = sweep(cfg, args.out, max(1, args.jobs))
        print(f"wrote {path}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
