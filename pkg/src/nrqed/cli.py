"""Command line: ``nrqed run | list-scenarios | validate``."""
from __future__ import annotations

import argparse
import logging
import sys

from .scenarios import ConfigError, SCENARIOS, config_template, list_scenarios, load_config, run_scenario


def _run(args) -> int:
    cfg = load_config(args.config)
    man = run_scenario(cfg, args.out, threads=args.threads, seed=args.seed)
    print(f"{man.scenario}: {man.status} in {man.timing['wall_seconds']} s -> {args.out}")
    for name in sorted(man.outputs):
        print(f"  {name}")
    return 0


def _list(args) -> int:
    if args.template:
        sys.stdout.write(config_template(args.template, args.preset))
        return 0
    for entry in list_scenarios():
        print(f"{entry['id']:<24} {entry['description']}")
    print("\npresets: desk (reduced sizes, minutes), full (production sizes)")
    return 0


def _validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok: {cfg.scenario} ({cfg.preset}), config hash {cfg.digest()[:16]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nrqed", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--threads", type=int, default=None, help="worker processes for sweeps")
    run.add_argument("--seed", type=int, default=None)
    run.set_defaults(func=_run)

    ls = sub.add_parser("list-scenarios", help="print the scenario catalog")
    ls.add_argument("--template", choices=sorted(SCENARIOS), help="print a config template")
    ls.add_argument("--preset", choices=["desk", "full"], default="desk")
    ls.set_defaults(func=_list)

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", required=True)
    val.set_defaults(func=_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
