"""Command-line entry point: ``ptdlp {run,tune,oracle,report}``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .harness import ConfigError, load_config, run_experiment, verify_manifest

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _common(p):
    p.add_argument("--config", required=True, help="JSON config or a run manifest")
    p.add_argument("--seed", type=int, default=None, help="override run.seed")
    p.add_argument("--out", default=None, help="output directory (default: config 'output')")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")


def build_parser():
    ap = _Parser(prog="ptdlp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("run", help="run the configured experiment"))
    _common(sub.add_parser("tune", help="only tune the temperature ladder"))
    _common(sub.add_parser("oracle", help="exact-kernel checks on an enumerable model"))
    rep = sub.add_parser("report", help="summarize a finished run directory")
    rep.add_argument("run_dir", nargs="?", default=None)
    rep.add_argument("--out", default=None, help="run directory (alternative to the positional)")
    rep.add_argument("--config", default=None, help=argparse.SUPPRESS)
    rep.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    rep.add_argument("--threads", type=int, default=1, help=argparse.SUPPRESS)
    return ap


def _report(run_dir) -> int:
    run_dir = Path(run_dir)
    if not (run_dir / "manifest.json").exists():
        print(f"no manifest.json in {run_dir}", file=sys.stderr)
        return EXIT_INVALID
    man = json.loads((run_dir / "manifest.json").read_text())
    print(f"kind: {man['config']['kind']}  seed: {man['seed']}  config_hash: {man['config_hash'][:12]}")
    for name, ok in verify_manifest(run_dir).items():
        print(f"  {name}: {'ok' if ok else 'MODIFIED'}")
    metrics = run_dir / "metrics.csv"
    if metrics.exists():
        print(metrics.read_text(), end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        target = args.run_dir or args.out
        if target is None:
            print("report needs a run directory", file=sys.stderr)
            return EXIT_INVALID
        return _report(target)
    try:
        cfg = load_config(args.config)
        if args.command == "tune":
            cfg = dataclasses.replace(cfg, kind="tune-only")
        elif args.command == "oracle":
            cfg = dataclasses.replace(cfg, kind="oracle-suite")
        if args.threads < 1:
            raise ConfigError("threads: must be >= 1", "threads")
    except (ConfigError, FileNotFoundError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        art = run_experiment(cfg, args.out, args.seed, args.threads)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001 - any runtime failure maps to exit code 3
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {art.manifest}")
    return EXIT_OK
