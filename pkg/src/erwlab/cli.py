"""Command line entry point: ``erwlab validate-law | run | report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cookie_env import STANDARD_LAWS, LawError, delta, load_law, validate
from .experiments import ConfigError, ExperimentConfig, run_experiment

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _print_checks(summary, stream=None):
    stream = stream or sys.stdout
    for c in summary["checks"]:
        flag = "PASS" if c["passed"] else "FAIL"
        print(f"{flag}  {c['name']}: {c['value']} {c['op']} {c['threshold']}", file=stream)
    print(f"{summary['experiment']}: {'PASS' if summary['passed'] else 'FAIL'}", file=stream)


def cmd_validate_law(args) -> int:
    try:
        law = STANDARD_LAWS[args.law] if args.law in STANDARD_LAWS else load_law(args.law)
        validate(law)
    except (OSError, ValueError, KeyError, TypeError) as e:
        print(f"invalid law: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(f"name: {law.name}")
    print(f"M: {law.M}")
    print(f"delta: {delta(law)!r}")
    print("A2 expectations (E prod w, E prod (1-w)):", " ".join(f"{v:.6g}" for v in law.a2_expectations()))
    return EXIT_PASS


def cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    out = args.out or cfg.out or f"runs/{cfg.experiment.lower()}"
    try:
        report = run_experiment(cfg, out=out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    summary = report.summary()
    _print_checks(summary)
    print(f"report written to {Path(out) / 'summary.json'}")
    if not report.passed:
        print(json.dumps({"failures": report.failures}), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


def cmd_report(args) -> int:
    path = Path(args.out) / "summary.json"
    try:
        summary = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read {path}: {e}", file=sys.stderr)
        return EXIT_USAGE
    _print_checks(summary)
    if args.json:
        print(json.dumps({"passed": summary["passed"], "failures": summary["failures"],
                          "metrics": summary["metrics"]}, indent=2, sort_keys=True))
    return EXIT_PASS if summary["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="erwlab", description="Excited random walk simulation lab")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate-law", help="check a cookie law and print its drift")
    v.add_argument("law", help="law JSON file or standard law name")
    v.set_defaults(func=cmd_validate_law)

    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("--config", required=True, help="experiment config (JSON)")
    r.add_argument("--seed", type=_u64, help="override the master seed")
    r.add_argument("--workers", type=_positive, help="worker threads (results do not change)")
    r.add_argument("--out", help="output directory")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="print the checks of a finished run")
    s.add_argument("--out", required=True, help="run directory holding summary.json")
    s.add_argument("--json", action="store_true", help="also print failures and metrics as JSON")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASS
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
