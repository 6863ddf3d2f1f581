"""Command line interface: run experiments, generate streams, verify identities.

Exit codes: 0 success, 1 validation/usage error, 2 verification failure,
3 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import RunConfig, run
from .environments import GENERATORS, build_stream
from .errors import BudgetError, ParameterError, ValidationError
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CHECK_FAILURE = 2
EXIT_BUDGET = 3


def _coerce(text: str):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValidationError(f"--param expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        params[key] = _coerce(value)
    return params


def _cmd_run(args) -> int:
    config_data = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        config_data["master_seed"] = args.seed
    if args.jobs is not None:
        config_data["jobs"] = args.jobs
    config = RunConfig.from_dict(config_data)
    out_dir = args.out or "runs"
    artifact = run(config, out_dir=out_dir)
    summary = artifact.summary()
    print(f"wrote {Path(out_dir) / 'rounds.csv'} and {Path(out_dir) / 'summary.json'}")
    for label, per_t in sorted(summary["aggregates"].items()):
        for T, stats in sorted(per_t.items(), key=lambda kv: int(kv[0])):
            print(f"  {label:24s} T={T:>6s} avg_regret="
                  f"{stats['mean_avg_regret']:.5f} +- {stats['stderr_avg_regret']:.5f}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    params = _parse_params(args.param)
    if "T" not in params:
        raise ValidationError("generator needs --param T=<rounds>")
    T = int(params.pop("T"))
    rng = np.random.default_rng(args.seed)
    stream = build_stream(args.generator, T, rng, **params)
    stream.provenance["seed"] = args.seed
    stream.save(args.out)
    print(f"wrote {args.out}: {len(stream)} functions, "
          f"declared_beta={stream.declared_beta}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = run_suite(args.suite)
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=1, sort_keys=True))
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: deviation={check['deviation']:.3g} "
              f"tolerance={check['tolerance']:.3g}")
    print(f"suite {report['suite']}: {'PASS' if report['passed'] else 'FAIL'}")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftopt",
        description="Online piecewise-constant optimization benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment grid")
    p_run.add_argument("--config", required=True, help="path to a run config JSON")
    p_run.add_argument("--out", help="output directory (default: runs/)")
    p_run.add_argument("--seed", type=int, help="override the master seed")
    p_run.add_argument("--jobs", type=int, help="parallel worker processes")
    p_run.set_defaults(func=_cmd_run)

    p_gen = sub.add_parser("gen", help="generate a utility stream file")
    p_gen.add_argument("generator", choices=sorted(GENERATORS))
    p_gen.add_argument("--param", action="append",
                       help="generator parameter key=value (repeatable); T required")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen)

    p_verify = sub.add_parser("verify", help="run a numeric verification suite")
    p_verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_verify.add_argument("--json", help="also write the JSON report here")
    p_verify.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage problems are validation
        # failures under this tool's exit-code contract
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationError, ParameterError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
