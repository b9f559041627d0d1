"""Command line interface.

Subcommands:
  run <config.json>          execute the configured pipelines, write a record
  report <records...>        merge records into csv / json / plotdata files
  verify-map <config.json>   cone verification only
  acceptance                 run the registered acceptance suite

Exit codes: 0 success, 2 verdict/tolerance failure, 1 error.  Thread count
comes from --threads, else the TORUSLAB_THREADS environment variable, else
the available parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys

from toruslab.basin import THREADS_ENV_VAR
from toruslab.config import ConfigInvalid, load_config
from toruslab.dynamics import NotHyperbolic, verify_hyperbolicity


def _add_threads_flag(p: argparse.ArgumentParser):
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (overrides ${THREADS_ENV_VAR})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toruslab",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    _add_threads_flag(p_run)

    p_rep = sub.add_parser("report", help="merge records into report files")
    p_rep.add_argument("records", nargs="+")
    p_rep.add_argument("--format", choices=["csv", "json", "plotdata"],
                       default="csv")
    p_rep.add_argument("--out", default="reports")

    p_ver = sub.add_parser("verify-map", help="cone verification only")
    p_ver.add_argument("config")
    p_ver.add_argument("--grid", type=int, default=None,
                       help="override verification grid resolution")

    p_acc = sub.add_parser("acceptance",
                           help="run the registered acceptance suite")
    _add_threads_flag(p_acc)
    return ap


def cmd_run(args) -> int:
    from toruslab.runner import check_expectations, run
    cfg = load_config(args.config)
    record = run(cfg, threads=args.threads)
    print(f"record written to {record['record_path']}")
    stage_errors = [f"{name}: {st['error']}"
                    for name, st in record["stages"].items()
                    if isinstance(st, dict) and "error" in st]
    for w in record["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    for e in stage_errors:
        print(f"stage error: {e}", file=sys.stderr)
    failures = check_expectations(record, cfg.expect)
    for f in failures:
        print(f"expectation failed: {f}", file=sys.stderr)
    if stage_errors:
        return 1
    return 2 if failures else 0


def cmd_report(args) -> int:
    from toruslab.runner import MissingRecord, report
    try:
        written = report(args.records, args.format, args.out)
    except MissingRecord as exc:
        print(f"missing record: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def cmd_verify_map(args) -> int:
    cfg = load_config(args.config)
    grid = args.grid if args.grid is not None else cfg.verify_grid
    try:
        rep = verify_hyperbolicity(cfg.map, grid)
    except NotHyperbolic as exc:
        print(f"NOT HYPERBOLIC: {exc}")
        return 2
    print(json.dumps({
        "lambda_expand": rep.lambda_expand,
        "lambda_contract": rep.lambda_contract,
        "cone_half_angle": rep.cone_half_angle,
        "grid_resolution": rep.grid_resolution,
        "passed": rep.passed,
    }, indent=2))
    return 0 if rep.passed else 2


def cmd_acceptance(args) -> int:
    from toruslab.experiments import AcceptanceSuite
    suite = AcceptanceSuite(threads=args.threads)
    results = suite.run_all()
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 2 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "verify-map":
            return cmd_verify_map(args)
        if args.command == "acceptance":
            return cmd_acceptance(args)
    except ConfigInvalid as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"not found: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
