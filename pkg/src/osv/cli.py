"""Command-line interface.

    osv prove <files...> [--query NAME] [--jobs N] [--timeout S]
              [--gen-cutoff K] [--inst-cap N] [--smt-timeout-ms MS]
              [--dump-normal] [--dump-insts] [--dump-smt DIR]
              [--json PATH] [--solver PATH]

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from .errors import ParseError, SpecError, TypeCheckError
from .prove import ProveConfig, dump_normal, query_table, reports_to_json, run, stats


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="osv", description="Specification prover")
    sub = p.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("prove", help="prove queries in specification files")
    pr.add_argument("files", nargs="+", help=".osv specification files")
    pr.add_argument("--query", help="run only the named query")
    pr.add_argument("--jobs", type=int, default=1, help="run N queries concurrently")
    pr.add_argument("--timeout", type=float, default=60.0, help="per-query solver timeout (s)")
    pr.add_argument("--smt-timeout-ms", type=int, default=2000,
                    help="per-consistency-check solver timeout (ms)")
    pr.add_argument("--gen-cutoff", type=int, default=2, help="generation cutoff")
    pr.add_argument("--inst-cap", type=int, default=200, help="instantiations per node")
    pr.add_argument("--max-rounds", type=int, default=8, help="instantiation rounds")
    pr.add_argument("--dump-normal", action="store_true",
                    help="print each query's normal form")
    pr.add_argument("--dump-insts", action="store_true",
                    help="print the instantiation trace as JSON lines")
    pr.add_argument("--dump-smt", metavar="DIR", help="write solver scripts to DIR")
    pr.add_argument("--json", metavar="PATH", help="write reports as JSON")
    pr.add_argument("--solver", help="solver command (default: z3 or bundled build)")
    return p


def cmd_prove(args) -> int:
    config = ProveConfig(
        solver=shlex.split(args.solver) if args.solver else None,
        timeout_s=args.timeout,
        smt_timeout_ms=args.smt_timeout_ms,
        gen_cutoff=args.gen_cutoff,
        node_cap=args.inst_cap,
        max_rounds=args.max_rounds,
        jobs=args.jobs,
    )
    reports, artifacts, exit_code = run(args.files, args.query, config)
    for name, art in artifacts.items():
        if args.dump_normal and art.normal is not None:
            print(dump_normal(art.normal))
            print()
        if args.dump_insts and art.trace is not None:
            for line in art.trace.to_json_lines():
                print(json.dumps(line))
        if args.dump_smt and art.script:
            out = Path(args.dump_smt)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{name}.smt2").write_text(art.script)
    print(query_table(reports))
    print()
    print(stats(reports))
    if args.json:
        Path(args.json).write_text(reports_to_json(reports))
    return exit_code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "prove":
            return cmd_prove(args)
        parser.error(f"unknown command {args.command}")
        return 2
    except (ParseError, TypeCheckError) as e:
        print(str(e), file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
