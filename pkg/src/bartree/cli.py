"""Command line: ``bartree {limits,simulate,estimate,verify}``.

Exit codes: 0 success, 1 I/O or parse failure, 2 domain or validation failure,
3 internal-consistency failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import config as cfg
from .errors import BarError, ConsistencyError, InstabilityError
from .estimate import estimate
from .limits import assemble
from .model import check_stable
from .montecarlo import ReplicateError, run_experiment
from .seeding import derive_seed
from .simulate import TreeFormatError, atomic_write_text, read_tree_csv, simulate_tree, write_tree_csv

EXIT_OK = 0
EXIT_IO = 1
EXIT_DOMAIN = 2
EXIT_CONSISTENCY = 3


def dumps(doc) -> str:
    # json writes floats with repr, the shortest string that round-trips
    return json.dumps(doc, indent=2) + "\n"


def cmd_limits(args) -> int:
    doc = cfg.load_document(args.config)
    cfg.check_top_level(doc)
    params = cfg.parse_params(doc)
    spec = cfg.parse_spec(doc)
    report = check_stable(params, doc.get("max_depth", 8))
    limits = assemble(params, spec.moments)
    out = {"params": params.to_dict(), "moments": spec.moments.to_dict(), **limits.to_dict()}
    out["stability"] = report.to_dict()
    _emit(dumps(out), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = cfg.load_document(args.config)
    cfg.check_top_level(doc)
    params = cfg.parse_params(doc)
    spec = cfg.parse_spec(doc)
    init = cfg.parse_init(doc)
    n = cfg.n_generations(doc)
    seed = derive_seed(cfg.master_seed(doc), 0)
    sample = simulate_tree(params, spec, init, n, seed, allow_unstable=args.unsafe_allow_unstable)
    write_tree_csv(sample, args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    sample = read_tree_csv(args.tree, args.p)
    result = estimate(sample, args.n, sequential=args.sequential)
    _emit(dumps(result.to_dict()), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = cfg.load_document(args.config)
    config = cfg.parse_experiment(doc)
    jobs = args.jobs or os.cpu_count() or 1
    report = run_experiment(config, jobs=jobs)
    _emit(dumps(report.to_dict()), args.out)
    if args.emit_replicates is not None:
        target = args.emit_replicates or _replicates_path(args.out)
        atomic_write_text(target, report.replicate_csv())
    for check in report.checks:
        print(f"{check.name}: {check.verdict}", file=sys.stderr)
    return EXIT_OK


def _replicates_path(out) -> Path:
    if out is None:
        return Path("replicates.csv")
    out = Path(out)
    return out.with_name(out.stem + ".replicates.csv")


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bartree", description="Simulate, estimate and verify BAR(p) processes on binary trees."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("limits", help="print the limit objects for a parameter set")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write the document here instead of standard output")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("simulate", help="simulate one tree to a node_id,x CSV file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--unsafe-allow-unstable", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="least-squares estimates from a tree CSV file")
    p.add_argument("tree")
    p.add_argument("--p", type=int, required=True, help="autoregressive order")
    p.add_argument("--n", type=int, default=None, help="generations to use (default: all)")
    p.add_argument("--sequential", action="store_true",
                   help="residuals of generation l use the estimate from generations up to l")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="run a seeded Monte Carlo verification experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="report path (default: standard output)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--emit-replicates", nargs="?", const="", default=None, metavar="PATH",
                   help="also write per-replicate statistics as CSV")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            sys.stderr.write(dumps({"stability": exc.report.to_dict()}))
        return EXIT_DOMAIN
    except (cfg.ConfigParseError, TreeFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ReplicateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY if isinstance(exc.__cause__, ConsistencyError) else EXIT_DOMAIN
    except ConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except BarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
