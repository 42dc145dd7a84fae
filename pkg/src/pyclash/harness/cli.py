"""Command line interface: ``pyclash {generate,run,summarize,plot,theory,project}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace

import numpy as np

from ..core import InfeasibleModelError, generate_instance
from ..projections import ClusteredChainModel, PartitionBudgetModel, UniformModel, project
from ..theory import IsometryTriple, convergence_constants, recursion_bound
from .experiment import (
    METHODS,
    PRESETS,
    WORKERS_ENV,
    ExperimentSpec,
    parse_config,
    records_from_csv,
    records_to_csv,
    run_experiment,
    summarize,
    summary_from_csv,
    summary_to_csv,
)
from .files import read_vector, write_instance, write_vector
from .plot import emit_plot

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("pyclash")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_model_args(p, with_n=False):
    if with_n:
        p.add_argument("--n", type=int, required=True)
    p.add_argument("--model", choices=("uniform", "clustered", "partition"), default="uniform")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--C", type=int, default=5, help="run length for the clustered model")
    p.add_argument("--blocks", type=int, default=10, help="block count for the partition model")
    p.add_argument("--budget", type=int, default=0,
                   help="per-block budget for the partition model (default ceil(k / blocks))")


def _model_from_args(args, n):
    if args.model == "uniform":
        return UniformModel(args.k)
    if args.model == "clustered":
        return ClusteredChainModel(args.k, args.C)
    budget = args.budget or -(-args.k // args.blocks)
    return PartitionBudgetModel.contiguous(n, args.blocks, budget, args.k)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pyclash",
        description="Structured sparse recovery experiments (CLASH, model-SP, LASSO).",
        epilog=(f"Exit codes: 0 ok, 1 usage error, 2 infeasible spec, 3 I/O failure. "
                f"{WORKERS_ENV} sets the default worker count for `run`. "
                "Basis pursuit denoising is not part of the method set."),
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write one random instance as CSV files")
    g.add_argument("--m", type=int, required=True)
    _add_model_args(g, with_n=True)
    g.add_argument("--noise", type=float, default=0.0, help="exact noise energy ||e||_2")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("run", help="run a Monte Carlo sweep",
                       description="Methods: " + ", ".join(METHODS) + " (no BPDN).")
    r.add_argument("--config", help="key = value experiment file")
    r.add_argument("--preset", choices=sorted(PRESETS))
    for f in fields(ExperimentSpec):
        r.add_argument(f"--{f.name.replace('_', '-')}", dest=f"set_{f.name}", default=None,
                       metavar="VALUE")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--timings", action="store_true", help="include wall times in the records")
    r.add_argument("--out", required=True, help="records CSV")
    r.add_argument("--summary", help="also write the summary table here")
    r.add_argument("--plot", help="also write an SVG plot here")

    s = sub.add_parser("summarize", help="records CSV to median table")
    s.add_argument("records")
    s.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="median table to SVG")
    p.add_argument("summary")
    p.add_argument("--out", required=True)

    t = sub.add_parser("theory", help="evaluate convergence constants")
    t.add_argument("--delta-k", type=float, default=None)
    t.add_argument("--delta-2k", type=float, required=True)
    t.add_argument("--delta-3k", type=float, required=True)
    t.add_argument("--epsilon", type=float, default=0.0)
    t.add_argument("--err-prev", type=float, default=None,
                   help="relative error ||x_i - x*|| / ||x*||; prints the one-step bound")
    t.add_argument("--snr", type=float, default=None, help="||x*|| / ||noise||")

    pr = sub.add_parser("project", help="project a vector file onto a sparsity model")
    pr.add_argument("vector")
    _add_model_args(pr)
    pr.add_argument("--out", required=True)
    return parser


def _read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _cmd_generate(args):
    model = _model_from_args(args, args.n)
    inst = generate_instance(args.n, args.m, args.k, model, args.noise, "exact", args.seed)
    write_instance(args.out, inst, {"model": args.model, "k": args.k})
    print(f"wrote instance to {args.out}")


def _spec_from_args(args):
    spec = ExperimentSpec()
    if args.preset:
        spec = replace(spec, **PRESETS[args.preset])
    if args.config:
        spec = parse_config(_read_text(args.config), spec)
    overrides = [f"{f.name} = {getattr(args, 'set_' + f.name)}" for f in fields(ExperimentSpec)
                 if getattr(args, "set_" + f.name) is not None]
    if overrides:
        spec = parse_config("\n".join(overrides), spec)
    return spec


def _cmd_run(args):
    try:
        spec = _spec_from_args(args)
    except ValueError as exc:
        if isinstance(exc, InfeasibleModelError):
            raise
        raise UsageError(str(exc)) from exc
    records = run_experiment(spec, args.workers)
    _write_text(args.out, records_to_csv(records, timings=args.timings))
    rows = summarize(records)
    if args.summary:
        _write_text(args.summary, summary_to_csv(rows))
    if args.plot:
        emit_plot(rows, args.plot)
    print(summary_to_csv(rows), end="")


def _cmd_summarize(args):
    records = records_from_csv(_read_text(args.records))
    try:
        rows = summarize(records)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write_text(args.out, summary_to_csv(rows))


def _cmd_plot(args):
    rows = summary_from_csv(_read_text(args.summary))
    try:
        emit_plot(rows, args.out)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _cmd_theory(args):
    try:
        dk = args.delta_2k if args.delta_k is None else args.delta_k
        iso = IsometryTriple(min(dk, args.delta_2k), args.delta_2k, args.delta_3k, args.epsilon)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    c = convergence_constants(iso)
    for name in ("rho", "c1", "c2", "c3", "D1", "D2", "D3", "D4", "D5"):
        print(f"{name} = {getattr(c, name)!r}")
    print(f"contracts = {c.rho < 1}")
    if args.err_prev is not None:
        noise = 0.0 if args.snr is None else 1.0 / args.snr
        print(f"bound = {recursion_bound(iso, args.err_prev, noise, 1.0)!r}")


def _cmd_project(args):
    x = read_vector(args.vector)
    model = _model_from_args(args, x.size)
    xp, support = project(x, model)
    write_vector(args.out, xp)
    print("support = " + ",".join(map(str, support.indices)))


COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "summarize": _cmd_summarize,
    "plot": _cmd_plot,
    "theory": _cmd_theory,
    "project": _cmd_project,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"pyclash: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleModelError as exc:
        print(f"pyclash: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"pyclash: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"pyclash: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
