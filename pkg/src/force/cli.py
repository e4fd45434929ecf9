"""Command-line entry points: synth, check, gen-traces, oracle-diff."""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import bounded, formats, protocols
from .errors import ForceError
from .logic import evaluate, format_formula
from .synthesis import RuleSet, brute_force_oracle, synthesize


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _load_spec(args) -> "formats.SearchSpec":
    spec = formats.parse_config(_read(args.config))
    if getattr(args, "no_distinct", False):
        spec = dataclasses.replace(spec, distinct=False)
    return spec


def _load_traces(args, spec) -> list:
    structures = []
    for path in args.traces:
        structures.extend(formats.parse_traces(_read(path), spec))
    return structures


def _rules(args) -> RuleSet:
    return RuleSet(
        blocking=not getattr(args, "no_blocking", False),
        dnf_modulo_clauses=not getattr(args, "no_dnf_modulo", False),
    )


def _cmd_synth(args) -> int:
    spec = _load_spec(args)
    structures = _load_traces(args, spec)
    result = synthesize(spec, structures, _rules(args), threads=args.threads)
    if args.format == "filter":
        _write(args.out, formats.export_clause_filter(result.phi_c))
    else:
        _write(args.out, formats.render_formulas(result.formulas))
    if args.stats:
        _write(args.stats, formats.render_stats(result.stats))
    totals = result.stats.totals()
    print(
        f"synth: {len(result.phi_c)} clauses + {len(result.phi_f)} formulas "
        f"({totals.tested} candidates tested, {result.stats.raw_candidates} raw) -> {args.out}"
    )
    return 0


def _cmd_check(args) -> int:
    spec = _load_spec(args)
    structures = _load_traces(args, spec)
    formulas = formats.parse_formulas(_read(args.formulas), spec)
    if not formulas:
        print("warning: formula document is empty", file=sys.stderr)
        return 0
    all_ok = True
    for f in formulas:
        failed = None
        for i, m in enumerate(structures):
            if not evaluate(f, m):
                failed = i
                break
        if failed is None:
            print(f"ok    {format_formula(f)}")
        else:
            all_ok = False
            print(f"FAIL  {format_formula(f)}  (sample {failed})")
    return 0 if all_ok else 1


_DEFAULT_UNIVERSES = {"lockserv": {"node": 2, "lock": 1}, "toy": {"X": 3}}


def _cmd_gen_traces(args) -> int:
    sizes = dict(_DEFAULT_UNIVERSES.get(args.protocol, {}))
    for item in args.universe or ():
        name, _, num = item.partition("=")
        if not num.isdigit() or int(num) < 1:
            raise ForceError(f"bad --universe {item!r}, expected sort=N")
        sizes[name] = int(num)
    doc = protocols.gen_traces(
        args.protocol, sizes, args.steps, args.samples, args.seed, args.density
    )
    _write(args.out, doc)
    print(f"gen-traces: {args.samples} samples of {args.protocol} -> {args.out}")
    return 0


def _cmd_oracle_diff(args) -> int:
    spec = _load_spec(args)
    structures = _load_traces(args, spec)
    result = synthesize(spec, structures, _rules(args), threads=args.threads)
    oracle_bound = None
    if args.universe_bound is not None:
        oracle_bound = [args.universe_bound] * len(spec.signature.sorts)
    oracle = brute_force_oracle(
        spec, structures, universe_bound=oracle_bound, guard=args.guard
    )
    # Compare conjunctions where weakening-based pruning is sound: per-sort
    # sizes from the variable budget up to the bound.
    uppers = (
        oracle_bound
        if oracle_bound is not None
        else [b + 1 for b in spec.var_budget]
    )
    combos = [
        tuple(c)
        for c in itertools.product(
            *(range(max(b, 1), max(u, max(b, 1)) + 1) for b, u in zip(spec.var_budget, uppers))
        )
    ]
    mismatch = bounded.conjunctions_equivalent(result.formulas, oracle, combos)
    print(f"synthesis output: {len(result.formulas)} formulas")
    print(f"oracle output:    {len(oracle)} formulas")
    if mismatch is None:
        print("equivalent: the output conjunctions agree on all compared structures")
        return 0
    direction, member, witness = mismatch
    print(f"MISMATCH ({direction}): {format_formula(member)}")
    print(f"witness universe sizes: {witness.sizes}")
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="force",
        description="Synthesize the entailment-maximal satisfied prenex-DNF formulas "
        "of a bounded first-order search space from finite structures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_pruning_flags=True):
        p.add_argument("--config", required=True, help="search-space config file")
        p.add_argument("--traces", required=True, action="append", help="trace file (repeatable)")
        p.add_argument("--no-distinct", action="store_true", help="standard FOL semantics")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: $FORCE_THREADS or 1)")
        if with_pruning_flags:
            p.add_argument("--no-dnf-modulo", action="store_true", help=argparse.SUPPRESS)
            p.add_argument("--no-blocking", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("synth", help="synthesize satisfied formulas")
    add_common(p)
    p.add_argument("--out", required=True, help="output document path")
    p.add_argument("--format", choices=("text", "filter"), default="text")
    p.add_argument("--stats", default=None, help="write run statistics here")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("check", help="re-verify formulas against traces")
    add_common(p, with_pruning_flags=False)
    p.add_argument("--formulas", required=True, help="formula document to check")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("gen-traces", help="sample protocol traces")
    p.add_argument("--protocol", required=True, help="lockserv or toy")
    p.add_argument("--universe", action="append", help="sort=N (repeatable)")
    p.add_argument("--steps", type=int, default=20, help="steps per episode (0: initial state only)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=0.5, help="tuple density for the toy sampler")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_traces)

    p = sub.add_parser("oracle-diff", help="differential test against the brute-force baseline")
    add_common(p)
    p.add_argument("--universe-bound", type=int, default=None, help="uniform per-sort size bound")
    p.add_argument("--guard", type=int, default=500_000, help="oracle raw-candidate guard")
    p.set_defaults(func=_cmd_oracle_diff)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ForceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
