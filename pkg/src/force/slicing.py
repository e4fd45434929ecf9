"""Search-space slicing: the clause/non-clause split, the precedence order on
slices with topological scheduling, and the clause-derived candidate filter
for the non-clause space."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .errors import ForceError
from .logic import (
    Formula,
    Literal,
    Variable,
    canonical_clause,
    entails_syntactic,
)
from .space import SearchSpec, SlicedTemplate, SliceParams


@dataclass(frozen=True)
class ClauseSet:
    """Satisfied clause formulas, pairwise non-entailing."""

    clauses: tuple[Formula, ...]

    def __iter__(self):
        return iter(self.clauses)

    def __len__(self) -> int:
        return len(self.clauses)


def split_clause_dnf(
    slices: Sequence[SlicedTemplate],
) -> tuple[tuple[SlicedTemplate, ...], tuple[SlicedTemplate, ...]]:
    """Partition slices into the clause space (every cube a singleton) and the
    remaining non-clause DNF space."""
    clause = tuple(t for t in slices if t.params.is_clause_shape)
    dnf = tuple(t for t in slices if not t.params.is_clause_shape)
    return clause, dnf


def _t_lits_precedes(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    """An injection from a's cube slots into b's with per-slot size >= target
    exists iff, sorted, every prefix entry of b is dominated; deleted literals
    shrink matched cubes and unmatched b slots are added cubes."""
    if len(a) > len(b):
        return False
    return all(b[k] <= a[k] for k in range(len(a)))


def params_precede(a: SliceParams, b: SliceParams) -> bool:
    """Strict precedence: a's formulas weaken into b's space (a is the
    stronger slice and is scheduled earlier)."""
    if a == b:
        return False
    return (
        a.n_exists <= b.n_exists
        and all(x <= y for x, y in zip(a.t_vars, b.t_vars))
        and _t_lits_precedes(a.t_lits, b.t_lits)
    )


@dataclass(frozen=True)
class SliceOrder:
    slices: tuple[SlicedTemplate, ...]
    edges: frozenset[tuple[SliceParams, SliceParams]]


def slice_order(slices: Sequence[SlicedTemplate]) -> SliceOrder:
    edges = set()
    for a, b in itertools.permutations(slices, 2):
        if params_precede(a.params, b.params):
            edges.add((a.params, b.params))
    return SliceOrder(tuple(slices), frozenset(edges))


def schedule_slices(slices: Sequence[SlicedTemplate]) -> list[list[SlicedTemplate]]:
    """Topological levels of the precedence order: strong (minimal) slices
    first, slices within a level pairwise incomparable, deterministic order
    within each level."""
    order = slice_order(slices)
    remaining = {t.params: t for t in slices}
    preds: dict[SliceParams, set[SliceParams]] = {p: set() for p in remaining}
    for a, b in order.edges:
        preds[b].add(a)
    levels: list[list[SlicedTemplate]] = []
    while remaining:
        ready = sorted(
            (p for p, pre in preds.items() if p in remaining and not pre & remaining.keys()),
            key=lambda p: p.key,
        )
        if not ready:
            raise ForceError("cycle in the slice precedence order")
        levels.append([remaining[p] for p in ready])
        for p in ready:
            del remaining[p]
    return levels


# ---------------------------------------------------------------------------
# The clause-derived filter on non-clause candidates


class ClauseFilter:
    """Admits a non-clause candidate only when every clause it entails (one
    literal per cube, prefix restricted to the used variables) is entailed by
    a known satisfied clause; tautological derived clauses pass trivially.

    With the complete set of satisfied clauses this is exact: rejected
    candidates are unsatisfied on some input structure.
    """

    def __init__(self, satisfied_clauses: Iterable[Formula], spec: SearchSpec) -> None:
        self._clauses = list(satisfied_clauses)
        self._spec = spec
        self._verdicts: dict = {}  # raw selection key -> bool
        # Group members by coarse keys for a cheap entailment prefilter.
        self._by_member = [
            (m, m.var_counts, m.n_exists, len(m.matrix)) for m in self._clauses
        ]

    def _derived_satisfied(self, derived: Optional[Formula]) -> bool:
        if derived is None:
            return True  # tautological selection
        verdict = False
        dvc, dne, dlen = derived.var_counts, derived.n_exists, len(derived.matrix)
        distinct = derived.distinct
        for m, vc, ne, mlen in self._by_member:
            if ne > dne:
                continue
            if distinct and (mlen > dlen or any(a > b for a, b in zip(vc, dvc))):
                # Injective substitutions cannot shrink variable or literal
                # counts; with merging (distinct off) they can.
                continue
            if entails_syntactic(m, derived):
                verdict = True
                break
        return verdict

    def admits(self, candidate: Formula) -> bool:
        quants = {v: q for v, q in candidate.prefix}
        sig = candidate.signature
        for selection in itertools.product(*(c.lits for c in candidate.matrix)):
            lit_keys = frozenset(l.key for l in selection)
            used = {v for l in selection for v in l.args}
            quant_key = tuple(sorted((v.key, quants[v]) for v in used))
            key = (lit_keys, quant_key)
            verdict = self._verdicts.get(key)
            if verdict is None:
                derived = canonical_clause(sig, quants, selection, candidate.distinct)
                verdict = self._derived_satisfied(derived)
                self._verdicts[key] = verdict
            if not verdict:
                return False
        return True

    __call__ = admits


def dnf_candidate_filter(
    satisfied_clauses: Iterable[Formula], spec: SearchSpec
) -> ClauseFilter:
    return ClauseFilter(satisfied_clauses, spec)
