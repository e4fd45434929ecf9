"""The bounded search space and per-slice enumeration of canonical formulas.

A slice fixes the exact number of existentials, the exact per-sort counts of
used variables, and the exact sorted tuple of cube sizes; together the slices
partition the space of canonical formulas.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Iterable, Iterator, Optional, Sequence

from .errors import SignatureError
from .logic import (
    EXISTS,
    FORALL,
    Cube,
    Formula,
    Literal,
    Signature,
    Variable,
)


@dataclass(frozen=True)
class SearchSpec:
    signature: Signature
    var_budget: tuple[int, ...]  # per sort, in sort order
    max_literal: int
    max_or: int
    max_and: int
    max_exists: int
    distinct: bool = True

    def __post_init__(self) -> None:
        if len(self.var_budget) != len(self.signature.sorts):
            raise SignatureError("one variable budget per sort required")
        if any(b < 0 for b in self.var_budget) or sum(self.var_budget) < 1:
            raise ValueError("variable budgets must be non-negative and not all zero")
        for name, value in (
            ("max-literal", self.max_literal),
            ("max-or", self.max_or),
            ("max-and", self.max_and),
        ):
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if self.max_exists < 0:
            raise ValueError("max-exists must be >= 0")
        if self.max_literal > self.max_and * self.max_or:
            raise ValueError("max-literal exceeds max-and * max-or")


@dataclass(frozen=True)
class SliceParams:
    n_exists: int
    t_vars: tuple[int, ...]
    t_lits: tuple[int, ...]  # non-decreasing

    @property
    def key(self) -> tuple:
        return (self.n_exists, self.t_vars, self.t_lits)

    @property
    def is_clause_shape(self) -> bool:
        return all(n == 1 for n in self.t_lits)


@dataclass(frozen=True)
class SlicedTemplate:
    spec: SearchSpec
    params: SliceParams


def formula_params(f: Formula) -> SliceParams:
    """The unique slice parameters a canonical formula belongs to."""
    return SliceParams(f.n_exists, f.var_counts, f.cube_sizes)


def atoms_for(spec: SearchSpec, t_vars: Sequence[int]) -> list[tuple]:
    """All (relation, argument-tuple) atoms over exactly the first t_vars
    variables of each sort, sorted by literal order."""
    sig = spec.signature
    pools = {
        s.index: [Variable(s, i) for i in range(t_vars[s.index])] for s in sig.sorts
    }
    atoms = []
    for r in sig.relations:
        arg_pools = [pools[s.index] for s in r.arg_sorts]
        if any(not p for p in arg_pools):
            continue
        for combo in itertools.product(*arg_pools):
            atoms.append((r, tuple(combo)))
    atoms.sort(key=lambda a: (a[0].index, tuple(v.key for v in a[1])))
    return atoms


def _t_lits_tuples(spec: SearchSpec) -> list[tuple[int, ...]]:
    out = []

    def rec(prefix: tuple[int, ...], last: int, total: int) -> None:
        if prefix:
            out.append(prefix)
        if len(prefix) == spec.max_or:
            return
        for n in range(last, spec.max_and + 1):
            if total + n > spec.max_literal:
                break
            rec(prefix + (n,), n, total + n)

    rec((), 1, 0)
    return out


def enumerate_params(spec: SearchSpec) -> tuple[SliceParams, ...]:
    """Budget-feasible slice parameters: the Cartesian product of existential
    counts, per-sort variable counts and cube-size tuples, minus combinations
    that cannot produce any formula (no atoms, or more same-size cubes than
    distinct cubes exist)."""
    sig = spec.signature
    var_ranges = [range(b + 1) for b in spec.var_budget]
    params = []
    for t_vars in itertools.product(*var_ranges):
        if sum(t_vars) == 0:
            continue
        atoms = atoms_for(spec, t_vars)
        if not atoms:
            continue
        # Every sort with variables must be mentionable by some atom.
        used_sorts = {s.index for (r, args) in atoms for s in r.arg_sorts}
        if any(n > 0 and i not in used_sorts for i, n in enumerate(t_vars)):
            continue
        n_atoms = len(atoms)
        for t_lits in _t_lits_tuples(spec):
            sizes = {}
            for n in t_lits:
                sizes[n] = sizes.get(n, 0) + 1
            if any(n > n_atoms for n in sizes):
                continue
            if any(count > comb(n_atoms, n) * 2**n for n, count in sizes.items()):
                continue
            for n_exists in range(min(spec.max_exists, sum(t_vars)) + 1):
                params.append(SliceParams(n_exists, tuple(t_vars), t_lits))
    params.sort(key=lambda p: p.key)
    return tuple(params)


def slices_of(spec: SearchSpec) -> tuple[SlicedTemplate, ...]:
    return tuple(SlicedTemplate(spec, p) for p in enumerate_params(spec))


def slice_size_upper_bound(t: SlicedTemplate) -> int:
    """Product of per-cube literal-set choices times quantifier choices; an
    upper bound on (and for single-cube slices, the raw preimage of) the
    canonical count."""
    atoms = atoms_for(t.spec, t.params.t_vars)
    n_atoms = len(atoms)
    total = 1
    for n in t.params.t_lits:
        total *= comb(n_atoms, n) * 2**n
    return total * comb(sum(t.params.t_vars), t.params.n_exists)


def raw_candidate_count(spec: SearchSpec) -> int:
    """Pre-canonicalization candidate count: the sum of slice upper bounds."""
    return sum(slice_size_upper_bound(t) for t in slices_of(spec))


# ---------------------------------------------------------------------------
# Enumeration


def _as_blocker(blocked: object):
    """Accept a PruningStore, anything with .blocks, or a plain collection."""
    from .logic import EntailmentBlocker

    if blocked is None:
        return None
    if hasattr(blocked, "snapshot"):
        return EntailmentBlocker(blocked.snapshot())
    if hasattr(blocked, "blocks"):
        return blocked
    return EntailmentBlocker(list(blocked))


def _cube_pool(atoms: Sequence[tuple], size: int) -> list[Cube]:
    """All cubes of `size` distinct atoms with all polarity choices, sorted by
    (min literal, full key)."""
    cubes = []
    for atom_combo in itertools.combinations(atoms, size):
        for negs in itertools.product((False, True), repeat=size):
            lits = tuple(
                sorted(
                    (Literal(r, args, n) for (r, args), n in zip(atom_combo, negs)),
                    key=lambda l: l.key,
                )
            )
            cubes.append(Cube(lits))
    cubes.sort(key=lambda c: c.key)
    return cubes


def _matrices(t: SlicedTemplate) -> Iterator[tuple[Cube, ...]]:
    """Matrices with exactly the slice's cube sizes, in canonical cube order,
    no duplicate or superset cubes, covering all slice variables, and obeying
    the variable/relation order rule."""
    atoms = atoms_for(t.spec, t.params.t_vars)
    t_lits = t.params.t_lits
    sizes = sorted(set(t_lits))
    pools = {n: _cube_pool(atoms, n) for n in sizes}
    group_counts = [(n, sum(1 for m in t_lits if m == n)) for n in sizes]

    all_var_keys = {
        (s.index, i)
        for s in t.spec.signature.sorts
        for i in range(t.params.t_vars[s.index])
    }

    def group_choices(n: int, count: int) -> Iterator[tuple[Cube, ...]]:
        pool = pools[n]
        if count == 1:
            for c in pool:
                yield (c,)
            return
        for combo in itertools.combinations(pool, count):
            # Equal-size cubes need strictly increasing minimal literals.
            ok = True
            for a, b in zip(combo, combo[1:]):
                if a.lits[0].key >= b.lits[0].key:
                    ok = False
                    break
            if ok:
                yield combo

    for parts in itertools.product(*(group_choices(n, c) for n, c in group_counts)):
        matrix: tuple[Cube, ...] = tuple(itertools.chain.from_iterable(parts))
        if len(t_lits) > 1:
            if _has_subset_pair(matrix):
                continue
            if _is_singleton_tautology(matrix):
                continue
        used = {vk for c in matrix for _, args, _ in c.key for vk in args}
        if used != all_var_keys:
            continue
        if not _min_rel_order_ok(matrix, t.params.t_vars, t.spec.signature):
            continue
        yield matrix


def _has_subset_pair(matrix: Sequence[Cube]) -> bool:
    for i, c in enumerate(matrix):
        for d in matrix[i + 1 :]:
            if len(c) < len(d) and c.key_set < d.key_set:
                return True
    return False


def _is_singleton_tautology(matrix: Sequence[Cube]) -> bool:
    singles = {c.key[0] for c in matrix if len(c) == 1}
    return any((rel, args, not neg) in singles for rel, args, neg in singles)


def _min_rel_order_ok(
    matrix: Sequence[Cube], t_vars: Sequence[int], sig: Signature
) -> bool:
    min_rel: dict[tuple, int] = {}
    for c in matrix:
        for rel, args, _ in c.key:
            for vk in args:
                r = min_rel.get(vk)
                if r is None or rel < r:
                    min_rel[vk] = rel
    for s in sig.sorts:
        si = s.index
        for i in range(t_vars[si] - 1):
            if min_rel[(si, i)] > min_rel[(si, i + 1)]:
                return False
    return True


def generate_slice(t: SlicedTemplate) -> list[Formula]:
    """All canonical formulas of the slice (no dynamic pruning), sorted by
    canonical encoding."""
    sig = t.spec.signature
    variables = sorted(
        (
            Variable(s, i)
            for s in sig.sorts
            for i in range(t.params.t_vars[s.index])
        ),
        key=lambda v: v.key,
    )
    quant_choices = []
    for exist_set in itertools.combinations(range(len(variables)), t.params.n_exists):
        chosen = set(exist_set)
        quant_choices.append(
            tuple(
                (v, EXISTS if i in chosen else FORALL) for i, v in enumerate(variables)
            )
        )
    out = []
    for matrix in _matrices(t):
        for prefix in quant_choices:
            out.append(Formula(sig, prefix, matrix, t.spec.distinct))
    out.sort(key=lambda f: f.sort_key)
    return out


def enumerate_slice(
    t: SlicedTemplate, blocked: Optional[object] = None
) -> Iterator[Formula]:
    """Canonical formulas of the slice not entailed by any formula in
    `blocked` (a PruningStore, a PruningStore snapshot, or a plain formula
    collection), each exactly once, in deterministic order."""
    blocker = _as_blocker(blocked)
    for f in generate_slice(t):
        if blocker is not None and blocker.blocks(f):
            continue
        yield f
