"""Core first-order machinery: signatures, prenex-DNF formulas, finite
structures, evaluation, the syntactic weakening relation, and canonical forms.

Everything here is immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Optional, Sequence

from . import backend
from .errors import SignatureError

FORALL = "forall"
EXISTS = "exists"

VarKey = tuple[int, int]  # (sort index, variable index)


@dataclass(frozen=True)
class Sort:
    name: str
    index: int


@dataclass(frozen=True)
class Relation:
    name: str
    arg_sorts: tuple[Sort, ...]
    index: int

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)


@dataclass(frozen=True)
class Signature:
    sorts: tuple[Sort, ...]
    relations: tuple[Relation, ...]

    def __post_init__(self) -> None:
        names = [s.name for s in self.sorts]
        if len(set(names)) != len(names):
            raise SignatureError(f"duplicate sort names: {names}")
        for i, s in enumerate(self.sorts):
            if s.index != i:
                raise SignatureError(f"sort {s.name} has index {s.index}, expected {i}")
        rnames = [r.name for r in self.relations]
        if len(set(rnames)) != len(rnames):
            raise SignatureError(f"duplicate relation names: {rnames}")
        for i, r in enumerate(self.relations):
            if r.index != i:
                raise SignatureError(f"relation {r.name} has index {r.index}, expected {i}")
            if r.arity < 1:
                raise SignatureError(f"relation {r.name} must have arity >= 1")
            for s in r.arg_sorts:
                if s not in self.sorts:
                    raise SignatureError(f"relation {r.name} uses unknown sort {s.name}")

    def sort(self, name: str) -> Sort:
        for s in self.sorts:
            if s.name == name:
                return s
        raise SignatureError(f"unknown sort {name!r}")

    def relation(self, name: str) -> Relation:
        for r in self.relations:
            if r.name == name:
                return r
        raise SignatureError(f"unknown relation {name!r}")

    def digest(self) -> str:
        text = ";".join(f"{s.name}" for s in self.sorts)
        text += "|" + ";".join(
            f"{r.name}({','.join(a.name for a in r.arg_sorts)})" for r in self.relations
        )
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def make_signature(
    sorts: Sequence[str], relations: Sequence[tuple[str, Sequence[str]]]
) -> Signature:
    """Convenience builder from plain names, in declaration order."""
    sort_objs = tuple(Sort(n, i) for i, n in enumerate(sorts))
    by_name = {s.name: s for s in sort_objs}
    rel_objs = []
    for i, (rname, args) in enumerate(relations):
        try:
            arg_objs = tuple(by_name[a] for a in args)
        except KeyError as e:
            raise SignatureError(f"relation {rname} uses unknown sort {e.args[0]!r}") from None
        rel_objs.append(Relation(rname, arg_objs, i))
    return Signature(sort_objs, tuple(rel_objs))


@dataclass(frozen=True)
class Variable:
    sort: Sort
    idx: int

    @property
    def key(self) -> VarKey:
        return (self.sort.index, self.idx)


@dataclass(frozen=True)
class Literal:
    rel: Relation
    args: tuple[Variable, ...]
    negated: bool

    def __post_init__(self) -> None:
        if len(self.args) != self.rel.arity:
            raise SignatureError(f"{self.rel.name} expects {self.rel.arity} arguments")
        for v, s in zip(self.args, self.rel.arg_sorts):
            if v.sort != s:
                raise SignatureError(
                    f"{self.rel.name}: argument of sort {v.sort.name}, expected {s.name}"
                )

    @cached_property
    def key(self) -> tuple:
        # Total order: relation, argument tuple, negative after positive.
        return (self.rel.index, tuple(v.key for v in self.args), self.negated)

    def negate(self) -> "Literal":
        return Literal(self.rel, self.args, not self.negated)

    def substitute(self, theta: Mapping[Variable, Variable]) -> "Literal":
        return Literal(self.rel, tuple(theta[v] for v in self.args), self.negated)


@dataclass(frozen=True)
class Cube:
    """A conjunction of literals, stored sorted by literal order."""

    lits: tuple[Literal, ...]

    @cached_property
    def key(self) -> tuple:
        return tuple(l.key for l in self.lits)

    @cached_property
    def lit_set(self) -> frozenset[Literal]:
        return frozenset(self.lits)

    @cached_property
    def key_set(self) -> frozenset:
        return frozenset(self.key)

    def __len__(self) -> int:
        return len(self.lits)


def cube_of(literals: Iterable[Literal]) -> Optional[Cube]:
    """Sorted, deduplicated cube; None when it contains a literal and its negation."""
    lits = sorted(set(literals), key=lambda l: l.key)
    atoms = set()
    for l in lits:
        if (l.rel, l.args) in atoms:
            return None
        atoms.add((l.rel, l.args))
    return Cube(tuple(lits))


@dataclass(frozen=True)
class Formula:
    """Prenex formula with a DNF matrix, in canonical form by convention.

    Use canonicalize()/normalize_formula() to build one from raw parts; the
    constructor itself does not validate canonicity.
    """

    signature: Signature
    prefix: tuple[tuple[Variable, str], ...]
    matrix: tuple[Cube, ...]
    distinct: bool

    @cached_property
    def sort_key(self) -> tuple:
        pref = tuple((v.sort.index, v.idx, q == EXISTS) for v, q in self.prefix)
        return (pref, tuple(c.key for c in self.matrix))

    @cached_property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(v for v, _ in self.prefix)

    @cached_property
    def n_exists(self) -> int:
        return sum(1 for _, q in self.prefix if q == EXISTS)

    @cached_property
    def var_counts(self) -> tuple[int, ...]:
        counts = [0] * len(self.signature.sorts)
        for v, _ in self.prefix:
            counts[v.sort.index] += 1
        return tuple(counts)

    @cached_property
    def cube_sizes(self) -> tuple[int, ...]:
        return tuple(sorted(len(c) for c in self.matrix))

    @cached_property
    def cube_masks(self) -> tuple[int, ...]:
        """Per-cube bitmask over (relation, polarity); substitutions preserve
        it, so masks give a cheap necessary condition for weakening."""
        masks = []
        for c in self.matrix:
            m = 0
            for l in c.lits:
                m |= 1 << (l.rel.index * 2 + (1 if l.negated else 0))
            masks.append(m)
        return tuple(masks)

    @cached_property
    def cube_key_lists(self) -> tuple[tuple[tuple, ...], ...]:
        """Literal keys per cube; the weakening search works on these plain
        tuples instead of literal objects."""
        return tuple(tuple(l.key for l in c.lits) for c in self.matrix)

    @cached_property
    def cube_key_sets(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(keys) for keys in self.cube_key_lists)

    @property
    def is_clause(self) -> bool:
        return all(len(c) == 1 for c in self.matrix)

    def quantifier(self, v: Variable) -> str:
        for u, q in self.prefix:
            if u == v:
                return q
        raise KeyError(v)

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class Structure:
    """A finite model: per-sort universe sizes and true ground tuples."""

    signature: Signature
    sizes: tuple[int, ...]
    interp: tuple[frozenset[tuple[int, ...]], ...]

    def __post_init__(self) -> None:
        if len(self.sizes) != len(self.signature.sorts):
            raise SignatureError("one universe size per sort required")
        if any(n < 1 for n in self.sizes):
            raise SignatureError("universe sizes must be >= 1")
        if len(self.interp) != len(self.signature.relations):
            raise SignatureError("one interpretation per relation required")
        for r, tuples in zip(self.signature.relations, self.interp):
            for t in tuples:
                if len(t) != r.arity:
                    raise SignatureError(f"{r.name}: tuple {t} has wrong arity")
                for e, s in zip(t, r.arg_sorts):
                    if not 0 <= e < self.sizes[s.index]:
                        raise SignatureError(f"{r.name}: element {e} outside sort {s.name}")


def make_structure(
    signature: Signature,
    sizes: Mapping[str, int] | Sequence[int],
    tuples: Mapping[str, Iterable[Sequence[int]]],
) -> Structure:
    if isinstance(sizes, Mapping):
        size_tuple = tuple(sizes[s.name] for s in signature.sorts)
    else:
        size_tuple = tuple(sizes)
    interp = []
    for r in signature.relations:
        rows = tuples.get(r.name, ())
        interp.append(frozenset(tuple(row) for row in rows))
    for name in tuples:
        signature.relation(name)  # raises on unknown relation
    return Structure(signature, size_tuple, tuple(interp))


# ---------------------------------------------------------------------------
# Canonical form


def _check_cube_order(cubes: Sequence[Cube]) -> bool:
    for a, b in zip(cubes, cubes[1:]):
        if len(a) > len(b):
            return False
        if len(a) == len(b) and a.lits[0].key >= b.lits[0].key:
            return False
    return True


def _reduce_cubes(raw_cubes: Iterable[Iterable[Literal]]) -> Optional[list[Cube]]:
    """Sort/dedupe literals, drop duplicate and superset cubes.

    Returns None when some cube is contradictory or empty, or no cube remains.
    """
    cubes: list[Cube] = []
    for raw in raw_cubes:
        c = cube_of(raw)
        if c is None or len(c) == 0:
            return None
        cubes.append(c)
    if not cubes:
        return None
    keep: list[Cube] = []
    for i, c in enumerate(cubes):
        redundant = False
        for j, d in enumerate(cubes):
            if i == j:
                continue
            if d.lit_set < c.lit_set:
                redundant = True  # superset of another cube adds nothing to a disjunction
                break
            if d.lit_set == c.lit_set and j < i:
                redundant = True
                break
        if not redundant:
            keep.append(c)
    return keep


def _is_syntactic_tautology(cubes: Sequence[Cube]) -> bool:
    singles = {c.lits[0] for c in cubes if len(c) == 1}
    return any(l.negate() in singles for l in singles)


def _min_rel_ok(cubes: Sequence[Cube], used: Sequence[Variable]) -> bool:
    # For same-sort variables in index order, the minimum relation index where
    # each occurs must be non-decreasing; otherwise a renamed variant of the
    # formula is the canonical one.
    min_rel: dict[Variable, int] = {}
    for c in cubes:
        for l in c.lits:
            for v in l.args:
                r = min_rel.get(v)
                if r is None or l.rel.index < r:
                    min_rel[v] = l.rel.index
    by_sort: dict[int, list[Variable]] = {}
    for v in used:
        by_sort.setdefault(v.sort.index, []).append(v)
    for vs in by_sort.values():
        vs.sort(key=lambda v: v.idx)
        for a, b in zip(vs, vs[1:]):
            if min_rel[a] > min_rel[b]:
                return False
    return True


def canonicalize(
    signature: Signature,
    quants: Iterable[tuple[Variable, str]],
    cubes: Iterable[Iterable[Literal]],
    distinct: bool = True,
) -> Optional[Formula]:
    """Build the canonical Formula from raw parts, or None when rejected.

    Rejections cover: contradiction/empty cubes, the syntactic tautology rule,
    non-canonical cube order, variables used but not quantified, quantified but
    unused, non-contiguous variable indices, and the variable/relation order
    rule. The cube list is reduced (duplicates, supersets) before the order
    checks, so reductions never cause a rejection by themselves.
    """
    quant_map: dict[Variable, str] = {}
    for v, q in quants:
        if q not in (FORALL, EXISTS):
            raise ValueError(f"bad quantifier {q!r}")
        if v.sort not in signature.sorts:
            raise SignatureError(f"variable over unknown sort {v.sort.name}")
        if v in quant_map and quant_map[v] != q:
            raise ValueError(f"variable {v} quantified twice")
        quant_map[v] = q

    raw_list = [list(c) for c in cubes]
    for c in raw_list:
        for l in c:
            if l.rel not in signature.relations:
                raise SignatureError(f"unknown relation {l.rel.name}")
    keep = _reduce_cubes(raw_list)
    if keep is None:
        return None
    if _is_syntactic_tautology(keep):
        return None
    if not _check_cube_order(keep):
        return None

    used_set = {v for c in keep for l in c.lits for v in l.args}
    if used_set - set(quant_map):
        return None  # matrix uses an unquantified variable
    if set(quant_map) - used_set:
        return None  # unused prefix variable belongs to a smaller slice
    used = sorted(used_set, key=lambda v: v.key)
    by_sort: dict[int, list[int]] = {}
    for v in used:
        by_sort.setdefault(v.sort.index, []).append(v.idx)
    for idxs in by_sort.values():
        if idxs != list(range(len(idxs))):
            return None  # non-contiguous indices; the renamed variant is canonical
    if not _min_rel_ok(keep, used):
        return None

    prefix = tuple((v, quant_map[v]) for v in used)
    return Formula(signature, prefix, tuple(keep), distinct)


def normalize_formula(
    signature: Signature,
    quants: Iterable[tuple[Variable, str]],
    cubes: Iterable[Iterable[Literal]],
    distinct: bool = True,
) -> Optional[Formula]:
    """Find the canonical representative of a raw formula, renaming same-sort
    variables and reordering cubes as needed.

    Unlike canonicalize(), which rejects inputs whose symmetric variant is
    canonical, this searches the variable symmetries. Returns None when the
    input is a syntactic tautology, has a contradiction cube, or admits no
    canonical representative.
    """
    keep = _reduce_cubes(list(cubes))
    if keep is None:
        return None
    quant_map = dict(quants)
    used_set = {v for c in keep for l in c.lits for v in l.args}
    if used_set - set(quant_map):
        return None
    # Rename used variables to contiguous indices per sort, preserving order.
    by_sort: dict[int, list[Variable]] = {}
    for v in sorted(used_set, key=lambda v: v.key):
        by_sort.setdefault(v.sort.index, []).append(v)
    base = {v: Variable(v.sort, i) for vs in by_sort.values() for i, v in enumerate(vs)}

    perm_groups = []
    for si in sorted(by_sort):
        k = len(by_sort[si])
        perm_groups.append([p for p in itertools.permutations(range(k))])
    for combo in itertools.product(*perm_groups):
        theta: dict[Variable, Variable] = {}
        for (si, vs), perm in zip(sorted(by_sort.items()), combo):
            for i, v in enumerate(vs):
                theta[v] = Variable(v.sort, perm[i])
        renamed = [[l.substitute(theta) for l in c.lits] for c in keep]
        reduced = _reduce_cubes(renamed)
        if reduced is None:
            return None  # cannot happen: renaming preserves cube structure
        ordered = sorted(reduced, key=lambda c: (len(c), c.key))
        new_quants = [(theta[v], quant_map[v]) for v in used_set]
        f = canonicalize(signature, new_quants, [c.lits for c in ordered], distinct)
        if f is not None:
            return f
    return None


def canonical_clause(
    signature: Signature,
    quants: Mapping[Variable, str],
    literals: Iterable[Literal],
    distinct: bool = True,
) -> Optional[Formula]:
    """Canonical clause (all-singleton matrix) from a literal set.

    Returns None exactly when the literal set is tautological (contains some
    literal and its negation); every non-tautological clause has a canonical
    representative.
    """
    lits = sorted(set(literals), key=lambda l: l.key)
    atoms = {(l.rel, l.args) for l in lits}
    if len(atoms) < len(lits):
        return None
    used = {v for l in lits for v in l.args}
    f = normalize_formula(
        signature, [(v, quants[v]) for v in used], [[l] for l in lits], distinct
    )
    assert f is not None, "non-tautological clause must have a canonical form"
    return f


def is_tautology(f: Formula) -> bool:
    """Syntactic tautology rule: complementary singleton cubes or an empty cube.

    Sound but incomplete; semantic tautologies without this shape are not
    flagged.
    """
    if any(len(c) == 0 for c in f.matrix):
        return True
    return _is_syntactic_tautology(f.matrix)


# ---------------------------------------------------------------------------
# Evaluation


def _formula_parts(f: Formula) -> tuple:
    pos = {v: i for i, (v, _) in enumerate(f.prefix)}
    quants = bytes(1 if q == EXISTS else 0 for _, q in f.prefix)
    vsorts = bytes(v.sort.index for v, _ in f.prefix)
    lit_rel: list[int] = []
    lit_neg: list[int] = []
    lit_args: list[tuple[int, ...]] = []
    cube_starts = [0]
    for c in f.matrix:
        for l in c.lits:
            lit_rel.append(l.rel.index)
            lit_neg.append(1 if l.negated else 0)
            lit_args.append(tuple(pos[v] for v in l.args))
        cube_starts.append(len(lit_rel))
    return (quants, vsorts, tuple(lit_rel), bytes(lit_neg), tuple(lit_args), tuple(cube_starts))


def _structure_parts(m: Structure) -> tuple:
    tables: list[bytes] = []
    strides: list[tuple[int, ...]] = []
    for r, rows in zip(m.signature.relations, m.interp):
        dims = [m.sizes[s.index] for s in r.arg_sorts]
        st = [0] * r.arity
        acc = 1
        for i in range(r.arity - 1, -1, -1):
            st[i] = acc
            acc *= dims[i]
        table = bytearray(acc)
        for row in rows:
            idx = 0
            for e, s in zip(row, st):
                idx += e * s
            table[idx] = 1
        tables.append(bytes(table))
        strides.append(tuple(st))
    return (m.sizes, tuple(tables), tuple(strides))


@lru_cache(maxsize=4096)
def _prepared_structure(m: Structure):
    return backend.impl.prepare_structure(*_structure_parts(m))


@lru_cache(maxsize=65536)
def _prepared_formula(f: Formula):
    return backend.impl.prepare_formula(*_formula_parts(f))


def evaluate(f: Formula, m: Structure) -> bool:
    """Model-check f on m.

    Quantifiers are evaluated outermost-first; with f.distinct, same-sort
    variables range over pairwise-distinct elements (an empty restricted
    domain makes a universal vacuously true and an existential false).
    """
    if f.signature != m.signature:
        raise SignatureError("formula and structure use different signatures")
    return backend.impl.eval_one(_prepared_formula(f), _prepared_structure(m), f.distinct)


class CandidateEvaluator:
    """Per-candidate evaluation over many structures, with early exit."""

    __slots__ = ("_pf", "_distinct", "_signature")

    def __init__(self, f: Formula) -> None:
        self._pf = _prepared_formula(f)
        self._distinct = f.distinct
        self._signature = f.signature

    def true_on_all(self, structures: Sequence[Structure]) -> bool:
        eval_one = backend.impl.eval_one
        for m in structures:
            if not eval_one(self._pf, _prepared_structure(m), self._distinct):
                return False
        return True


def true_on_all(f: Formula, structures: Sequence[Structure]) -> bool:
    return CandidateEvaluator(f).true_on_all(structures)


# ---------------------------------------------------------------------------
# Syntactic entailment (the weakening relation)


def entails_syntactic(strong: Formula, weak: Formula) -> bool:
    """True when `weak` is reachable from `strong` by weakening moves under a
    sort-preserving variable substitution.

    The relation is deliberately restricted to substitutions that preserve the
    prefix order (and, under distinct semantics, keep existential images free
    of unmatched earlier variables); unrestricted substitutions are unsound
    for the quantifier game. Sound w.r.t. semantic entailment on structures
    whose per-sort universes are at least the per-sort variable counts of both
    formulas.
    """
    if strong.signature != weak.signature or strong.distinct != weak.distinct:
        raise SignatureError("entailment requires matching signature and semantics")
    ns, nw = strong.var_counts, weak.var_counts
    if strong.distinct and any(a > b for a, b in zip(ns, nw)):
        return False  # without merging the substitution is injective per sort
    if strong.n_exists > weak.n_exists:
        return False
    if min(len(c) for c in weak.matrix) > min(len(c) for c in strong.matrix):
        return False
    weak_masks = weak.cube_masks
    for gm in strong.cube_masks:
        if not any(wm & ~gm == 0 for wm in weak_masks):
            return False  # no weak cube's relations fit inside this cube's

    distinct = strong.distinct
    weak_cubes = weak.cube_key_sets
    strong_cubes = strong.cube_key_lists
    sorts = strong.signature.sorts
    weak_exists = frozenset(v.key for v, q in weak.prefix if q == EXISTS)
    strong_exists = frozenset(v.key for v, q in strong.prefix if q == EXISTS)

    options: list[list[tuple[int, ...]]] = []
    for s in sorts:
        k, n = ns[s.index], nw[s.index]
        if k == 0:
            options.append([()])
        elif distinct:
            options.append(list(itertools.combinations(range(n), k)))
        else:
            options.append(list(itertools.combinations_with_replacement(range(n), k)))

    for combo in itertools.product(*options):
        theta: dict[VarKey, VarKey] = {}
        for s, picks in zip(sorts, combo):
            si = s.index
            for i, j in enumerate(picks):
                theta[(si, i)] = (si, j)
        if not _theta_admissible(theta, strong_exists, weak_exists, distinct):
            continue
        ok = True
        for keys in strong_cubes:
            image = frozenset(
                (rel, tuple(theta[a] for a in args), neg) for rel, args, neg in keys
            )
            if not any(d <= image for d in weak_cubes):
                ok = False
                break
        if ok:
            return True
    return False


def _theta_admissible(
    theta: Mapping[VarKey, VarKey],
    strong_exists: frozenset,
    weak_exists: frozenset,
    distinct: bool,
) -> bool:
    image_counts: dict[VarKey, int] = {}
    for w in theta.values():
        image_counts[w] = image_counts.get(w, 0) + 1
    for v in strong_exists:
        w = theta[v]
        if w not in weak_exists:
            return False
        if image_counts[w] > 1:
            return False  # an existential image must be exclusive
        if distinct and w[1] != v[1]:
            # Under distinctness an earlier unmatched weak variable could
            # consume the existential witness; only identity positions are
            # safe.
            return False
    return True


class EntailmentBlocker:
    """Checks candidates against a fixed member list (plus an optional growing
    local list) under entails_syntactic, with cheap necessary-condition
    prefilters."""

    __slots__ = ("_meta", "_extra")

    def __init__(
        self,
        members: Sequence[Formula],
        extra: Optional[list[Formula]] = None,
    ) -> None:
        self._meta = [
            (m, m.var_counts, m.n_exists, min(len(c) for c in m.matrix), m.cube_masks)
            for m in members
        ]
        self._extra = extra

    def blocks(self, f: Formula) -> bool:
        fvc, fne = f.var_counts, f.n_exists
        fmin = min(len(c) for c in f.matrix)
        fmasks = f.cube_masks
        distinct = f.distinct
        for m, vc, ne, mn, masks in self._meta:
            if ne > fne or mn < fmin:
                continue
            if distinct and any(a > b for a, b in zip(vc, fvc)):
                continue
            if not all(any(wm & ~gm == 0 for wm in fmasks) for gm in masks):
                continue
            if entails_syntactic(m, f):
                return True
        if self._extra:
            for m in self._extra:
                if entails_syntactic(m, f):
                    return True
        return False


# ---------------------------------------------------------------------------
# Canonical text rendering


def variable_names(signature: Signature) -> dict[Sort, str]:
    """Display stem per sort: the capitalized initial, or the full name
    uppercased when initials collide."""
    initials: dict[str, list[Sort]] = {}
    for s in signature.sorts:
        initials.setdefault(s.name[0].upper(), []).append(s)
    stems = {}
    for initial, group in initials.items():
        if len(group) == 1:
            stems[group[0]] = initial
        else:
            for s in group:
                stems[s] = s.name.upper()
    return stems


def variable_name(v: Variable, stems: Mapping[Sort, str]) -> str:
    return f"{stems[v.sort]}{v.idx + 1}"


def format_formula(f: Formula) -> str:
    """Render a canonical formula; the output is injective on canonical forms
    and parses back to the same formula."""
    stems = variable_names(f.signature)
    groups: list[tuple[str, list[str]]] = []
    for v, q in f.prefix:
        name = f"{variable_name(v, stems)}:{v.sort.name}"
        if groups and groups[-1][0] == q:
            groups[-1][1].append(name)
        else:
            groups.append((q, [name]))
    parts = [f"{q} {', '.join(names)}." for q, names in groups]

    def render_cube(c: Cube) -> str:
        lits = [
            ("~" if l.negated else "")
            + f"{l.rel.name}({','.join(variable_name(v, stems) for v in l.args)})"
            for l in c.lits
        ]
        body = " & ".join(lits)
        return f"({body})" if len(lits) > 1 else body

    matrix = " | ".join(render_cube(c) for c in f.matrix)
    return " ".join(parts + [matrix])
