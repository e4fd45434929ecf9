"""Bounded-structure semantic checks: entailment, tautology and conjunction
equivalence decided exactly over all structures with given universe sizes.

Formulas are grounded to Boolean circuits over ground atoms and a small DPLL
search looks for counter-structures; this is the semantic side of the
differential tests and stays independent of the enumeration/pruning path.
"""

from __future__ import annotations

import itertools
import random
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence

from .logic import EXISTS, FORALL, Formula, Signature, Structure, Variable, evaluate

# Circuit nodes: ("lit", atom_id, negated) | ("and", children) | ("or", children) | bool
Node = object

TRUE: Node = True
FALSE: Node = False


def _and_node(children: list[Node]) -> Node:
    out = []
    for c in children:
        if c is FALSE:
            return FALSE
        if c is not TRUE:
            out.append(c)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return ("and", tuple(out))


def _or_node(children: list[Node]) -> Node:
    out = []
    for c in children:
        if c is TRUE:
            return TRUE
        if c is not FALSE:
            out.append(c)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return ("or", tuple(out))


def negate(node: Node) -> Node:
    if node is TRUE:
        return FALSE
    if node is FALSE:
        return TRUE
    kind = node[0]
    if kind == "lit":
        return ("lit", node[1], not node[2])
    children = tuple(negate(c) for c in node[1])
    return ("and", children) if kind == "or" else ("or", children)


@lru_cache(maxsize=1024)
def _atom_layout(signature: Signature, sizes: tuple[int, ...]):
    """Per-relation base offsets and strides for ground-atom numbering."""
    bases = []
    strides = []
    total = 0
    for r in signature.relations:
        dims = [sizes[s.index] for s in r.arg_sorts]
        st = [0] * r.arity
        acc = 1
        for i in range(r.arity - 1, -1, -1):
            st[i] = acc
            acc *= dims[i]
        bases.append(total)
        strides.append(tuple(st))
        total += acc
    return tuple(bases), tuple(strides), total


@lru_cache(maxsize=65536)
def ground(f: Formula, sizes: tuple[int, ...]) -> Node:
    """Ground a prenex formula over the given universe sizes into a circuit,
    honoring distinctness restrictions on same-sort variables."""
    bases, strides, _ = _atom_layout(f.signature, sizes)
    prefix = f.prefix
    matrix = f.matrix
    distinct = f.distinct
    n_sorts = len(f.signature.sorts)

    def matrix_node(assign: dict[Variable, int]) -> Node:
        cubes = []
        for c in matrix:
            lits = []
            for l in c.lits:
                idx = bases[l.rel.index]
                for v, s in zip(l.args, strides[l.rel.index]):
                    idx += assign[v] * s
                lits.append(("lit", idx, l.negated))
            cubes.append(_and_node(lits))
        return _or_node(cubes)

    def rec(i: int, assign: dict[Variable, int], used: tuple[frozenset, ...]) -> Node:
        if i == len(prefix):
            return matrix_node(assign)
        v, q = prefix[i]
        si = v.sort.index
        children = []
        for e in range(sizes[si]):
            if distinct and e in used[si]:
                continue
            assign[v] = e
            nxt = used[:si] + (used[si] | {e},) + used[si + 1 :] if distinct else used
            children.append(rec(i + 1, assign, nxt))
        del assign[v]
        if q == FORALL:
            return _and_node(children)
        return _or_node(children)

    return rec(0, {}, tuple(frozenset() for _ in range(n_sorts)))


# ---------------------------------------------------------------------------
# CNF + DPLL


def _tseitin(roots: Sequence[Node], n_atoms: int) -> tuple[int, list[tuple[int, ...]]]:
    """One-sided (positive polarity) Tseitin encoding of an NNF conjunction."""
    clauses: list[tuple[int, ...]] = []
    counter = [n_atoms]

    def enc(node: Node) -> int:
        if node[0] == "lit":
            v = node[1] + 1
            return -v if node[2] else v
        counter[0] += 1
        aux = counter[0]
        child_lits = [enc(c) for c in node[1]]
        if node[0] == "and":
            for cl in child_lits:
                clauses.append((-aux, cl))
        else:
            clauses.append(tuple([-aux] + child_lits))
        return aux

    for root in roots:
        if root is TRUE:
            continue
        if root is FALSE:
            clauses.append(())
            continue
        clauses.append((enc(root),))
    return counter[0], clauses


def _dpll(n_vars: int, clauses: list[tuple[int, ...]]) -> Optional[list[int]]:
    """Values per var (1-based): 1 true, -1 false; None if unsatisfiable."""
    for cl in clauses:
        if not cl:
            return None
    occ: dict[int, list[int]] = {}
    for ci, cl in enumerate(clauses):
        for l in cl:
            occ.setdefault(l, []).append(ci)
    val = [0] * (n_vars + 1)
    trail: list[int] = []

    def propagate(pending: list[int]) -> bool:
        queue = list(pending)
        qi = 0
        while qi < len(queue):
            l = queue[qi]
            qi += 1
            v = abs(l)
            s = 1 if l > 0 else -1
            if val[v] == s:
                continue
            if val[v] == -s:
                return False
            val[v] = s
            trail.append(v)
            for ci in occ.get(-l, ()):
                cl = clauses[ci]
                unassigned = 0
                last = 0
                satisfied = False
                for x in cl:
                    vx = val[abs(x)]
                    if vx == 0:
                        unassigned += 1
                        last = x
                    elif (vx > 0) == (x > 0):
                        satisfied = True
                        break
                if satisfied:
                    continue
                if unassigned == 0:
                    return False
                if unassigned == 1:
                    queue.append(last)
        return True

    units = [cl[0] for cl in clauses if len(cl) == 1]
    if not propagate(units):
        return None
    decisions: list[tuple[int, int, bool]] = []  # (var, trail mark, flipped?)
    next_var = 1
    while True:
        while next_var <= n_vars and val[next_var] != 0:
            next_var += 1
        if next_var > n_vars:
            return val
        var = next_var
        mark = len(trail)
        decisions.append((var, mark, False))
        ok = propagate([var])
        while not ok:
            while decisions:
                dvar, dmark, flipped = decisions.pop()
                for v in trail[dmark:]:
                    val[v] = 0
                del trail[dmark:]
                if not flipped:
                    decisions.append((dvar, dmark, True))
                    ok = propagate([-dvar])
                    if ok:
                        break
            if not decisions and not ok:
                return None
        next_var = 1


def _structure_from_model(
    signature: Signature, sizes: tuple[int, ...], val: Sequence[int]
) -> Structure:
    bases, strides, _ = _atom_layout(signature, sizes)
    interp = []
    for r, base in zip(signature.relations, bases):
        dims = [sizes[s.index] for s in r.arg_sorts]
        rows = set()
        for combo in itertools.product(*(range(d) for d in dims)):
            idx = base + sum(e * s for e, s in zip(combo, strides[r.index]))
            if val[idx + 1] > 0:
                rows.add(combo)
        interp.append(frozenset(rows))
    return Structure(signature, sizes, tuple(interp))


def find_countermodel(
    premises: Sequence[Formula],
    conclusion: Optional[Formula],
    signature: Signature,
    sizes: tuple[int, ...],
) -> Optional[Structure]:
    """A structure with the given sizes satisfying all premises and falsifying
    the conclusion (when given), or None."""
    _, _, n_atoms = _atom_layout(signature, sizes)
    roots = [ground(p, sizes) for p in premises]
    if conclusion is not None:
        roots.append(negate(ground(conclusion, sizes)))
    if any(r is FALSE for r in roots):
        return None
    roots = [r for r in roots if r is not TRUE]
    if not roots:
        return Structure(
            signature, sizes, tuple(frozenset() for _ in signature.relations)
        )
    n_vars, clauses = _tseitin(roots, n_atoms)
    val = _dpll(n_vars, clauses)
    if val is None:
        return None
    return _structure_from_model(signature, sizes, val)


def semantic_entails(
    premises: Sequence[Formula],
    conclusion: Formula,
    size_combos: Iterable[tuple[int, ...]],
) -> bool:
    """conj(premises) |= conclusion over every structure of the given sizes."""
    sig = conclusion.signature
    for sizes in size_combos:
        if find_countermodel(premises, conclusion, sig, sizes) is not None:
            return False
    return True


def bounded_tautology(f: Formula, size_combos: Iterable[tuple[int, ...]]) -> bool:
    return semantic_entails([], f, size_combos)


# ---------------------------------------------------------------------------
# Size-combo helpers and probe structures


def band_combos(var_budget: Sequence[int]) -> list[tuple[int, ...]]:
    """Sizes on which the weakening relation is sound: per-sort from the
    variable budget (at least 1) to budget + 1."""
    ranges = [range(max(b, 1), b + 2) for b in var_budget]
    return [tuple(c) for c in itertools.product(*ranges)]


def oracle_combos(
    var_budget: Sequence[int], bound: Optional[Sequence[int]] = None
) -> list[tuple[int, ...]]:
    """All sizes from 1 up to the bound (default: variable budget + 1)."""
    caps = list(bound) if bound is not None else [b + 1 for b in var_budget]
    ranges = [range(1, max(c, 1) + 1) for c in caps]
    return [tuple(c) for c in itertools.product(*ranges)]


def random_structure(signature: Signature, sizes: Sequence[int], rng: random.Random,
                     density: float = 0.5) -> Structure:
    interp = []
    for r in signature.relations:
        dims = [sizes[s.index] for s in r.arg_sorts]
        rows = {
            combo
            for combo in itertools.product(*(range(d) for d in dims))
            if rng.random() < density
        }
        interp.append(frozenset(rows))
    return Structure(signature, tuple(sizes), tuple(interp))


def probe_structures(
    signature: Signature,
    size_combos: Sequence[tuple[int, ...]],
    count: int,
    seed: int = 0,
) -> list[Structure]:
    """Deterministic pseudo-random structures spread over the size combos."""
    rng = random.Random((signature.digest(), tuple(size_combos), count, seed).__repr__())
    out = []
    for i in range(count):
        sizes = size_combos[i % len(size_combos)]
        out.append(random_structure(signature, sizes, rng, rng.choice((0.2, 0.5, 0.8))))
    return out


def all_structures(
    signature: Signature, sizes: tuple[int, ...], guard: int = 1 << 22
) -> Iterator[Structure]:
    """Every structure with the given sizes (test-scale exhaustive sweeps)."""
    spaces = []
    total = 1
    for r in signature.relations:
        dims = [sizes[s.index] for s in r.arg_sorts]
        rows = list(itertools.product(*(range(d) for d in dims)))
        spaces.append(rows)
        total *= 2 ** len(rows)
        if total > guard:
            raise ValueError(f"structure space too large ({total} > {guard})")
    for combo in itertools.product(*(_subsets(rows) for rows in spaces)):
        yield Structure(signature, sizes, tuple(frozenset(c) for c in combo))


def _subsets(rows: list) -> Iterator[tuple]:
    for mask in range(1 << len(rows)):
        yield tuple(rows[i] for i in range(len(rows)) if mask >> i & 1)


# ---------------------------------------------------------------------------
# Conjunction equivalence (the oracle-diff check)


def probe_vector(f: Formula, probes: Sequence[Structure]) -> int:
    bits = 0
    for i, m in enumerate(probes):
        if evaluate(f, m):
            bits |= 1 << i
    return bits


def conjunction_entails_member(
    premises: Sequence[Formula],
    member: Formula,
    size_combos: Sequence[tuple[int, ...]],
    probes: Sequence[Structure],
    probe_cache: dict,
) -> Optional[Structure]:
    """None when conj(premises) |= member on the combos; otherwise a witness
    structure. Tries single-premise witnesses (cheap) before the full
    conjunction."""

    def vec(f: Formula) -> int:
        v = probe_cache.get(f)
        if v is None:
            v = probe_vector(f, probes)
            probe_cache[f] = v
        return v

    member_vec = vec(member)
    for p in premises:
        if vec(p) & ~member_vec:
            continue  # some probe satisfies p but not member: p alone cannot entail
        if semantic_entails([p], member, size_combos):
            return None
    sig = member.signature
    for sizes in size_combos:
        witness = find_countermodel(list(premises), member, sig, sizes)
        if witness is not None:
            return witness
    return None


def conjunctions_equivalent(
    set_a: Sequence[Formula],
    set_b: Sequence[Formula],
    size_combos: Sequence[tuple[int, ...]],
    probe_count: int = 48,
) -> Optional[tuple[str, Formula, Structure]]:
    """None when conj(set_a) and conj(set_b) agree on every structure of the
    given sizes; otherwise (direction, member, witness)."""
    if not set_a and not set_b:
        return None
    sig = (set_a[0] if set_a else set_b[0]).signature
    probes = probe_structures(sig, list(size_combos), probe_count)
    cache: dict = {}
    for b in set_b:
        witness = conjunction_entails_member(set_a, b, size_combos, probes, cache)
        if witness is not None:
            return ("left-does-not-entail", b, witness)
    for a in set_a:
        witness = conjunction_entails_member(set_b, a, size_combos, probes, cache)
        if witness is not None:
            return ("right-does-not-entail", a, witness)
    return None
