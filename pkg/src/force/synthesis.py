"""Synthesis driver: generate-test-prune over scheduled slices, the
clause-first phase feeding the clause-derived filter for the non-clause
phase, and final reduction to the entailment-maximal satisfied set.

Also hosts the brute-force baseline used by the differential tests; it shares
the static enumeration but none of the dynamic pruning, and decides
maximality semantically over bounded structures.
"""

from __future__ import annotations

import os
import random
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from . import bounded
from .errors import GuardExceeded, PreconditionError, SignatureError
from .logic import (
    EntailmentBlocker,
    Formula,
    Structure,
    entails_syntactic,
    is_tautology,
    true_on_all,
)
from .slicing import ClauseSet, dnf_candidate_filter, schedule_slices, split_clause_dnf
from .space import (
    SearchSpec,
    SlicedTemplate,
    enumerate_slice,
    generate_slice,
    raw_candidate_count,
    slices_of,
)


@dataclass(frozen=True)
class RuleSet:
    """Dynamic pruning toggles; static canonical-form rules are part of the
    search-space definition and are not optional."""

    blocking: bool = True  # drop candidates entailed by stored satisfied formulas
    dnf_modulo_clauses: bool = True  # clause-derived filter on non-clause slices


class PruningStore:
    """Append-only record of satisfied formulas; snapshots are read-only views
    safe to share across worker threads."""

    def __init__(self, rules: Optional[RuleSet] = None) -> None:
        self.rules = rules or RuleSet()
        self._formulas: list[Formula] = []
        self._lock = threading.Lock()

    def extend(self, formulas: Iterable[Formula]) -> None:
        with self._lock:
            self._formulas.extend(formulas)

    @property
    def formulas(self) -> tuple[Formula, ...]:
        with self._lock:
            return tuple(self._formulas)

    def snapshot(self) -> tuple[Formula, ...]:
        return self.formulas

    def blocks(self, candidate: Formula) -> bool:
        return EntailmentBlocker(self.formulas).blocks(candidate)


@dataclass
class SliceStats:
    generated: int = 0
    filtered: int = 0
    blocked: int = 0
    tested: int = 0
    satisfied: int = 0

    def merge(self, other: "SliceStats") -> None:
        self.generated += other.generated
        self.filtered += other.filtered
        self.blocked += other.blocked
        self.tested += other.tested
        self.satisfied += other.satisfied


@dataclass
class SynthesisStats:
    raw_candidates: int = 0
    slices: dict = field(default_factory=dict)  # params.key -> (phase, SliceStats)
    clause_wall: float = 0.0
    dnf_wall: float = 0.0
    finalize_wall: float = 0.0
    threads: int = 1

    def totals(self, phase: Optional[str] = None) -> SliceStats:
        out = SliceStats()
        for ph, st in self.slices.values():
            if phase is None or ph == phase:
                out.merge(st)
        return out


@dataclass(frozen=True)
class SynthesisResult:
    phi_c: tuple[Formula, ...]  # maximal satisfied clauses
    phi_f: tuple[Formula, ...]  # maximal satisfied non-clause formulas
    stats: SynthesisStats

    @property
    def formulas(self) -> tuple[Formula, ...]:
        return self.phi_c + self.phi_f


def _prepare_sigma(
    spec: SearchSpec, sigma: Iterable[Structure], *, check_sizes: bool
) -> list[Structure]:
    out: list[Structure] = []
    seen = set()
    for m in sigma:
        if m.signature != spec.signature:
            raise SignatureError("input structure uses a different signature")
        if check_sizes:
            for s in spec.signature.sorts:
                if m.sizes[s.index] < spec.var_budget[s.index]:
                    raise PreconditionError(
                        f"universe of sort {s.name} has {m.sizes[s.index]} elements, "
                        f"below the variable budget {spec.var_budget[s.index]}; "
                        "weakening-based pruning would be unsound"
                    )
        if m not in seen:
            seen.add(m)
            out.append(m)
    return out


def synthesize_slice(
    t: SlicedTemplate,
    sigma: Sequence[Structure],
    store: Optional[PruningStore] = None,
) -> list[Formula]:
    """Formulas of the slice that survive blocking and satisfy every input
    structure (enumerate, test, keep)."""
    structures = _prepare_sigma(t.spec, sigma, check_sizes=False)
    return [f for f in enumerate_slice(t, store) if true_on_all(f, structures)]


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("FORCE_THREADS", "1")))
    except ValueError:
        return 1


def synthesize(
    spec: SearchSpec,
    sigma: Iterable[Structure],
    rules: Optional[RuleSet] = None,
    *,
    threads: Optional[int] = None,
    semantic_minimize: bool = True,
) -> SynthesisResult:
    """Entailment-maximal set of satisfied formulas of the bounded space.

    Clause slices run first in precedence order, updating the pruning store
    level by level; the satisfied clauses then gate the non-clause slices
    (every derived clause of an admitted candidate must be entailed by a
    satisfied clause). Pruning changes candidate counts, never the result.
    Slices within a level may run on a thread pool; results are merged in
    deterministic order, so the outcome is independent of the thread count.
    """
    rules = rules or RuleSet()
    if threads is None:
        threads = default_threads()
    structures = _prepare_sigma(spec, sigma, check_sizes=True)
    if not structures:
        warnings.warn("no input structures: every canonical candidate is satisfied")

    stats = SynthesisStats(raw_candidates=raw_candidate_count(spec), threads=threads)
    clause_slices, dnf_slices = split_clause_dnf(slices_of(spec))
    store = PruningStore(rules)

    t0 = time.monotonic()
    clause_sat = _run_phase(
        clause_slices, "clause", structures, store, rules, None, stats, threads
    )
    stats.clause_wall = time.monotonic() - t0

    clause_filter = (
        dnf_candidate_filter(clause_sat, spec) if rules.dnf_modulo_clauses else None
    )
    t0 = time.monotonic()
    dnf_sat = _run_phase(
        dnf_slices, "dnf", structures, store, rules, clause_filter, stats, threads
    )
    stats.dnf_wall = time.monotonic() - t0

    t0 = time.monotonic()
    all_sat = [f for f in clause_sat + dnf_sat if not is_tautology(f)]
    band = bounded.band_combos(spec.var_budget)
    # Semantic reduction must cover the input sizes, or a formula false on
    # every band structure (yet satisfied on larger inputs) would swallow the
    # whole output.
    combos = sorted(set(band) | {m.sizes for m in structures})
    probes = _build_probes(spec, structures, band)
    kept = _syntactic_maximal(all_sat, probes)
    if semantic_minimize:
        kept = _semantic_minimal(kept, combos, probes)
    stats.finalize_wall = time.monotonic() - t0

    phi_c = tuple(f for f in kept if f.is_clause)
    phi_f = tuple(f for f in kept if not f.is_clause)
    return SynthesisResult(phi_c, phi_f, stats)


def _run_phase(
    slices: Sequence[SlicedTemplate],
    phase: str,
    structures: Sequence[Structure],
    store: PruningStore,
    rules: RuleSet,
    clause_filter,
    stats: SynthesisStats,
    threads: int,
) -> list[Formula]:
    found: list[Formula] = []
    if not slices:
        return found

    def work(t: SlicedTemplate, snapshot: Optional[tuple[Formula, ...]]):
        st = SliceStats()
        local_sat: list[Formula] = []
        blocker = None
        if snapshot is not None:
            # Same-slice finds join the snapshot immediately; cross-slice
            # finds of the same level only join at the next level, keeping
            # results independent of slice interleaving.
            blocker = EntailmentBlocker(snapshot, local_sat)
        for f in generate_slice(t):
            st.generated += 1
            if clause_filter is not None and not clause_filter.admits(f):
                st.filtered += 1
                continue
            st.tested += 1
            if not true_on_all(f, structures):
                continue
            # Store members are satisfied, so an entailment-blocked candidate
            # is necessarily satisfied; testing satisfaction first keeps the
            # entailment scans to satisfied candidates only.
            if blocker is not None and blocker.blocks(f):
                st.blocked += 1
                continue
            st.satisfied += 1
            local_sat.append(f)
        return t, local_sat, st

    for level in schedule_slices(list(slices)):
        snapshot = store.snapshot() if rules.blocking else None
        if threads > 1 and len(level) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda t: work(t, snapshot), level))
        else:
            results = [work(t, snapshot) for t in level]
        for t, local_sat, st in results:
            stats.slices[t.params.key] = (phase, st)
            store.extend(local_sat)
            found.extend(local_sat)
    return found


# ---------------------------------------------------------------------------
# Final reduction


def _build_probes(
    spec: SearchSpec,
    structures: Sequence[Structure],
    size_combos: Sequence[tuple[int, ...]],
    random_count: int = 16,
    mutation_count: int = 48,
    max_sizes: Optional[Sequence[int]] = None,
) -> list[Structure]:
    """Probe structures for entailment prefilters: random structures over the
    checked sizes plus mutations of the input structures (which separate the
    strong satisfied formulas that random structures all falsify)."""
    probes = bounded.probe_structures(spec.signature, list(size_combos), random_count)
    bases = [
        m
        for m in structures
        if max_sizes is None or all(a <= b for a, b in zip(m.sizes, max_sizes))
    ]
    if bases:
        rng = random.Random(f"probe-mutations:{spec.signature.digest()}")
        for i in range(mutation_count):
            probes.append(_mutate_structure(bases[i % len(bases)], rng))
    return probes


def _mutate_structure(m: Structure, rng: random.Random) -> Structure:
    import itertools as _it

    rows = {r.name: set(rows) for r, rows in zip(m.signature.relations, m.interp)}
    flips = rng.randint(1, 3)
    rels = list(m.signature.relations)
    for _ in range(flips):
        r = rels[rng.randrange(len(rels))]
        dims = [m.sizes[s.index] for s in r.arg_sorts]
        row = tuple(rng.randrange(d) for d in dims)
        if row in rows[r.name]:
            rows[r.name].discard(row)
        else:
            rows[r.name].add(row)
    interp = tuple(frozenset(rows[r.name]) for r in m.signature.relations)
    return Structure(m.signature, m.sizes, interp)


def _popcount(x: int) -> int:
    return bin(x).count("1")


class _DominanceIndex:
    """Ordered antichain extraction: formulas processed strongest-seeming
    first (fewest satisfied probes), each kept only when no kept member
    entails it; a closing pass removes members whose dominator appeared
    later within an equal-probe-vector block.

    Probe vectors are a sound prefilter for any entailment relation that is
    truth-preserving on the probe structures; the structural prefilters
    (variable counts, cube sizes, relation masks) are sound only for the
    syntactic weakening relation and are enabled by `structural`.
    """

    def __init__(
        self,
        formulas: Sequence[Formula],
        probes: Sequence[Structure],
        structural: bool,
    ):
        self.fs = sorted(set(formulas), key=lambda f: f.sort_key)
        self.vecs = {f: bounded.probe_vector(f, probes) for f in self.fs}
        self.structural = structural

    def _meta(self, f: Formula):
        return (
            self.vecs[f],
            f.n_exists,
            f.var_counts,
            min(len(c) for c in f.matrix),
            f.cube_masks,
        )

    def _may_entail(self, gm, fm, distinct: bool) -> bool:
        if gm[0] & ~fm[0]:
            return False  # a probe satisfies g but not f
        if not self.structural:
            return True
        gvec, gne, gvc, gmin, gmasks = gm
        fvec, fne, fvc, fmin, fmasks = fm
        if gne > fne or gmin < fmin:
            return False
        if distinct and any(a > b for a, b in zip(gvc, fvc)):
            return False
        return all(any(wm & ~m == 0 for wm in fmasks) for m in gmasks)

    def reduce(self, entails: Callable[[Formula, Formula], bool]) -> list[Formula]:
        order = sorted(self.fs, key=lambda f: (_popcount(self.vecs[f]), f.sort_key))
        metas = {f: self._meta(f) for f in order}
        kept: list[Formula] = []
        for f in order:
            fm = metas[f]
            distinct = f.distinct
            if not any(
                self._may_entail(metas[g], fm, distinct) and entails(g, f)
                for g in kept
            ):
                kept.append(f)
        final: list[Formula] = []
        for f in kept:
            fm = metas[f]
            dominated = False
            for g in kept:
                if g is f or not self._may_entail(metas[g], fm, f.distinct):
                    continue
                if entails(g, f) and (not entails(f, g) or g.sort_key < f.sort_key):
                    dominated = True
                    break
            if not dominated:
                final.append(f)
        final.sort(key=lambda f: f.sort_key)
        return final


def _memoized(fn):
    memo: dict = {}

    def wrapped(g: Formula, f: Formula) -> bool:
        key = (g, f)
        v = memo.get(key)
        if v is None:
            v = fn(g, f)
            memo[key] = v
        return v

    return wrapped


def _syntactic_maximal(
    formulas: Sequence[Formula], probes: Sequence[Structure]
) -> list[Formula]:
    """Drop every formula syntactically entailed by another; equivalence
    cycles keep their canonically least member."""
    fs = list(set(formulas))
    if len(fs) <= 1:
        return sorted(fs, key=lambda f: f.sort_key)
    index = _DominanceIndex(fs, probes, structural=True)
    return index.reduce(_memoized(entails_syntactic))


def _semantic_minimal(
    formulas: Sequence[Formula],
    combos: Sequence[tuple[int, ...]],
    probes: Sequence[Structure],
) -> list[Formula]:
    """Additionally drop members semantically entailed (over the checked
    sizes) by another member; catches weakenings the syntactic relation
    cannot express. The surviving conjunction is unchanged on those sizes."""
    fs = list(formulas)
    if len(fs) <= 1:
        return fs
    index = _DominanceIndex(fs, probes, structural=False)
    return index.reduce(
        _memoized(lambda g, f: bounded.semantic_entails([g], f, combos))
    )


def filter_entailed_clauses(
    phi_c: Iterable[Formula], phi_f: Iterable[Formula]
) -> ClauseSet:
    """Remove from phi_c every clause entailed by a member of phi_f."""
    others = list(phi_f)
    kept = tuple(c for c in phi_c if not any(entails_syntactic(g, c) for g in others))
    return ClauseSet(kept)


# ---------------------------------------------------------------------------
# Brute-force baseline


def brute_force_oracle(
    spec: SearchSpec,
    sigma: Iterable[Structure],
    *,
    universe_bound: Optional[Sequence[int]] = None,
    guard: int = 500_000,
) -> tuple[Formula, ...]:
    """Exhaustively enumerate the canonical space with no dynamic pruning,
    test every candidate, drop bounded-semantic tautologies, and keep the
    semantically maximal members (ties broken canonically).

    Maximality is decided by bounded semantic entailment over all structures
    up to the universe bound (default: per-sort variable budget + 1), not by
    the syntactic relation, so differential tests exercise both routes.
    """
    raw = raw_candidate_count(spec)
    if raw > guard:
        raise GuardExceeded(f"{raw} raw candidates exceed the oracle guard {guard}")
    structures = _prepare_sigma(spec, sigma, check_sizes=False)
    sat: list[Formula] = []
    for t in slices_of(spec):
        for f in generate_slice(t):
            if true_on_all(f, structures):
                sat.append(f)
    combos = bounded.oracle_combos(spec.var_budget, universe_bound)
    sat = [f for f in sat if not is_tautology(f)]
    sat = [f for f in sat if not bounded.bounded_tautology(f, combos)]
    if len(sat) <= 1:
        return tuple(sat)

    caps = tuple(max(c[i] for c in combos) for i in range(len(spec.var_budget)))
    probes = bounded.probe_structures(spec.signature, combos, 24, seed=1)
    probes += _build_probes(
        spec, structures, combos, random_count=0, mutation_count=32, max_sizes=caps
    )
    index = _DominanceIndex(sat, probes, structural=False)
    kept = index.reduce(
        _memoized(lambda g, f: bounded.semantic_entails([g], f, combos))
    )
    return tuple(kept)
