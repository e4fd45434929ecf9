"""Text formats: search-space configs, trace files, formula documents, and
the clause-filter exchange format.

All documents are UTF-8 with LF line endings. Generated documents start with
the version header `force-format v1`; configs may omit it so that plain
config blocks parse verbatim.
"""

from __future__ import annotations

import re
from typing import Iterable, Optional, Sequence

from .errors import ParseError
from .logic import (
    EXISTS,
    FORALL,
    Formula,
    Literal,
    Signature,
    Structure,
    Variable,
    format_formula,
    make_signature,
    normalize_formula,
)
from .slicing import ClauseSet
from .space import SearchSpec

FORMAT_HEADER = "force-format v1"

_RESERVED = {"var", "relations", "max-literal", "max-or", "max-and", "max-exists", "distinct"}

print_formula = format_formula


# ---------------------------------------------------------------------------
# Config


_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*|\d+|[:,;]|\S")


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    for ln, line in enumerate(text.splitlines(), start=1):
        if line.strip() == FORMAT_HEADER:
            continue
        for tok in _TOKEN_RE.findall(line):
            out.append((tok, ln))
    return out


class _Tokens:
    def __init__(self, toks: list[tuple[str, int]]) -> None:
        self._toks = toks
        self._i = 0

    def peek(self, ahead: int = 0) -> Optional[str]:
        j = self._i + ahead
        return self._toks[j][0] if j < len(self._toks) else None

    @property
    def line(self) -> int:
        if self._i < len(self._toks):
            return self._toks[self._i][1]
        return self._toks[-1][1] if self._toks else 1

    def next(self) -> str:
        if self._i >= len(self._toks):
            raise ParseError("unexpected end of document", self.line)
        tok = self._toks[self._i][0]
        self._i += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise ParseError(f"expected {tok!r}, got {got!r}", self.line)

    def done(self) -> bool:
        return self._i >= len(self._toks)

    def at_section_key(self) -> bool:
        return self.peek() in _RESERVED and self.peek(1) == ":"


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _read_name(ts: _Tokens, what: str) -> str:
    tok = ts.next()
    if not _NAME_RE.match(tok) or tok in _RESERVED:
        raise ParseError(f"bad {what} name {tok!r}", ts.line)
    return tok


def parse_config(text: str) -> SearchSpec:
    """Parse a search-space config: `var:` sort/variable declarations,
    `relations:`, the four `max-*` budgets (all required), and an optional
    `distinct: on|off` (default on). Unknown keys are rejected."""
    ts = _Tokens(_tokenize(text))
    sorts: list[str] = []
    var_names: dict[str, list[str]] = {}
    relations: list[tuple[str, list[str]]] = []
    budgets: dict[str, int] = {}
    distinct: Optional[bool] = None
    seen_vars: set[str] = set()

    while not ts.done():
        if not ts.at_section_key():
            raise ParseError(f"unknown key {ts.peek()!r}", ts.line)
        key = ts.next()
        ts.expect(":")
        if key == "var":
            while not ts.done() and not ts.at_section_key():
                sname = _read_name(ts, "sort")
                if sname in var_names:
                    raise ParseError(f"duplicate sort {sname!r}", ts.line)
                ts.expect(":")
                names = [_read_name(ts, "variable")]
                while ts.peek() == ",":
                    ts.next()
                    names.append(_read_name(ts, "variable"))
                for n in names:
                    if n in seen_vars:
                        raise ParseError(f"duplicate variable {n!r}", ts.line)
                    seen_vars.add(n)
                sorts.append(sname)
                var_names[sname] = names
                if ts.peek() == ";":
                    ts.next()
        elif key == "relations":
            while not ts.done() and not ts.at_section_key():
                rname = _read_name(ts, "relation")
                if any(r[0] == rname for r in relations):
                    raise ParseError(f"duplicate relation {rname!r}", ts.line)
                ts.expect(":")
                args = [_read_name(ts, "sort")]
                while ts.peek() == ",":
                    ts.next()
                    args.append(_read_name(ts, "sort"))
                for a in args:
                    if a not in var_names:
                        raise ParseError(f"relation {rname} uses undeclared sort {a!r}", ts.line)
                relations.append((rname, args))
                if ts.peek() == ";":
                    ts.next()
        elif key == "distinct":
            value = ts.next()
            if value not in ("on", "off"):
                raise ParseError(f"distinct must be on or off, got {value!r}", ts.line)
            distinct = value == "on"
        else:
            value = ts.next()
            if not value.isdigit():
                raise ParseError(f"{key} needs an integer, got {value!r}", ts.line)
            budgets[key] = int(value)

    if not sorts:
        raise ParseError("missing required key var", 1)
    if not relations:
        raise ParseError("missing required key relations", 1)
    for key in ("max-literal", "max-or", "max-and", "max-exists"):
        if key not in budgets:
            raise ParseError(f"missing required key {key}", 1)
    signature = make_signature(sorts, [(r, tuple(a)) for r, a in relations])
    try:
        return SearchSpec(
            signature,
            tuple(len(var_names[s]) for s in sorts),
            max_literal=budgets["max-literal"],
            max_or=budgets["max-or"],
            max_and=budgets["max-and"],
            max_exists=budgets["max-exists"],
            distinct=True if distinct is None else distinct,
        )
    except ValueError as e:
        raise ParseError(str(e), 1) from None


# ---------------------------------------------------------------------------
# Traces


def render_traces(structures: Sequence[Structure]) -> str:
    if not structures:
        raise ValueError("a trace document needs at least one sample")
    sig = structures[0].signature
    sizes = structures[0].sizes
    lines = [FORMAT_HEADER, "traces"]
    lines.append("sorts: " + " ".join(f"{s.name}={sizes[s.index]}" for s in sig.sorts))
    for m in structures:
        if m.signature != sig or m.sizes != sizes:
            raise ValueError("all samples in one document share signature and universes")
        lines.append("sample:")
        for r, rows in zip(sig.relations, m.interp):
            for row in sorted(rows):
                lines.append(f"{r.name}: " + " ".join(str(e) for e in row))
    return "\n".join(lines) + "\n"


def parse_traces(text: str, spec: SearchSpec) -> tuple[Structure, ...]:
    """One structure per sample, in order, with exact duplicates removed
    (satisfaction is a per-structure property). Per-sample metadata after
    `sample:` is ignored."""
    sig = spec.signature
    lines = text.splitlines()
    idx = 0

    def next_content() -> Optional[tuple[int, str]]:
        nonlocal idx
        while idx < len(lines):
            ln = idx + 1
            stripped = lines[idx].strip()
            idx += 1
            if stripped:
                return ln, stripped
        return None

    first = next_content()
    if first is None or first[1] != FORMAT_HEADER:
        raise ParseError("missing force-format v1 header", 1)
    tag = next_content()
    if tag is None or tag[1] != "traces":
        raise ParseError("missing traces tag", tag[0] if tag else 1)
    sorts_line = next_content()
    if sorts_line is None or not sorts_line[1].startswith("sorts:"):
        raise ParseError("missing sorts line", sorts_line[0] if sorts_line else 1)
    sizes = [0] * len(sig.sorts)
    seen_sorts = set()
    for part in sorts_line[1][len("sorts:") :].split():
        if "=" not in part:
            raise ParseError(f"bad sort size {part!r}", sorts_line[0])
        name, _, num = part.partition("=")
        try:
            sort = sig.sort(name)
        except Exception:
            raise ParseError(f"unknown sort {name!r}", sorts_line[0]) from None
        if not num.isdigit() or int(num) < 1:
            raise ParseError(f"bad universe size for {name}", sorts_line[0])
        sizes[sort.index] = int(num)
        seen_sorts.add(name)
    if len(seen_sorts) != len(sig.sorts):
        raise ParseError("sorts line must list every sort", sorts_line[0])

    samples: list[Structure] = []
    current: Optional[dict[str, set[tuple[int, ...]]]] = None
    current_line = sorts_line[0]

    def flush() -> None:
        if current is None:
            return
        interp = tuple(frozenset(current.get(r.name, set())) for r in sig.relations)
        try:
            samples.append(Structure(sig, tuple(sizes), interp))
        except Exception as e:
            raise ParseError(str(e), current_line) from None

    while True:
        item = next_content()
        if item is None:
            break
        ln, content = item
        if content.startswith("sample:"):
            flush()
            current = {}
            current_line = ln
            continue
        if current is None:
            raise ParseError("relation tuple before the first sample", ln)
        name, sep, rest = content.partition(":")
        if not sep:
            raise ParseError(f"expected 'relation: elements', got {content!r}", ln)
        name = name.strip()
        try:
            rel = sig.relation(name)
        except Exception:
            raise ParseError(f"unknown relation {name!r}", ln) from None
        parts = rest.split()
        if len(parts) != rel.arity:
            raise ParseError(f"{name} expects {rel.arity} elements", ln)
        row = []
        for part, s in zip(parts, rel.arg_sorts):
            if not part.isdigit():
                raise ParseError(f"bad element index {part!r}", ln)
            e = int(part)
            if e >= sizes[s.index]:
                raise ParseError(
                    f"element {e} out of range for sort {s.name} (size {sizes[s.index]})", ln
                )
            row.append(e)
        current.setdefault(name, set()).add(tuple(row))
    flush()
    if not samples:
        raise ParseError("trace document has no samples", 1)
    deduped: list[Structure] = []
    seen: set[Structure] = set()
    for m in samples:
        if m not in seen:
            seen.add(m)
            deduped.append(m)
    return tuple(deduped)


# ---------------------------------------------------------------------------
# Formulas


_FORMULA_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[().,:|&~]|\S")


def parse_formula(text: str, spec: SearchSpec, line: int = 1) -> Formula:
    """Parse one formula in the canonical text form; the result is the
    canonical representative (cube order and variable naming normalized)."""
    toks = [(t, line) for t in _FORMULA_TOKEN_RE.findall(text)]
    ts = _Tokens(toks)
    sig = spec.signature

    quants: list[tuple[Variable, str]] = []
    by_name: dict[str, Variable] = {}
    next_idx: dict[str, int] = {}
    while ts.peek() in (FORALL, EXISTS):
        q = ts.next()
        while True:
            vname = _read_name(ts, "variable")
            ts.expect(":")
            sname = _read_name(ts, "sort")
            try:
                sort = sig.sort(sname)
            except Exception:
                raise ParseError(f"unknown sort {sname!r}", line) from None
            if vname in by_name:
                raise ParseError(f"variable {vname!r} bound twice", line)
            v = Variable(sort, next_idx.get(sname, 0))
            next_idx[sname] = v.idx + 1
            by_name[vname] = v
            quants.append((v, q))
            if ts.peek() == ",":
                ts.next()
                continue
            break
        ts.expect(".")

    def parse_literal() -> Literal:
        negated = False
        if ts.peek() == "~":
            ts.next()
            negated = True
        rname = _read_name(ts, "relation")
        try:
            rel = sig.relation(rname)
        except Exception:
            raise ParseError(f"unknown relation {rname!r}", line) from None
        ts.expect("(")
        args = []
        while True:
            vname = _read_name(ts, "variable")
            if vname not in by_name:
                raise ParseError(f"unbound variable {vname!r}", line)
            args.append(by_name[vname])
            if ts.peek() == ",":
                ts.next()
                continue
            break
        ts.expect(")")
        if len(args) != rel.arity:
            raise ParseError(f"{rname} expects {rel.arity} arguments", line)
        try:
            return Literal(rel, tuple(args), negated)
        except Exception as e:
            raise ParseError(str(e), line) from None

    def parse_cube() -> list[Literal]:
        if ts.peek() == "(":
            ts.next()
            lits = [parse_literal()]
            while ts.peek() == "&":
                ts.next()
                lits.append(parse_literal())
            ts.expect(")")
            return lits
        return [parse_literal()]

    cubes = [parse_cube()]
    while ts.peek() == "|":
        ts.next()
        cubes.append(parse_cube())
    if not ts.done():
        raise ParseError(f"trailing input {ts.peek()!r}", line)

    used = {v for c in cubes for l in c for v in l.args}
    unused = [v for v, _ in quants if v not in used]
    if unused:
        raise ParseError("prefix binds variables absent from the matrix", line)
    f = normalize_formula(sig, quants, cubes, spec.distinct)
    if f is None:
        raise ParseError("formula has no canonical form (tautological or contradictory)", line)
    return f


def render_formulas(formulas: Iterable[Formula]) -> str:
    lines = [FORMAT_HEADER, "formulas"]
    lines.extend(format_formula(f) for f in formulas)
    return "\n".join(lines) + "\n"


def parse_formulas(text: str, spec: SearchSpec) -> tuple[Formula, ...]:
    lines = text.splitlines()
    content = [(i + 1, l.strip()) for i, l in enumerate(lines) if l.strip()]
    if not content or content[0][1] != FORMAT_HEADER:
        raise ParseError("missing force-format v1 header", 1)
    if len(content) < 2 or content[1][1] != "formulas":
        raise ParseError("missing formulas tag", content[1][0] if len(content) > 1 else 1)
    return tuple(parse_formula(l, spec, line=ln) for ln, l in content[2:])


# ---------------------------------------------------------------------------
# Clause-filter exchange format


def export_clause_filter(clauses: Iterable[Formula]) -> str:
    """Line-oriented exchange document for the satisfied-clause set.

    Consumers admit a candidate formula only when every clause derived from
    it (one literal per cube, prefix restricted to the used variables,
    duplicates merged; tautological selections pass) is entailed by a listed
    clause under the weakening relation.
    """
    clause_list = sorted(clauses, key=lambda f: f.sort_key)
    lines = [FORMAT_HEADER, "clause-filter"]
    if clause_list:
        lines.append(f"signature: {clause_list[0].signature.digest()}")
    else:
        lines.append("signature: -")
    lines.extend(format_formula(c) for c in clause_list)
    return "\n".join(lines) + "\n"


def parse_clause_filter(text: str, spec: SearchSpec) -> ClauseSet:
    lines = text.splitlines()
    content = [(i + 1, l.strip()) for i, l in enumerate(lines) if l.strip()]
    if not content or content[0][1] != FORMAT_HEADER:
        raise ParseError("missing force-format v1 header", 1)
    if len(content) < 2 or content[1][1] != "clause-filter":
        raise ParseError("missing clause-filter tag", content[1][0] if len(content) > 1 else 1)
    if len(content) < 3 or not content[2][1].startswith("signature:"):
        raise ParseError("missing signature digest", content[2][0] if len(content) > 2 else 1)
    digest = content[2][1].split(":", 1)[1].strip()
    clauses = []
    for ln, l in content[3:]:
        f = parse_formula(l, spec, line=ln)
        if not f.is_clause:
            raise ParseError("clause-filter documents may only contain clauses", ln)
        clauses.append(f)
    if clauses and digest != spec.signature.digest():
        raise ParseError("signature digest does not match the config", content[2][0])
    return ClauseSet(tuple(clauses))


# ---------------------------------------------------------------------------
# Stats


def render_stats(stats, threads: Optional[int] = None) -> str:
    lines = [FORMAT_HEADER, "stats"]
    lines.append(f"raw-candidates: {stats.raw_candidates}")
    lines.append(f"threads: {threads if threads is not None else stats.threads}")
    for phase, wall in (("clause", stats.clause_wall), ("dnf", stats.dnf_wall)):
        t = stats.totals(phase)
        lines.append(
            f"phase {phase}: generated={t.generated} filtered={t.filtered} "
            f"blocked={t.blocked} tested={t.tested} satisfied={t.satisfied} "
            f"wall-s={wall:.3f}"
        )
    lines.append(f"finalize: wall-s={stats.finalize_wall:.3f}")
    for key in sorted(stats.slices):
        phase, st = stats.slices[key]
        ne, tv, tl = key
        lines.append(
            f"slice ne={ne} tv={','.join(map(str, tv))} tl={','.join(map(str, tl))} "
            f"phase={phase} generated={st.generated} filtered={st.filtered} "
            f"blocked={st.blocked} tested={st.tested} satisfied={st.satisfied}"
        )
    return "\n".join(lines) + "\n"
