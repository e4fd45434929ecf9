"""Pure-Python evaluation kernel.

Mirrors the interface of the compiled core (force._evalcore); force.backend
picks one of the two at import time.
"""

from __future__ import annotations


class PreparedFormula:
    __slots__ = ("quants", "vsorts", "lit_rel", "lit_neg", "lit_args", "cube_bounds")

    def __init__(self, quants, vsorts, lit_rel, lit_neg, lit_args, cube_starts):
        self.quants = quants
        self.vsorts = vsorts
        self.lit_rel = lit_rel
        self.lit_neg = lit_neg
        self.lit_args = lit_args
        self.cube_bounds = list(zip(cube_starts, cube_starts[1:]))


class PreparedStructure:
    __slots__ = ("sizes", "tables", "strides")

    def __init__(self, sizes, tables, strides):
        self.sizes = sizes
        self.tables = tables
        self.strides = strides


def prepare_formula(quants, vsorts, lit_rel, lit_neg, lit_args, cube_starts):
    return PreparedFormula(quants, vsorts, lit_rel, lit_neg, lit_args, cube_starts)


def prepare_structure(sizes, tables, strides):
    return PreparedStructure(sizes, tables, strides)


def eval_one(pf: PreparedFormula, ps: PreparedStructure, distinct: bool) -> bool:
    nv = len(pf.quants)
    assign = [0] * nv
    used = [0] * len(ps.sizes)
    quants, vsorts = pf.quants, pf.vsorts
    lit_rel, lit_neg, lit_args = pf.lit_rel, pf.lit_neg, pf.lit_args
    cube_bounds = pf.cube_bounds
    sizes, tables, strides = ps.sizes, ps.tables, ps.strides

    def matrix() -> bool:
        for start, end in cube_bounds:
            for i in range(start, end):
                r = lit_rel[i]
                st = strides[r]
                idx = 0
                for k, a in enumerate(lit_args[i]):
                    idx += assign[a] * st[k]
                if (tables[r][idx] != 0) == (lit_neg[i] != 0):
                    break  # literal false, cube dead
            else:
                return True
        return False

    def rec(d: int) -> bool:
        if d == nv:
            return matrix()
        s = vsorts[d]
        mask = used[s]
        is_exists = quants[d]
        for e in range(sizes[s]):
            bit = 1 << e
            if distinct and mask & bit:
                continue
            assign[d] = e
            if distinct:
                used[s] = mask | bit
            r = rec(d + 1)
            if r if is_exists else not r:
                used[s] = mask
                return bool(is_exists)
        used[s] = mask
        # Exhausted (possibly empty) domain: vacuous for forall, false for exists.
        return not is_exists

    return rec(0)
