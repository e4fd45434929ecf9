# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled evaluation kernel for prenex-DNF formulas over finite structures.

Same interface as force._evalpure; selected by force.backend when the
extension built. Universe sizes are capped at 64 elements per sort (the
distinctness masks are single machine words), far above anything the search
configurations use.
"""

import numpy as np

DEF MAX_VARS = 64
DEF MAX_SORTS = 32
DEF MAX_RELS = 64

MAX_UNIVERSE = 64


cdef class PreparedFormula:
    cdef const unsigned char[::1] quants
    cdef const unsigned char[::1] vsorts
    cdef const short[::1] lit_rel
    cdef const unsigned char[::1] lit_neg
    cdef const short[:, ::1] lit_args
    cdef const int[::1] cube_starts
    cdef int nv, ncubes, max_arity
    cdef object _keep

    def __init__(self, quants, vsorts, lit_rel, lit_neg, lit_args, cube_starts):
        nv = len(quants)
        if nv > MAX_VARS:
            raise ValueError("too many prefix variables for the compiled kernel")
        max_arity = max((len(a) for a in lit_args), default=1)
        args = np.full((max(len(lit_args), 1), max_arity), 0, dtype=np.int16)
        for i, a in enumerate(lit_args):
            for k, p in enumerate(a):
                args[i, k] = p
        arity = np.asarray([len(a) for a in lit_args], dtype=np.int16)
        self._keep = (
            np.frombuffer(bytes(quants), dtype=np.uint8) if nv else np.zeros(1, dtype=np.uint8),
            np.frombuffer(bytes(vsorts), dtype=np.uint8) if nv else np.zeros(1, dtype=np.uint8),
            np.asarray(lit_rel, dtype=np.int16) if lit_rel else np.zeros(1, dtype=np.int16),
            np.frombuffer(bytes(lit_neg), dtype=np.uint8) if lit_neg else np.zeros(1, dtype=np.uint8),
            args,
            np.asarray(cube_starts, dtype=np.int32),
            arity,
        )
        self.quants = self._keep[0]
        self.vsorts = self._keep[1]
        self.lit_rel = self._keep[2]
        self.lit_neg = self._keep[3]
        self.lit_args = self._keep[4]
        self.cube_starts = self._keep[5]
        self.nv = nv
        self.ncubes = len(cube_starts) - 1
        self.max_arity = max_arity


cdef class PreparedStructure:
    cdef const short[::1] sizes
    cdef const int[:, ::1] strides
    cdef const unsigned char* tabs[MAX_RELS]
    cdef int nrel
    cdef object _keep

    def __init__(self, sizes, tables, strides):
        if len(tables) > MAX_RELS:
            raise ValueError("too many relations for the compiled kernel")
        if len(sizes) > MAX_SORTS or any(n > MAX_UNIVERSE for n in sizes):
            raise ValueError("universe too large for the compiled kernel")
        max_arity = max((len(s) for s in strides), default=1)
        st = np.zeros((max(len(strides), 1), max_arity), dtype=np.int32)
        for i, s in enumerate(strides):
            for k, v in enumerate(s):
                st[i, k] = v
        views = [memoryview(t) for t in tables]
        self._keep = (np.asarray(sizes, dtype=np.int16), st, tables, views)
        self.sizes = self._keep[0]
        self.strides = self._keep[1]
        self.nrel = len(tables)
        cdef const unsigned char[::1] mv
        for i in range(self.nrel):
            mv = views[i]
            self.tabs[i] = &mv[0]


cdef bint _matrix_true(
    const short* lit_rel, const unsigned char* lit_neg, const short* lit_args,
    int max_arity, const int* cube_starts, int ncubes, const int* strides,
    int stride_cols, const unsigned char** tabs, const short* assign,
) noexcept nogil:
    cdef int c, i, k, idx
    cdef int r
    cdef bint cube_ok
    for c in range(ncubes):
        cube_ok = True
        for i in range(cube_starts[c], cube_starts[c + 1]):
            r = lit_rel[i]
            idx = 0
            # Positions beyond a literal's arity carry zero strides, so the
            # fixed-width loop is safe for mixed arities.
            for k in range(max_arity):
                idx += assign[lit_args[i * max_arity + k]] * strides[r * stride_cols + k]
            if (tabs[r][idx] != 0) == (lit_neg[i] != 0):
                cube_ok = False
                break
        if cube_ok:
            return True
    return False


cdef bint _rec(
    int d, int nv,
    const unsigned char* quants, const unsigned char* vsorts,
    const short* lit_rel, const unsigned char* lit_neg, const short* lit_args,
    int max_arity, const int* cube_starts, int ncubes,
    const short* sizes, const int* strides, int stride_cols,
    const unsigned char** tabs,
    unsigned long long* used, short* assign, bint distinct,
) noexcept nogil:
    if d == nv:
        return _matrix_true(lit_rel, lit_neg, lit_args, max_arity, cube_starts,
                            ncubes, strides, stride_cols, tabs, assign)
    cdef int s = vsorts[d]
    cdef unsigned long long mask = used[s]
    cdef bint is_exists = quants[d]
    cdef int e
    cdef bint r
    for e in range(sizes[s]):
        if distinct and (mask >> e) & 1:
            continue
        assign[d] = e
        if distinct:
            used[s] = mask | (1ULL << e)
        r = _rec(d + 1, nv, quants, vsorts, lit_rel, lit_neg, lit_args, max_arity,
                 cube_starts, ncubes, sizes, strides, stride_cols, tabs, used,
                 assign, distinct)
        if r == is_exists:
            used[s] = mask
            return is_exists
    used[s] = mask
    return not is_exists


def eval_one(PreparedFormula pf, PreparedStructure ps, bint distinct):
    cdef short assign[MAX_VARS]
    cdef unsigned long long used[MAX_SORTS]
    cdef int i
    for i in range(MAX_SORTS):
        used[i] = 0
    cdef const unsigned char[::1] quants = pf.quants
    cdef const unsigned char[::1] vsorts = pf.vsorts
    cdef const short[::1] lit_rel = pf.lit_rel
    cdef const unsigned char[::1] lit_neg = pf.lit_neg
    cdef const short[:, ::1] lit_args = pf.lit_args
    cdef const int[::1] cube_starts = pf.cube_starts
    cdef const short[::1] sizes = ps.sizes
    cdef const int[:, ::1] strides = ps.strides
    cdef int nv = pf.nv
    cdef int ncubes = pf.ncubes
    cdef int max_arity = pf.max_arity
    cdef int stride_cols = strides.shape[1]
    cdef bint result
    with nogil:
        result = _rec(0, nv, &quants[0], &vsorts[0], &lit_rel[0], &lit_neg[0],
                      &lit_args[0, 0], max_arity, &cube_starts[0], ncubes,
                      &sizes[0], &strides[0, 0], stride_cols, ps.tabs,
                      used, assign, distinct)
    return bool(result)


def prepare_formula(quants, vsorts, lit_rel, lit_neg, lit_args, cube_starts):
    return PreparedFormula(quants, vsorts, lit_rel, lit_neg, lit_args, cube_starts)


def prepare_structure(sizes, tables, strides):
    return PreparedStructure(sizes, tables, strides)
