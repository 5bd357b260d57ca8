# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled core, mirroring pure.py term for term.

Same surface, same conventions: empty set evaluates to 0, empty
log-sum-exp over the complement is -inf, double sums keep the diagonal,
off-domain logs produce inf/nan for the scan layers to skip. Values may
differ from the reference in the last couple of ulps (different summation
order, own Cholesky); the parity tests bound that gap.
"""

import math

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, isfinite, log, sqrt

from ..errors import NotPositiveDefinite

cnp.import_array()

BACKEND_NAME = "fast"

TRIPLET, NPAIRS, OPL, SNN, SUPCON = 0, 1, 2, 3, 4
SUB_TRIPLET, SUB_SNN, SUB_SUPCON = 5, 6, 7
GC_SF, GC_CF, LOGDET_SF, LOGDET_CF, FL = 8, 9, 10, 11, 12

DEF MAX_TABLE_N = 24


cdef double _lse_buf(const double* buf, Py_ssize_t k) noexcept nogil:
    cdef double m = -INFINITY
    cdef double acc = 0.0
    cdef Py_ssize_t i
    if k == 0:
        return -INFINITY
    for i in range(k):
        if buf[i] > m:
            m = buf[i]
    for i in range(k):
        acc += exp(buf[i] - m)
    return m + log(acc)


cdef int _chol_logdet(double* a, Py_ssize_t m, double* out) noexcept nogil:
    """In-place lower Cholesky of the m x m buffer; 0 on success."""
    cdef Py_ssize_t i, j, k
    cdef double acc, piv
    cdef double ld = 0.0
    for j in range(m):
        acc = a[j * m + j]
        for k in range(j):
            acc -= a[j * m + k] * a[j * m + k]
        if acc <= 0.0:
            return -1
        piv = sqrt(acc)
        a[j * m + j] = piv
        ld += log(piv)
        for i in range(j + 1, m):
            acc = a[i * m + j]
            for k in range(j):
                acc -= a[i * m + k] * a[j * m + k]
            a[i * m + j] = acc / piv
    out[0] = 2.0 * ld
    return 0


cdef double _block_logdet(const double* s, Py_ssize_t n, const long long* mem,
                          Py_ssize_t m, double lam, double* work) except? -1.0:
    cdef Py_ssize_t i, j
    cdef double ld = 0.0
    if m == 0:
        return 0.0
    for i in range(m):
        for j in range(m):
            work[i * m + j] = s[mem[i] * n + mem[j]]
        work[i * m + i] += lam
    if _chol_logdet(work, m, &ld) != 0:
        raise NotPositiveDefinite(
            f"{m}x{m} regularized block is not positive definite"
        )
    return ld


cdef double _term_c(int code, const double* s, const double* d, Py_ssize_t n,
                    const long long* mem, Py_ssize_t m,
                    const long long* comp, Py_ssize_t csize,
                    double lam, double eps, double logdet_full,
                    double* work) except? -1.0:
    cdef Py_ssize_t ai, pi, ci, i, j
    cdef double total = 0.0
    cdef double within, cross, row, best, v, dp, h

    if m == 0:
        return 0.0

    if code == FL:
        for ci in range(csize):
            i = comp[ci]
            best = -INFINITY
            for ai in range(m):
                v = s[i * n + mem[ai]]
                if v > best:
                    best = v
            total += best
        return total

    if code == GC_SF or code == GC_CF or code == OPL or code == SUB_TRIPLET:
        within = 0.0
        cross = 0.0
        for ai in range(m):
            i = mem[ai]
            for pi in range(m):
                v = s[i * n + mem[pi]]
                if code == SUB_TRIPLET:
                    v *= v
                within += v
            for ci in range(csize):
                v = s[i * n + comp[ci]]
                if code == SUB_TRIPLET:
                    v *= v
                cross += v
        if code == GC_SF:
            return cross - lam * within
        if code == GC_CF:
            return lam * cross
        if code == OPL:
            return (1.0 - within) + cross
        return cross - within

    if code == LOGDET_SF or code == LOGDET_CF:
        total = _block_logdet(s, n, mem, m, lam, work)
        if code == LOGDET_CF:
            total -= logdet_full
        return total

    if code == NPAIRS or code == SUPCON:
        within = 0.0
        total = 0.0
        for ai in range(m):
            i = mem[ai]
            row = -1.0
            for j in range(n):
                row += s[i * n + j]
            total += log(row)
            for pi in range(m):
                within += s[i * n + mem[pi]]
        if code == NPAIRS:
            return -(within + total)
        return -within / m + total

    if code == SUB_SUPCON:
        within = 0.0
        total = 0.0
        for ai in range(m):
            i = mem[ai]
            for pi in range(m):
                within += s[i * n + mem[pi]]
            for ci in range(csize):
                work[ci] = s[i * n + comp[ci]]
            total += _lse_buf(work, csize)
        return total - within

    if code == SNN or code == SUB_SNN:
        for ai in range(m):
            i = mem[ai]
            j = 0
            for pi in range(m):
                if pi == ai:
                    continue
                if code == SNN:
                    work[j] = s[i * n + mem[pi]]
                else:
                    work[j] = d[i * n + mem[pi]]
                j += 1
            v = _lse_buf(work, j) if j > 0 else 0.0
            for ci in range(csize):
                work[ci] = s[i * n + comp[ci]]
            if code == SNN:
                total += _lse_buf(work, csize) - v
            else:
                total += v + _lse_buf(work, csize)
        return total

    if code == TRIPLET:
        if csize == 0 or m < 2:
            return 0.0
        for ai in range(m):
            i = mem[ai]
            for pi in range(m):
                if pi == ai:
                    continue
                dp = d[i * n + mem[pi]]
                dp *= dp
                for ci in range(csize):
                    v = d[i * n + comp[ci]]
                    h = dp - v * v + eps
                    if h > 0.0:
                        total += h
        return total

    raise ValueError(f"unknown objective code {code}")


cdef _as_matrix(obj):
    arr = np.ascontiguousarray(obj, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expected a square matrix")
    return arr


def term_value(int code, s, d, members, double lam, double eps,
               logdet_full=None):
    """Per-class term of one objective; matches pure.term_value."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sm = _as_matrix(s)
    cdef Py_ssize_t n = sm.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dm
    cdef cnp.ndarray[cnp.int64_t, ndim=1] mem
    cdef cnp.ndarray[cnp.int64_t, ndim=1] comp
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(n * n + n)
    cdef double full = 0.0
    cdef const double* dptr = NULL
    cdef const long long* cptr = NULL

    mem = np.ascontiguousarray(np.asarray(members, dtype=np.int64))
    if mem.shape[0] == 0:
        return 0.0
    mask = np.zeros(n, dtype=bool)
    mask[np.asarray(mem)] = True
    comp = np.ascontiguousarray(np.flatnonzero(~mask).astype(np.int64))
    if comp.shape[0] > 0:
        cptr = <const long long*> &comp[0]
    if code == TRIPLET or code == SUB_SNN:
        dm = _as_matrix(d)
        dptr = &dm[0, 0]
    if code == LOGDET_CF:
        full = _full_logdet(sm, lam) if logdet_full is None else logdet_full
    return _term_c(code, &sm[0, 0], dptr, n,
                   <const long long*> &mem[0], mem.shape[0],
                   cptr, comp.shape[0], lam, eps, full, &work[0])


cdef double _full_logdet(cnp.ndarray[cnp.float64_t, ndim=2] sm,
                         double lam) except? -1.0:
    cdef Py_ssize_t n = sm.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] everyone = np.arange(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(n * n)
    return _block_logdet(&sm[0, 0], n, <const long long*> &everyone[0], n,
                         lam, &work[0])


def total_value(int code, s, d, sets, double lam, double eps):
    """Sum of per-class terms; returns (total, per-class array)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sm = _as_matrix(s)
    full = None
    if code == LOGDET_CF:
        full = _full_logdet(sm, lam)
    per = np.array([term_value(code, sm, d, a, lam, eps, full) for a in sets])
    return float(np.sum(per)), per


def value_table(int code, s, d, double lam, double eps):
    """Objective value for every subset of V, indexed by bitmask."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sm = _as_matrix(s)
    cdef Py_ssize_t n = sm.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dm
    cdef const double* dptr = NULL
    cdef double full = 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(n * n + n)
    cdef long long[MAX_TABLE_N] mem
    cdef long long[MAX_TABLE_N] comp
    cdef Py_ssize_t bits, i, m, c

    if n > MAX_TABLE_N:
        raise ValueError(f"subset table limited to {MAX_TABLE_N} points, got {n}")
    out = np.empty(1 << n)
    if code == TRIPLET or code == SUB_SNN:
        dm = _as_matrix(d)
        dptr = &dm[0, 0]
    if code == LOGDET_CF:
        full = _full_logdet(sm, lam)

    for bits in range(1 << n):
        m = 0
        c = 0
        for i in range(n):
            if (bits >> i) & 1:
                mem[m] = i
                m += 1
            else:
                comp[c] = i
                c += 1
        out[bits] = _term_c(code, &sm[0, 0], dptr, n, mem, m, comp, c,
                            lam, eps, full, &work[0])
    return out


def dr_scan(table, Py_ssize_t n, double tol, bint include_empty,
            Py_ssize_t max_stored=1000):
    """Scan every diminishing-returns triple x, A <= B <= V\\{x}.

    Returns (min_margin, compared, skipped, violation_count, violations)
    with each stored violation (A_bits, B_bits, x, gain_A, gain_B), exactly
    as the reference backend does.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = \
        np.ascontiguousarray(table, dtype=np.float64)
    cdef double* tp = &t[0]
    cdef double min_margin = INFINITY
    cdef long long compared = 0, skipped = 0, count = 0
    cdef Py_ssize_t x, xb, rest, a, b, full_mask
    cdef double gain_a, gain_b, margin
    viols = []

    full_mask = (1 << n) - 1
    for x in range(n):
        xb = 1 << x
        rest = full_mask & ~xb
        b = rest
        while True:
            gain_b = tp[b | xb] - tp[b]
            a = b
            while True:
                if a != b and (include_empty or a != 0):
                    gain_a = tp[a | xb] - tp[a]
                    margin = gain_a - gain_b
                    if isfinite(margin):
                        compared += 1
                        if margin < min_margin:
                            min_margin = margin
                        if margin < -tol:
                            count += 1
                            if len(viols) < max_stored:
                                viols.append((a, b, x, gain_a, gain_b))
                    else:
                        skipped += 1
                if a == 0:
                    break
                a = (a - 1) & b
            if b == 0:
                break
            b = (b - 1) & rest
    return min_margin, compared, skipped, count, viols


def pair_scan(table, Py_ssize_t n, double tol, Py_ssize_t max_stored=1000):
    """Scan the lattice inequality f(X)+f(Y) >= f(X|Y)+f(X&Y) over all pairs."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = \
        np.ascontiguousarray(table, dtype=np.float64)
    cdef double* tp = &t[0]
    cdef double min_margin = INFINITY
    cdef long long compared = 0, skipped = 0, count = 0
    cdef Py_ssize_t x_bits, y_bits, size
    cdef double lhs, rhs, margin
    viols = []

    size = 1 << n
    for x_bits in range(size):
        for y_bits in range(x_bits + 1, size):
            lhs = tp[x_bits] + tp[y_bits]
            rhs = tp[x_bits | y_bits] + tp[x_bits & y_bits]
            margin = lhs - rhs
            if not isfinite(margin):
                skipped += 1
                continue
            compared += 1
            if margin < min_margin:
                min_margin = margin
            if margin < -tol:
                count += 1
                if len(viols) < max_stored:
                    viols.append((x_bits, y_bits, lhs, rhs))
    return min_margin, compared, skipped, count, viols
