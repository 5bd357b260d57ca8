"""Numpy reference backend.

Implements per-class term values for every objective plus the subset-lattice
scans used by the submodularity checker. The compiled backend in fastcore.pyx
mirrors this surface exactly; parity is enforced by tests, so any change here
must land there too.

Conventions shared by both backends:
  * the empty set evaluates to 0 for every objective;
  * an empty log-sum-exp over an anchor's own class (singleton set under
    self-exclusion) contributes 0 -- the term is dropped;
  * an empty log-sum-exp over the complement (A = V) yields -inf: the value
    genuinely diverges at the top of the lattice;
  * log-sum-exp uses max-shift stabilization;
  * graph-cut style double sums over a class include the diagonal.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import NotPositiveDefinite

BACKEND_NAME = "pure"

# Objective codes, kept in sync with setloss.objectives.OBJ_CODE.
TRIPLET, NPAIRS, OPL, SNN, SUPCON = 0, 1, 2, 3, 4
SUB_TRIPLET, SUB_SNN, SUB_SUPCON = 5, 6, 7
GC_SF, GC_CF, LOGDET_SF, LOGDET_CF, FL = 8, 9, 10, 11, 12


def _lse(x: np.ndarray) -> float:
    """Stabilized log(sum(exp(x))); -inf for an empty vector."""
    if x.size == 0:
        return -math.inf
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def _logdet_spd(m: np.ndarray) -> float:
    """log det via symmetric positive-definite factorization."""
    if m.shape[0] == 0:
        return 0.0
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(
            f"{m.shape[0]}x{m.shape[0]} regularized block is not positive definite"
        ) from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def term_value(code: int, s: np.ndarray, d: np.ndarray | None,
               members: np.ndarray, lam: float, eps: float,
               logdet_full: float | None = None) -> float:
    """Per-class (or per-subset) term of one objective.

    s is the similarity matrix, d the Euclidean distance matrix (only read by
    the triplet and submod-snn codes), members the index set A. logdet_full
    lets callers amortize log det(S_V + lam I) across logdet-cf calls.
    """
    members = np.asarray(members, dtype=np.int64)
    m = members.size
    n = s.shape[0]
    if m == 0:
        return 0.0
    mask = np.zeros(n, dtype=bool)
    mask[members] = True
    comp = np.flatnonzero(~mask)

    if code == FL:
        if comp.size == 0:
            return 0.0
        return float(np.sum(np.max(s[np.ix_(comp, members)], axis=1)))

    if code == GC_SF:
        cross = float(np.sum(s[np.ix_(members, comp)]))
        within = float(np.sum(s[np.ix_(members, members)]))
        return cross - lam * within

    if code == GC_CF:
        return lam * float(np.sum(s[np.ix_(members, comp)]))

    if code == LOGDET_SF or code == LOGDET_CF:
        block = s[np.ix_(members, members)] + lam * np.eye(m)
        val = _logdet_spd(block)
        if code == LOGDET_CF:
            if logdet_full is None:
                logdet_full = _logdet_spd(s + lam * np.eye(n))
            val -= logdet_full
        return val

    if code == OPL:
        within = float(np.sum(s[np.ix_(members, members)]))
        cross = float(np.sum(s[np.ix_(members, comp)]))
        return (1.0 - within) + cross

    if code == NPAIRS or code == SUPCON:
        within = float(np.sum(s[np.ix_(members, members)]))
        row = np.sum(s[members], axis=1) - 1.0
        # Rowsums at or below 1 push the log outside its domain; the scan
        # layers treat the resulting inf/nan as off-domain, not as values.
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = float(np.sum(np.log(row)))
        if code == NPAIRS:
            return -(within + logs)
        return -within / m + logs

    if code == SUB_TRIPLET:
        s2 = s * s
        cross = float(np.sum(s2[np.ix_(members, comp)]))
        within = float(np.sum(s2[np.ix_(members, members)]))
        return cross - within

    if code == SUB_SUPCON:
        within = float(np.sum(s[np.ix_(members, members)]))
        total = -within
        for i in members:
            total += _lse(s[i, comp])
        return total

    if code == SNN:
        total = 0.0
        for i in members:
            own = members[members != i]
            pos = _lse(s[i, own]) if own.size else 0.0
            neg = _lse(s[i, comp])
            total += neg - pos
        return total

    if code == SUB_SNN:
        total = 0.0
        for i in members:
            own = members[members != i]
            pos = _lse(d[i, own]) if own.size else 0.0
            total += pos + _lse(s[i, comp])
        return total

    if code == TRIPLET:
        if comp.size == 0 or m < 2:
            return 0.0
        d2m = d[np.ix_(members, members)] ** 2
        d2c = d[np.ix_(members, comp)] ** 2
        total = 0.0
        for a in range(m):
            hinge = np.maximum(d2m[a][:, None] - d2c[a][None, :] + eps, 0.0)
            hinge[a, :] = 0.0
            total += float(np.sum(hinge))
        return total

    raise ValueError(f"unknown objective code {code}")


def total_value(code: int, s: np.ndarray, d: np.ndarray | None,
                sets, lam: float, eps: float):
    """Sum of per-class terms; returns (total, per-class array)."""
    logdet_full = None
    if code == LOGDET_CF:
        n = s.shape[0]
        logdet_full = _logdet_spd(s + lam * np.eye(n))
    per = np.array(
        [term_value(code, s, d, a, lam, eps, logdet_full) for a in sets]
    )
    return float(np.sum(per)), per


def value_table(code: int, s: np.ndarray, d: np.ndarray | None,
                lam: float, eps: float) -> np.ndarray:
    """Objective value for every subset of V, indexed by bitmask."""
    n = s.shape[0]
    logdet_full = None
    if code == LOGDET_CF:
        logdet_full = _logdet_spd(s + lam * np.eye(n))
    out = np.empty(1 << n)
    idx = np.arange(n)
    for bits in range(1 << n):
        members = idx[(bits >> idx) & 1 == 1]
        out[bits] = term_value(code, s, d, members, lam, eps, logdet_full)
    return out


def dr_scan(table: np.ndarray, n: int, tol: float, include_empty: bool,
            max_stored: int = 1000):
    """Scan every diminishing-returns triple x, A <= B <= V\\{x}.

    Returns (min_margin, compared, skipped, violation_count, violations)
    where each stored violation is (A_bits, B_bits, x, gain_A, gain_B).
    Triples where either gain is non-finite lie outside the objective's
    domain; they are skipped and tallied rather than judged.
    """
    t = table
    full = (1 << n) - 1
    min_margin = math.inf
    compared = 0
    skipped = 0
    count = 0
    viols = []
    for x in range(n):
        xb = 1 << x
        rest = full & ~xb
        b = rest
        while True:
            # Plain floats: inf arithmetic without numpy scalar warnings.
            gain_b = float(t[b | xb]) - float(t[b])
            a = b
            while True:
                if a != b and (include_empty or a != 0):
                    gain_a = float(t[a | xb]) - float(t[a])
                    margin = gain_a - gain_b
                    if math.isfinite(margin):
                        compared += 1
                        if margin < min_margin:
                            min_margin = margin
                        if margin < -tol:
                            count += 1
                            if len(viols) < max_stored:
                                viols.append((a, b, x, float(gain_a), float(gain_b)))
                    else:
                        skipped += 1
                if a == 0:
                    break
                a = (a - 1) & b
            if b == 0:
                break
            b = (b - 1) & rest
    return min_margin, compared, skipped, count, viols


def pair_scan(table: np.ndarray, n: int, tol: float, max_stored: int = 1000):
    """Scan the lattice inequality f(X)+f(Y) >= f(X|Y)+f(X&Y) over all pairs.

    Same return shape and off-domain convention as dr_scan, with stored
    violations recorded as (X_bits, Y_bits, lhs, rhs).
    """
    t = table
    size = 1 << n
    min_margin = math.inf
    compared = 0
    skipped = 0
    count = 0
    viols = []
    for x_bits in range(size):
        fx = float(t[x_bits])
        for y_bits in range(x_bits + 1, size):
            lhs = fx + float(t[y_bits])
            rhs = float(t[x_bits | y_bits]) + float(t[x_bits & y_bits])
            margin = lhs - rhs
            if not math.isfinite(margin):
                skipped += 1
                continue
            compared += 1
            if margin < min_margin:
                min_margin = margin
            if margin < -tol:
                count += 1
                if len(viols) < max_stored:
                    viols.append((x_bits, y_bits, float(lhs), float(rhs)))
    return min_margin, compared, skipped, count, viols
