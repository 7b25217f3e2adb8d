"""Numeric inner loops: token Levenshtein DP, edit backtrace, IBM-1 E-step.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version.  The numba path is used when numba imports cleanly and
``PAIRFORGE_NO_NUMBA`` is unset (or ``0``).  Both paths are always defined
so tests and ``benchmarks/bench_kernels.py`` can compare them directly.
"""

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("PAIRFORGE_NO_NUMBA", "0").lower() in ("", "0", "false", "no")

# backtrace op codes
OP_MATCH = 0
OP_SUB = 1
OP_DEL = 2
OP_INS = 3


def _maybe_njit(fn):
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return None


# --------------------------------------------------------------------------
# Levenshtein


def _distance_loop(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for j in range(m + 1):
        prev[j] = j
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            d = prev[j] + 1
            if d < best:
                best = d
            d = cur[j - 1] + 1
            if d < best:
                best = d
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


def _ops_loop(a, b):
    n = a.shape[0]
    m = b.shape[0]
    D = np.empty((n + 1, m + 1), dtype=np.int64)
    for j in range(m + 1):
        D[0, j] = j
    for i in range(1, n + 1):
        D[i, 0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = D[i - 1, j - 1] + (0 if ai == b[j - 1] else 1)
            d = D[i - 1, j] + 1
            if d < best:
                best = d
            d = D[i, j - 1] + 1
            if d < best:
                best = d
            D[i, j] = best
    # preference on equal cost: match > substitution > deletion > insertion
    i = n
    j = m
    ops = np.empty(n + m, dtype=np.int8)
    k = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and D[i - 1, j - 1] == D[i, j]:
            ops[k] = OP_MATCH
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and D[i - 1, j - 1] + 1 == D[i, j]:
            ops[k] = OP_SUB
            i -= 1
            j -= 1
        elif i > 0 and D[i - 1, j] + 1 == D[i, j]:
            ops[k] = OP_DEL
            i -= 1
        else:
            ops[k] = OP_INS
            j -= 1
        k += 1
    return ops[:k][::-1].copy()


def _matrix_numpy(a, b):
    # row recurrence; the insertion chain within a row is j + cummin(tmp - j)
    n = a.shape[0]
    m = b.shape[0]
    D = np.empty((n + 1, m + 1), dtype=np.int64)
    cols = np.arange(m + 1, dtype=np.int64)
    D[0] = cols
    for i in range(1, n + 1):
        prev = D[i - 1]
        tmp = np.empty(m + 1, dtype=np.int64)
        tmp[0] = i
        if m:
            tmp[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i - 1]))
        D[i] = cols + np.minimum.accumulate(tmp - cols)
    return D


def _distance_numpy(a, b):
    if a.shape[0] < b.shape[0]:
        a, b = b, a
    return int(_matrix_numpy(a, b)[-1, -1])


def _ops_numpy(a, b):
    D = _matrix_numpy(a, b)
    ops = []
    i, j = a.shape[0], b.shape[0]
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and D[i - 1, j - 1] == D[i, j]:
            ops.append(OP_MATCH)
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and D[i - 1, j - 1] + 1 == D[i, j]:
            ops.append(OP_SUB)
            i -= 1
            j -= 1
        elif i > 0 and D[i - 1, j] + 1 == D[i, j]:
            ops.append(OP_DEL)
            i -= 1
        else:
            ops.append(OP_INS)
            j -= 1
    return np.array(ops[::-1], dtype=np.int8)


# --------------------------------------------------------------------------
# IBM Model 1 E-step
#
# The corpus is flattened into ``param_idx``: for pair p and target position
# j, the (src_len + 1) candidate source tokens (NULL first) are contiguous and
# hold indices into the flat parameter vector ``t``.  ``seg_len[s]`` is the
# width of segment s (one per target token).


def _estep_loop(t, param_idx, seg_len, n_params):
    counts = np.zeros(n_params, dtype=np.float64)
    loglik = 0.0
    pos = 0
    for s in range(seg_len.shape[0]):
        w = seg_len[s]
        denom = 0.0
        for k in range(w):
            denom += t[param_idx[pos + k]]
        for k in range(w):
            idx = param_idx[pos + k]
            counts[idx] += t[idx] / denom
        loglik += np.log(denom / w)
        pos += w
    return counts, loglik


def _estep_numpy(t, param_idx, seg_len, n_params):
    if seg_len.shape[0] == 0:
        return np.zeros(n_params, dtype=np.float64), 0.0
    vals = t[param_idx]
    starts = np.zeros(seg_len.shape[0], dtype=np.int64)
    np.cumsum(seg_len[:-1], out=starts[1:])
    denom = np.add.reduceat(vals, starts)
    post = vals / np.repeat(denom, seg_len)
    counts = np.bincount(param_idx, weights=post, minlength=n_params)
    loglik = float(np.sum(np.log(denom / seg_len)))
    return counts, loglik


levenshtein_numba = _maybe_njit(_distance_loop)
edit_ops_numba = _maybe_njit(_ops_loop)
em_estep_numba = _maybe_njit(_estep_loop)

levenshtein_numpy = _distance_numpy
edit_ops_numpy = _ops_numpy
em_estep_numpy = _estep_numpy

if USE_NUMBA:
    levenshtein = levenshtein_numba
    edit_ops = edit_ops_numba
    em_estep = em_estep_numba
else:
    levenshtein = levenshtein_numpy
    edit_ops = edit_ops_numpy
    em_estep = em_estep_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"


def encode_pair(a, b):
    """Map two token sequences onto a shared int64 id space."""
    ids = {}
    ea = np.fromiter((ids.setdefault(tok, len(ids)) for tok in a), dtype=np.int64, count=len(a))
    eb = np.fromiter((ids.setdefault(tok, len(ids)) for tok in b), dtype=np.int64, count=len(b))
    return ea, eb
