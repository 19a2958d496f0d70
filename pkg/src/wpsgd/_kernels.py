"""Compiled inner loops.

Every sparse dot product and SGD update in the package goes through these
functions so that the single-step API and the bulk training loop round
identically.
"""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def sparse_dot(indices, values, w):
    acc = 0.0
    for p in range(indices.shape[0]):
        acc += values[p] * w[indices[p]]
    return acc


@njit(nogil=True, cache=True)
def step_inplace(w, indices, values, y, shrink, eta):
    """One hinge-loss SGD update on ``w``; returns False if it went non-finite.

    ``w <- shrink * w + eta * y * x`` when ``y * (w . x) < 1``, else
    ``w <- shrink * w``. The margin is taken before shrinking.
    """
    margin = 0.0
    for p in range(indices.shape[0]):
        margin += values[p] * w[indices[p]]
    for q in range(w.shape[0]):
        w[q] *= shrink
    if y * margin < 1.0:
        c = eta * y
        for p in range(indices.shape[0]):
            j = indices[p]
            w[j] += c * values[p]
            if not np.isfinite(w[j]):
                return False
    return True


@njit(nogil=True, cache=True)
def run_steps(w, indptr, indices, values, ysign, cursor, n_steps, shrink, eta):
    """Apply ``n_steps`` updates cycling through the CSR rows from ``cursor``.

    Returns ``(cursor, failed_at)`` where ``failed_at`` is the 1-based step
    that produced a non-finite weight, or 0.
    """
    m = indptr.shape[0] - 1
    for s in range(n_steps):
        a = indptr[cursor]
        b = indptr[cursor + 1]
        ok = step_inplace(w, indices[a:b], values[a:b], ysign[cursor], shrink, eta)
        cursor += 1
        if cursor == m:
            cursor = 0
        if not ok:
            return cursor, s + 1
    return cursor, 0


@njit(nogil=True, cache=True)
def csr_margins(indptr, indices, values, w):
    m = indptr.shape[0] - 1
    out = np.empty(m)
    for i in range(m):
        out[i] = sparse_dot(indices[indptr[i]:indptr[i + 1]], values[indptr[i]:indptr[i + 1]], w)
    return out
