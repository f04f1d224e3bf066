"""Compiled pair-loop kernels for the continuous solver.

Single sequential pass over pairs ``i <= j``; the reduction order is fixed,
so results are run-to-run identical.
"""

import math

import numpy as np
from numba import njit

_DIRECT_LIMIT = 700.0


@njit(cache=True)
def _pair(tp, tm):
    m = max(tp, tm, 0.0)
    if m <= _DIRECT_LIMIT:
        e1 = math.exp(tp)
        e2 = math.exp(tm)
        s = e1 + e2
        lse = math.log1p(s)
        s += 1.0
        return lse, e1 / s, e2 / s
    e1 = math.exp(tp - m)
    e2 = math.exp(tm - m)
    s = e1 + e2 + math.exp(-m)
    return m + math.log(s), e1 / s, e2 / s


@njit(cache=True)
def value_grad(gp, ep, gm, em, labels, a, include_diagonal, grad):
    """Unnormalized pair-loss sum; writes the unnormalized gradient into
    ``grad`` (length 4n, layout ``[gamma+, eta+, gamma-, eta-]``)."""
    n = gp.shape[0]
    grad[:] = 0.0
    total = 0.0
    for i in range(n):
        start = i if include_diagonal else i + 1
        for j in range(start, n):
            same = labels[i] == labels[j]
            tp = gp[i] + gp[j]
            tm = gm[i] + gm[j]
            if same:
                tp += ep[i] + ep[j]
                tm += em[i] + em[j]
            lse, pp, pm = _pair(tp, tm)
            aij = a[i, j]
            loss = lse
            rp = pp
            rm = pm
            if aij == 1:
                loss -= tp
                rp -= 1.0
            elif aij == -1:
                loss -= tm
                rm -= 1.0
            total += loss
            grad[i] += rp
            grad[j] += rp
            grad[2 * n + i] += rm
            grad[2 * n + j] += rm
            if same:
                grad[n + i] += rp
                grad[n + j] += rp
                grad[3 * n + i] += rm
                grad[3 * n + j] += rm
    return total


@njit(cache=True)
def value_only(gp, ep, gm, em, labels, a, include_diagonal):
    n = gp.shape[0]
    total = 0.0
    for i in range(n):
        start = i if include_diagonal else i + 1
        for j in range(start, n):
            tp = gp[i] + gp[j]
            tm = gm[i] + gm[j]
            if labels[i] == labels[j]:
                tp += ep[i] + ep[j]
                tm += em[i] + em[j]
            lse, pp, pm = _pair(tp, tm)
            aij = a[i, j]
            if aij == 1:
                lse -= tp
            elif aij == -1:
                lse -= tm
            total += lse
    return total


def warmup():
    """Trigger compilation on a tiny problem."""
    z = np.zeros(2)
    lab = np.zeros(2, dtype=np.int64)
    a = np.zeros((2, 2), dtype=np.int8)
    value_grad(z, z, z, z, lab, a, True, np.zeros(8))
    value_only(z, z, z, z, lab, a, True)
