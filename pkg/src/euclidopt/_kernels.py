"""Compiled inner loops for tour construction and 2-opt descent.

Tours are int64 arrays of row indices into a coordinate array ``Z``. For
alternating tours ``Z`` stacks X over Y and entries at odd positions refer
to Y rows, so alternation is encoded by position parity.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _pdist(Z, a, b, p):
    s = 0.0
    for k in range(Z.shape[1]):
        t = Z[a, k] - Z[b, k]
        s += t * t
    if p == 2.0:
        return s
    r = np.sqrt(s)
    if p == 1.0:
        return r
    return r**p


@njit(cache=True)
def _reverse(order, i, j):
    # Reverse positions i+1..j, or the complementary wrapped range j+1..i
    # when that is shorter; both give the same cycle.
    n = order.shape[0]
    length = j - i
    if length <= n - length:
        lo = i + 1
        hi = j
        while lo < hi:
            tmp = order[lo]
            order[lo] = order[hi]
            order[hi] = tmp
            lo += 1
            hi -= 1
    else:
        for t in range((n - length) // 2):
            lo = (j + 1 + t) % n
            hi = (i - t) % n
            tmp = order[lo]
            order[lo] = order[hi]
            order[hi] = tmp


@njit(cache=True)
def two_opt_inplace(Z, order, p, tol, alternating):
    """First-improvement 2-opt on a cyclic ``order``; returns the move count.

    Edge ``k`` joins positions ``k`` and ``k + 1``. Pairs ``(i, j)`` with
    ``i < j`` are scanned lexicographically, adjacent pairs skipped, and the
    move replacing ``(o[i], o[i+1]), (o[j], o[j+1])`` by
    ``(o[i], o[j]), (o[i+1], o[j+1])`` is applied whenever it lowers the
    cost by more than ``tol``. With ``alternating`` only pairs with ``j - i``
    odd are tried: those are exactly the moves that keep the cycle
    alternating. Passes repeat until one makes no move.
    """
    n = order.shape[0]
    moves = 0
    improved = True
    while improved:
        improved = False
        for i in range(n - 2):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if alternating and (j - i) % 2 == 0:
                    continue
                a = order[i]
                b = order[i + 1]
                c = order[j]
                e = order[(j + 1) % n]
                delta = (_pdist(Z, a, c, p) + _pdist(Z, b, e, p)
                         - _pdist(Z, a, b, p) - _pdist(Z, c, e, p))
                if delta < -tol:
                    _reverse(order, i, j)
                    moves += 1
                    improved = True
    return moves


@njit(cache=True)
def nearest_neighbor_inplace(Z, order, start):
    """Greedy tour from ``start``; distance ties go to the smaller index."""
    n = Z.shape[0]
    visited = np.zeros(n, dtype=np.bool_)
    cur = start
    order[0] = cur
    visited[cur] = True
    for k in range(1, n):
        best = -1
        best_d = np.inf
        for v in range(n):
            if visited[v]:
                continue
            dv = _pdist(Z, cur, v, 2.0)
            if dv < best_d:
                best_d = dv
                best = v
        order[k] = best
        visited[best] = True
        cur = best


@njit(cache=True)
def alternating_nearest_neighbor_inplace(Z, n, seq):
    """Greedy alternating tour from X row 0 over ``Z = vstack(X, Y)``.

    ``seq`` receives global row indices: even positions X rows, odd
    positions Y rows (offset by ``n``).
    """
    visited = np.zeros(2 * n, dtype=np.bool_)
    cur = 0
    seq[0] = 0
    visited[0] = True
    for k in range(1, 2 * n):
        lo = n if k % 2 == 1 else 0
        best = -1
        best_d = np.inf
        for v in range(lo, lo + n):
            if visited[v]:
                continue
            dv = _pdist(Z, cur, v, 2.0)
            if dv < best_d:
                best_d = dv
                best = v
        seq[k] = best
        visited[best] = True
        cur = best
