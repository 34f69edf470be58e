"""Dense linear assignment by shortest augmenting paths.

A plain numpy implementation of the primal-dual (Hungarian / Jonker-Volgenant
style) method: rows are inserted one at a time and each insertion runs a
Dijkstra search over reduced costs to find the cheapest augmenting path.
O(n^3) worst case. Used as an independent cross-check of the scipy backend.
"""

import numpy as np


def shortest_augmenting_path(cost):
    """Return ``col`` with ``col[i]`` the column assigned to row ``i``.

    Parameters
    ----------
    cost : ndarray of shape (n, n)
        Finite cost matrix.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n != m:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")

    # Index 0 is a virtual column; row_of[j] is the 1-based row matched to
    # column j (0 = free).
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)

    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            free = ~used
            free[0] = False
            reduced = cost[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0

            cand = np.where(free[1:], minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]

            u[row_of[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1

    col = np.empty(n, dtype=np.int64)
    col[row_of[1:] - 1] = np.arange(n)
    return col
