"""Monopartite Euclidean TSP with p-costs.

A tour is an int64 permutation ``order`` of the cloud's rows, read
cyclically. Its canonical form starts at vertex 0 with ``order[1] <
order[-1]``, which fixes rotation and direction.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from . import _kernels
from ._validation import REL_TOL, check_cloud, check_exponent, check_permutation
from .geometry import pdist_matrix
from .matching import EdgeEnergyConstants, edge_energy_constants, local_energy_report

__all__ = [
    "TourSolution",
    "canonical_tour",
    "tour_cost",
    "tour_edge_lengths",
    "nearest_neighbor_tour",
    "two_opt_descent",
    "held_karp",
    "verify_tour_two_opt",
    "verify_tsp_edge_energy",
    "max_tour_edge",
    "TSPSolver",
    "read_tour",
    "write_tour",
]

HELD_KARP_MAX_N = 16
DESCENT_TOL = 1e-12


@dataclass(frozen=True)
class TourSolution:
    order: np.ndarray
    cost: float
    p: float
    two_opt_stable: bool
    moves: int = 0


def canonical_tour(order):
    """Rotate to start at 0 and orient so that ``order[1] < order[-1]``."""
    order = check_permutation(order, name="order")
    k = int(np.flatnonzero(order == 0)[0])
    order = np.roll(order, -k)
    if order.size > 2 and order[1] > order[-1]:
        order = np.concatenate([order[:1], order[:0:-1]])
    return order


def _checked(cloud, order, min_n=3):
    cloud = check_cloud(cloud, unit_cube=False)
    n = cloud.shape[0]
    if n < min_n:
        raise ValueError(f"tour needs n >= {min_n}, got {n}")
    return cloud, check_permutation(order, n, name="order")


def tour_edge_lengths(cloud, order):
    """Lengths of the edges ``(order[k], order[k+1])``, cyclically."""
    cloud, order = _checked(cloud, order)
    pts = cloud[order]
    return np.linalg.norm(pts - np.roll(pts, -1, axis=0), axis=1)


def tour_cost(cloud, order, p=1.0):
    """Cyclic sum of p-powered edge lengths."""
    p = check_exponent(p)
    return float(np.sum(tour_edge_lengths(cloud, order) ** p))


def max_tour_edge(cloud, order):
    return float(tour_edge_lengths(cloud, order).max())


def nearest_neighbor_tour(cloud, start=0):
    """Greedy nearest-neighbour tour (ties to the smaller index), canonical."""
    cloud = check_cloud(cloud, unit_cube=False)
    n = cloud.shape[0]
    if n < 3:
        raise ValueError(f"tour needs n >= 3, got {n}")
    if not 0 <= start < n:
        raise ValueError(f"start must be in [0, {n}), got {start}")
    order = np.empty(n, dtype=np.int64)
    _kernels.nearest_neighbor_inplace(cloud, order, int(start))
    return canonical_tour(order)


def two_opt_descent(cloud, order, p=1.0):
    """First-improvement 2-opt descent from ``order``.

    Pairs of non-adjacent edges are scanned in lexicographic position order
    and a segment reversal is applied whenever it lowers the cost by more
    than ``1e-12``; scanning repeats until a full pass makes no move, so the
    result satisfies the 2-opt inequality for every non-adjacent pair.
    Tours with ``n < 4`` have no such pair and are returned as they are.
    """
    cloud, order = _checked(cloud, order)
    p = check_exponent(p)
    work = order.copy()
    moves = 0
    if cloud.shape[0] >= 4:
        moves = int(_kernels.two_opt_inplace(cloud, work, p, DESCENT_TOL, False))
    work = canonical_tour(work)
    return TourSolution(work, tour_cost(cloud, work, p), p, True, moves)


def held_karp(cloud, p=1.0):
    """Exact optimal tour by bitmask dynamic programming, ``3 <= n <= 16``."""
    cloud = check_cloud(cloud, unit_cube=False)
    p = check_exponent(p)
    n = cloud.shape[0]
    if not 3 <= n <= HELD_KARP_MAX_N:
        raise ValueError(f"Held-Karp needs 3 <= n <= {HELD_KARP_MAX_N}, got {n}")
    W = pdist_matrix(cloud, cloud, p)
    W1 = W[1:, 1:]
    m = n - 1
    full = 1 << m
    bits = ((np.arange(full)[:, None] >> np.arange(m)) & 1).astype(bool)

    # dp[mask, j]: cheapest path from vertex 0 through `mask`, ending at j+1.
    dp = np.full((full, m), np.inf)
    parent = np.full((full, m), -1, dtype=np.int64)
    dp[1 << np.arange(m), np.arange(m)] = W[0, 1:]
    for mask in range(1, full):
        if mask & (mask - 1) == 0:
            continue
        js = np.flatnonzero(bits[mask])
        prev = mask ^ (1 << js)
        cand = dp[prev, :] + W1[:, js].T
        k = np.argmin(cand, axis=1)
        dp[mask, js] = cand[np.arange(js.size), k]
        parent[mask, js] = k

    last = int(np.argmin(dp[full - 1] + W[1:, 0]))
    path = []
    mask = full - 1
    j = last
    while j >= 0:
        path.append(j + 1)
        prev_j = int(parent[mask, j])
        mask ^= 1 << j
        j = prev_j
    order = canonical_tour(np.array([0] + path[::-1], dtype=np.int64))
    return TourSolution(order, tour_cost(cloud, order, p), p, True)


def _pair_blocks(n, block_rows):
    for start in range(0, n, block_rows):
        yield start, min(n, start + block_rows)


def verify_tour_two_opt(cloud, order, p=1.0) -> List[Tuple[int, int, float]]:
    """Non-adjacent edge pairs violating the 2-opt inequality.

    Edge ``a`` joins positions ``a`` and ``a+1`` of ``order``. A pair
    ``a < b`` violates when
    ``c(o[a], o[a+1]) + c(o[b], o[b+1]) > c(o[a], o[b]) + c(o[a+1], o[b+1])``
    beyond relative slack ``1e-9``. Returns ``(a, b, deficit)`` triples.
    """
    cloud, order = _checked(cloud, order, min_n=4)
    p = check_exponent(p)
    n = order.size
    P = cloud[order]
    Pn = np.roll(P, -1, axis=0)
    own = np.linalg.norm(P - Pn, axis=1) ** p
    pos = np.arange(n)
    out = []
    for s, t in _pair_blocks(n, max(1, 4_000_000 // n)):
        lhs = own[s:t, None] + own[None, :]
        rhs = cdist(P[s:t], P) ** p + cdist(Pn[s:t], Pn) ** p
        a = pos[s:t, None]
        valid = (pos[None, :] > a + 1) & ~((a == 0) & (pos[None, :] == n - 1))
        bad = valid & (lhs > rhs + REL_TOL * (1.0 + np.abs(lhs)))
        for i, j in zip(*np.nonzero(bad)):
            out.append((int(i + s), int(j), float(lhs[i, j] - rhs[i, j])))
    return out


def verify_tsp_edge_energy(cloud, order, p, consts: EdgeEnergyConstants = None):
    """Local edge-to-energy check for a 2-opt stable tour.

    For each tour edge ``e = (o[a], o[a+1])`` the ball of radius
    ``epsilon |e|`` around its midpoint is formed and every vertex ``v``
    inside contributes the p-cost of its successor edge ``(v, next(v))``.
    The summed form uses ``C = 2 * consts.c_local`` (an edge is reachable
    from both of its endpoints); the per-vertex form uses ``c_pair``, or
    ``c_local`` for the predecessor of ``o[a]`` whose successor edge touches
    ``e`` and is bounded directly by the triangle inequality.

    Raises
    ------
    ValueError
        If the tour is not 2-opt stable.
    """
    cloud, order = _checked(cloud, order, min_n=4)
    p = check_exponent(p, strict=True)
    if consts is None:
        consts = edge_energy_constants(p)
    if verify_tour_two_opt(cloud, order, p):
        raise ValueError("tour is not 2-opt stable")
    n = order.size
    succ = np.empty(n, dtype=np.int64)
    succ[order] = np.roll(order, -1)
    partner = np.linalg.norm(cloud - cloud[succ], axis=1) ** p
    pred_of_start = np.roll(order, 1)

    def pair_consts(e, idx, consts_default):
        consts_default[idx == pred_of_start[e]] = consts.c_local
        return consts_default

    return local_energy_report(
        cloud, cloud[order], cloud[np.roll(order, -1)], partner, p,
        consts.epsilon, 2.0 * consts.c_local, consts.c_pair,
        pair_consts=pair_consts,
    )


def write_tour(path, order):
    with open(path, "w") as fh:
        fh.write("".join(f"{int(v)}\n" for v in order))


def read_tour(path, n=None):
    with open(path) as fh:
        vals = [line.strip() for line in fh if line.strip()]
    try:
        order = np.array([int(v) for v in vals], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: expected one vertex index per line") from exc
    return check_permutation(order, n, name="order")


class TSPSolver(BaseEstimator):
    """p-cost TSP tour of a point cloud.

    Parameters
    ----------
    p : float, default=1.0
    method : {"2opt", "exact"}, default="2opt"
        ``"2opt"``: nearest-neighbour start then first-improvement 2-opt
        (a 2-opt stable tour). ``"exact"``: Held-Karp, ``n <= 16``.
    start : int, default=0
        Start vertex of the nearest-neighbour construction.

    Attributes
    ----------
    order_ : ndarray of shape (n,)
        Canonical tour.
    cost_ : float
    max_edge_ : float
    """

    def __init__(self, p=1.0, method="2opt", start=0):
        self.p = p
        self.method = method
        self.start = start

    def fit(self, X, y=None):
        X = check_cloud(X, min_points=3)
        if self.method == "exact":
            sol = held_karp(X, self.p)
        elif self.method == "2opt":
            sol = two_opt_descent(X, nearest_neighbor_tour(X, self.start), self.p)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.order_ = sol.order
        self.cost_ = sol.cost
        self.max_edge_ = max_tour_edge(X, sol.order)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_predict(self, X, y=None):
        """Fit and return each vertex's position along the canonical tour."""
        order = self.fit(X).order_
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        return rank
