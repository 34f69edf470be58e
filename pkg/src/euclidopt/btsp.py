"""Bipartite (alternating) Euclidean TSP with p-costs.

An alternating tour on clouds ``X`` and ``Y`` of size ``n`` is stored as a
sequence of ``2n`` indices: even positions index ``X``, odd positions index
``Y``. Edge ``k`` joins positions ``k`` and ``k + 1`` (cyclically), so even
edges run x -> y and odd edges y -> x.

Removing edges ``a < b`` and reconnecting ``(s[a], s[b]), (s[a+1], s[b+1])``
reverses the segment ``s[a+1..b]``. That result alternates exactly when
``b - a`` is odd; the other reconnection ``(s[a], s[b+1]), (s[a+1], s[b])``
then joins two points of the same side, and for ``b - a`` even it
alternates but splits the cycle in two. Descent therefore only tries
odd-offset pairs.
"""

import itertools
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from . import _kernels
from ._validation import REL_TOL, check_exponent, check_pair, check_permutation
from .geometry import pdist_matrix
from .matching import EdgeEnergyConstants, edge_energy_constants, local_energy_report

__all__ = [
    "AlternatingTour",
    "BtspSolution",
    "btsp_cost",
    "btsp_cost_sigma",
    "btsp_edge_lengths",
    "alternating_nearest_neighbor_tour",
    "apply_two_opt_move",
    "reconnections",
    "is_alternating_hamiltonian",
    "alternating_two_opt_descent",
    "brute_force_btsp",
    "verify_alternating_swap",
    "verify_btsp_edge_energy",
    "max_btsp_edge",
    "AlternatingTSPSolver",
    "read_alternating_tour",
    "write_alternating_tour",
    "format_alternating_tour",
]

BRUTE_FORCE_MAX_N = 6
DESCENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AlternatingTour:
    """Cyclic alternating sequence ``x, y, x, y, ...`` of ``2n`` vertices."""

    seq: np.ndarray

    def __post_init__(self):
        seq = np.asarray(self.seq)
        if seq.ndim != 1 or seq.size < 4 or seq.size % 2:
            raise ValueError("alternating tour needs an even length >= 4")
        seq = seq.astype(np.int64)
        n = seq.size // 2
        check_permutation(seq[0::2], n, name="X vertices")
        check_permutation(seq[1::2], n, name="Y vertices")
        seq.setflags(write=False)
        object.__setattr__(self, "seq", seq)

    @property
    def n(self):
        return self.seq.size // 2

    @property
    def x_order(self):
        return self.seq[0::2]

    @property
    def y_order(self):
        return self.seq[1::2]

    @classmethod
    def from_sigma(cls, sigma):
        """The tour ``x_0 -> y_s(0) -> x_1 -> y_s(1) -> ... -> x_0``."""
        sigma = check_permutation(sigma)
        seq = np.empty(2 * sigma.size, dtype=np.int64)
        seq[0::2] = np.arange(sigma.size)
        seq[1::2] = sigma
        return cls(seq)

    def to_sigma(self):
        """Inverse of :meth:`from_sigma`; needs X visited in index order."""
        if not np.array_equal(self.x_order, np.arange(self.n)):
            raise ValueError("X vertices are not in index order; no sigma encoding")
        return self.y_order.copy()

    def canonical(self):
        """Start at ``x_0``; orient so the Y after ``x_0`` has the smaller index."""
        k = int(np.flatnonzero(self.x_order == 0)[0])
        seq = np.roll(self.seq, -2 * k)
        if seq[1] > seq[-1]:
            seq = np.concatenate([seq[:1], seq[:0:-1]])
        return AlternatingTour(seq)

    def global_seq(self):
        """Indices into ``vstack(X, Y)``."""
        g = self.seq.copy()
        g[1::2] += self.n
        return g

    def edges(self):
        """``(x_index, y_index)`` for each of the ``2n`` edges in order."""
        s = self.seq
        nxt = np.roll(s, -1)
        xs = np.where(np.arange(s.size) % 2 == 0, s, nxt)
        ys = np.where(np.arange(s.size) % 2 == 0, nxt, s)
        return list(zip(xs.tolist(), ys.tolist()))

    def __eq__(self, other):
        return isinstance(other, AlternatingTour) and np.array_equal(self.seq, other.seq)

    def __hash__(self):
        return hash(self.seq.tobytes())

    def __repr__(self):
        return f"AlternatingTour({self.seq.tolist()})"


@dataclass(frozen=True)
class BtspSolution:
    tour: AlternatingTour
    cost: float
    p: float
    stable: bool
    moves: int = 0


def _as_tour(tour):
    return tour if isinstance(tour, AlternatingTour) else AlternatingTour(tour)


def _checked(X, Y, tour):
    X, Y = check_pair(X, Y, min_points=2, unit_cube=False)
    tour = _as_tour(tour)
    if tour.n != X.shape[0]:
        raise ValueError(f"tour has {tour.n} vertices per side, clouds have {X.shape[0]}")
    return X, Y, tour


def btsp_edge_lengths(X, Y, tour):
    X, Y, tour = _checked(X, Y, tour)
    e = np.array(tour.edges())
    return np.linalg.norm(X[e[:, 0]] - Y[e[:, 1]], axis=1)


def btsp_cost(X, Y, tour, p=1.0):
    """Sum of p-powered lengths over the ``2n`` edges of the cycle."""
    p = check_exponent(p)
    return float(np.sum(btsp_edge_lengths(X, Y, tour) ** p))


def btsp_cost_sigma(X, Y, sigma, p=1.0):
    """``sum_i |x_i - y_s(i)|**p + |x_{i+1} - y_s(i)|**p`` with ``x_n = x_0``."""
    X, Y = check_pair(X, Y, min_points=2, unit_cube=False)
    sigma = check_permutation(sigma, X.shape[0])
    p = check_exponent(p)
    Ys = Y[sigma]
    out = np.linalg.norm(X - Ys, axis=1) ** p
    back = np.linalg.norm(np.roll(X, -1, axis=0) - Ys, axis=1) ** p
    return float(np.sum(out + back))


def max_btsp_edge(X, Y, tour):
    return float(btsp_edge_lengths(X, Y, tour).max())


def alternating_nearest_neighbor_tour(X, Y):
    """Greedy alternating tour from ``x_0``: nearest unvisited point of the other side."""
    X, Y = check_pair(X, Y, min_points=2, unit_cube=False)
    n = X.shape[0]
    g = np.empty(2 * n, dtype=np.int64)
    _kernels.alternating_nearest_neighbor_inplace(np.vstack([X, Y]), n, g)
    g[1::2] -= n
    return AlternatingTour(g).canonical()


def _adjacent(a, b, m):
    return abs(a - b) == 1 or abs(a - b) == m - 1


def apply_two_opt_move(tour, a, b):
    """Reverse ``s[a+1..b]`` (``a < b``); admissible iff ``b - a`` is odd.

    Raises ValueError for adjacent or same-parity pairs, whose reversal
    would break alternation.
    """
    tour = _as_tour(tour)
    m = tour.seq.size
    if not 0 <= a < b < m or _adjacent(a, b, m):
        raise ValueError(f"edges {a} and {b} must be distinct and non-adjacent")
    if (b - a) % 2 == 0:
        raise ValueError("segment reversal between same-parity edges breaks alternation")
    seq = tour.seq.copy()
    seq[a + 1:b + 1] = seq[a + 1:b + 1][::-1]
    return AlternatingTour(seq)


def reconnections(tour, a, b):
    """Edge lists of the two ways to reconnect after removing edges ``a``, ``b``.

    Vertices are labelled ``("X", i)`` / ``("Y", j)``. The first list joins
    ``(s[a], s[b]), (s[a+1], s[b+1])``; the second
    ``(s[a], s[b+1]), (s[a+1], s[b])``.
    """
    tour = _as_tour(tour)
    m = tour.seq.size
    lab = [("X" if k % 2 == 0 else "Y", int(v)) for k, v in enumerate(tour.seq)]
    kept = [(lab[k], lab[(k + 1) % m]) for k in range(m) if k not in (a, b)]
    first = kept + [(lab[a], lab[b]), (lab[(a + 1) % m], lab[(b + 1) % m])]
    second = kept + [(lab[a], lab[(b + 1) % m]), (lab[(a + 1) % m], lab[b])]
    return first, second


def is_alternating_hamiltonian(edges, n):
    """True iff ``edges`` form one cycle through all ``2n`` vertices, X-Y only."""
    if len(edges) != 2 * n:
        return False
    adj = {}
    for u, v in edges:
        if u[0] == v[0]:
            return False
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    if len(adj) != 2 * n or any(len(nb) != 2 for nb in adj.values()):
        return False
    # A 2-regular (multi)graph is a single cycle iff it is connected.
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == 2 * n


def alternating_two_opt_descent(X, Y, tour, p=1.0):
    """First-improvement alternating 2-opt descent from ``tour``.

    Every non-adjacent edge pair ``(a, b)`` with ``b - a`` odd is tried in
    lexicographic order; the alternation-preserving reversal is applied when
    it lowers the cost by more than ``1e-12``. Repeats until a pass makes no
    move. For ``n = 2`` there is a single alternating cycle and nothing to do.
    """
    X, Y, tour = _checked(X, Y, tour)
    p = check_exponent(p)
    n = tour.n
    g = tour.global_seq()
    moves = int(_kernels.two_opt_inplace(np.vstack([X, Y]), g, p, DESCENT_TOL, True))
    g[1::2] -= n
    out = AlternatingTour(g).canonical()
    return BtspSolution(out, btsp_cost(X, Y, out, p), p, True, moves)


def brute_force_btsp(X, Y, p=1.0):
    """Exact minimum over all alternating Hamiltonian cycles (``2 <= n <= 6``).

    Cycles are enumerated in canonical form (``x_0`` first, Y after ``x_0``
    smaller than the Y before it); ties go to the lexicographically smallest
    canonical sequence.
    """
    X, Y = check_pair(X, Y, min_points=2, unit_cube=False)
    p = check_exponent(p)
    n = X.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    D = pdist_matrix(X, Y, p)
    yperms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    yperms = yperms[yperms[:, 0] < yperms[:, -1]]
    best_cost = np.inf
    best_seq = None
    for rest in itertools.permutations(range(1, n)):
        xo = np.array((0,) + rest, dtype=np.int64)
        costs = D[xo, yperms].sum(axis=1) + D[np.roll(xo, -1), yperms].sum(axis=1)
        cmin = costs.min()
        if cmin > best_cost:
            continue
        for k in np.flatnonzero(costs == cmin):
            seq = np.empty(2 * n, dtype=np.int64)
            seq[0::2] = xo
            seq[1::2] = yperms[k]
            if cmin < best_cost or tuple(seq) < tuple(best_seq):
                best_cost = float(cmin)
                best_seq = seq
    tour = AlternatingTour(best_seq)
    return BtspSolution(tour, btsp_cost(X, Y, tour, p), p, True)


def verify_alternating_swap(X, Y, tour, p=1.0) -> List[Tuple[int, int, float]]:
    """Admissible alternating 2-opt moves that would lower the cost.

    Tests every non-adjacent pair ``a < b`` with ``b - a`` odd and reports
    ``(a, b, delta)`` when the reversal changes the cost by
    ``delta < -1e-9 * (1 + cost)``.
    """
    X, Y, tour = _checked(X, Y, tour)
    p = check_exponent(p)
    Z = np.vstack([X, Y])
    P = Z[tour.global_seq()]
    Pn = np.roll(P, -1, axis=0)
    own = np.linalg.norm(P - Pn, axis=1) ** p
    total = float(own.sum())
    m = P.shape[0]
    pos = np.arange(m)
    out = []
    block = max(1, 4_000_000 // m)
    for s in range(0, m, block):
        t = min(m, s + block)
        a = pos[s:t, None]
        bb = pos[None, :]
        valid = (bb > a + 1) & ((bb - a) % 2 == 1) & ~((a == 0) & (bb == m - 1))
        delta = cdist(P[s:t], P) ** p + cdist(Pn[s:t], Pn) ** p - own[s:t, None] - own[None, :]
        bad = valid & (delta < -REL_TOL * (1.0 + total))
        for i, j in zip(*np.nonzero(bad)):
            out.append((int(i + s), int(j), float(delta[i, j])))
    return out


def verify_btsp_edge_energy(X, Y, tour, p, consts: EdgeEnergyConstants = None,
                            partner="incoming"):
    """Local edge-to-energy check on the x -> y edges of a stable tour.

    For each edge ``e = (x_i, y)`` at an even position, X points inside the
    ball of radius ``epsilon |e|`` around its midpoint are counted; each
    such ``x_j`` contributes the p-cost of one of its own edges.

    ``partner="incoming"`` (default) uses the edge from the Y preceding
    ``x_j``: cutting ``e`` and that edge is an admissible move, so the
    inequality follows from stability with ``C = consts.c_local``.
    ``partner="outgoing"`` uses ``x_j``'s edge to the following Y, the
    literal sigma-encoded form; cutting two x -> y edges is never
    admissible, so that variant is diagnostic only.

    Raises
    ------
    ValueError
        If the tour admits an improving alternating 2-opt move.
    """
    X, Y, tour = _checked(X, Y, tour)
    p = check_exponent(p, strict=True)
    if partner not in ("incoming", "outgoing"):
        raise ValueError(f"partner must be 'incoming' or 'outgoing', got {partner!r}")
    if consts is None:
        consts = edge_energy_constants(p)
    if verify_alternating_swap(X, Y, tour, p):
        raise ValueError("alternating tour is not 2-opt stable")
    n = tour.n
    xs, ys = tour.x_order, tour.y_order
    # Y following / preceding each X vertex.
    nxt_y = np.empty(n, dtype=np.int64)
    prv_y = np.empty(n, dtype=np.int64)
    nxt_y[xs] = ys
    prv_y[xs] = np.roll(ys, 1)
    other = prv_y if partner == "incoming" else nxt_y
    partner_cost = np.linalg.norm(X - Y[other], axis=1) ** p
    # x_j right after e's Y endpoint shares it; bounded by c_adjacent.
    after = np.roll(xs, -1)

    def pair_consts(e, idx, default):
        default[idx == after[e]] = consts.c_local
        return default

    return local_energy_report(
        X, X[xs], Y[ys], partner_cost, p, consts.epsilon,
        consts.c_local, consts.c_pair,
        edge_index=2 * np.arange(n), pair_consts=pair_consts,
    )


def format_alternating_tour(tour):
    tour = _as_tour(tour)
    return "".join(
        f"{'X' if k % 2 == 0 else 'Y'} {int(v)}\n" for k, v in enumerate(tour.seq)
    )


def write_alternating_tour(path, tour):
    with open(path, "w") as fh:
        fh.write(format_alternating_tour(tour))


def read_alternating_tour(path, n=None):
    """Parse ``X i`` / ``Y j`` lines in cyclic order."""
    with open(path) as fh:
        rows = [line.split() for line in fh if line.strip()]
    try:
        sides = [r[0].upper() for r in rows]
        idx = [int(r[1]) for r in rows]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: expected lines 'X i' or 'Y j'") from exc
    if any(len(r) != 2 for r in rows) or set(sides) - {"X", "Y"}:
        raise ValueError(f"{path}: expected lines 'X i' or 'Y j'")
    if sides and sides[0] == "Y":
        sides = sides[1:] + sides[:1]
        idx = idx[1:] + idx[:1]
    if any(s != ("X" if k % 2 == 0 else "Y") for k, s in enumerate(sides)):
        raise ValueError(f"{path}: sides do not alternate")
    tour = AlternatingTour(np.array(idx, dtype=np.int64))
    if n is not None and tour.n != n:
        raise ValueError(f"{path}: tour has {tour.n} vertices per side, expected {n}")
    return tour


class AlternatingTSPSolver(BaseEstimator):
    """Alternating TSP on two clouds.

    Parameters
    ----------
    p : float, default=1.0
    method : {"2opt", "exact"}, default="2opt"
        ``"2opt"``: greedy alternating start then alternating 2-opt descent.
        ``"exact"``: exhaustive enumeration, ``n <= 6``.

    Attributes
    ----------
    tour_ : AlternatingTour
        Canonical tour.
    cost_ : float
    max_edge_ : float
    """

    def __init__(self, p=1.0, method="2opt"):
        self.p = p
        self.method = method

    def fit(self, X, Y):
        X, Y = check_pair(X, Y, min_points=2)
        if self.method == "exact":
            sol = brute_force_btsp(X, Y, self.p)
        elif self.method == "2opt":
            sol = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), self.p)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.tour_ = sol.tour
        self.cost_ = sol.cost
        self.max_edge_ = max_btsp_edge(X, Y, sol.tour)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_predict(self, X, Y):
        """Fit and return the canonical sequence (even: X, odd: Y indices)."""
        return self.fit(X, Y).tour_.seq.copy()
