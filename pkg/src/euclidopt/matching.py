"""Euclidean bipartite matching with p-costs.

A matching is an int64 permutation array ``sigma`` pairing ``X[i]`` with
``Y[sigma[i]]``. The module provides the exact solver, a brute-force oracle,
the cost gradient, and verifiers for the 2-opt (swap) inequality and the
local edge-to-energy inequality of optimal matchings.
"""

import itertools
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._lap import shortest_augmenting_path
from ._validation import (
    REL_TOL,
    check_exponent,
    check_pair,
    check_permutation,
)
from .geometry import pdist_matrix

__all__ = [
    "MatchingSolution",
    "EdgeEnergyConstants",
    "EdgeRecord",
    "EdgeEnergyReport",
    "SingularEdgeError",
    "matching_cost",
    "matching_qcost",
    "matching_edge_lengths",
    "solve_matching_exact",
    "brute_force_matching",
    "matching_cost_gradient",
    "verify_matching_two_opt",
    "edge_energy_constants",
    "verify_local_edge_energy",
    "max_matching_edge",
    "BipartiteMatcher",
    "read_permutation",
    "write_permutation",
]

BRUTE_FORCE_MAX_N = 10


class SingularEdgeError(ValueError):
    """Raised when the cost gradient is undefined on a zero-length edge."""

    def __init__(self, edges):
        self.edges = list(edges)
        super().__init__(f"zero-length edges with p < 2 at X indices {self.edges}")


@dataclass(frozen=True)
class MatchingSolution:
    sigma: np.ndarray
    cost: float
    p: float


def _checked(X, Y, sigma):
    X, Y = check_pair(X, Y, unit_cube=False)
    sigma = check_permutation(sigma, X.shape[0])
    return X, Y, sigma


def matching_edge_lengths(X, Y, sigma):
    """Euclidean lengths ``|X_i - Y_sigma(i)|``."""
    X, Y, sigma = _checked(X, Y, sigma)
    return np.linalg.norm(X - Y[sigma], axis=1)


def matching_cost(X, Y, sigma, p=1.0):
    """Sum of ``|X_i - Y_sigma(i)|**p``."""
    p = check_exponent(p)
    return float(np.sum(matching_edge_lengths(X, Y, sigma) ** p))


def matching_qcost(X, Y, sigma, q):
    """q-energy ``sum |X_i - Y_sigma(i)|**q`` of a fixed matching.

    Usually evaluated on a p-optimal ``sigma`` with ``q != p``.
    """
    return matching_cost(X, Y, sigma, check_exponent(q, name="q"))


def solve_matching_exact(X, Y, p=1.0, method="scipy"):
    """Optimal matching for the dense cost ``C[i, j] = |X_i - Y_j|**p``.

    Parameters
    ----------
    X, Y : array-like of shape (n, d)
    p : float >= 1
    method : {"scipy", "sap"}
        ``"scipy"`` uses :func:`scipy.optimize.linear_sum_assignment`;
        ``"sap"`` the package's own numpy shortest augmenting path solver.
        Both are exact; tie choices may differ.

    Returns
    -------
    MatchingSolution
    """
    X, Y = check_pair(X, Y, unit_cube=False)
    p = check_exponent(p)
    C = pdist_matrix(X, Y, p)
    if method == "scipy":
        _, sigma = linear_sum_assignment(C)
        sigma = sigma.astype(np.int64)
    elif method == "sap":
        sigma = shortest_augmenting_path(C)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MatchingSolution(sigma, matching_cost(X, Y, sigma, p), p)


def brute_force_matching(X, Y, p=1.0):
    """Exhaustive minimum over all ``n!`` permutations (``n <= 10``).

    Among exact minimizers the lexicographically smallest permutation is
    returned.
    """
    X, Y = check_pair(X, Y, unit_cube=False)
    p = check_exponent(p)
    n = X.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    C = pdist_matrix(X, Y, p)
    rows = np.arange(n)
    best_cost = np.inf
    best = None
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.array(list(itertools.islice(perms, 50_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        costs = C[rows, chunk].sum(axis=1)
        k = int(np.argmin(costs))  # first minimum = lexicographically smallest
        if costs[k] < best_cost:
            best_cost = float(costs[k])
            best = chunk[k].copy()
    return MatchingSolution(best, matching_cost(X, Y, best, p), p)


def matching_cost_gradient(X, Y, sigma, p):
    """Gradient of the matching cost at a fixed optimal ``sigma``.

    ``grad_X[i] = p |X_i - Y_s(i)|**(p-2) (X_i - Y_s(i))`` and ``grad_Y`` at
    ``Y_s(i)`` is its negative. Where the optimizer is unique this is the
    gradient of the optimal cost.

    Raises
    ------
    SingularEdgeError
        If ``p < 2`` and some matched pair coincides.
    """
    X, Y, sigma = _checked(X, Y, sigma)
    p = check_exponent(p, strict=True)
    diff = X - Y[sigma]
    length = np.linalg.norm(diff, axis=1)
    zero = length == 0.0
    if p < 2.0 and zero.any():
        raise SingularEdgeError(np.flatnonzero(zero).tolist())
    scale = np.zeros_like(length)
    nz = ~zero
    scale[nz] = p * length[nz] ** (p - 2.0)
    gX = scale[:, None] * diff
    gY = np.empty_like(gX)
    gY[sigma] = -gX
    return gX, gY


def verify_matching_two_opt(X, Y, sigma, p=1.0):
    """Pairs violating the swap inequality.

    For every ``i < j`` checks
    ``c(i, s(i)) + c(j, s(j)) <= c(i, s(j)) + c(j, s(i))`` with
    ``c = |.|**p`` and relative slack ``1e-9``. Returns a list of
    ``(i, j, deficit)`` with ``deficit = lhs - rhs > 0``; empty iff
    ``sigma`` is 2-opt stable.
    """
    X, Y, sigma = _checked(X, Y, sigma)
    p = check_exponent(p)
    n = X.shape[0]
    own = np.linalg.norm(X - Y[sigma], axis=1) ** p
    out: List[Tuple[int, int, float]] = []
    block = max(1, 4_000_000 // max(n, 1))
    Ys = Y[sigma]
    for start in range(0, n, block):
        stop = min(n, start + block)
        # cross[a, j] = c(i, s(j)) for i = start + a
        cross = cdist(X[start:stop], Ys) ** p
        # crossT[a, j] = c(j, s(i)) for i = start + a
        crossT = cdist(Ys[start:stop], X) ** p
        lhs = own[start:stop, None] + own[None, :]
        rhs = cross + crossT
        bad = lhs > rhs + REL_TOL * (1.0 + np.abs(lhs))
        ii, jj = np.nonzero(bad)
        ii = ii + start
        keep = ii < jj
        for i, j in zip(ii[keep], jj[keep]):
            out.append((int(i), int(j), float(lhs[i - start, j] - rhs[i - start, j])))
    out.sort()
    return out


@dataclass(frozen=True)
class EdgeEnergyConstants:
    """Admissible constants for the local edge-to-energy inequality.

    With ``m = 1 - (2 + eta) * (1/2 + epsilon)**p > 0`` and
    ``C_eta = (1 - (1 + eta)**(-1/(p-1)))**(1-p)`` (the sharp constant in
    ``(a + b)**p <= (1 + eta) a**p + C_eta b**p``), a 2-opt stable edge ``e``
    and any edge ``f`` whose anchor lies in the ball of radius
    ``epsilon |e|`` around the midpoint of ``e`` satisfy
    ``|e|**p <= c_pair * |f|**p`` with ``c_pair = (C_eta - 1) / m``.

    ``c_adjacent = (1/2 - epsilon)**(-p)`` bounds the one configuration in
    which the partner edge shares an endpoint with ``e`` (tours only), and
    ``c_local`` is the larger of the two.
    """

    p: float
    epsilon: float
    eta: float
    c_eta: float
    c_pair: float
    margin: float
    c_adjacent: float

    @property
    def c_local(self):
        return max(self.c_pair, self.c_adjacent)


def _margin(p, eta, eps):
    return 1.0 - (2.0 + eta) * (0.5 + eps) ** p


def edge_energy_constants(p) -> EdgeEnergyConstants:
    """Deterministic grid choice of ``(epsilon, eta, C)`` for ``p > 1``.

    The best achievable margin is ``m_max = 1 - 2**(1-p)``. The target
    margin is ``min(0.1, m_max / 2)``. ``eta`` is the largest ``2**-k``
    (``k = 1..40``) keeping ``1 - (2 + eta) 2**-p`` at least halfway between
    target and ``m_max``; ``epsilon`` is then the largest ``2**-k / 4``
    (``k = 0..40``) meeting the target.
    """
    p = check_exponent(p, strict=True)
    m_max = 1.0 - 2.0 ** (1.0 - p)
    target = min(0.1, 0.5 * m_max)
    eta = next(
        2.0**-k for k in range(1, 41)
        if _margin(p, 2.0**-k, 0.0) >= 0.5 * (m_max + target)
    )
    eps = next(
        2.0**-k / 4 for k in range(0, 41)
        if _margin(p, eta, 2.0**-k / 4) >= target
    )
    margin = _margin(p, eta, eps)
    c_eta = (1.0 - (1.0 + eta) ** (-1.0 / (p - 1.0))) ** (1.0 - p)
    return EdgeEnergyConstants(
        p=p,
        epsilon=eps,
        eta=eta,
        c_eta=c_eta,
        c_pair=(c_eta - 1.0) / margin,
        margin=margin,
        c_adjacent=(0.5 - eps) ** (-p),
    )


@dataclass(frozen=True)
class EdgeRecord:
    index: int
    center: Tuple[float, ...]
    radius: float
    count: int
    lhs: float
    rhs: float


@dataclass(frozen=True)
class EdgeEnergyReport:
    """Outcome of a local edge-to-energy check.

    ``holds`` refers to the summed inequality ``count * |e|**p <= C * sum``;
    ``pair_holds`` to the per-partner form ``|e|**p <= C * |f|**p``. Slacks
    are ``rhs - lhs`` minimized over edges (resp. partners); with no
    partners at all they are ``inf``.
    """

    holds: bool
    worst_slack: float
    per_edge: List[EdgeRecord] = field(repr=False)
    pair_holds: bool = True
    worst_pair_slack: float = np.inf


def local_energy_report(anchors, starts, ends, partner_cost, p, eps, c_sum, c_pair,
                        edge_index=None, pair_consts=None) -> EdgeEnergyReport:
    """Shared engine of the edge-to-energy verifiers.

    Each edge ``(starts[e], ends[e])`` carries the ball of radius
    ``eps * |e|`` around its midpoint. Anchors inside the ball are counted;
    anchor ``j`` contributes ``partner_cost[j]`` to the local energy.
    ``pair_consts(e, idx, default)`` may replace the per-pair constants of
    the anchors ``idx`` inside ball ``e``.
    """
    k = starts.shape[0]
    if edge_index is None:
        edge_index = np.arange(k)
    mids = 0.5 * (starts + ends)
    length = np.linalg.norm(starts - ends, axis=1)
    radius = eps * length
    ecost = length**p

    records = []
    holds = pair_holds = True
    worst = worst_pair = np.inf
    block = max(1, 4_000_000 // max(anchors.shape[0], 1))
    for s in range(0, k, block):
        t = min(k, s + block)
        inside = cdist(mids[s:t], anchors) <= radius[s:t, None]
        for e in range(s, t):
            idx = np.flatnonzero(inside[e - s])
            lhs = idx.size * ecost[e]
            rhs = c_sum * float(partner_cost[idx].sum())
            records.append(EdgeRecord(int(edge_index[e]), tuple(mids[e].tolist()),
                                      float(radius[e]), int(idx.size), float(lhs), float(rhs)))
            worst = min(worst, rhs - lhs)
            if lhs > rhs + REL_TOL * (1.0 + abs(lhs)):
                holds = False
            if idx.size:
                consts = np.full(idx.size, c_pair)
                if pair_consts is not None:
                    consts = pair_consts(e, idx, consts)
                prhs = consts * partner_cost[idx]
                worst_pair = min(worst_pair, float((prhs - ecost[e]).min()))
                if np.any(ecost[e] > prhs + REL_TOL * (1.0 + ecost[e])):
                    pair_holds = False
    return EdgeEnergyReport(holds, float(worst), records, pair_holds, float(worst_pair))


def verify_local_edge_energy(X, Y, sigma, p, consts=None) -> EdgeEnergyReport:
    """Check ``N_B |x_i - y_s(i)|**p <= C * sum_{x_j in B} |x_j - y_s(j)|**p``.

    ``B`` is the closed ball of radius ``epsilon * |x_i - y_s(i)|`` around
    the edge midpoint and ``N_B`` the number of X points inside. Both the
    summed form (``C = consts.c_pair``) and the per-pair form are checked.

    Raises
    ------
    ValueError
        If ``sigma`` is not 2-opt stable; the inequality is only guaranteed
        for stable matchings.
    """
    X, Y, sigma = _checked(X, Y, sigma)
    p = check_exponent(p, strict=True)
    if consts is None:
        consts = edge_energy_constants(p)
    if verify_matching_two_opt(X, Y, sigma, p):
        raise ValueError("matching is not 2-opt stable")
    Ys = Y[sigma]
    own = np.linalg.norm(X - Ys, axis=1) ** p
    return local_energy_report(X, X, Ys, own, p, consts.epsilon, consts.c_pair, consts.c_pair)


def max_matching_edge(X, Y, sigma):
    """Length of the longest matched pair (a length, not a p-power)."""
    return float(matching_edge_lengths(X, Y, sigma).max())


def write_permutation(path, sigma):
    with open(path, "w") as fh:
        fh.write("".join(f"{int(s)}\n" for s in sigma))


def read_permutation(path, n=None):
    with open(path) as fh:
        vals = [line.strip() for line in fh if line.strip()]
    try:
        sigma = np.array([int(v) for v in vals], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: expected one integer index per line") from exc
    return check_permutation(sigma, n)


class BipartiteMatcher(BaseEstimator):
    """Exact p-cost bipartite matching as an estimator.

    Parameters
    ----------
    p : float, default=2.0
        Cost exponent, ``>= 1``.
    method : {"scipy", "sap"}, default="scipy"
        Assignment backend, see :func:`solve_matching_exact`.

    Attributes
    ----------
    sigma_ : ndarray of shape (n,)
        ``X[i]`` is matched to ``Y[sigma_[i]]``.
    cost_ : float
        Optimal p-cost.
    max_edge_ : float
        Longest matched distance.
    """

    def __init__(self, p=2.0, method="scipy"):
        self.p = p
        self.method = method

    def fit(self, X, Y):
        X, Y = check_pair(X, Y)
        sol = solve_matching_exact(X, Y, self.p, method=self.method)
        self.sigma_ = sol.sigma
        self.cost_ = sol.cost
        self.max_edge_ = max_matching_edge(X, Y, sol.sigma)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_predict(self, X, Y):
        return self.fit(X, Y).sigma_

    def qcost(self, X, Y, q):
        """q-energy of the fitted matching on the clouds it was fitted on."""
        check_is_fitted(self, "sigma_")
        return matching_qcost(X, Y, self.sigma_, q)
