"""Acceptance criteria 1-11 at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary
(and directly when run as ``python tests/test_acceptance.py``). Runtime
limits are part of each criterion.
"""

import itertools
import math
import sys
import time

import numpy as np
import pytest

from euclidopt.btsp import (
    alternating_nearest_neighbor_tour,
    alternating_two_opt_descent,
    brute_force_btsp,
    verify_alternating_swap,
    verify_btsp_edge_energy,
)
from euclidopt.experiments import (
    preset,
    records_csv,
    run_concentration_experiment,
    run_density_experiment,
    run_maxedge_experiment,
    run_transfer_experiment,
    summary_csv,
)
from euclidopt.geometry import ReplicateSeed
from euclidopt.matching import (
    brute_force_matching,
    matching_cost_gradient,
    solve_matching_exact,
    verify_local_edge_energy,
    verify_matching_two_opt,
)
from euclidopt.tsp import (
    held_karp,
    nearest_neighbor_tour,
    two_opt_descent,
    verify_tour_two_opt,
    verify_tsp_edge_energy,
)

pytestmark = pytest.mark.acceptance

RESULTS = []
_CACHE = {}


def report(k, ok, detail, elapsed, limit):
    in_time = elapsed < limit
    ok = bool(ok and in_time)
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail} [{elapsed:.1f} s < {limit:.0f} s: {in_time}]"
    RESULTS.append(line)
    return ok, line


def rng_for(criterion, i):
    return ReplicateSeed(1000 + criterion, i).generator()


def _enumerate_tours(n, W, p):
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=np.int64)
    orders = np.hstack([np.zeros((perms.shape[0], 1), dtype=np.int64), perms])
    nxt = np.roll(orders, -1, axis=1)
    return W[orders, nxt].sum(axis=1).min()


def test_criterion_01_matching_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(200):
        rng = rng_for(1, i)
        n, d = int(rng.integers(2, 8)), int(rng.integers(1, 4))
        p = float(rng.choice([1.0, 1.5, 2.0, 4.0]))
        X, Y = rng.random((n, d)), rng.random((n, d))
        exact = solve_matching_exact(X, Y, p).cost
        brute = brute_force_matching(X, Y, p).cost
        worst = max(worst, abs(exact - brute) / max(brute, 1e-300))
    ok, line = report(1, worst <= 1e-9, f"max relative gap {worst:.2e} (<= 1e-9)",
                      time.perf_counter() - t0, 10)
    assert ok, line


def test_criterion_02_tsp_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    descent_below = 0
    for i in range(200):
        rng = rng_for(2, i)
        n, d = int(rng.integers(4, 10)), int(rng.integers(1, 4))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        X = rng.random((n, d))
        W = np.linalg.norm(X[:, None] - X[None, :], axis=-1) ** p
        ref = _enumerate_tours(n, W, p)
        hk = held_karp(X, p).cost
        worst = max(worst, abs(hk - ref) / ref)
        desc = two_opt_descent(X, nearest_neighbor_tour(X), p).cost
        descent_below += desc < hk * (1 - 1e-9)
    ok, line = report(2, worst <= 1e-9 and descent_below == 0,
                      f"max relative gap {worst:.2e} (<= 1e-9), descent below optimum {descent_below}x",
                      time.perf_counter() - t0, 30)
    assert ok, line


def test_criterion_03_btsp_oracle():
    t0 = time.perf_counter()
    descent_below = swaps = 0
    for i in range(100):
        rng = rng_for(3, i)
        n, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        X, Y = rng.random((n, d)), rng.random((n, d))
        bf = brute_force_btsp(X, Y, p)
        desc = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), p)
        descent_below += desc.cost < bf.cost * (1 - 1e-9)
        swaps += len(verify_alternating_swap(X, Y, bf.tour, p))
    ok, line = report(3, descent_below == 0 and swaps == 0,
                      f"descent below optimum {descent_below}x, improving swaps on optima {swaps}",
                      time.perf_counter() - t0, 30)
    assert ok, line


def test_criterion_04_stability_inequalities():
    t0 = time.perf_counter()
    fails = dict(a=0, b=0, c=0, d=0, e=0)
    for i in range(100):
        rng = rng_for(4, i)
        d = int(rng.integers(1, 4))
        p = float(rng.choice([1.5, 2.0, 4.0]))
        n = int(rng.integers(10, 80))
        X, Y = rng.random((n, d)), rng.random((n, d))

        sigma = solve_matching_exact(X, Y, p).sigma
        fails["a"] += bool(verify_matching_two_opt(X, Y, sigma, p))
        rep = verify_local_edge_energy(X, Y, sigma, p)
        fails["c"] += not (rep.holds and rep.pair_holds)

        tour = two_opt_descent(X, nearest_neighbor_tour(X), p).order
        small = X[: int(rng.integers(5, 13))]
        opt = held_karp(small, p).order
        fails["b"] += bool(verify_tour_two_opt(X, tour, p)) + bool(verify_tour_two_opt(small, opt, p))
        rep = verify_tsp_edge_energy(X, tour, p)
        fails["d"] += not (rep.holds and rep.pair_holds)

        bt = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), p).tour
        rep = verify_btsp_edge_energy(X, Y, bt, p)
        fails["e"] += not (rep.holds and rep.pair_holds)
    detail = ", ".join(f"({k}) {v} failures" for k, v in fails.items())
    ok, line = report(4, sum(fails.values()) == 0, detail, time.perf_counter() - t0, 120)
    assert ok, line


def test_criterion_05_gradient():
    t0 = time.perf_counter()
    h = 1e-6
    good = total = 0
    for i in range(50):
        rng = rng_for(5, i)
        p = float([2.0, 3.0, 4.0][i % 3])
        X, Y = rng.random((6, 3)), rng.random((6, 3))
        X = np.clip(X + rng.normal(0, 1e-3, X.shape), 0, 1)
        sigma = solve_matching_exact(X, Y, p).sigma
        g, _ = matching_cost_gradient(X, Y, sigma, p)
        for k in range(X.size):
            e = np.zeros(X.size)
            e[k] = h
            up = solve_matching_exact((X.ravel() + e).reshape(X.shape), Y, p).cost
            dn = solve_matching_exact((X.ravel() - e).reshape(X.shape), Y, p).cost
            fd = (up - dn) / (2 * h)
            gk = g.ravel()[k]
            rel = abs(fd - gk) / abs(gk) if gk != 0 else abs(fd)
            good += rel <= 1e-5
            total += 1
    frac = good / total
    ok, line = report(5, frac >= 0.95, f"{good}/{total} coordinates within 1e-5 ({frac:.3f} >= 0.95)",
                      time.perf_counter() - t0, 60)
    assert ok, line


def _transfer_d3p1():
    if "c6" not in _CACHE:
        t0 = time.perf_counter()
        res = run_transfer_experiment(preset("transfer-d3-p1"), workers=1)
        _CACHE["c6"] = (res, time.perf_counter() - t0)
    return _CACHE["c6"]


def test_criterion_06_transfer_flatness():
    res, elapsed = _transfer_d3p1()
    ok_all = True
    parts = []
    for key in sorted(res.flatness):
        ratio, slope = res.flatness[key], res.fits[key].slope
        ok_all &= ratio <= 2.0 and -0.15 <= slope <= 0.15
        parts.append(f"{key} ratio {ratio:.3f} slope {slope:+.4f}")
    ok, line = report(6, ok_all, "; ".join(parts) + " (ratio <= 2, |slope| <= 0.15)", elapsed, 900)
    assert ok, line


def test_criterion_07_maxedge_scaling():
    t0 = time.perf_counter()
    cfg = preset("maxedge-d3-p2")[0]
    res = run_maxedge_experiment(cfg)
    bound = -0.5 * cfg.p / (cfg.d * (cfg.p + cfg.d))
    slope = res.fits["max_edge"].slope
    ok, line = report(7, slope <= bound, f"slope {slope:+.4f} (<= {bound:.4f})",
                      time.perf_counter() - t0, 900)
    assert ok, line


def test_criterion_08_concentration():
    # Same sampled instances and optimizers as criterion 6 (matching, d=3, p=1, 64 replicates).
    t0 = time.perf_counter()
    res6, elapsed6 = _transfer_d3p1()
    cfg = preset("concentration-d3-p1")[0]
    res = run_concentration_experiment(cfg, records=res6.records)
    slope = res.fits["std_normalized_cost"].slope
    ok, line = report(8, slope <= -0.05, f"slope of log std {slope:+.4f} (<= -0.05)",
                      elapsed6 + time.perf_counter() - t0, 900)
    assert ok, line


def test_criterion_09_density_frequency():
    t0 = time.perf_counter()
    cfg = preset("density-d3")[0]
    freq = run_density_experiment(cfg).frequencies[4096]
    ok, line = report(9, freq >= 0.95, f"event A frequency {freq:.3f} at n=4096 (>= 0.95)",
                      time.perf_counter() - t0, 300)
    assert ok, line


def test_criterion_10_critical_preset():
    t0 = time.perf_counter()
    res = run_transfer_experiment(preset("critical"))
    finite = all(
        math.isfinite(r[k]) for r in res.summary
        for k in ("mean_normalized", "std_normalized", "mean_cost", "mean_max_edge")
    )
    monotone = True
    for key in {(r["problem"], r["q"]) for r in res.summary}:
        rows = [r for r in res.summary if (r["problem"], r["q"]) == key]
        ns = [r["n"] for r in rows]
        ys = np.array([r["mean_normalized"] for r in rows])
        steps = np.sign(np.diff(ys))
        monotone &= ns == sorted(ns) and len(ns) == 5 and (np.all(steps >= 0) or np.all(steps <= 0))
    ok, line = report(10, finite and monotone,
                      f"{len(res.summary)} summary rows, finite {finite}, monotone in n {monotone}",
                      time.perf_counter() - t0, 1200)
    assert ok, line


def test_criterion_11_reproducibility():
    res6, _ = _transfer_d3p1()
    ref = (records_csv(res6.records), summary_csv(res6.summary))
    t0 = time.perf_counter()
    same = {}
    for workers in (1, 8):
        res = run_transfer_experiment(preset("transfer-d3-p1"), workers=workers)
        same[workers] = (records_csv(res.records), summary_csv(res.summary)) == ref
    ok, line = report(11, all(same.values()),
                      f"byte-identical CSVs with 1 worker {same[1]}, with 8 workers {same[8]}",
                      time.perf_counter() - t0, math.inf)
    assert ok, line


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
            print(RESULTS[-1], flush=True)
    sys.exit(0 if all(r.startswith("PASS") for r in RESULTS) else 1)
