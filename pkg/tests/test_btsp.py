import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import enumerate_alternating_cost
from euclidopt.btsp import (
    AlternatingTour,
    AlternatingTSPSolver,
    alternating_nearest_neighbor_tour,
    alternating_two_opt_descent,
    apply_two_opt_move,
    brute_force_btsp,
    btsp_cost,
    btsp_cost_sigma,
    is_alternating_hamiltonian,
    max_btsp_edge,
    read_alternating_tour,
    reconnections,
    verify_alternating_swap,
    verify_btsp_edge_energy,
    write_alternating_tour,
)
from euclidopt.geometry import sample_uniform_clouds

X2 = np.array([[0.0], [0.5]])
Y2 = np.array([[0.1], [0.6]])


def test_hand_cost_n2():
    tour = AlternatingTour.from_sigma([0, 1])
    assert tour.seq.tolist() == [0, 0, 1, 1]
    assert btsp_cost(X2, Y2, tour, 2) == pytest.approx(0.54, rel=1e-12)
    assert btsp_cost_sigma(X2, Y2, [0, 1], 2) == pytest.approx(0.54, rel=1e-12)


def test_coincident_points_cost_zero():
    X = np.full((3, 2), 0.4)
    assert btsp_cost(X, X.copy(), AlternatingTour.from_sigma([2, 0, 1]), 1.5) == 0.0


def test_from_sigma_and_back():
    assert AlternatingTour.from_sigma([1, 0]).seq.tolist() == [0, 1, 1, 0]
    t = AlternatingTour([0, 2, 1, 0, 2, 1])
    assert AlternatingTour.from_sigma(t.to_sigma()) == t
    with pytest.raises(ValueError):
        AlternatingTour([0, 2, 2, 0, 1, 1]).to_sigma()


def test_sequence_validation():
    with pytest.raises(ValueError):
        AlternatingTour([0, 0, 0, 1])
    with pytest.raises(ValueError):
        AlternatingTour([0, 0, 1])
    t = AlternatingTour([0, 1, 1, 0])
    with pytest.raises(ValueError):
        t.seq[0] = 1


@given(st.integers(2, 7), st.integers(0, 2**32))
def test_cost_equals_edgewise_recomputation(n, seed):
    X, Y = sample_uniform_clouds(n, 3, seed)
    rng = np.random.default_rng(seed)
    seq = np.empty(2 * n, dtype=np.int64)
    seq[0::2], seq[1::2] = rng.permutation(n), rng.permutation(n)
    t = AlternatingTour(seq)
    ref = sum(np.linalg.norm(X[i] - Y[j]) ** 2.5 for i, j in t.edges())
    assert btsp_cost(X, Y, t, 2.5) == pytest.approx(ref, rel=1e-12)
    assert btsp_cost(X, Y, t.canonical(), 2.5) == pytest.approx(ref, rel=1e-12)


def test_n2_has_a_single_alternating_cycle():
    cycles = {AlternatingTour([0, a, 1, 1 - a]).canonical() for a in (0, 1)}
    assert len(cycles) == 1


@pytest.mark.parametrize("n", [3, 4])
def test_reconnection_structure(n):
    # Exhaustively: for odd offsets exactly the reversal reconnection is a
    # single alternating cycle; for even offsets neither is.
    tour = AlternatingTour.from_sigma(np.arange(n))
    m = 2 * n
    for a, b in itertools.combinations(range(m), 2):
        if abs(a - b) in (1, m - 1):
            continue
        first, second = reconnections(tour, a, b)
        ok1, ok2 = is_alternating_hamiltonian(first, n), is_alternating_hamiltonian(second, n)
        if (b - a) % 2:
            assert ok1 and not ok2
            moved = apply_two_opt_move(tour, a, b)
            lab = [("X" if k % 2 == 0 else "Y", int(v)) for k, v in enumerate(moved.seq)]
            got = {frozenset((lab[k], lab[(k + 1) % m])) for k in range(m)}
            assert got == {frozenset(e) for e in first}
        else:
            assert not ok1 and not ok2
            with pytest.raises(ValueError):
                apply_two_opt_move(tour, a, b)


def test_is_alternating_hamiltonian_rejects_same_side_edges():
    edges = [(("X", 0), ("X", 1)), (("X", 1), ("Y", 0)), (("Y", 0), ("Y", 1)), (("Y", 1), ("X", 0))]
    assert not is_alternating_hamiltonian(edges, 2)


def test_descent_on_crossed_instance():
    # Two far-apart clusters; the greedy start links them with long edges.
    X = np.array([[0.0], [0.05], [0.9]])
    Y = np.array([[0.95], [0.02], [0.07]])
    crossed = AlternatingTour([0, 0, 1, 1, 2, 2])
    assert verify_alternating_swap(X, Y, crossed, 2)
    sol = alternating_two_opt_descent(X, Y, crossed, 2)
    assert sol.cost < btsp_cost(X, Y, crossed, 2)
    assert verify_alternating_swap(X, Y, sol.tour, 2) == []
    assert sol.cost == pytest.approx(enumerate_alternating_cost(X, Y, 2), rel=1e-12)


def test_descent_fixed_point():
    X, Y = sample_uniform_clouds(6, 2, 3)
    sol = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), 1.0)
    again = alternating_two_opt_descent(X, Y, sol.tour, 1.0)
    assert again.tour == sol.tour and again.moves == 0


@pytest.mark.parametrize("seed", range(12))
def test_brute_force_equals_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    p = [1.0, 2.0, 3.0][seed % 3]
    X, Y = rng.random((n, 2)), rng.random((n, 2))
    ref = enumerate_alternating_cost(X, Y, p)
    bf = brute_force_btsp(X, Y, p)
    assert bf.cost == pytest.approx(ref, rel=1e-9)
    assert verify_alternating_swap(X, Y, bf.tour, p) == []
    desc = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), p)
    assert desc.cost >= bf.cost * (1 - 1e-9)


def test_brute_force_size_cap():
    X, Y = sample_uniform_clouds(7, 2, 0)
    with pytest.raises(ValueError):
        brute_force_btsp(X, Y)


@given(st.integers(2, 40), st.integers(1, 3), st.integers(0, 2**32))
def test_descent_output_is_valid_and_stable(n, d, seed):
    X, Y = sample_uniform_clouds(n, d, seed)
    sol = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), 2.0)
    assert sorted(sol.tour.x_order.tolist()) == list(range(n))
    assert sorted(sol.tour.y_order.tolist()) == list(range(n))
    assert verify_alternating_swap(X, Y, sol.tour, 2.0) == []
    assert sol.cost == pytest.approx(btsp_cost(X, Y, sol.tour, 2.0), rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
@pytest.mark.parametrize("seed", range(3))
def test_edge_energy_on_stable_tours(p, seed):
    X, Y = sample_uniform_clouds(60, 3, seed)
    sol = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), p)
    rep = verify_btsp_edge_energy(X, Y, sol.tour, p)
    assert rep.holds and rep.pair_holds
    assert [r.index for r in rep.per_edge] == list(range(0, 120, 2))


@pytest.mark.parametrize("seed", range(4))
def test_edge_energy_on_brute_force_optimum(seed):
    X, Y = sample_uniform_clouds(5, 2, seed)
    rep = verify_btsp_edge_energy(X, Y, brute_force_btsp(X, Y, 2).tour, 2)
    assert rep.holds and rep.pair_holds


def test_outgoing_partner_variant_runs():
    X, Y = sample_uniform_clouds(40, 3, 1)
    sol = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), 2)
    rep = verify_btsp_edge_energy(X, Y, sol.tour, 2, partner="outgoing")
    assert len(rep.per_edge) == 40
    with pytest.raises(ValueError):
        verify_btsp_edge_energy(X, Y, sol.tour, 2, partner="both")


def test_max_edge():
    t = AlternatingTour.from_sigma([0, 1])
    assert max_btsp_edge(X2, Y2, t) == pytest.approx(0.6)


def test_file_round_trip(tmp_path):
    t = AlternatingTour([0, 2, 1, 0, 2, 1])
    path = tmp_path / "b.txt"
    write_alternating_tour(path, t)
    assert path.read_text().splitlines()[:2] == ["X 0", "Y 2"]
    assert read_alternating_tour(path, 3) == t
    path.write_text("Y 2\nX 1\nY 0\nX 2\nY 1\nX 0\n")
    assert read_alternating_tour(path).canonical() == t.canonical()
    path.write_text("X 0\nX 1\nY 0\nY 1\n")
    with pytest.raises(ValueError):
        read_alternating_tour(path)


def test_estimator():
    X, Y = sample_uniform_clouds(5, 2, 8)
    exact = AlternatingTSPSolver(p=2, method="exact").fit(X, Y)
    approx = AlternatingTSPSolver(p=2).fit(X, Y)
    assert approx.cost_ >= exact.cost_ * (1 - 1e-9)
    seq = AlternatingTSPSolver(p=2, method="exact").fit_predict(X, Y)
    assert np.array_equal(seq, exact.tour_.seq)
