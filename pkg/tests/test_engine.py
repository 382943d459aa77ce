import numpy as np
import pytest

from difight.cost import LeastSquaresCost
from difight.engine import (Algorithm, AlgorithmSpec, CommCounters, DivergenceError,
                            simulate_communication, step_consensus_iht, step_difight,
                            step_local_iht, step_modifight, step_randomized, run)
from difight.network import Network, generate_connected_network
from difight.signals import hard_threshold_array
from difight.strategies import SelectionStrategy


@pytest.fixture
def pair():
    net = Network.from_edges(2, [(0, 1)])
    costs = [LeastSquaresCost([[1, 0, 1], [0, 1, 0]], [1, 2], 0),
             LeastSquaresCost([[1, 1, 0]], [3], 1)]
    X = np.array([[0.0, 0, 0], [1, 0, 0]])
    return net, costs, X, np.array([0.25, 0.5])


def test_two_node_difight(pair):
    net, costs, X, mu = pair
    np.testing.assert_allclose(step_difight(net, costs, X, mu, 1), [[1.75, 0, 0]] * 2)


def test_two_node_modifight(pair):
    net, costs, X, mu = pair
    np.testing.assert_allclose(step_modifight(net, costs, X, mu, 1), [[1.5, 0, 0]] * 2)


def test_two_node_consensus(pair):
    net, costs, X, mu = pair
    np.testing.assert_allclose(step_consensus_iht(net, costs, X, mu, 1),
                               [[0, 1, 0], [3, 0, 0]])


def problem(rng, L=5, M=30, N=40, K=3, seed=0):
    net = generate_connected_network(L, seed=seed)
    x = np.zeros(N)
    x[rng.choice(N, K, replace=False)] = rng.standard_normal(K)
    costs = []
    for v in range(L):
        Phi = rng.standard_normal((M, N)) / np.sqrt(M)
        costs.append(LeastSquaresCost(Phi, Phi @ x, v))
    return net, costs, x


def test_single_node_is_plain_iht(rng):
    net = Network.from_edges(1, [])
    Phi = rng.standard_normal((10, 20))
    cost = LeastSquaresCost(Phi, rng.standard_normal(10))
    x = rng.standard_normal((1, 20))
    expected = hard_threshold_array(x[0] - 0.01 * cost.gradient(x[0]), 4)
    for step in (step_difight, step_modifight, step_consensus_iht):
        np.testing.assert_allclose(step(net, [cost], x, 0.01, 4)[0], expected)


def test_true_signal_is_a_fixed_point(rng):
    net, costs, x = problem(rng)
    X = np.tile(x, (5, 1))
    for step in (step_difight, step_modifight, step_consensus_iht):
        np.testing.assert_allclose(step(net, costs, X, 0.3, 3), X, atol=1e-14)
    np.testing.assert_allclose(step_local_iht(costs, X, 0.3, 3), X, atol=1e-14)


def test_full_group_equals_deterministic_step(rng):
    net, costs, _ = problem(rng)
    X = rng.standard_normal((5, 40))
    for algo, step in ((Algorithm.DIFIGHT, step_difight), (Algorithm.MODIFIGHT, step_modifight),
                       (Algorithm.CONSENSUS, step_consensus_iht)):
        np.testing.assert_array_equal(step_randomized(net, costs, X, 0.3, 3, range(5), algo),
                                      step(net, costs, X, 0.3, 3))


def test_empty_group_changes_nothing(rng):
    net, costs, _ = problem(rng)
    X = rng.standard_normal((5, 40))
    counters = CommCounters.zeros(5)
    np.testing.assert_array_equal(step_randomized(net, costs, X, 0.3, 3, (), "DiFIGHT",
                                                  counters), X)
    assert counters.transmit.sum() == counters.receive.sum() == 0


def test_non_members_keep_their_estimate(rng):
    net, costs, _ = problem(rng)
    X = rng.standard_normal((5, 40))
    out = step_randomized(net, costs, X, 0.3, 3, (2,), "DiFIGHT")
    keep = [v for v in range(5) if v != 2]
    np.testing.assert_array_equal(out[keep], X[keep])
    assert np.count_nonzero(out[2]) <= 3


def test_counting_on_a_path():
    net = Network.from_edges(3, [(0, 1), (1, 2)])
    costs = [LeastSquaresCost(np.eye(4), np.zeros(4), v) for v in range(3)]
    counters = CommCounters.zeros(3)
    step_randomized(net, costs, np.zeros((3, 4)), 0.1, 1, (1,), "DiFIGHT", counters)
    L_algo = 2 * 1 + 4
    np.testing.assert_array_equal(counters.receive, [0, 2 * L_algo, 0])
    np.testing.assert_array_equal(counters.transmit, [L_algo, 0, L_algo])


def test_deterministic_run_converges_and_counts(rng):
    net, costs, x = problem(rng)
    for algo in ("DiFIGHT", "MoDiFIGHT", "ConsensusIHT", "CentralizedIHT"):
        tr = run(AlgorithmSpec(Algorithm.parse(algo), 3, n_it=500), net, costs, x, seed=1)
        assert tr.msd[-1] < 1e-12, algo
        assert tr.transmit_total[-1] == tr.receive_total[-1]
    assert tr.stop_reason == "converged"


def test_zero_iterations(rng):
    net, costs, x = problem(rng)
    tr = run(AlgorithmSpec(Algorithm.DIFIGHT, 3, mu=0.3, n_it=0), net, costs, x)
    assert tr.iterations == 0 and tr.msd[0] == pytest.approx(1.0)
    np.testing.assert_array_equal(tr.estimates, 0.0)


def test_runs_are_deterministic(rng):
    net, costs, x = problem(rng)
    spec = AlgorithmSpec(Algorithm.DIFIGHT, 3, n_it=50, strategy=SelectionStrategy("RGNP", 2))
    a, b = run(spec, net, costs, x, seed=7), run(spec, net, costs, x, seed=7)
    assert a.to_csv() == b.to_csv()
    assert a.groups == b.groups


def test_run_counters_equal_simulated_counters(rng):
    net, costs, x = problem(rng)
    for kind in ("RP", "RNP", "RGP", "RGNP"):
        s = SelectionStrategy(kind, 2)
        tr = run(AlgorithmSpec(Algorithm.DIFIGHT, 3, mu=0.3, n_it=300, strategy=s),
                 net, costs, x, seed=11)
        sim = simulate_communication(s, net, "DiFIGHT", 3, 40, 300, seed=11)
        np.testing.assert_array_equal(tr.counters.transmit, sim.transmit)
        np.testing.assert_array_equal(tr.counters.receive, sim.receive)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(rng):
    net, costs, x = problem(rng)
    with pytest.raises(DivergenceError):
        run(AlgorithmSpec(Algorithm.DIFIGHT, 3, mu=1e150, n_it=50), net, costs, x)


def test_trace_csv_header(rng):
    net, costs, x = problem(rng)
    tr = run(AlgorithmSpec(Algorithm.MODIFIGHT, 3, mu=0.3, n_it=3), net, costs, x)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "n,h_0,h_1,h_2,h_3,h_4,msd,T_total,R_total"
    assert len(lines) == tr.iterations + 2


def test_algorithm_names():
    assert Algorithm.parse("difight") is Algorithm.DIFIGHT
    with pytest.raises(ValueError):
        Algorithm.parse("gossip")


def test_overdetermined_nodes_converge_fast(rng):
    net, costs, x = problem(rng, L=4, M=50, N=30, K=3)
    for algo in Algorithm:
        tr = run(AlgorithmSpec(algo, 3, n_it=200), net, costs, x, seed=2)
        assert tr.msd[-1] < 1e-8, algo
        assert tr.msd[0] == pytest.approx(1.0)
