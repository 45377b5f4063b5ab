import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import graphs_with_perm
from gtqc import autodiff as ad
from gtqc.attention import (
    AttentionHead,
    CorrelationCache,
    UnsupportedGradientError,
    _trig_derivative,
    attention_from_correlations,
    correlation_tensor,
    head_attention,
    quantum_gradient,
    trig_frequencies,
)
from gtqc.graphs import Graph, cycle_graph, path_graph, permute_graph
from gtqc.quantum import PauliString, QuantumParams, expectation, measure_correlations, prepare_graph_state, zero_state

angles = st.floats(0, 2 * np.pi, allow_nan=False)
E_ZZ = np.eye(9)[0]


def test_zz_attention_on_zero_state():
    c = measure_correlations(zero_state(3))
    a = attention_from_correlations(c, E_ZZ)
    assert np.array_equal(a, np.ones((3, 3)) - np.eye(3))


def test_zz_attention_with_softmax():
    a = attention_from_correlations(measure_correlations(zero_state(3)), E_ZZ, softmax=True)
    e = np.e
    row = np.array([1, e, e]) / (1 + 2 * e)
    assert row[0] == pytest.approx(0.155, abs=5e-4) and row[1] == pytest.approx(0.422, abs=5e-4)
    for i in range(3):
        assert np.allclose(np.sort(a[i]), np.sort(row), atol=1e-15)
        assert a[i, i] == pytest.approx(row[0])


def test_zero_gamma():
    c = measure_correlations(oracles.random_state(4, np.random.default_rng(0)))
    assert not attention_from_correlations(c, np.zeros(9)).any()
    assert np.allclose(attention_from_correlations(c, np.zeros(9), softmax=True), 0.25)


def test_gamma_length_checked():
    with pytest.raises(ValueError):
        attention_from_correlations(np.zeros((2, 2, 9)), np.zeros(8))
    with pytest.raises(ValueError):
        AttentionHead(QuantumParams([0.0]), np.zeros(3))


def test_head_attention_matches_dense_oracle():
    g = cycle_graph(4)
    theta = [0.3, 1.1, 0.7]
    gamma = np.linspace(-1, 1, 9)
    a = head_attention(g, AttentionHead(QuantumParams(theta), gamma, True, "xy"))
    c = oracles.correlations(oracles.layered_state(g.edges, 4, "xy", theta), 4)
    assert np.abs(a - oracles.softmax_rows(c @ gamma)).max() <= 1e-12


@given(graphs_with_perm(min_nodes=2, max_nodes=6), st.sampled_from(["ising", "xy", "xxz"]),
       st.lists(angles, min_size=3, max_size=3), st.lists(st.floats(-2, 2), min_size=9, max_size=9), st.booleans())
def test_attention_is_equivariant(gp, kind, theta, gamma, softmax):
    g, perm = gp
    head = AttentionHead(QuantumParams(theta), np.array(gamma), softmax, kind)
    a = head_attention(g, head)
    b = head_attention(permute_graph(g, perm), head)
    p = np.eye(g.n_nodes)[perm].T  # column i is e_perm[i]
    assert np.abs(b - p @ a @ p.T).max() <= 1e-10


def test_gamma_gradient_is_correlation():
    c = measure_correlations(oracles.random_state(4, np.random.default_rng(1)))
    r = np.random.default_rng(2).normal(size=(4, 4))
    tape = ad.Tape()
    gamma = tape.leaf(np.random.default_rng(3).normal(size=9), name="gamma")
    loss = ad.sum_(ad.matmul(tape.leaf(c), gamma) * r)
    grad = tape.backward(loss)["gamma"]
    assert np.allclose(grad, np.einsum("ij,ijk->k", r, c), rtol=0, atol=1e-14)


# -- quantum gradients --------------------------------------------------------------


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.234, 2.9, -0.8])
def test_single_qubit_trig_derivative_is_exact(theta):
    z0 = PauliString({0: "Z"}, 1)

    def f(x):
        return np.array(expectation(prepare_graph_state(Graph(1), "ising", [x]), z0))

    d = _trig_derivative(f, theta, trig_frequencies(Graph(1), "ising", 0))
    assert f(theta) == pytest.approx(np.cos(2 * theta), abs=1e-14)
    assert d == pytest.approx(-2 * np.sin(2 * theta), abs=1e-12)


@pytest.mark.parametrize("theta", [0.2, 1.0, 2.5])
def test_trig_gradient_of_free_pair(theta):
    # no edges: <Z0 Z1> = cos(2 theta)^2
    grad = quantum_gradient(Graph(2), "ising", [theta], "trig")
    assert grad[0, 0, 1, 0] == pytest.approx(-2 * np.sin(4 * theta), abs=1e-12)


@pytest.mark.parametrize("strategy", ["trig", "finite_diff"])
def test_stationary_point_has_zero_gradient(strategy):
    grad = quantum_gradient(path_graph(3), "ising", np.zeros(3), strategy)
    assert np.abs(grad[..., 0]).max() <= 1e-8


def test_frequency_sets():
    g = path_graph(3)
    assert trig_frequencies(g, "xy", 0).tolist() == [0, 2, 4, 6]
    assert trig_frequencies(g, "ising", 1).tolist() == [0, 2, 4]
    with pytest.raises(UnsupportedGradientError):
        trig_frequencies(g, "xy", 1)


def test_trig_rejected_for_xy_time():
    with pytest.raises(UnsupportedGradientError):
        quantum_gradient(path_graph(3), "xy", [0.1, 0.2, 0.3], "trig")


def test_unknown_strategy():
    with pytest.raises(ValueError):
        quantum_gradient(path_graph(3), "ising", [0.1], "adjoint")


@given(st.lists(angles, min_size=3, max_size=3))
def test_trig_matches_finite_differences_on_path3(theta):
    g = path_graph(3)
    trig = quantum_gradient(g, "ising", theta, "trig")
    fd = quantum_gradient(g, "ising", theta, "finite_diff")
    assert np.abs(trig - fd).max() <= 1e-5


@given(st.lists(angles, min_size=3, max_size=3))
def test_auto_strategy_on_xy_mixes_rules(theta):
    g = path_graph(3)
    auto = quantum_gradient(g, "xy", theta, "auto")
    fd = quantum_gradient(g, "xy", theta, "finite_diff")
    assert np.abs(auto - fd).max() <= 1e-5
    assert np.array_equal(auto[1], fd[1])


def test_gradient_shape_and_index_selection():
    grad = quantum_gradient(cycle_graph(4), "ising", np.full(5, 0.4), "auto", indices=[1])
    assert grad.shape == (5, 4, 4, 9)
    assert not grad[[0, 2, 3, 4]].any() and grad[1].any()


# -- cache --------------------------------------------------------------------------------


def test_cache_counts_simulations():
    cache = CorrelationCache()
    g, theta = cycle_graph(4), np.array([0.1, 0.2, 0.3])
    c1 = cache.get(g, "h", "ising", theta)
    c2 = cache.get(Graph(4, g.edges, node_features=np.ones((4, 2))), "h", "ising", theta)
    assert c1 is c2 and cache.sim_calls == 1
    cache.get(g, "h", "ising", theta + 0.1)
    cache.get(g, "other", "ising", theta)
    assert cache.sim_calls == 3
    cache.get(g, "h", "ising", theta, force=True)
    assert cache.sim_calls == 4
    assert np.allclose(c1, correlation_tensor(g, "ising", theta))
