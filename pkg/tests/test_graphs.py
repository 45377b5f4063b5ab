import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs, graphs_with_perm
from gtqc.graphs import (
    Graph,
    GraphError,
    LatticeSpec,
    LiftSpec,
    automorphism_orbits,
    complete_graph,
    cycle_graph,
    disjoint_union,
    graph_covers,
    inverse_permutation,
    is_isomorphic,
    laplacian,
    laplacian_eigenmaps,
    lattice_graph,
    path_graph,
    permute_graph,
    project_lift,
    random_lift,
    wl_indistinguishable,
)


# -- Graph invariants -------------------------------------------------------


def test_graph_rejects_self_loop():
    with pytest.raises(GraphError, match="self-loop"):
        Graph(3, [(0, 1), (1, 1)])


def test_graph_rejects_out_of_range_endpoint():
    with pytest.raises(GraphError, match="out of range"):
        Graph(3, [(0, 3)])


def test_graph_rejects_duplicate_edges():
    with pytest.raises(GraphError, match="duplicate"):
        Graph(3, [(0, 1), (1, 0)])


def test_from_edges_merges_duplicates():
    assert Graph.from_edges(3, [(0, 1), (1, 0), (2, 1)]).edges == ((0, 1), (1, 2))


def test_feature_rows_must_match_nodes():
    with pytest.raises(GraphError):
        Graph(3, [(0, 1)], node_features=np.ones((2, 1)))


def test_edges_are_sorted_pairs():
    g = Graph(4, [(3, 0), (2, 1)])
    assert g.edges == ((0, 3), (1, 2))


# -- lattices ---------------------------------------------------------------


def _proper(g):
    return all(g.node_labels[i] != g.node_labels[j] for i, j in g.edges)


def test_square_2x2_is_3x3_grid_with_checkerboard():
    g = lattice_graph(LatticeSpec("square", 2, 2))
    assert (g.n_nodes, g.n_edges) == (9, 12)
    assert _proper(g)
    assert sorted(Counter(g.node_labels.tolist()).values()) == [4, 5]


def test_honeycomb_1x1_is_hexagon():
    g = lattice_graph(LatticeSpec("honeycomb", 1, 1))
    assert is_isomorphic(g, cycle_graph(6))
    assert _proper(g)


def _ising_energy(g, labels):
    s = 1 - 2 * np.asarray(labels)
    return sum(int(s[i] * s[j]) for i, j in g.edges)


def test_triangular_cell_labeling_minimizes_ising_energy():
    g = lattice_graph(LatticeSpec("triangular", 1, 1))
    best = min(_ising_energy(g, bits) for bits in itertools.product((0, 1), repeat=g.n_nodes))
    assert _ising_energy(g, g.node_labels) == best


@pytest.mark.parametrize("kind", ["triangular", "kagome"])
def test_frustrated_labeling_has_no_uniform_triangle(kind):
    # every triangle at its minimum (-1) is a lattice ground state
    g = lattice_graph(LatticeSpec(kind, 3, 3))
    nb = [set(x) for x in g.neighbors()]
    tris = [(i, j, k) for i, j in g.edges for k in nb[i] & nb[j] if k > j]
    assert tris
    for t in tris:
        assert len(set(g.node_labels[list(t)].tolist())) == 2


def test_triangular_cell_energy_matches_enumeration():
    # 4 sites, 5 bonds: two triangles sharing a frustrated diagonal, best is 1 - 4
    g = lattice_graph(LatticeSpec("triangular", 1, 1))
    assert (g.n_nodes, g.n_edges) == (4, 5)
    assert _ising_energy(g, g.node_labels) == -3


@pytest.mark.parametrize(
    "kind,max_degree", [("square", 4), ("triangular", 6), ("honeycomb", 3), ("kagome", 4)]
)
def test_lattice_interior_degree(kind, max_degree):
    g = lattice_graph(LatticeSpec(kind, 3, 3))
    assert g.degrees().max() == max_degree
    assert g.is_connected()


def test_lattice_labels_are_binary_and_periodic():
    g = lattice_graph(LatticeSpec("triangular", 2, 3))
    assert set(g.node_labels.tolist()) == {0, 1}


def test_lattice_explicit_cells():
    g = lattice_graph(LatticeSpec("honeycomb", cells=((0, 0), (0, 1), (1, 0))))
    assert g.n_nodes == 13
    assert _proper(g)


def test_lattice_errors():
    with pytest.raises(GraphError, match="unknown lattice"):
        lattice_graph(LatticeSpec("cubic", 1, 1))
    with pytest.raises(GraphError):
        lattice_graph(LatticeSpec("square", 0, 2))
    with pytest.raises(GraphError, match="connected"):
        lattice_graph(LatticeSpec("square", cells=((0, 0), (5, 5))))


# -- 1-WL ---------------------------------------------------------------------


def test_wl_c6_vs_two_triangles():
    assert wl_indistinguishable(cycle_graph(6), disjoint_union(cycle_graph(3), cycle_graph(3)))


def test_wl_c6_vs_p6():
    assert not wl_indistinguishable(cycle_graph(6), path_graph(6))


def test_wl_different_sizes():
    assert not wl_indistinguishable(cycle_graph(5), cycle_graph(6))


def test_wl_max_iters_zero_rounds_only_compares_sizes():
    # one round sees degrees, so P4 vs star differ only after refinement
    star = Graph(4, [(0, 1), (0, 2), (0, 3)])
    assert not wl_indistinguishable(path_graph(4), star)


@given(graphs_with_perm(max_nodes=9))
def test_wl_invariant_under_permutation(gp):
    g, perm = gp
    assert wl_indistinguishable(g, permute_graph(g, perm))


# -- lifts -----------------------------------------------------------------------


def test_identity_lift_of_triangle_is_two_triangles():
    ident = {e: [0, 1] for e in cycle_graph(3).edges}
    lift = random_lift(LiftSpec(cycle_graph(3), 2, permutations=ident))
    assert lift.edges == ((0, 2), (0, 4), (1, 3), (1, 5), (2, 4), (3, 5))
    assert not lift.is_connected()
    assert is_isomorphic(lift, disjoint_union(cycle_graph(3), cycle_graph(3)))


def test_lift_with_one_transposition_is_hexagon():
    perms = {(0, 1): [0, 1], (0, 2): [0, 1], (1, 2): [1, 0]}
    lift = random_lift(LiftSpec(cycle_graph(3), 2, permutations=perms))
    # copies u*2+a: hand-enumerated matching edges
    assert lift.edges == ((0, 2), (0, 4), (1, 3), (1, 5), (2, 5), (3, 4))
    assert is_isomorphic(lift, cycle_graph(6))


def test_lift_degree_must_be_at_least_two():
    with pytest.raises(GraphError):
        random_lift(LiftSpec(cycle_graph(3), 1))


def test_lift_is_deterministic_for_a_seed():
    base = complete_graph(4)
    assert random_lift(LiftSpec(base, 3, seed=5)) == random_lift(LiftSpec(base, 3, seed=5))


@given(graphs(min_nodes=2, max_nodes=6, connected=True), st.integers(2, 3), st.integers(0, 10**6), st.integers(0, 10**6))
def test_lifts_of_one_base_are_wl_equivalent(base, k, s1, s2):
    a = random_lift(LiftSpec(base, k, seed=s1))
    b = random_lift(LiftSpec(base, k, seed=s2))
    assert a.n_nodes == k * base.n_nodes
    assert wl_indistinguishable(a, b)
    assert project_lift(a, k) == Counter({e: k for e in base.edges})


def test_graphcovers_family():
    base, lifts = graph_covers(6, base_nodes=7, degree=3, seed=0)
    assert base.n_nodes == 7 and len(lifts) == 6
    for g in lifts:
        assert g.n_nodes == 21 and g.is_connected()
    for a, b in itertools.combinations(lifts, 2):
        assert wl_indistinguishable(a, b)
        assert not is_isomorphic(a, b)


def test_graphcovers_rejects_disconnected_base():
    with pytest.raises(GraphError):
        graph_covers(2, base=disjoint_union(cycle_graph(3), cycle_graph(3)))


# -- eigenmaps ---------------------------------------------------------------------


def test_eigenmaps_path3_spectrum():
    _, lam = laplacian_eigenmaps(path_graph(3), 3, return_values=True)
    assert np.allclose(lam, [0.0, 1.0, 3.0], atol=1e-12)


def test_eigenmaps_first_column_is_constant():
    v = laplacian_eigenmaps(cycle_graph(7), 1)
    assert np.allclose(v[:, 0], 1 / np.sqrt(7), atol=1e-12)


def test_eigenmaps_c6_second_eigenvalue():
    _, lam = laplacian_eigenmaps(cycle_graph(6), 2, return_values=True)
    assert lam[1] == pytest.approx(2 - 2 * np.cos(2 * np.pi / 6), abs=1e-12)
    assert lam[1] == pytest.approx(1.0, abs=1e-12)


def test_eigenmaps_k_too_large():
    with pytest.raises(GraphError):
        laplacian_eigenmaps(path_graph(3), 4)


def test_eigenmaps_sign_and_tie_convention():
    v = laplacian_eigenmaps(cycle_graph(6), 6)
    for col in v.T:
        nz = col[np.abs(col) > 1e-12]
        assert nz[0] > 0
    # deterministic under repetition, including the degenerate pairs
    assert np.array_equal(v, laplacian_eigenmaps(cycle_graph(6), 6))


@given(graphs(max_nodes=9), st.data())
def test_eigenmaps_are_unit_eigenvectors(g, data):
    k = data.draw(st.integers(1, g.n_nodes))
    v, lam = laplacian_eigenmaps(g, k, return_values=True)
    lap = laplacian(g)
    assert v.shape == (g.n_nodes, k)
    assert np.allclose(np.linalg.norm(v, axis=0), 1.0, atol=1e-10)
    assert np.abs(lap @ v - v * lam).max() <= 1e-8
    assert np.all(np.diff(lam) >= -1e-10)


# -- permutations ---------------------------------------------------------------------


def test_identity_permutation():
    g = Graph(3, [(0, 1)], node_features=np.arange(3.0))
    assert permute_graph(g, [0, 1, 2]) == g


def test_reverse_path3():
    assert permute_graph(path_graph(3), [2, 1, 0]).edges == ((0, 1), (1, 2))


def test_permutation_moves_features_with_nodes():
    g = Graph(3, [(0, 1)], node_features=np.array([[10.0], [20.0], [30.0]]), node_labels=[0, 1, 2])
    h = permute_graph(g, [2, 0, 1])
    assert h.edges == ((0, 2),)
    assert h.node_features[2, 0] == 10.0 and h.node_labels[2] == 0
    assert h.node_features[0, 0] == 20.0


def test_non_bijective_permutation_rejected():
    with pytest.raises(GraphError):
        permute_graph(path_graph(3), [0, 0, 1])


@given(graphs_with_perm(max_nodes=9))
def test_permutation_then_inverse_is_identity(gp):
    g, perm = gp
    assert permute_graph(permute_graph(g, perm), inverse_permutation(perm)) == g


def test_automorphism_orbits_of_path():
    assert automorphism_orbits(path_graph(4)) == [[0, 3], [1, 2]]
