import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs
from gtqc.data import (
    LETTERS,
    DataError,
    Dataset,
    dumps_graphs,
    graphs_from_json,
    load_graph,
    load_json_graphs,
    parse_tudataset,
    save_json_graphs,
    standardize_targets,
    synthetic_letters,
    write_tudataset,
)
from gtqc.experiments import graphcovers_dataset
from gtqc.graphs import Graph


def _write(d, files):
    for name, text in files.items():
        (d / f"DS_{name}.txt").write_text(text)


TWO_TRIANGLES = {
    "A": "1, 2\n2, 3\n3, 1\n2, 1\n4, 5\n5, 6\n6, 4\n",
    "graph_indicator": "1\n1\n1\n2\n2\n2\n",
    "graph_labels": "1\n-1\n",
}


def test_two_triangles(tmp_path):
    _write(tmp_path, TWO_TRIANGLES)
    ds = parse_tudataset(tmp_path)
    assert len(ds) == 2 and ds.name == "DS"
    for g in ds.graphs:
        assert g.n_nodes == 3 and g.edges == ((0, 1), (0, 2), (1, 2))
        assert g.node_features is None
    assert ds.label_map == {-1: 0, 1: 1}
    assert [g.graph_label for g in ds.graphs] == [1, 0]


def test_empty_attribute_file_means_uniform_features(tmp_path):
    _write(tmp_path, {**TWO_TRIANGLES, "node_attributes": ""})
    ds = parse_tudataset(tmp_path)
    assert ds.in_dim == 1
    assert np.array_equal(ds.graphs[0].features_or_uniform(), np.ones((3, 1)))


def test_attributes_and_node_labels(tmp_path):
    attrs = "".join(f"{i}.5, {-i}\n" for i in range(6))
    _write(tmp_path, {**TWO_TRIANGLES, "node_attributes": attrs, "node_labels": "0\n1\n0\n1\n1\n0\n"})
    ds = parse_tudataset(tmp_path)
    assert ds.graphs[1].node_features.tolist() == [[3.5, -3.0], [4.5, -4.0], [5.5, -5.0]]
    assert ds.graphs[1].node_labels.tolist() == [1, 1, 0]


def test_missing_mandatory_file(tmp_path):
    _write(tmp_path, {"A": TWO_TRIANGLES["A"], "graph_indicator": TWO_TRIANGLES["graph_indicator"]})
    with pytest.raises(DataError, match="graph_labels"):
        parse_tudataset(tmp_path)


def test_malformed_line_reports_line_number(tmp_path):
    _write(tmp_path, {**TWO_TRIANGLES, "A": "1, 2\n2, x\n"})
    with pytest.raises(DataError, match="DS_A.txt:2"):
        parse_tudataset(tmp_path)


def test_node_outside_indicator_range(tmp_path):
    _write(tmp_path, {**TWO_TRIANGLES, "A": "1, 2\n2, 9\n"})
    with pytest.raises(DataError, match="DS_A.txt:2: node outside"):
        parse_tudataset(tmp_path)


def test_edge_between_graphs(tmp_path):
    _write(tmp_path, {**TWO_TRIANGLES, "A": "3, 4\n"})
    with pytest.raises(DataError, match="joins graphs"):
        parse_tudataset(tmp_path)


def test_node_cap_filters_and_counts(tmp_path):
    _write(tmp_path, {
        "A": "1, 2\n3, 4\n4, 5\n",
        "graph_indicator": "1\n1\n2\n2\n2\n",
        "graph_labels": "a\nb\n",
    })
    ds = parse_tudataset(tmp_path, node_cap=2)
    assert len(ds) == 1 and ds.n_filtered == 1
    assert ds.label_map == {"a": 0, "b": 1}


@st.composite
def labeled_sets(draw):
    gs = draw(st.lists(graphs(max_nodes=6), min_size=1, max_size=5))
    width = draw(st.integers(0, 2))
    out = []
    for g in gs:
        feats = None
        if width:
            vals = draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=g.n_nodes * width, max_size=g.n_nodes * width))
            feats = np.array(vals).reshape(g.n_nodes, width)
        out.append(Graph(g.n_nodes, g.edges, node_features=feats, graph_label=draw(st.integers(0, 3))))
    return out


@given(labeled_sets())
def test_tudataset_round_trip(tmp_path_factory, gs):
    labels = sorted({g.graph_label for g in gs})
    dense = {lab: i for i, lab in enumerate(labels)}
    gs = [Graph(g.n_nodes, g.edges, g.node_features, graph_label=dense[g.graph_label]) for g in gs]
    ds = Dataset(gs, "graph-classification", "RT", {lab: i for lab, i in dense.items()})
    d = tmp_path_factory.mktemp("tu")
    back = parse_tudataset(write_tudataset(ds, d))
    assert back.graphs == ds.graphs and back.label_map == ds.label_map
    again = parse_tudataset(write_tudataset(back, tmp_path_factory.mktemp("tu")))
    assert again.graphs == back.graphs


# -- JSON ------------------------------------------------------------------------------


def test_single_path_file(tmp_path):
    p = tmp_path / "p3.json"
    p.write_text(json.dumps({"n": 3, "edges": [[0, 1], [1, 2]]}))
    ds = load_json_graphs(p)
    assert len(ds) == 1 and ds.graphs[0].n_edges == 2 and not ds.is_labeled
    assert load_graph(p).n_nodes == 3


def test_self_loop_names_the_entry(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps([{"n": 2, "edges": [[0, 1]]}, {"n": 2, "edges": [[0, 1], [0, 0]]}]))
    with pytest.raises(DataError, match=r"\$\[1\].*edges\[1\] = \[0, 0\] is a self-loop"):
        load_json_graphs(p)


def test_out_of_range_names_the_entry():
    with pytest.raises(DataError, match=r"edges\[0\] = \[0, 5\] out of range"):
        graphs_from_json({"n": 2, "edges": [[0, 5]]})


def test_schema_violation_reports_json_path():
    with pytest.raises(DataError, match=r"\$\[1\]\.edges\[0\]\[1\]"):
        graphs_from_json([{"n": 2, "edges": []}, {"n": 2, "edges": [[0, "a"]]}])
    with pytest.raises(DataError, match="colour"):
        graphs_from_json({"n": 2, "edges": [], "colour": 1})


def test_invalid_json_text(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(DataError):
        load_json_graphs(p)


def test_load_graph_needs_exactly_one(tmp_path):
    p = tmp_path / "two.json"
    p.write_text(json.dumps([{"n": 1, "edges": []}, {"n": 1, "edges": []}]))
    with pytest.raises(DataError):
        load_graph(p)


def test_lift_dataset_round_trips_bitwise(tmp_path):
    _, ds = graphcovers_dataset(seed=3)
    p = tmp_path / "covers.json"
    save_json_graphs(ds, p)
    text = p.read_text()
    back = load_json_graphs(p)
    assert back.graphs == ds.graphs
    save_json_graphs(back, p)
    assert p.read_text() == text


@given(labeled_sets())
def test_json_round_trip(gs):
    text = dumps_graphs(gs)
    back = graphs_from_json(json.loads(text))
    assert back == gs and dumps_graphs(back) == text


def test_task_inference(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps([{"n": 1, "edges": [], "graph_label": 0.5}]))
    assert load_json_graphs(p).task == "graph-regression"
    p.write_text(json.dumps([{"n": 2, "edges": [[0, 1]], "labels": [0, 1]}]))
    ds = load_json_graphs(p)
    assert ds.task == "node-classification" and ds.n_classes == 2


# -- Dataset ---------------------------------------------------------------------------------


def test_partial_labels_rejected():
    with pytest.raises(DataError, match="graph 1"):
        Dataset([Graph(1, graph_label=0), Graph(1)])


def test_unknown_task():
    with pytest.raises(DataError):
        Dataset([], "link-prediction")


def test_synthetic_letters():
    ds = synthetic_letters(60, seed=1)
    assert len(ds) == 60 and ds.n_classes == len(LETTERS) == 15 and ds.in_dim == 2
    assert max(g.n_nodes for g in ds.graphs) <= 20
    assert synthetic_letters(60, seed=1).graphs == ds.graphs
    assert synthetic_letters(60, seed=2).graphs != ds.graphs


def test_standardize_targets():
    ds = Dataset([Graph(1, graph_label=float(v)) for v in (1, 2, 3, 6)], "graph-regression")
    out, mean, std = standardize_targets(ds)
    y = np.array([g.graph_label for g in out.graphs]).ravel()
    assert mean == 3.0 and abs(y.mean()) < 1e-12 and y.std() == pytest.approx(1.0)
    const, _, s = standardize_targets(Dataset([Graph(1, graph_label=2.0)] * 3, "graph-regression"))
    assert s == 1.0
    with pytest.raises(DataError):
        standardize_targets(Dataset([Graph(1, graph_label=0)]))
