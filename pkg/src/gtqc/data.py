"""Dataset containers and readers/writers for TUDataset text files and graph JSON."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from .graphs import Graph, GraphError

TASKS = ("graph-classification", "graph-regression", "node-classification")

GRAPH_SCHEMA = {
    "type": "object",
    "required": ["n", "edges"],
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 0},
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "features": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "labels": {"type": "array", "items": {"type": "integer"}},
        "graph_label": {"type": ["integer", "number", "array"]},
    },
}

DATASET_SCHEMA = {"oneOf": [GRAPH_SCHEMA, {"type": "array", "items": GRAPH_SCHEMA}]}

CORRELATIONS_SCHEMA = {
    "type": "object",
    "required": ["n", "kind", "theta", "components", "values"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "kind": {"enum": ["ising", "xy", "xxz"]},
        "J": {"type": "number"},
        "theta": {"type": "array", "items": {"type": "number"}},
        "components": {"type": "array", "items": {"type": "string"}, "minItems": 9, "maxItems": 9},
        "values": {"type": "array"},
    },
}


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    graphs: list[Graph]
    task: str = "graph-classification"
    name: str = ""
    label_map: dict = field(default_factory=dict)
    n_filtered: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        # fully unlabeled sets are allowed for inspection; partial labeling is not
        have = [self._has_label(g) for g in self.graphs]
        if any(have) and not all(have):
            i = have.index(False)
            raise DataError(f"graph {i} is missing its label for task {self.task}")

    def _has_label(self, g: Graph) -> bool:
        return (g.node_labels if self.level == "node" else g.graph_label) is not None

    @property
    def is_labeled(self) -> bool:
        return bool(self.graphs) and all(self._has_label(g) for g in self.graphs)

    def __len__(self):
        return len(self.graphs)

    @property
    def level(self) -> str:
        return "node" if self.task.startswith("node") else "graph"

    @property
    def model_task(self) -> str:
        return "regression" if self.task.endswith("regression") else "classification"

    @property
    def n_classes(self) -> int:
        if self.task == "node-classification":
            return int(max(g.node_labels.max() for g in self.graphs)) + 1
        return int(max(int(g.graph_label) for g in self.graphs)) + 1

    @property
    def in_dim(self) -> int:
        return self.graphs[0].features_or_uniform().shape[1]

    def subset(self, graphs: list[Graph]) -> "Dataset":
        return replace(self, graphs=list(graphs))

    def filter_size(self, node_cap: int) -> "Dataset":
        keep = [g for g in self.graphs if g.n_nodes <= node_cap]
        return replace(self, graphs=keep, n_filtered=self.n_filtered + len(self.graphs) - len(keep))


# -- TUDataset ---------------------------------------------------------------


def _read_rows(path: Path, width=None, cast=float) -> list[list]:
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = [cast(tok) for tok in line.replace(",", " ").split()]
        except ValueError:
            raise DataError(f"{path.name}:{lineno}: malformed line {line!r}") from None
        if width is not None and len(row) != width:
            raise DataError(f"{path.name}:{lineno}: expected {width} values, got {len(row)}")
        rows.append(row)
    return rows


def _label(tok: str):
    for cast in (int, float):
        try:
            return cast(tok)
        except ValueError:
            pass
    return tok


def parse_tudataset(directory, name: str | None = None, node_cap: int | None = None) -> Dataset:
    """Read ``<name>_A.txt`` and friends (1-indexed) into 0-indexed graphs.

    Graph labels are mapped to dense class ids in sorted order; the mapping is
    kept in ``label_map``. Node attributes become features when present.
    """
    d = Path(directory)
    if name is None:
        found = sorted(d.glob("*_A.txt"))
        if not found:
            raise DataError(f"no *_A.txt file in {d}")
        name = found[0].name[: -len("_A.txt")]

    def path(suffix):
        return d / f"{name}_{suffix}.txt"

    for suffix in ("A", "graph_indicator", "graph_labels"):
        if not path(suffix).exists():
            raise DataError(f"missing mandatory file {path(suffix).name}")

    indicator = [r[0] for r in _read_rows(path("graph_indicator"), 1, int)]
    n_graphs = max(indicator) if indicator else 0
    raw_labels = [
        _label(line.strip()) for line in path("graph_labels").read_text().splitlines() if line.strip()
    ]
    if len(raw_labels) != n_graphs:
        raise DataError(f"{len(raw_labels)} graph labels for {n_graphs} graphs")

    members: dict[int, list[int]] = defaultdict(list)
    for node, gid in enumerate(indicator, start=1):
        members[gid].append(node)
    offset = {}
    for gid, nodes in members.items():
        for local, node in enumerate(nodes):
            offset[node] = (gid, local)

    edges: dict[int, set] = defaultdict(set)
    for lineno, (u, v) in enumerate(_read_rows(path("A"), 2, int), start=1):
        if u not in offset or v not in offset:
            raise DataError(f"{path('A').name}:{lineno}: node outside the indicator range")
        (gu, lu), (gv, lv) = offset[u], offset[v]
        if gu != gv:
            raise DataError(f"{path('A').name}:{lineno}: edge joins graphs {gu} and {gv}")
        if lu != lv:
            edges[gu].add((min(lu, lv), max(lu, lv)))

    attrs = None
    if path("node_attributes").exists():
        rows = _read_rows(path("node_attributes"))
        if rows:
            if len(rows) != len(indicator):
                raise DataError(f"{len(rows)} attribute rows for {len(indicator)} nodes")
            attrs = np.array(rows, dtype=float)
    node_labels = None
    if path("node_labels").exists():
        rows = _read_rows(path("node_labels"), 1, int)
        if rows:
            node_labels = np.array([r[0] for r in rows])

    label_map = {lab: i for i, lab in enumerate(sorted(set(raw_labels)))}
    graphs = []
    for gid in range(1, n_graphs + 1):
        nodes = np.array(members[gid], dtype=int) - 1
        graphs.append(
            Graph(
                len(nodes),
                sorted(edges[gid]),
                node_features=None if attrs is None else attrs[nodes],
                node_labels=None if node_labels is None else node_labels[nodes],
                graph_label=label_map[raw_labels[gid - 1]],
            )
        )
    ds = Dataset(graphs, "graph-classification", name, label_map)
    return ds.filter_size(node_cap) if node_cap is not None else ds


def write_tudataset(ds: Dataset, directory, name: str | None = None) -> Path:
    """Inverse of ``parse_tudataset`` for graph-classification datasets."""
    name = name or ds.name or "DS"
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    inverse = {v: k for k, v in ds.label_map.items()} if ds.label_map else {}
    a, ind, labels, attrs, nlabels = [], [], [], [], []
    base = 1
    for gid, g in enumerate(ds.graphs, start=1):
        for u, v in g.edges:
            a += [f"{base + u}, {base + v}", f"{base + v}, {base + u}"]
        ind += [str(gid)] * g.n_nodes
        labels.append(str(inverse.get(g.graph_label, g.graph_label)))
        if g.node_features is not None:
            attrs += [", ".join(repr(float(x)) for x in row) for row in g.node_features]
        if g.node_labels is not None:
            nlabels += [str(int(x)) for x in g.node_labels]
        base += g.n_nodes
    files = {"A": a, "graph_indicator": ind, "graph_labels": labels}
    if attrs:
        files["node_attributes"] = attrs
    if nlabels:
        files["node_labels"] = nlabels
    for suffix, lines in files.items():
        (d / f"{name}_{suffix}.txt").write_text("\n".join(lines) + "\n")
    return d


# -- JSON --------------------------------------------------------------------


def _json_path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def validate_graph_json(doc) -> None:
    validator = jsonschema.Draft7Validator(DATASET_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        # oneOf hides the useful message; report the deepest sub-error
        err = errors[0]
        if err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise DataError(f"schema violation at {_json_path(err)}: {err.message}")


def graphs_from_json(doc) -> list[Graph]:
    validate_graph_json(doc)
    items = doc if isinstance(doc, list) else [doc]
    out = []
    for i, item in enumerate(items):
        where = f"$[{i}]" if isinstance(doc, list) else "$"
        try:
            out.append(Graph.from_dict(item))
        except GraphError as e:
            raise DataError(f"invalid graph at {where}: {e}") from None
    return out


def _infer_task(graphs: list[Graph]) -> str:
    if graphs and all(g.graph_label is not None for g in graphs):
        ints = all(isinstance(g.graph_label, (int, np.integer)) for g in graphs)
        return "graph-classification" if ints else "graph-regression"
    if graphs and all(g.node_labels is not None for g in graphs):
        return "node-classification"
    return "graph-classification"


def load_json_graphs(path, task: str | None = None, name: str | None = None) -> Dataset:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{p}: invalid JSON ({e})") from None
    graphs = graphs_from_json(doc)
    return Dataset(graphs, task or _infer_task(graphs), name or p.stem)


def replace_label(g: Graph, label) -> Graph:
    return Graph(g.n_nodes, g.edges, g.node_features, g.node_labels, label, g.positions)


def dumps_graphs(graphs: list[Graph]) -> str:
    return json.dumps([g.to_dict() for g in graphs], indent=1, sort_keys=True) + "\n"


def save_json_graphs(data, path) -> None:
    graphs = list(getattr(data, "graphs", data))
    Path(path).write_text(dumps_graphs(graphs))


def load_graph(path) -> Graph:
    """Exactly one graph from a JSON file (object or single-element array)."""
    ds = load_json_graphs(path)
    if len(ds.graphs) != 1:
        raise DataError(f"{path}: expected one graph, found {len(ds.graphs)}")
    return ds.graphs[0]


# -- synthetic Letter-style data -----------------------------------------------

# stroke skeletons on a 0..4 grid; each letter is a node list + edge list
_LETTERS = {
    "A": ([(0, 0), (1, 2), (2, 4), (3, 2), (4, 0)], [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]),
    "E": ([(4, 4), (0, 4), (0, 2), (3, 2), (0, 0), (4, 0)], [(0, 1), (1, 2), (2, 3), (2, 4), (4, 5)]),
    "F": ([(4, 4), (0, 4), (0, 2), (3, 2), (0, 0)], [(0, 1), (1, 2), (2, 3), (2, 4)]),
    "H": ([(0, 4), (0, 2), (0, 0), (4, 4), (4, 2), (4, 0)], [(0, 1), (1, 2), (3, 4), (4, 5), (1, 4)]),
    "I": ([(2, 4), (2, 2), (2, 0)], [(0, 1), (1, 2)]),
    "K": ([(0, 4), (0, 2), (0, 0), (4, 4), (4, 0)], [(0, 1), (1, 2), (1, 3), (1, 4)]),
    "L": ([(0, 4), (0, 2), (0, 0), (4, 0)], [(0, 1), (1, 2), (2, 3)]),
    "M": ([(0, 0), (0, 4), (2, 2), (4, 4), (4, 0)], [(0, 1), (1, 2), (2, 3), (3, 4)]),
    "N": ([(0, 0), (0, 4), (4, 0), (4, 4)], [(0, 1), (1, 2), (2, 3)]),
    "T": ([(0, 4), (2, 4), (4, 4), (2, 2), (2, 0)], [(0, 1), (1, 2), (1, 3), (3, 4)]),
    "V": ([(0, 4), (2, 0), (4, 4)], [(0, 1), (1, 2)]),
    "W": ([(0, 4), (1, 0), (2, 2), (3, 0), (4, 4)], [(0, 1), (1, 2), (2, 3), (3, 4)]),
    "X": ([(0, 4), (4, 0), (2, 2), (0, 0), (4, 4)], [(0, 2), (2, 1), (3, 2), (2, 4)]),
    "Y": ([(0, 4), (2, 2), (4, 4), (2, 0)], [(0, 1), (1, 2), (1, 3)]),
    "Z": ([(0, 4), (4, 4), (0, 0), (4, 0)], [(0, 1), (1, 2), (2, 3)]),
}
LETTERS = tuple(sorted(_LETTERS))


def synthetic_letters(
    n_graphs: int = 450, noise: float = 0.3, seed: int = 0, edge_flip: float = 0.05
) -> Dataset:
    """Distorted line drawings of 15 capital letters in TUDataset style:
    node attributes are 2-D positions, labels are letter ids.

    Each sample jitters node positions with Gaussian noise and, with
    probability ``edge_flip`` per drawing, removes one edge or adds one
    between the two closest unconnected nodes.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(n_graphs):
        label = i % len(LETTERS)
        pts, edges = _LETTERS[LETTERS[label]]
        pos = np.array(pts, dtype=float) + rng.normal(0.0, noise, size=(len(pts), 2))
        edges = set(edges)
        if rng.random() < edge_flip and len(edges) > 1:
            edges.discard(sorted(edges)[rng.integers(len(edges))])
        elif rng.random() < edge_flip:
            dist = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
            cands = [(dist[u, v], u, v) for u in range(len(pts)) for v in range(u + 1, len(pts))
                     if (u, v) not in edges and (v, u) not in edges]
            if cands:
                _, u, v = min(cands)
                edges.add((u, v))
        graphs.append(Graph(len(pts), sorted(edges), node_features=pos, graph_label=label))
    order = rng.permutation(n_graphs)
    graphs = [graphs[k] for k in order]
    return Dataset(graphs, "graph-classification", "Letter-synthetic", {c: i for i, c in enumerate(LETTERS)})


def standardize_targets(ds: Dataset) -> tuple[Dataset, float, float]:
    """Recentre and rescale regression targets; returns (dataset, mean, std)."""
    if ds.task != "graph-regression":
        raise DataError("only graph-regression targets can be standardized")
    y = np.array([np.atleast_1d(g.graph_label) for g in ds.graphs], dtype=float)
    mean, std = float(y.mean()), float(y.std())
    std = std if std > 0 else 1.0
    graphs = [replace_label(g, ((np.atleast_1d(g.graph_label) - mean) / std).tolist()) for g in ds.graphs]
    return ds.subset(graphs), mean, std
