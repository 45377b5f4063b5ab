"""Graph container, lattice and covering-graph generators, 1-WL refinement,
Laplacian eigenmaps and node relabeling."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

LATTICE_KINDS = ("square", "triangular", "honeycomb", "kagome")


class GraphError(ValueError):
    """Raised when a graph violates its structural invariants."""


def _canonical_edges(edges: Iterable[Sequence[int]]) -> tuple[tuple[int, int], ...]:
    out = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        out.add((min(i, j), max(i, j)))
    return tuple(sorted(out))


@dataclass(eq=False)
class Graph:
    """Undirected simple graph on nodes ``0..n_nodes-1``.

    Edges are stored once, as sorted ``(i, j)`` pairs with ``i < j``.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...] = ()
    node_features: np.ndarray | None = None
    node_labels: np.ndarray | None = None
    graph_label: int | float | None = None
    positions: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.n_nodes) < 1:
            raise GraphError(f"n_nodes must be positive, got {self.n_nodes}")
        self.n_nodes = int(self.n_nodes)
        raw = [tuple(int(v) for v in e) for e in self.edges]
        for k, (i, j) in enumerate(raw):
            if i == j:
                raise GraphError(f"edges[{k}] = [{i}, {j}] is a self-loop")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise GraphError(f"edges[{k}] = [{i}, {j}] out of range for n={self.n_nodes}")
        canon = _canonical_edges(raw)
        if len(canon) != len(raw):
            raise GraphError("duplicate edges")
        self.edges = canon
        if self.node_features is not None:
            feats = np.asarray(self.node_features, dtype=float)
            if feats.ndim == 1:
                feats = feats[:, None]
            if feats.shape[0] != self.n_nodes:
                raise GraphError(
                    f"feature rows ({feats.shape[0]}) != n_nodes ({self.n_nodes})"
                )
            self.node_features = feats
        if self.node_labels is not None:
            labels = np.asarray(self.node_labels, dtype=int)
            if labels.shape != (self.n_nodes,):
                raise GraphError("node_labels must have one entry per node")
            self.node_labels = labels

    @classmethod
    def from_edges(cls, n: int, edges, **kw) -> "Graph":
        """Build a graph, silently merging duplicate/reversed edges."""
        return cls(n, _canonical_edges(edges), **kw)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=int)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def neighbors(self) -> list[list[int]]:
        nb: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, j in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return nb

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())

    def features_or_uniform(self) -> np.ndarray:
        if self.node_features is None or self.node_features.shape[1] == 0:
            return np.ones((self.n_nodes, 1))
        return self.node_features

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges)
        return g

    def key(self) -> tuple:
        """Hashable topology fingerprint (node count + edge list)."""
        return (self.n_nodes, self.edges)

    def with_features(self, features) -> "Graph":
        return Graph(
            self.n_nodes, self.edges, features, self.node_labels, self.graph_label, self.positions
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            self.n_nodes == other.n_nodes
            and self.edges == other.edges
            and same(self.node_features, other.node_features)
            and same(self.node_labels, other.node_labels)
            and self.graph_label == other.graph_label
        )

    def to_dict(self) -> dict:
        d: dict = {"n": self.n_nodes, "edges": [list(e) for e in self.edges]}
        if self.node_features is not None:
            d["features"] = self.node_features.tolist()
        if self.node_labels is not None:
            d["labels"] = self.node_labels.tolist()
        if self.graph_label is not None:
            d["graph_label"] = self.graph_label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        return cls(
            d["n"],
            d["edges"],
            node_features=d.get("features"),
            node_labels=d.get("labels"),
            graph_label=d.get("graph_label"),
        )


def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph(n, list(itertools.combinations(range(n), 2)))


def disjoint_union(*graphs: Graph) -> Graph:
    edges, offset = [], 0
    for g in graphs:
        edges.extend((i + offset, j + offset) for i, j in g.edges)
        offset += g.n_nodes
    return Graph(offset, edges)


# ---------------------------------------------------------------- permutation


def _check_perm(perm, n: int) -> np.ndarray:
    p = np.asarray(perm, dtype=int)
    if p.shape != (n,) or sorted(p.tolist()) != list(range(n)):
        raise GraphError(f"not a permutation of 0..{n - 1}: {list(perm)}")
    return p


def permute_graph(g: Graph, perm) -> Graph:
    """Relabel node ``i`` as ``perm[i]``; features and labels move with their node."""
    p = _check_perm(perm, g.n_nodes)
    inv = np.argsort(p)
    feats = None if g.node_features is None else g.node_features[inv]
    labels = None if g.node_labels is None else g.node_labels[inv]
    pos = None if g.positions is None else g.positions[inv]
    return Graph(
        g.n_nodes,
        [(p[i], p[j]) for i, j in g.edges],
        feats,
        labels,
        g.graph_label,
        pos,
    )


def inverse_permutation(perm) -> np.ndarray:
    return np.argsort(np.asarray(perm, dtype=int))


# ------------------------------------------------------------------- 1-WL test


def wl_colors(graphs: Sequence[Graph], max_iters: int | None = None) -> list[np.ndarray]:
    """Joint 1-WL color refinement from uniform colors.

    Colors are shared across ``graphs`` so histograms are comparable. Stops
    when the partition of the disjoint union no longer refines.
    """
    nbs = [g.neighbors() for g in graphs]
    colors = [np.zeros(g.n_nodes, dtype=int) for g in graphs]
    n_classes = 1
    limit = max_iters if max_iters is not None else sum(g.n_nodes for g in graphs)
    for _ in range(limit):
        palette: dict = {}
        new = []
        for col, nb in zip(colors, nbs):
            sig = [
                (int(col[v]), tuple(sorted(int(col[u]) for u in nb[v])))
                for v in range(len(col))
            ]
            new.append(sig)
        for sig in sorted(set(s for sigs in new for s in sigs)):
            palette[sig] = len(palette)
        colors = [np.array([palette[s] for s in sigs], dtype=int) for sigs in new]
        if len(palette) == n_classes:
            break
        n_classes = len(palette)
    return colors


def wl_indistinguishable(g1: Graph, g2: Graph, max_iters: int | None = None) -> bool:
    c1, c2 = wl_colors([g1, g2], max_iters)
    return Counter(c1.tolist()) == Counter(c2.tolist())


def automorphism_orbits(g: Graph) -> list[list[int]]:
    """Node orbits under the automorphism group (exhaustive VF2 search)."""
    gx = g.to_networkx()
    parent = list(range(g.n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for iso in nx.algorithms.isomorphism.GraphMatcher(gx, gx).isomorphisms_iter():
        for a, b in iso.items():
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for v in range(g.n_nodes):
        groups.setdefault(find(v), []).append(v)
    return sorted(groups.values())


def is_isomorphic(g1: Graph, g2: Graph) -> bool:
    return nx.is_isomorphic(g1.to_networkx(), g2.to_networkx())


# --------------------------------------------------------------- covering graphs


@dataclass
class LiftSpec:
    base: Graph
    degree: int = 2
    seed: int | None = 0
    permutations: dict[tuple[int, int], Sequence[int]] | None = None


def random_lift(spec: LiftSpec) -> Graph:
    """k-fold cover of ``spec.base``.

    Copy ``a`` of base node ``u`` becomes node ``u * k + a``; base edge
    ``(u, v)`` becomes the matching ``{(u_a, v_perm[a])}``. Explicit
    permutations in ``spec.permutations`` win over random ones.
    """
    k = int(spec.degree)
    if k < 2:
        raise GraphError(f"lift degree must be >= 2, got {k}")
    base = spec.base
    rng = np.random.default_rng(spec.seed)
    fixed = {tuple(sorted(e)): p for e, p in (spec.permutations or {}).items()}
    edges = []
    for u, v in base.edges:
        perm = fixed.get((u, v))
        if perm is None:
            perm = rng.permutation(k)
        perm = _check_perm(perm, k)
        edges.extend((u * k + a, v * k + int(perm[a])) for a in range(k))
    return Graph(base.n_nodes * k, edges)


def project_lift(lift: Graph, k: int) -> Counter:
    """Edge multiset of the base obtained by collapsing each fiber."""
    return Counter(tuple(sorted((i // k, j // k))) for i, j in lift.edges)


def random_connected_graph(n: int, n_edges: int, rng: np.random.Generator) -> Graph:
    """Random spanning tree plus extra random edges (seeded)."""
    order = rng.permutation(n)
    edges = set()
    for idx in range(1, n):
        u = int(order[idx])
        v = int(order[rng.integers(idx)])
        edges.add((min(u, v), max(u, v)))
    free = [e for e in itertools.combinations(range(n), 2) if e not in edges]
    extra = max(0, n_edges - len(edges))
    for i in rng.choice(len(free), size=min(extra, len(free)), replace=False):
        edges.add(free[int(i)])
    return Graph(n, sorted(edges))


def graph_covers(
    n_graphs: int,
    base_nodes: int = 7,
    degree: int = 3,
    seed: int = 0,
    base: Graph | None = None,
    max_tries: int = 2000,
    base_edges: int | None = None,
) -> tuple[Graph, list[Graph]]:
    """Pairwise non-isomorphic connected lifts of one connected base graph.

    Every pair is 1-WL indistinguishable since all share the same base.
    A random base has ``base_edges`` edges (default ``base_nodes + 3``) and
    at least one triangle. Returns ``(base, lifts)``.
    """
    rng = np.random.default_rng(seed)
    if base is None:
        n_edges = base_nodes + 3 if base_edges is None else base_edges
        for _ in range(max_tries):
            base = random_connected_graph(base_nodes, n_edges, rng)
            if _has_triangle(base):
                break
    assert base is not None
    if not base.is_connected():
        raise GraphError("base graph must be connected")
    lifts: list[Graph] = []
    for _ in range(max_tries):
        if len(lifts) == n_graphs:
            break
        cand = random_lift(LiftSpec(base, degree, seed=int(rng.integers(2**63))))
        if not cand.is_connected():
            continue
        if any(is_isomorphic(cand, other) for other in lifts):
            continue
        lifts.append(cand)
    if len(lifts) < n_graphs:
        raise GraphError(f"found only {len(lifts)} non-isomorphic lifts")
    return base, lifts


def _has_triangle(g: Graph) -> bool:
    return sum(nx.triangles(g.to_networkx()).values()) > 0


# -------------------------------------------------------------------- lattices


@dataclass(frozen=True)
class LatticeSpec:
    """``rows x cols`` block of cells, or an explicit ``cells`` list of (i, j) cell indices."""

    kind: str
    rows: int = 1
    cols: int = 1
    cells: tuple[tuple[int, int], ...] | None = None

    def cell_list(self) -> list[tuple[int, int]]:
        if self.cells is not None:
            return [tuple(c) for c in self.cells]
        return [(i, j) for i in range(self.rows) for j in range(self.cols)]


def _cell(kind: str, i: int, j: int):
    """Nodes (as (row, col) grid coordinates) and edges of one lattice cell."""
    if kind == "square" or kind == "triangular":
        nodes = [(i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)]
        edges = [
            ((i, j), (i, j + 1)),
            ((i + 1, j), (i + 1, j + 1)),
            ((i, j), (i + 1, j)),
            ((i, j + 1), (i + 1, j + 1)),
        ]
        if kind == "triangular":
            edges.append(((i, j), (i + 1, j + 1)))
        return nodes, edges
    if kind == "honeycomb":
        # brick-wall embedding: rows of hexagons shifted by one column
        c0 = 2 * j + (i % 2)
        top = [(i, c) for c in range(c0, c0 + 3)]
        bot = [(i + 1, c) for c in range(c0, c0 + 3)]
        edges = [(top[k], top[k + 1]) for k in range(2)]
        edges += [(bot[k], bot[k + 1]) for k in range(2)]
        edges += [(top[0], bot[0]), (top[2], bot[2])]
        return top + bot, edges
    if kind == "kagome":
        # triangular 2x2 block with its (odd, odd) site removed
        r0, c0 = 2 * i, 2 * j
        nodes = [
            (r0 + a, c0 + b) for a in range(3) for b in range(3) if not (a == 1 and b == 1)
        ]
        present = set(nodes)
        edges = []
        for r, c in nodes:
            for dr, dc in ((0, 1), (1, 0), (1, 1)):
                q = (r + dr, c + dc)
                if q in present:
                    edges.append(((r, c), q))
        return nodes, edges
    raise GraphError(f"unknown lattice kind {kind!r}; expected one of {LATTICE_KINDS}")


def _lattice_topology(kind: str, cells):
    coords, edge_set = set(), set()
    for i, j in cells:
        nodes, edges = _cell(kind, i, j)
        coords.update(nodes)
        for a, b in edges:
            edge_set.add((min(a, b), max(a, b)))
    order = sorted(coords)
    index = {c: k for k, c in enumerate(order)}
    edges = [(index[a], index[b]) for a, b in edge_set]
    return order, Graph(len(order), edges, positions=np.array(order, dtype=float))


def lattice_graph(spec: LatticeSpec) -> Graph:
    """Lattice made of full cells, with antiferromagnetic node labels.

    Square and honeycomb lattices get their bipartite 2-coloring. Triangular
    and kagome labels tile the Ising ground state of a single cell that is
    periodic under shifts by two grid steps.
    """
    if spec.kind not in LATTICE_KINDS:
        raise GraphError(f"unknown lattice kind {spec.kind!r}; expected one of {LATTICE_KINDS}")
    cells = spec.cell_list()
    if not cells or min(spec.rows, spec.cols) < 1:
        raise GraphError("a lattice needs at least one cell")
    order, g = _lattice_topology(spec.kind, cells)
    if not g.is_connected():
        raise GraphError("cells do not form a connected patch")
    if spec.kind in ("square", "honeycomb"):
        labels = np.array([(r + c) % 2 for r, c in order])
    else:
        motif = _frustrated_motif(spec.kind)
        labels = np.array([motif[(r % 2, c % 2)] for r, c in order])
    g.node_labels = labels
    return g


def _periodic_cell(kind: str) -> tuple[list[tuple[int, int]], Graph]:
    """Quotient of the lattice by shifts of two grid steps: one site per
    (row % 2, col % 2) class, joined wherever lattice edges join the classes."""
    order, patch = _lattice_topology(kind, [(0, 0), (0, 1), (1, 0), (1, 1)])
    keys = sorted({(r % 2, c % 2) for r, c in order})
    index = {k: n for n, k in enumerate(keys)}
    edges = set()
    for i, j in patch.edges:
        a = index[(order[i][0] % 2, order[i][1] % 2)]
        b = index[(order[j][0] % 2, order[j][1] % 2)]
        if a != b:
            edges.add((min(a, b), max(a, b)))
    return keys, Graph(len(keys), sorted(edges))


def _frustrated_motif(kind: str) -> dict[tuple[int, int], int]:
    """Ising ground state of the periodic cell, first in basis order with site (0, 0) down."""
    from .quantum import ising_ground_states

    keys, cell = _periodic_cell(kind)
    _, minimizers = ising_ground_states(cell)
    for bits in sorted(minimizers, key=lambda s: int(s, 2)):
        motif = {key: int(bits[-1 - k]) for k, key in enumerate(keys)}
        if motif[(0, 0)] == 0:
            return motif
    raise GraphError(f"no ground state for the {kind} cell")


# ------------------------------------------------------------ spectral features


def laplacian(g: Graph) -> np.ndarray:
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def _sign_fix(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def laplacian_eigenmaps(g: Graph, k: int, tol: float = 1e-8, return_values: bool = False):
    """Lowest ``k`` unit-norm eigenvectors of ``D - A`` as an ``(n, k)`` matrix.

    Inside a degenerate eigenspace the basis is made canonical by
    Gram-Schmidt on the projected unit vectors ``P e_0, P e_1, ...``, then
    each vector gets its first nonzero entry positive and the block is sorted
    lexicographically.
    """
    n = g.n_nodes
    if k > n or k < 0:
        raise GraphError(f"k={k} must lie in [0, n_nodes={n}]")
    vals, vecs = np.linalg.eigh(laplacian(g))
    out_vals, out_vecs = [], []
    start = 0
    while start < n and len(out_vecs) < k:
        stop = start + 1
        while stop < n and vals[stop] - vals[start] < tol * max(1.0, abs(vals[start])) + tol:
            stop += 1
        block = vecs[:, start:stop]
        lam = float(vals[start:stop].mean())
        proj = block @ block.T
        basis: list[np.ndarray] = []
        for i in range(n):
            if len(basis) == block.shape[1]:
                break
            w = proj[:, i].copy()
            for b in basis:
                w -= (b @ w) * b
            norm = np.linalg.norm(w)
            if norm > 1e-6:
                basis.append(w / norm)
        basis = [_sign_fix(b) for b in basis]
        basis.sort(key=lambda b: tuple(np.round(b, 10)))
        out_vecs.extend(basis)
        out_vals.extend([lam] * len(basis))
        start = stop
    feats = np.array(out_vecs[:k]).T.reshape(n, k)
    if return_values:
        return feats, np.array(out_vals[:k])
    return feats
