"""GTQC and GCN models on padded graph batches.

Graphs in a batch are padded to the largest node count. Padded rows never
leak into real ones: their attention and adjacency columns are zero (or
masked out of the softmax) and pooling and node losses ignore them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .attention import AttentionHead, CorrelationCache, head_attention
from .graphs import Graph
from .quantum import HAMILTONIAN_KINDS, QuantumParams, check_size

CHECKPOINT_FORMAT = "gtqc-checkpoint"
CHECKPOINT_VERSION = 1
TASKS = ("classification", "regression")
LEVELS = ("graph", "node")


class ShapeError(ValueError):
    pass


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


def _check_common(task, level, n_outputs):
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    if n_outputs < 1:
        raise ValueError("n_outputs must be >= 1")


@dataclass
class GTQCConfig:
    in_dim: int = 1
    hidden: int = 128
    head_dim: int | None = None  # defaults to hidden // n_heads
    n_layers: int = 2
    n_heads: int = 1
    kind: str = "ising"
    depth: int = 1
    J: float = 1.0
    softmax: bool = False
    task: str = "classification"
    n_outputs: int = 2
    level: str = "graph"
    seed: int = 0

    def __post_init__(self):
        _check_common(self.task, self.level, self.n_outputs)
        if self.kind not in HAMILTONIAN_KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.n_layers < 1 or self.n_heads < 1 or self.depth < 0:
            raise ValueError("n_layers and n_heads must be >= 1, depth >= 0")
        if self.head_dim is None:
            self.head_dim = max(1, self.hidden // self.n_heads)

    def layer_dims(self) -> list[int]:
        """Input width of each layer; the last entry is the readout width."""
        width = self.n_heads * self.head_dim
        return [self.hidden] + [width] * self.n_layers


@dataclass
class GCNConfig:
    in_dim: int = 1
    hidden: int = 50
    n_layers: int = 6
    task: str = "classification"
    n_outputs: int = 2
    level: str = "graph"
    seed: int = 0

    def __post_init__(self):
        _check_common(self.task, self.level, self.n_outputs)
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")


@dataclass
class Batch:
    graphs: list[Graph]
    x: np.ndarray  # (B, n, d_in)
    mask: np.ndarray  # (B, n) bool
    extras: dict = field(default_factory=dict)

    @property
    def sizes(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    def pool_matrix(self) -> np.ndarray:
        return (self.mask / self.sizes[:, None])[:, None, :]


def pad_features(graphs: list[Graph], in_dim: int) -> tuple[np.ndarray, np.ndarray]:
    n = max(g.n_nodes for g in graphs)
    x = np.zeros((len(graphs), n, in_dim))
    mask = np.zeros((len(graphs), n), dtype=bool)
    for b, g in enumerate(graphs):
        f = g.features_or_uniform()
        if f.shape[1] != in_dim:
            raise ShapeError(f"graph {b} has {f.shape[1]} features, model expects {in_dim}")
        x[b, : g.n_nodes] = f
        mask[b, : g.n_nodes] = True
    return x, mask


def normalized_adjacency(g: Graph) -> np.ndarray:
    a = g.adjacency() + np.eye(g.n_nodes)
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d[:, None] * d[None, :]


def _readout(tape_h, batch: Batch, params, level):
    if level == "graph":
        pooled = ad.matmul(batch.pool_matrix(), tape_h)  # (B, 1, d)
        return pooled @ params["out.W"] + params["out.b"]
    return tape_h @ params["out.W"] + params["out.b"]


class _Base:
    kind_name = ""

    def __init__(self, config, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def leaves(self, tape: ad.Tape) -> dict[str, ad.Var]:
        return {k: tape.leaf(v, name=k) for k, v in self.params.items()}

    def make_batch(self, graphs: list[Graph], cache: CorrelationCache | None = None) -> Batch:
        for g in graphs:
            check_size(g.n_nodes)
        x, mask = pad_features(graphs, self.config.in_dim)
        return Batch(graphs, x, mask, self._extras(graphs, x.shape[1], cache))

    def predict(self, graphs: list[Graph], cache: CorrelationCache | None = None) -> list[np.ndarray]:
        """Raw outputs per graph: ``(k,)`` for graph tasks, ``(n, k)`` for node tasks."""
        batch = self.make_batch(graphs, cache)
        out, _ = self.build(ad.Tape(), batch)
        if self.config.level == "graph":
            return [out.value[b, 0] for b in range(len(graphs))]
        return [out.value[b, : g.n_nodes] for b, g in enumerate(graphs)]


class GTQCModel(_Base):
    kind_name = "gtqc"

    def __init__(self, config: GTQCConfig, params, theta: dict[str, np.ndarray], frozen_theta=False):
        super().__init__(config, params)
        self.theta = theta
        self.frozen_theta = frozen_theta

    @staticmethod
    def head_key(layer: int, head: int) -> str:
        return f"L{layer}.H{head}"

    def head_keys(self) -> list[str]:
        c = self.config
        return [self.head_key(l, h) for l in range(c.n_layers) for h in range(c.n_heads)]

    @classmethod
    def init(cls, config: GTQCConfig) -> "GTQCModel":
        rng = np.random.default_rng(config.seed)
        p: dict[str, np.ndarray] = {
            "enc.W": glorot(rng, config.in_dim, config.hidden),
            "enc.b": np.zeros(config.hidden),
        }
        dims = config.layer_dims()
        for l in range(config.n_layers):
            for h in range(config.n_heads):
                key = cls.head_key(l, h)
                p[f"{key}.W"] = glorot(rng, 2 * dims[l], config.head_dim)
                p[f"{key}.gamma"] = glorot(rng, 9, 1, shape=(9,))
        p["out.W"] = glorot(rng, dims[-1], config.n_outputs)
        p["out.b"] = np.zeros(config.n_outputs)
        # quantum parameters come from their own stream so classical shapes
        # can change without reshuffling them
        qrng = np.random.default_rng([config.seed, 1])
        theta = {
            cls.head_key(l, h): QuantumParams.random(config.depth, qrng).values
            for l in range(config.n_layers)
            for h in range(config.n_heads)
        }
        return cls(config, p, theta)

    def copy(self) -> "GTQCModel":
        return GTQCModel(
            GTQCConfig(**asdict(self.config)),
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.theta.items()},
            self.frozen_theta,
        )

    def heads(self, layer: int) -> list[AttentionHead]:
        c = self.config
        return [
            AttentionHead(
                QuantumParams(self.theta[self.head_key(layer, h)]),
                self.params[f"{self.head_key(layer, h)}.gamma"],
                c.softmax,
                c.kind,
                c.J,
            )
            for h in range(c.n_heads)
        ]

    def _extras(self, graphs, n, cache):
        cache = cache if cache is not None else CorrelationCache()
        out = {}
        for key in self.head_keys():
            c = np.zeros((len(graphs), n, n, 9))
            for b, g in enumerate(graphs):
                c[b, : g.n_nodes, : g.n_nodes] = cache.get(
                    g, key, self.config.kind, self.theta[key], self.config.J
                )
            out[key] = c
        return out

    def build(self, tape: ad.Tape, batch: Batch):
        """Record the forward pass. Returns the output and the correlation
        leaves (named ``C.<head key>``) so the loss can be chained to theta."""
        c = self.config
        p = self.leaves(tape)
        corr = {k: tape.leaf(batch.extras[k], name=f"C.{k}") for k in self.head_keys()}
        col_mask = batch.mask[:, None, :]
        h = ad.matmul(batch.x, p["enc.W"]) + p["enc.b"]
        for l in range(c.n_layers):
            outs = []
            for hd in range(c.n_heads):
                key = self.head_key(l, hd)
                a = ad.matmul(corr[key], p[f"{key}.gamma"])
                if c.softmax:
                    a = ad.softmax(a, col_mask)
                z = ad.concat([ad.matmul(a, h), h]) @ p[f"{key}.W"]
                outs.append(ad.relu(z))
            h = outs[0] if len(outs) == 1 else ad.concat(outs)
        return _readout(h, batch, p, c.level), corr


class GCNModel(_Base):
    kind_name = "gcn"

    @classmethod
    def init(cls, config: GCNConfig) -> "GCNModel":
        rng = np.random.default_rng(config.seed)
        p = {}
        d = config.in_dim
        for l in range(config.n_layers):
            p[f"gcn{l}.W"] = glorot(rng, d, config.hidden)
            p[f"gcn{l}.b"] = np.zeros(config.hidden)
            d = config.hidden
        p["out.W"] = glorot(rng, d, config.n_outputs)
        p["out.b"] = np.zeros(config.n_outputs)
        return cls(config, p)

    def copy(self) -> "GCNModel":
        return GCNModel(GCNConfig(**asdict(self.config)), {k: v.copy() for k, v in self.params.items()})

    def _extras(self, graphs, n, cache):
        adj = np.zeros((len(graphs), n, n))
        for b, g in enumerate(graphs):
            adj[b, : g.n_nodes, : g.n_nodes] = normalized_adjacency(g)
        return {"adj": adj}

    def build(self, tape: ad.Tape, batch: Batch):
        p = self.leaves(tape)
        adj = batch.extras["adj"]
        h = adj @ batch.x  # constant first aggregation
        for l in range(self.config.n_layers):
            if l:
                h = ad.matmul(adj, h)
            h = ad.relu(ad.matmul(h, p[f"gcn{l}.W"]) + p[f"gcn{l}.b"])
        return _readout(h, batch, p, self.config.level), {}


# -- plain array primitives ------------------------------------------------


def layer_forward(h: np.ndarray, a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``ReLU((A H || H) W)`` for one head."""
    h, a, w = np.asarray(h, float), np.asarray(a, float), np.asarray(w, float)
    n, d = h.shape
    if a.shape != (n, n) or w.shape[0] != 2 * d:
        raise ShapeError(f"incompatible shapes H{h.shape} A{a.shape} W{w.shape}")
    return np.maximum(np.hstack([a @ h, h]) @ w, 0.0)


@dataclass
class GTQCLayer:
    heads: list[AttentionHead]
    weights: list[np.ndarray]

    def __post_init__(self):
        if not self.heads or len(self.heads) != len(self.weights):
            raise ShapeError("a layer needs one weight matrix per head and at least one head")
        if len({w.shape[0] for w in self.weights}) != 1:
            raise ShapeError("all heads must share the input width")


def multi_head_forward(h: np.ndarray, layer: GTQCLayer, g: Graph) -> np.ndarray:
    return np.hstack([layer_forward(h, head_attention(g, hd), w) for hd, w in zip(layer.heads, layer.weights)])


def model_forward(g: Graph, model: GTQCModel, cache: CorrelationCache | None = None) -> np.ndarray:
    return model.predict([g], cache)[0]


def gcn_baseline_forward(g: Graph, model: GCNModel) -> np.ndarray:
    return model.predict([g])[0]


def backward(tape: ad.Tape, loss: ad.Var) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss for every named leaf on ``tape``."""
    return tape.backward(loss)


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(model: GTQCModel | GCNModel, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": model.kind_name,
        "config": asdict(model.config),
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in model.params.items()},
    }
    if isinstance(model, GTQCModel):
        doc["theta"] = {k: v.tolist() for k, v in model.theta.items()}
        doc["frozen_theta"] = model.frozen_theta
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_checkpoint(path) -> GTQCModel | GCNModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    params = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc["params"].items()}
    if doc["model"] == "gtqc":
        theta = {k: np.array(v, dtype=float) for k, v in doc["theta"].items()}
        return GTQCModel(GTQCConfig(**doc["config"]), params, theta, doc.get("frozen_theta", False))
    if doc["model"] == "gcn":
        return GCNModel(GCNConfig(**doc["config"]), params)
    raise ValueError(f"unknown model type {doc['model']!r}")
