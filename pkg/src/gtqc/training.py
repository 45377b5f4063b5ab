"""Optimizer, losses, the train/eval loop and the frozen random-parameter mode."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import GRADIENT_STRATEGIES, CorrelationCache, quantum_gradient
from .graphs import Graph
from .model import GTQCConfig, GTQCModel

LOSSES = ("cross_entropy", "mae", "mse")
MODES = ("full", "random-features")


class NonFiniteError(FloatingPointError):
    pass


class TrainingDiverged(FloatingPointError):
    """Raised on a non-finite loss; carries the model from the last finished epoch."""

    def __init__(self, message, last_good, history):
        super().__init__(message)
        self.last_good = last_good
        self.history = history


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    quantum_period: int = 10
    seed: int = 0
    loss: str | None = None  # defaults from the task
    mode: str = "full"
    quantum_grad: str = "auto"

    def __post_init__(self):
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay non-negative")
        if self.epochs < 0 or self.batch_size < 1 or self.quantum_period < 1:
            raise ValueError("epochs >= 0, batch_size >= 1, quantum_period >= 1 required")
        if self.loss is not None and self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.quantum_grad not in GRADIENT_STRATEGIES:
            raise ValueError(f"unknown gradient strategy {self.quantum_grad!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: AdamState, lr: float, wd: float = 0.0):
    """One bias-corrected Adam update with decoupled weight decay.

    Returns new parameter and state objects; the inputs are not modified.
    """
    for k, g in grads.items():
        if k not in params or np.shape(g) != np.shape(params[k]):
            raise ValueError(f"gradient {k!r} does not match a parameter")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {k!r}; step aborted")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            new_p[k] = p
            continue
        m = b1 * state.m.get(k, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(k, 0.0) + (1 - b2) * g * g
        step = (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + state.eps)
        new_p[k] = p - lr * step - lr * wd * p
        new_m[k], new_v[k] = m, v
    return new_p, AdamState(new_m, new_v, t, b1, b2, state.eps)


def split_dataset(dataset, seed: int = 0, ratios=(0.8, 0.1, 0.1)):
    """Seeded shuffle into train/val/test; val and test sizes are rounded,
    the remainder goes to train. Works on a Dataset or a plain list."""
    graphs = list(getattr(dataset, "graphs", dataset))
    n = len(graphs)
    if n < 10:
        raise ValueError(f"need at least 10 graphs to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_val, n_test = round(n * ratios[1]), round(n * ratios[2])
    n_train = n - n_val - n_test
    parts = [
        [graphs[i] for i in order[:n_train]],
        [graphs[i] for i in order[n_train : n_train + n_val]],
        [graphs[i] for i in order[n_train + n_val :]],
    ]
    if hasattr(dataset, "subset"):
        return tuple(dataset.subset(p) for p in parts)
    return tuple(parts)


# -- losses and targets ------------------------------------------------------


def default_loss(task: str) -> str:
    return "cross_entropy" if task == "classification" else "mae"


def _targets(model, batch):
    c = model.config
    graphs = batch.graphs
    if c.level == "graph":
        if c.task == "classification":
            return np.array([int(g.graph_label) for g in graphs]), None
        y = np.array([np.atleast_1d(np.asarray(g.graph_label, float)) for g in graphs])
        return y[:, None, :], None
    n = batch.mask.shape[1]
    if c.task == "classification":
        y = np.zeros((len(graphs), n), dtype=int)
        for b, g in enumerate(graphs):
            y[b, : g.n_nodes] = g.node_labels
        return y, batch.mask.astype(float)
    y = np.zeros((len(graphs), n, c.n_outputs))
    for b, g in enumerate(graphs):
        y[b, : g.n_nodes] = np.asarray(g.node_labels, float).reshape(g.n_nodes, -1)
    return y, batch.mask.astype(float)


def _loss(kind, out, y, w):
    if kind == "cross_entropy":
        return ad.cross_entropy(out, y, w)
    if kind == "mse":
        return ad.mean_squared_error(out, y, w)
    return ad.mean_absolute_error(out, y, w)


def _batches(graphs, size):
    return [graphs[i : i + size] for i in range(0, len(graphs), size)]


def _as_graphs(data) -> list[Graph]:
    return list(getattr(data, "graphs", data))


# -- evaluation --------------------------------------------------------------


def evaluate(model, data, cache: CorrelationCache | None = None, loss: str | None = None, batch_size=64):
    """Loss plus the task metric: misclassification ratio, or MAE and MSE.

    ``metric`` always holds the headline number (error ratio or MAE).
    """
    graphs = _as_graphs(data)
    if not graphs:
        raise ValueError("cannot evaluate an empty split")
    c = model.config
    loss = loss or default_loss(c.task)
    tot_loss = tot_w = 0.0
    wrong = count = 0.0
    abs_err = sq_err = 0.0
    for chunk in _batches(graphs, batch_size):
        batch = model.make_batch(chunk, cache)
        out, _ = model.build(ad.Tape(), batch)
        y, w = _targets(model, batch)
        weight = float(len(chunk) if w is None else w.sum())
        tot_loss += float(_loss(loss, out, y, w).value) * weight
        tot_w += weight
        if c.task == "classification":
            pred = out.value.argmax(axis=-1).reshape(y.shape)
            mask = np.ones(y.shape) if w is None else w
            wrong += float(((pred != y) * mask).sum())
            count += float(mask.sum())
        else:
            mask = np.ones(y.shape) if w is None else np.broadcast_to(w[..., None], y.shape)
            diff = (out.value - y) * mask
            abs_err += float(np.abs(diff).sum())
            sq_err += float((diff**2).sum())
            count += float(mask.sum())
    res = {"loss": tot_loss / tot_w}
    if c.task == "classification":
        res["misclassification"] = wrong / count
        res["accuracy"] = 1.0 - res["misclassification"]
        res["metric"] = res["misclassification"]
    else:
        res["mae"] = abs_err / count
        res["mse"] = sq_err / count
        res["metric"] = res["mae"]
    return res


# -- training ----------------------------------------------------------------


def _quantum_grads(model: GTQCModel, grads_c: dict, strategy: str) -> dict:
    """Chain the accumulated ``dL/dC`` per (graph, head) through ``dC/dtheta``."""
    out = {}
    for key, per_graph in grads_c.items():
        g_theta = np.zeros_like(model.theta[key])
        for g, dl_dc in per_graph:
            dc = quantum_gradient(g, model.config.kind, model.theta[key], strategy, model.config.J)
            g_theta += np.tensordot(dc, dl_dc, axes=3)
        out[key] = g_theta
    return out


def _refresh(model, cache, graphs):
    """Re-simulate every head once per distinct topology after a theta step,
    even for heads whose theta did not move."""
    if not isinstance(model, GTQCModel):
        return
    topologies = {}
    for g in graphs:
        topologies.setdefault(g.key(), g)
    c = model.config
    for g in topologies.values():
        for key in model.head_keys():
            cache.get(g, key, c.kind, model.theta[key], c.J, force=True)


def train(model, data, config: TrainConfig, val=None, cache: CorrelationCache | None = None):
    """Train in place-free fashion and return ``(model, history)``.

    Classical parameters (including gamma) step on every batch. On epochs
    that are multiples of ``quantum_period`` the correlation gradients are
    accumulated over the epoch and theta takes one Adam step at its end,
    after which cached correlations are rebuilt. ``history`` rows hold
    end-of-epoch evaluations of the train and validation graphs.
    """
    graphs = _as_graphs(data)
    val_graphs = _as_graphs(val) if val is not None else []
    if not graphs and config.epochs:
        raise ValueError("no training graphs")
    model = model.copy()
    loss_kind = config.loss or default_loss(model.config.task)
    if model.config.task == "classification" and loss_kind != "cross_entropy":
        raise ValueError("classification needs the cross_entropy loss")
    is_quantum = isinstance(model, GTQCModel)
    update_theta = is_quantum and config.mode == "full" and not model.frozen_theta
    if config.mode == "random-features" and is_quantum and not model.frozen_theta:
        raise ValueError("random-features mode needs a model from random_feature_mode()")
    cache = cache if cache is not None else CorrelationCache()
    state, q_state = AdamState(), AdamState()
    history: list[dict] = []
    last_good = model.copy()

    for epoch in range(1, config.epochs + 1):
        calls0 = cache.sim_calls
        quantum_epoch = update_theta and epoch % config.quantum_period == 0
        grads_c: dict = {k: [] for k in model.head_keys()} if quantum_epoch else {}
        batches = _batches(graphs, config.batch_size)
        for chunk in batches:
            batch = model.make_batch(chunk, cache)
            tape = ad.Tape()
            out, corr = model.build(tape, batch)
            y, w = _targets(model, batch)
            loss = _loss(loss_kind, out, y, w)
            if not math.isfinite(float(loss.value)):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}", last_good, history)
            grads = tape.backward(loss)
            cls_grads = {k: grads[k] for k in model.params}
            try:
                model.params, state = adam_step(model.params, cls_grads, state, config.lr, config.weight_decay)
            except NonFiniteError as e:
                raise TrainingDiverged(str(e), last_good, history) from e
            for key in grads_c:
                dc = grads[f"C.{key}"] / len(batches)
                for b, g in enumerate(chunk):
                    grads_c[key].append((g, dc[b, : g.n_nodes, : g.n_nodes]))
        if quantum_epoch:
            q_grads = _quantum_grads(model, grads_c, config.quantum_grad)
            try:
                model.theta, q_state = adam_step(model.theta, q_grads, q_state, config.lr)
            except NonFiniteError as e:
                raise TrainingDiverged(str(e), last_good, history) from e
            _refresh(model, cache, graphs + val_graphs)
        tr = evaluate(model, graphs, cache, loss_kind)
        row = {
            "epoch": epoch,
            "train_loss": tr["loss"],
            "val_loss": None,
            "train_metric": tr["metric"],
            "val_metric": None,
        }
        if val_graphs:
            va = evaluate(model, val_graphs, cache, loss_kind)
            row["val_loss"], row["val_metric"] = va["loss"], va["metric"]
        row["sim_calls"] = cache.sim_calls - calls0
        if not math.isfinite(row["train_loss"]):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", last_good, history)
        history.append(row)
        last_good = model.copy()
    return model, history


def random_feature_mode(model: GTQCModel, n_random_heads: int, seed: int = 0, head_dim=None) -> GTQCModel:
    """Fresh model with ``n_random_heads`` heads per layer whose theta are drawn
    once from U[0, 2pi) and never trained; row softmax is switched on."""
    if n_random_heads < 1:
        raise ValueError("n_random_heads must be >= 1")
    cfg = asdict(model.config)
    cfg.update(n_heads=n_random_heads, softmax=True, seed=seed)
    cfg["head_dim"] = head_dim if head_dim is not None else max(1, cfg["hidden"] // n_random_heads)
    fresh = GTQCModel.init(GTQCConfig(**cfg))
    rng = np.random.default_rng([seed, 2])
    theta = {k: rng.uniform(0.0, 2 * np.pi, size=2 * fresh.config.depth + 1) for k in fresh.head_keys()}
    return GTQCModel(fresh.config, fresh.params, theta, frozen_theta=True)

