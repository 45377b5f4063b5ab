"""Attention matrices from two-body correlations, and their derivatives
with respect to the quantum parameters."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph
from .quantum import (
    GraphHamiltonian,
    QuantumParams,
    measure_correlations,
    prepare_graph_state,
)

GRADIENT_STRATEGIES = ("trig", "finite_diff", "auto")


class UnsupportedGradientError(ValueError):
    pass


@dataclass
class AttentionHead:
    qp: QuantumParams
    gamma: np.ndarray
    softmax_rows: bool = False
    kind: str = "ising"
    J: float = 1.0

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.gamma.shape != (9,):
            raise ValueError(f"gamma must have length 9, got shape {self.gamma.shape}")


def softmax_rows(a: np.ndarray) -> np.ndarray:
    z = a - a.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def attention_from_correlations(c: np.ndarray, gamma, softmax: bool = False) -> np.ndarray:
    """``A_ij = gamma . C_ij``, optionally softmax-normalized along each row
    (the zero diagonal takes part in the normalization)."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (9,):
        raise ValueError(f"gamma must have length 9, got shape {gamma.shape}")
    a = c @ gamma
    return softmax_rows(a) if softmax else a


def correlation_tensor(g: Graph, kind: str, qp, J: float = 1.0, hamiltonian=None) -> np.ndarray:
    psi = prepare_graph_state(g, kind, qp, J, hamiltonian=hamiltonian)
    return measure_correlations(psi)


def head_attention(g: Graph, head: AttentionHead) -> np.ndarray:
    c = correlation_tensor(g, head.kind, head.qp, head.J)
    return attention_from_correlations(c, head.gamma, head.softmax_rows)


def trig_frequencies(g: Graph, kind: str, index: int) -> np.ndarray:
    """Eigenvalue gaps of the generator behind parameter ``index``.

    Mixing angles: sum of N X's has spectrum {-N, ..., N} in steps of 2.
    Ising times: ZZ energies share the parity of |E|, so gaps are even too.
    """
    if QuantumParams.is_mixing(index):
        return 2.0 * np.arange(g.n_nodes + 1)
    if kind == "ising":
        return 2.0 * np.arange(g.n_edges + 1)
    raise UnsupportedGradientError(
        f"no trigonometric rule for the {kind!r} evolution time (parameter {index})"
    )


def _trig_derivative(evaluate, x0: float, freqs: np.ndarray, cond_limit: float = 1e8):
    """Derivative at ``x0`` of a trigonometric polynomial with the given
    non-negative frequencies, reconstructed from ``2R+1`` equally spaced samples
    over one period."""
    nonzero = freqs[freqs > 0]
    n_pts = 2 * nonzero.size + 1
    period = 2 * np.pi / np.gcd.reduce(nonzero.astype(int)) if nonzero.size else 2 * np.pi
    shifts = period * np.arange(n_pts) / n_pts
    design = np.hstack(
        [
            np.ones((n_pts, 1)),
            np.cos(np.outer(shifts, nonzero)),
            np.sin(np.outer(shifts, nonzero)),
        ]
    )
    if np.linalg.cond(design) > cond_limit:
        return None
    samples = np.stack([evaluate(x0 + s) for s in shifts])
    flat = samples.reshape(n_pts, -1)
    coef, *_ = np.linalg.lstsq(design, flat, rcond=None)
    sin_coef = coef[1 + nonzero.size :]
    return (nonzero @ sin_coef).reshape(samples.shape[1:])


def quantum_gradient(
    g: Graph,
    kind: str,
    qp,
    strategy: str = "auto",
    J: float = 1.0,
    step: float = 1e-5,
    indices=None,
) -> np.ndarray:
    """``dC/dtheta_k`` for every quantum parameter, shape ``(2p+1, N, N, 9)``.

    ``trig`` reconstructs each correlator as a trigonometric polynomial in one
    parameter (mixing angles always, evolution times only for Ising);
    ``finite_diff`` uses central differences; ``auto`` picks ``trig`` where it
    applies. Rows not listed in ``indices`` are left at zero.
    """
    if strategy not in GRADIENT_STRATEGIES:
        raise ValueError(f"unknown gradient strategy {strategy!r}")
    theta = QuantumParams(qp if not isinstance(qp, QuantumParams) else qp.values).values
    h = GraphHamiltonian(kind, g, J)
    n = g.n_nodes
    out = np.zeros((theta.size, n, n, 9))

    def at(index, value):
        shifted = theta.copy()
        shifted[index] = value
        return correlation_tensor(g, kind, shifted, J, hamiltonian=h)

    for k in range(theta.size) if indices is None else indices:
        use_trig = strategy == "trig" or (
            strategy == "auto" and (QuantumParams.is_mixing(k) or h.kind == "ising")
        )
        if use_trig:
            freqs = trig_frequencies(g, h.kind, k)
            deriv = _trig_derivative(lambda x, k=k: at(k, x), theta[k], freqs)
            if deriv is not None:
                out[k] = deriv
                continue
            warnings.warn(
                f"ill-conditioned trigonometric system for parameter {k}; "
                "falling back to finite differences",
                RuntimeWarning,
            )
        out[k] = (at(k, theta[k] + step) - at(k, theta[k] - step)) / (2 * step)
    return out


@dataclass
class CorrelationCache:
    """Latest correlation tensor per (graph, head); recomputed only when the
    head's quantum parameters change. ``sim_calls`` counts simulations."""

    sim_calls: int = 0
    _store: dict = field(default_factory=dict, repr=False)

    def get(self, g: Graph, head_key, kind: str, theta: np.ndarray, J: float = 1.0, force: bool = False) -> np.ndarray:
        key = (g.key(), head_key)
        stamp = (kind, float(J), np.asarray(theta, dtype=float).tobytes())
        hit = self._store.get(key)
        if hit is not None and hit[0] == stamp and not force:
            return hit[1]
        c = correlation_tensor(g, kind, np.asarray(theta, dtype=float), J)
        self.sim_calls += 1
        self._store[key] = (stamp, c)
        return c

    def clear(self) -> None:
        self._store.clear()

    def __len__(self) -> int:
        return len(self._store)
