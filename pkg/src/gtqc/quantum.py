"""Exact statevector simulation of graph Hamiltonians.

Basis index ``b`` encodes qubit ``k`` in bit ``k`` (qubit 0 is the rightmost
tensor factor). Bitstrings are printed with qubit ``N-1`` first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from . import _kernels
from .graphs import Graph

MAX_QUBITS = 24
NORM_TOL = 1e-10
HAMILTONIAN_KINDS = ("ising", "xy", "xxz")
CORRELATION_LABELS = ("ZZ", "XX", "YY", "XiZj", "XiYj", "YiZj", "XjZi", "XjYi", "YjZi")
# C_ji is C_ij with the i-first and j-first cross terms exchanged
SWAP_COMPONENTS = np.array([0, 1, 2, 6, 7, 8, 3, 4, 5])


class QubitLimitError(ValueError):
    pass


class LanczosError(RuntimeError):
    pass


class BrokenStateError(RuntimeError):
    pass


def check_size(n: int) -> None:
    if n > MAX_QUBITS:
        raise QubitLimitError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")


def n_qubits_of(psi: np.ndarray) -> int:
    n = int(psi.shape[0]).bit_length() - 1
    if psi.ndim != 1 or 1 << n != psi.shape[0]:
        raise ValueError(f"state length {psi.shape} is not a power of two")
    return n


def zero_state(n: int) -> np.ndarray:
    check_size(n)
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def basis_state(bits: str) -> np.ndarray:
    psi = np.zeros(1 << len(bits), dtype=np.complex128)
    psi[int(bits, 2)] = 1.0
    return psi


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


# ------------------------------------------------------------- Pauli strings


@dataclass(frozen=True)
class PauliString:
    """Tensor product of X/Y/Z on selected qubits, identity elsewhere."""

    ops: tuple[tuple[int, str], ...]
    n_qubits: int

    def __init__(self, ops, n_qubits: int):
        items = sorted(dict(ops).items())
        for q, p in items:
            if p not in "XYZ" or len(p) != 1:
                raise ValueError(f"unknown Pauli {p!r}")
            if not 0 <= q < n_qubits:
                raise IndexError(f"qubit {q} out of range for {n_qubits} qubits")
        object.__setattr__(self, "ops", tuple(items))
        object.__setattr__(self, "n_qubits", int(n_qubits))

    @classmethod
    def parse(cls, label: str, n_qubits: int) -> "PauliString":
        """``"X2Y1"`` -> X on qubit 2, Y on qubit 1."""
        ops, k = {}, 0
        while k < len(label):
            p = label[k]
            k += 1
            start = k
            while k < len(label) and label[k].isdigit():
                k += 1
            ops[int(label[start:k])] = p
        return cls(ops, n_qubits)

    @cached_property
    def masks(self) -> tuple[int, int, int]:
        x = z = ny = 0
        for q, p in self.ops:
            if p in "XY":
                x |= 1 << q
            if p in "ZY":
                z |= 1 << q
            ny += p == "Y"
        return x, z, ny

    @property
    def phase(self) -> complex:
        # Y = i X Z
        return 1j ** (self.masks[2] % 4)


def apply_pauli_string(psi: np.ndarray, ps: PauliString, coeff: complex = 1.0) -> np.ndarray:
    """Return ``coeff * P |psi>`` without forming any dense operator."""
    if n_qubits_of(psi) != ps.n_qubits:
        raise ValueError("state and Pauli string sizes differ")
    out = np.zeros_like(psi, dtype=np.complex128)
    x, z, _ = ps.masks
    _kernels.pauli_accumulate(np.asarray(psi, np.complex128), out, x, z, coeff * ps.phase)
    return out


def expectation(psi: np.ndarray, ps: PauliString, tol: float = 1e-12) -> float:
    if n_qubits_of(psi) != ps.n_qubits:
        raise ValueError("state and Pauli string sizes differ")
    x, z, _ = ps.masks
    val = ps.phase * _kernels.pauli_expect(np.asarray(psi, np.complex128), x, z)
    if abs(val.imag) > tol:
        raise BrokenStateError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


# ---------------------------------------------------------- graph Hamiltonians


@dataclass
class GraphHamiltonian:
    """Ising (ZZ), XY (XX + YY) or XXZ (XX + YY + J ZZ) couplings on graph edges."""

    kind: str
    graph: Graph
    J: float = 1.0
    _diag: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in HAMILTONIAN_KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.kind == "xxz" and not self.J > 0:
            raise ValueError("XXZ coupling J must be positive")
        check_size(self.graph.n_nodes)

    @property
    def n_qubits(self) -> int:
        return self.graph.n_nodes

    @property
    def terms(self) -> list[tuple[float, PauliString]]:
        n = self.n_qubits
        out = []
        for i, j in self.graph.edges:
            if self.kind in ("xy", "xxz"):
                out.append((1.0, PauliString({i: "X", j: "X"}, n)))
                out.append((1.0, PauliString({i: "Y", j: "Y"}, n)))
            if self.kind == "ising":
                out.append((1.0, PauliString({i: "Z", j: "Z"}, n)))
            elif self.kind == "xxz":
                out.append((self.J, PauliString({i: "Z", j: "Z"}, n)))
        return out

    @property
    def is_diagonal(self) -> bool:
        return self.kind == "ising"

    def ising_diagonal(self) -> np.ndarray:
        """Integer ZZ energies of all basis states (cached)."""
        if self._diag is None:
            e = np.array(self.graph.edges, dtype=np.int64).reshape(-1, 2)
            self._diag = _kernels.ising_energies(self.n_qubits, e[:, 0].copy(), e[:, 1].copy())
        return self._diag

    def apply(self, psi: np.ndarray) -> np.ndarray:
        if self.is_diagonal:
            return self.ising_diagonal() * psi
        out = np.zeros_like(psi, dtype=np.complex128)
        for coeff, ps in self.terms:
            x, z, _ = ps.masks
            _kernels.pauli_accumulate(psi, out, x, z, coeff * ps.phase)
        return out

    def norm_bound(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))


# ----------------------------------------------------------------- evolution


def _check_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    check_size(n_qubits_of(psi))
    return psi


def evolve_mixing(psi: np.ndarray, theta: float) -> np.ndarray:
    """``exp(-i theta sum_k X_k) |psi>``, one exact rotation per qubit."""
    out = _check_state(psi).copy()
    if theta != 0.0:
        _kernels.rx_all(out, n_qubits_of(out), math.cos(theta), math.sin(theta))
    return out


def _krylov_step(apply_h, v, dt, tol_rate, m_max):
    """One Lanczos step of ``exp(-i h H) v`` with ``|h| <= |dt|``.

    Accepts the step once the a-posteriori error ``beta_m |y_m|`` is below
    ``tol_rate * |h|``. Returns ``(w, h)``.
    """
    beta0 = np.linalg.norm(v)
    basis = [v / beta0]
    alpha: list[float] = []
    beta: list[float] = []
    for m in range(1, m_max + 1):
        w = apply_h(basis[-1])
        alpha.append(float(np.vdot(basis[-1], w).real))
        # two passes of full reorthogonalization keep the basis orthonormal
        for _ in range(2):
            for q in basis:
                w -= np.vdot(q, w) * q
        b = float(np.linalg.norm(w))
        beta.append(b)
        lam, vec = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta[:-1]))
        h = dt
        y = vec @ (np.exp(-1j * h * lam) * vec[0])
        if b < 1e-12:
            return beta0 * _combine(basis, y), h
        if b * abs(y[-1]) <= tol_rate * abs(h):
            return beta0 * _combine(basis, y), h
        if m == m_max:
            for _ in range(60):
                h *= 0.5
                y = vec @ (np.exp(-1j * h * lam) * vec[0])
                if b * abs(y[-1]) <= tol_rate * abs(h):
                    return beta0 * _combine(basis, y), h
            raise LanczosError(f"no convergence within Krylov dimension {m_max}")
        basis.append(w / b)
    raise LanczosError("unreachable")


def _combine(basis, y):
    out = np.zeros_like(basis[0])
    for k, q in enumerate(basis):
        out += y[k] * q
    return out


def expm_krylov(apply_h, psi: np.ndarray, t: float, tol: float = 1e-10, m_max: int = 40):
    """``exp(-i t H) psi`` by restarted Lanczos with adaptive substeps."""
    if t == 0.0 or not np.any(psi):
        return psi.copy()
    tol_rate = tol / abs(t)
    v = psi.copy()
    done = 0.0
    for _ in range(10000):
        remaining = t - done
        if abs(remaining) <= 1e-14 * abs(t):
            return v
        v, h = _krylov_step(apply_h, v, remaining, tol_rate, m_max)
        done += h
    raise LanczosError("too many Lanczos substeps")


def dense_hamiltonian(h: GraphHamiltonian) -> np.ndarray:
    """Dense matrix by applying ``h`` to every basis vector (small N only)."""
    dim = 1 << h.n_qubits
    mat = np.zeros((dim, dim), dtype=np.complex128)
    for b in range(dim):
        e = np.zeros(dim, dtype=np.complex128)
        e[b] = 1.0
        mat[:, b] = h.apply(e)
    return mat


def evolve_graph(
    psi: np.ndarray,
    h: GraphHamiltonian,
    t: float,
    tol: float = 1e-10,
    m_max: int = 40,
) -> np.ndarray:
    """``exp(-i t H_G) |psi>``.

    Ising: exact diagonal phases. XY/XXZ: Lanczos; if it fails to converge on
    at most 10 qubits, dense diagonalization is used instead.
    """
    psi = _check_state(psi)
    if n_qubits_of(psi) != h.n_qubits:
        raise ValueError("state and Hamiltonian sizes differ")
    if t == 0.0:
        return psi.copy()
    if h.is_diagonal:
        return np.exp(-1j * t * h.ising_diagonal()) * psi
    try:
        return expm_krylov(h.apply, psi, t, tol, m_max)
    except LanczosError:
        if h.n_qubits > 10:
            raise
        lam, vec = np.linalg.eigh(dense_hamiltonian(h))
        return vec @ (np.exp(-1j * t * lam) * (vec.conj().T @ psi))


# ------------------------------------------------------- layered graph states


@dataclass
class QuantumParams:
    """``(theta_0, t_1, theta_1, ..., t_p, theta_p)``: mixing angles at even
    positions, graph evolution times at odd positions."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size % 2 != 1:
            raise ValueError("quantum parameter vector must have odd length 2p+1")

    @property
    def depth(self) -> int:
        return (self.values.size - 1) // 2

    @classmethod
    def zeros(cls, depth: int) -> "QuantumParams":
        return cls(np.zeros(2 * depth + 1))

    @classmethod
    def random(cls, depth: int, rng: np.random.Generator) -> "QuantumParams":
        return cls(rng.uniform(0.0, 2 * np.pi, size=2 * depth + 1))

    @staticmethod
    def is_mixing(index: int) -> bool:
        return index % 2 == 0


def prepare_graph_state(
    g: Graph, kind: str, qp: QuantumParams | np.ndarray, J: float = 1.0,
    hamiltonian: GraphHamiltonian | None = None,
) -> np.ndarray:
    """Layered state ``prod_k [e^{-i H_M theta_k} e^{-i H_G t_k}] e^{-i H_M theta_0} |0...0>``.

    The product is applied rightmost factor first: after the ``theta_0``
    layer comes ``(t_p, theta_p)``, then ``(t_{p-1}, theta_{p-1})``, down
    to ``(t_1, theta_1)``.
    """
    check_size(g.n_nodes)
    if not isinstance(qp, QuantumParams):
        qp = QuantumParams(qp)
    h = hamiltonian if hamiltonian is not None else GraphHamiltonian(kind, g, J)
    theta = qp.values
    psi = evolve_mixing(zero_state(g.n_nodes), theta[0])
    for k in range(qp.depth, 0, -1):
        psi = evolve_graph(psi, h, theta[2 * k - 1])
        psi = evolve_mixing(psi, theta[2 * k])
    return psi


# -------------------------------------------------------------- measurements

_I2 = np.eye(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0, -1.0]).astype(complex)
# operators on (qubit i, qubit j), in CORRELATION_LABELS order
_PAIR_OPS = np.array(
    [
        np.kron(_Z, _Z),
        np.kron(_X, _X),
        np.kron(_Y, _Y),
        np.kron(_X, _Z),
        np.kron(_X, _Y),
        np.kron(_Y, _Z),
        np.kron(_Z, _X),
        np.kron(_Y, _X),
        np.kron(_Z, _Y),
    ]
)


def measure_correlations(psi: np.ndarray) -> np.ndarray:
    """All two-body correlators as an ``(N, N, 9)`` tensor with zero diagonal."""
    psi = _check_state(psi)
    n = n_qubits_of(psi)
    out = np.zeros((n, n, 9))
    if n < 2:
        return out
    rho = _kernels.pair_density_matrices(psi, n)
    iu, ju = np.triu_indices(n, 1)
    vals = np.einsum("cxy,pyx->pc", _PAIR_OPS, rho[iu, ju]).real
    out[iu, ju] = vals
    out[ju, iu] = vals[:, SWAP_COMPONENTS]
    return out


def ising_ground_states(g: Graph) -> tuple[int, list[str]]:
    """Minimum of ``sum_edges s_i s_j`` over all 2^N spin assignments and its minimizers."""
    check_size(g.n_nodes)
    energies = GraphHamiltonian("ising", g).ising_diagonal()
    emin = int(energies.min())
    idx = np.flatnonzero(energies == emin)
    return emin, [bitstring(int(b), g.n_nodes) for b in idx]


def sector_states(n: int, weight: int) -> np.ndarray:
    """Basis indices of Hamming weight ``weight``, ascending."""
    return np.array(
        sorted(sum(1 << q for q in c) for c in _combinations(n, weight)), dtype=np.int64
    )


def _combinations(n, k):
    from itertools import combinations

    return combinations(range(n), k)


def hardcore_walk_graph(g: Graph, n: int) -> tuple[Graph, np.ndarray]:
    """Graph over weight-``n`` basis states joined by one XY hop along an edge.

    Returns the graph and the basis index of each of its vertices.
    """
    N = g.n_nodes
    if not 0 < n < N:
        raise ValueError(f"occupation must satisfy 0 < n < {N}")
    if math.comb(N, n) > 1 << 20:
        raise ValueError("sector too large")
    states = sector_states(N, n)
    where = {int(s): k for k, s in enumerate(states)}
    edges = set()
    for k, s in enumerate(states):
        s = int(s)
        for i, j in g.edges:
            if ((s >> i) ^ (s >> j)) & 1:
                other = where[s ^ ((1 << i) | (1 << j))]
                edges.add((min(k, other), max(k, other)))
    return Graph(len(states), sorted(edges)), states


def sample_counts(psi: np.ndarray, shots: int, seed=None) -> dict[str, int]:
    """Measurement histogram of ``shots`` computational-basis samples."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = n_qubits_of(psi)
    probs = np.abs(psi) ** 2
    probs /= probs.sum()
    counts = np.random.default_rng(seed).multinomial(shots, probs)
    return {bitstring(int(b), n): int(counts[b]) for b in np.flatnonzero(counts)}


def state_norm_error(psi: np.ndarray) -> float:
    return abs(float(np.vdot(psi, psi).real) - 1.0)


def permute_qubits(psi: np.ndarray, perm) -> np.ndarray:
    """Move qubit ``i`` to position ``perm[i]``."""
    n = n_qubits_of(psi)
    perm = np.asarray(perm)
    idx = np.arange(1 << n)
    new = np.zeros_like(idx)
    for i in range(n):
        new |= ((idx >> i) & 1) << perm[i]
    out = np.empty_like(psi)
    out[new] = psi
    return out
