"""Numba loops over the amplitude array.

Each kernel walks the state in a fixed index order, so results do not depend
on thread count.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def popcount_parity(x):
    p = 0
    while x:
        x &= x - 1
        p ^= 1
    return p


@numba.njit(cache=True)
def pauli_accumulate(psi, out, xmask, zmask, coeff):
    """out[b ^ x] += coeff * (-1)^{|b & z|} * psi[b]."""
    for b in range(psi.shape[0]):
        amp = psi[b]
        if amp == 0:
            continue
        if popcount_parity(b & zmask):
            out[b ^ xmask] -= coeff * amp
        else:
            out[b ^ xmask] += coeff * amp


@numba.njit(cache=True)
def pauli_expect(psi, xmask, zmask):
    """sum_b conj(psi[b ^ x]) (-1)^{|b & z|} psi[b] (phase i^{n_y} applied by caller)."""
    acc = 0j
    for b in range(psi.shape[0]):
        term = np.conj(psi[b ^ xmask]) * psi[b]
        if popcount_parity(b & zmask):
            acc -= term
        else:
            acc += term
    return acc


@numba.njit(cache=True)
def rx_all(psi, n, c, s):
    """In place: apply cos(theta) I - i sin(theta) X to every qubit."""
    dim = psi.shape[0]
    ms = -1j * s
    for q in range(n):
        bit = 1 << q
        for b in range(dim):
            if b & bit:
                continue
            a0 = psi[b]
            a1 = psi[b | bit]
            psi[b] = c * a0 + ms * a1
            psi[b | bit] = c * a1 + ms * a0


@numba.njit(cache=True)
def ising_energies(n, edges_i, edges_j):
    """Diagonal of sum_{(i,j)} Z_i Z_j over all 2^n basis states."""
    dim = 1 << n
    out = np.empty(dim, dtype=np.int64)
    m = edges_i.shape[0]
    for b in range(dim):
        e = 0
        for k in range(m):
            if ((b >> edges_i[k]) ^ (b >> edges_j[k])) & 1:
                e -= 1
            else:
                e += 1
        out[b] = e
    return out


@numba.njit(cache=True, fastmath=True)
def _pair_moments(psi, i, j):
    # 16 real moments: 4 populations, then (re, im) of a_u conj(a_v) for u < v
    bi = 1 << i
    bj = 1 << j
    p0 = p1 = p2 = p3 = 0.0
    r01 = i01 = r02 = i02 = r03 = i03 = 0.0
    r12 = i12 = r13 = i13 = r23 = i23 = 0.0
    nh = psi.shape[0] >> (j + 1)
    nm = 1 << (j - 1 - i)
    for h in range(nh):
        for m in range(nm):
            off = (h << (j + 1)) | (m << (i + 1))
            for b in range(off, off + bi):
                a0 = psi[b]
                a1 = psi[b + bj]
                a2 = psi[b + bi]
                a3 = psi[b + bi + bj]
                x0, y0 = a0.real, a0.imag
                x1, y1 = a1.real, a1.imag
                x2, y2 = a2.real, a2.imag
                x3, y3 = a3.real, a3.imag
                p0 += x0 * x0 + y0 * y0
                p1 += x1 * x1 + y1 * y1
                p2 += x2 * x2 + y2 * y2
                p3 += x3 * x3 + y3 * y3
                r01 += x0 * x1 + y0 * y1
                i01 += y0 * x1 - x0 * y1
                r02 += x0 * x2 + y0 * y2
                i02 += y0 * x2 - x0 * y2
                r03 += x0 * x3 + y0 * y3
                i03 += y0 * x3 - x0 * y3
                r12 += x1 * x2 + y1 * y2
                i12 += y1 * x2 - x1 * y2
                r13 += x1 * x3 + y1 * y3
                i13 += y1 * x3 - x1 * y3
                r23 += x2 * x3 + y2 * y3
                i23 += y2 * x3 - x2 * y3
    return (p0, p1, p2, p3, r01, i01, r02, i02, r03, i03, r12, i12, r13, i13, r23, i23)


@numba.njit(cache=True)
def pair_density_matrices(psi, n):
    """Two-qubit reduced density matrices for every pair i < j.

    ``rho[i, j, x, y] = sum_rest psi[x, rest] * conj(psi[y, rest])`` where the
    local index is ``x = 2 * bit_i + bit_j``.
    """
    rho = np.zeros((n, n, 4, 4), dtype=np.complex128)
    for i in range(n):
        for j in range(i + 1, n):
            m = _pair_moments(psi, i, j)
            # local order: 0=(0,0) 1=(bit_j) 2=(bit_i) 3=(both)
            r = rho[i, j]
            for k in range(4):
                r[k, k] = m[k]
            r[0, 1] = m[4] + 1j * m[5]
            r[0, 2] = m[6] + 1j * m[7]
            r[0, 3] = m[8] + 1j * m[9]
            r[1, 2] = m[10] + 1j * m[11]
            r[1, 3] = m[12] + 1j * m[13]
            r[2, 3] = m[14] + 1j * m[15]
            for x in range(4):
                for y in range(x + 1, 4):
                    r[y, x] = np.conj(r[x, y])
    return rho
