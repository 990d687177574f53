"""Independent oracles for the test suite.

Everything here is brute force on dense arrays: explicit Pauli kron chains
for Hamiltonians and double loops for partial traces.  None of it shares
code paths with the package, so agreement is meaningful.
"""
import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def op_on(n, q, s):
    """Single-site operator on qubit q (qubit 0 = least significant bit)."""
    out = np.array([[1.0 + 0j]])
    for k in range(n - 1, -1, -1):
        out = np.kron(out, s if k == q else I2)
    return out


def dense_hamiltonian(n, j1, j2):
    """Full 2**n Hamiltonian of the dimerized ring from explicit kron chains."""
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    bonds = []
    for i in range(1, n // 2 + 1):
        bonds.append((2 * i - 2, 2 * i - 1, j1))
        bonds.append((2 * i - 1, (2 * i) % n, j2))
    for a, b, j in bonds:
        for s in (SX, SY, SZ):
            h += j * (op_on(n, a, s) @ op_on(n, b, s))
    assert np.abs(h.imag).max() < 1e-12
    return h.real


def brute_pair_rdm(amplitudes, n, i, j):
    """Pair reduced density matrix by looping over all index pairs."""
    amp = np.asarray(amplitudes, dtype=complex)
    rho = np.zeros((4, 4), dtype=complex)
    outside = ((1 << n) - 1) ^ (1 << i) ^ (1 << j)
    for x in range(1 << n):
        for y in range(1 << n):
            if (x & outside) != (y & outside):
                continue
            a = 2 * ((x >> i) & 1) + ((x >> j) & 1)
            b = 2 * ((y >> i) & 1) + ((y >> j) & 1)
            rho[a, b] += amp[x] * np.conj(amp[y])
    return rho


def embed_sector(basis, v):
    full = np.zeros(1 << basis.n_sites)
    full[basis.states] = v
    return full


def ghz(n):
    amp = np.zeros(1 << n, dtype=complex)
    amp[0] = amp[-1] = 1.0 / np.sqrt(2.0)
    return amp


def w_state():
    amp = np.zeros(8, dtype=complex)
    amp[0b001] = amp[0b010] = amp[0b100] = 1.0 / np.sqrt(3.0)
    return amp


def singlet():
    return np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)


def werner(p):
    """p * singlet projector + (1 - p) * I/4."""
    s = singlet()
    return p * np.outer(s, s.conj()) + (1.0 - p) * np.eye(4) / 4.0
