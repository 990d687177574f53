"""Pure-state containers, pair reduced density operators, Pauli correlations,
and reproducible random-state sampling.

Conventions shared by the whole package:

* the computational-basis index encodes qubit k in bit k, with qubit 0 the
  least significant bit;
* qubit indices are 0-based in code; the command line uses 1-based site
  labels;
* a pair state extracted for qubits (i, j) puts qubit i in the first tensor
  factor, so its basis index is 2*b_i + b_j.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

NORM_ATOL = 1e-10
HERM_ATOL = 1e-12
TRACE_ATOL = 1e-12
PSD_ATOL = 1e-10
IMAG_ATOL = 1e-9

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)

# kron(sigma_u, sigma_v); the first factor acts on the first qubit of a pair.
PAULI_PAIRS = np.stack([np.stack([np.kron(u, v) for v in PAULIS]) for u in PAULIS])
PAULI_PAIRS.setflags(write=False)

ENSEMBLE_KINDS = ("complex-haar", "real-orthogonal")
_KIND_TAG = {"complex-haar": 0xC0A1, "real-orthogonal": 0x0E11}


def _frozen_array(obj, name, value):
    value.setflags(write=False)
    object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class StateVector:
    """Pure n-qubit state with unit-norm complex amplitudes of length 2**n."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        amp = np.ascontiguousarray(self.amplitudes, dtype=complex)
        dim = 1 << self.n_qubits
        if amp.shape != (dim,):
            raise ValueError(
                f"amplitude length {amp.shape} does not match 2**{self.n_qubits} = {dim}"
            )
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"state norm {norm!r} is not 1 within {NORM_ATOL}")
        _frozen_array(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


@dataclass(frozen=True)
class TwoQubitState:
    """4x4 density operator of a qubit pair; ``source_pair`` records (i, j)."""

    matrix: np.ndarray
    source_pair: tuple[int, int] = (0, 1)

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        if np.abs(m - m.conj().T).max() > HERM_ATOL:
            raise ValueError("matrix is not Hermitian within tolerance")
        tr = m.trace()
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"trace {tr!r} is not 1 within {TRACE_ATOL}")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -PSD_ATOL:
            raise ValueError(f"matrix has negative eigenvalue {lo!r}")
        _frozen_array(self, "matrix", m)
        object.__setattr__(self, "source_pair", tuple(self.source_pair))


@dataclass(frozen=True)
class CorrelationMatrix:
    """Real 3x3 matrix of pair Pauli correlations, axes ordered (x, y, z)."""

    t: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.t, dtype=float)
        if t.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {t.shape}")
        if np.abs(t).max() > 1.0 + 1e-12:
            raise ValueError("correlation entries must lie in [-1, 1]")
        _frozen_array(self, "t", t)


@dataclass(frozen=True)
class RandomEnsemble:
    """Sampling law for random pure states.

    ``complex-haar`` draws 2*2**n independent standard normals as real and
    imaginary parts and normalizes; ``real-orthogonal`` draws 2**n real
    normals and normalizes.  Together with a 64-bit seed this fixes every
    sample as a pure function of its index.
    """

    kind: str
    seed: int

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; choose from {ENSEMBLE_KINDS}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))


def make_state(n_qubits: int, amplitudes) -> tuple[StateVector, float]:
    """Normalize raw amplitudes into a StateVector.

    Returns the state together with the normalization factor that was
    applied to the input (1.0 if it already had unit norm).
    """
    amp = np.ascontiguousarray(amplitudes, dtype=complex)
    dim = 1 << n_qubits
    if amp.shape != (dim,):
        raise ValueError(f"need {dim} amplitudes for {n_qubits} qubits, got {amp.shape}")
    norm = np.linalg.norm(amp)
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    factor = 1.0 / norm
    return StateVector(n_qubits, amp * factor), factor


def partial_trace_pair(state: StateVector, i: int, j: int) -> TwoQubitState:
    """Reduced density operator of qubits (i, j), qubit i as first factor."""
    n = state.n_qubits
    if i == j:
        raise ValueError("qubit indices must differ")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"qubit index out of range for {n} qubits: ({i}, {j})")
    tensor = state.amplitudes.reshape((2,) * n)
    # axis n-1-q carries qubit q (qubit 0 is the least significant bit)
    m = np.moveaxis(tensor, (n - 1 - i, n - 1 - j), (0, 1)).reshape(4, -1)
    rho = m @ m.conj().T
    return TwoQubitState(rho, (i, j))


def qubit_marginal(rdm: TwoQubitState, position: int) -> np.ndarray:
    """Single-qubit 2x2 marginal of a pair state (position 0 or 1)."""
    if position not in (0, 1):
        raise ValueError("position must be 0 or 1")
    r = rdm.matrix.reshape(2, 2, 2, 2)
    return np.trace(r, axis1=1, axis2=3) if position == 0 else np.trace(r, axis1=0, axis2=2)


def correlation_matrix(rdm: TwoQubitState) -> CorrelationMatrix:
    """Pauli correlation matrix t[u, v] = Tr(rho sigma_u x sigma_v)."""
    t = np.einsum("ab,uvba->uv", rdm.matrix, PAULI_PAIRS)
    resid = np.abs(t.imag).max()
    if resid > IMAG_ATOL:
        raise ValueError(f"correlation entries have imaginary residue {resid!r}; input not Hermitian")
    return CorrelationMatrix(np.ascontiguousarray(t.real))


def pair_correlation_block(block: np.ndarray, n_qubits: int, i: int, j: int) -> np.ndarray:
    """Correlation matrices for a block of states, shape (count, 3, 3).

    ``block`` holds one normalized state per row.  This is the vectorized
    route used by the sampling campaigns; it matches
    correlation_matrix(partial_trace_pair(...)) row by row.
    """
    count = block.shape[0]
    tensor = block.reshape((count,) + (2,) * n_qubits)
    ax_i = 1 + (n_qubits - 1 - i)
    ax_j = 1 + (n_qubits - 1 - j)
    m = np.moveaxis(tensor, (ax_i, ax_j), (1, 2)).reshape(count, 4, -1)
    rho = np.einsum("sar,sbr->sab", m, m.conj())
    return np.einsum("sab,uvba->suv", rho, PAULI_PAIRS).real


def _raw_words(ensemble: RandomEnsemble, n_qubits: int, start_index: int, count: int,
               words_per_sample: int) -> np.ndarray:
    # Philox counter advances one step per 4 output words, so each sample
    # owns the word range [index*W, (index+1)*W); any batching of indices
    # reproduces the exact same words.
    if words_per_sample % 4 != 0:
        raise ValueError("words per sample must be a multiple of 4")
    key = np.array([ensemble.seed, _KIND_TAG[ensemble.kind] ^ (n_qubits << 16)], dtype=np.uint64)
    bitgen = np.random.Philox(key=key, counter=(start_index * words_per_sample) // 4)
    return bitgen.random_raw(count * words_per_sample).reshape(count, words_per_sample)


def _normal_block(ensemble, n_qubits, start_index, count, words_per_sample):
    raw = _raw_words(ensemble, n_qubits, start_index, count, words_per_sample)
    # open-interval uniforms from the top 53 bits, then the normal inverse CDF
    u = (raw >> np.uint64(11)) * 2.0**-53 + 2.0**-54
    return ndtri(u)


def sample_states(n_qubits: int, ensemble: RandomEnsemble, start_index: int,
                  count: int) -> np.ndarray:
    """Block of ``count`` random states with indices start_index, ... (rows).

    Each row is a pure function of (ensemble, row index): blocks drawn with
    any partitioning of the index range are bitwise identical.
    """
    if n_qubits < 2:
        raise ValueError("random states need n_qubits >= 2")
    if start_index < 0 or count < 0:
        raise ValueError("negative sample range")
    dim = 1 << n_qubits
    if ensemble.kind == "complex-haar":
        g = _normal_block(ensemble, n_qubits, start_index, count, 2 * dim)
        z = g[:, :dim] + 1j * g[:, dim:]
    else:
        z = _normal_block(ensemble, n_qubits, start_index, count, dim).astype(complex)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z


def random_pure_state(n_qubits: int, ensemble: RandomEnsemble, sample_index: int) -> StateVector:
    """The ``sample_index``-th random state of the ensemble."""
    amp = sample_states(n_qubits, ensemble, sample_index, 1)[0]
    return StateVector(n_qubits, amp)


def two_qubit_state_to_dict(rdm: TwoQubitState) -> dict:
    """JSON-ready form: {"dim": 4, "re": [[...]], "im": [[...]]}, row-major."""
    return {
        "dim": 4,
        "re": [[float(x) for x in row] for row in rdm.matrix.real],
        "im": [[float(x) for x in row] for row in rdm.matrix.imag],
    }


def two_qubit_state_from_dict(obj: dict, source_pair=(0, 1)) -> TwoQubitState:
    """Parse the pair-state JSON object, enforcing all type invariants."""
    if not isinstance(obj, dict):
        raise ValueError("pair-state JSON must be an object")
    if obj.get("dim") != 4:
        raise ValueError(f"pair-state JSON must have dim = 4, got {obj.get('dim')!r}")
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"pair-state JSON needs numeric 4x4 're' and 'im': {exc}") from None
    if re.shape != (4, 4) or im.shape != (4, 4):
        raise ValueError(f"'re' and 'im' must be 4x4, got {re.shape} and {im.shape}")
    return TwoQubitState(re + 1j * im, source_pair)


def load_two_qubit_state(path) -> TwoQubitState:
    with open(path, "r", encoding="utf-8") as fh:
        return two_qubit_state_from_dict(json.load(fh))


def save_two_qubit_state(rdm: TwoQubitState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(two_qubit_state_to_dict(rdm), fh, indent=1)
        fh.write("\n")
