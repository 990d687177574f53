"""Maximal CHSH expectations, monogamy certification, and concurrence.

The closed form for the maximal CHSH expectation of a two-qubit state is
2*sqrt(u + u') with u >= u' the two largest eigenvalues of U = T^T T, where
T is the pair's Pauli correlation matrix.  ``oracle_max`` maximizes the
bilinear expectation over measurement directions directly and never touches
the eigenvalues of U, so the two routes check each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qstate import (
    CorrelationMatrix,
    PAULI_Y,
    StateVector,
    TwoQubitState,
    correlation_matrix,
    partial_trace_pair,
)

TSIRELSON = 2.0 * math.sqrt(2.0)
RADICAND_ATOL = 1e-10
_UNIT_ATOL = 1e-12
# characteristic-polynomial solutions are replaced by Jacobi rotations when
# the normalized discriminant is this close to a repeated root
_DEGENERATE_DISC = 1e-14

_SY_SY = np.kron(PAULI_Y, PAULI_Y)


class MonogamyViolationError(RuntimeError):
    """A certified monogamy bound was exceeded beyond tolerance (a bug)."""


def _safe_sqrt(x: float, atol: float = RADICAND_ATOL) -> float:
    # rounding residue is clamped; anything more negative is a logic bug
    if x < -atol:
        raise ValueError(f"negative radicand {x!r} beyond tolerance {atol}")
    return math.sqrt(x) if x > 0.0 else 0.0


def _jacobi_eigvals3(U: np.ndarray, sweeps: int = 16) -> np.ndarray:
    """Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations."""
    A = np.array(U, dtype=float)
    for _ in range(sweeps):
        off = abs(A[0, 1]) + abs(A[0, 2]) + abs(A[1, 2])
        if off < 1e-15:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if abs(A[p, q]) < 1e-18:
                continue
            theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            R = np.eye(3)
            R[p, p] = R[q, q] = c
            R[p, q] = s
            R[q, p] = -s
            A = R.T @ A @ R
    return np.sort(np.diag(A))[::-1]


def _closed_form_eigvals3(U: np.ndarray):
    """Trigonometric eigenvalues of symmetric 3x3 batches.

    Returns (e1, e2, e3) descending plus the discriminant proxy 1 - r**2
    used to detect near-degenerate roots (NaN where the normalized form
    degenerates; callers must treat non-finite as degenerate).  Matrices are
    rescaled by their largest entry first so that p**3 cannot underflow for
    well-separated spectra.
    """
    scale = np.abs(U).max(axis=(-2, -1))
    safe = np.where(scale > 0.0, scale, 1.0)
    V = U / safe[..., None, None]
    a = V[..., 0, 0]
    b = V[..., 1, 1]
    c = V[..., 2, 2]
    d = V[..., 0, 1]
    e = V[..., 0, 2]
    f = V[..., 1, 2]
    q = (a + b + c) / 3.0
    aq, bq, cq = a - q, b - q, c - q
    p2 = aq * aq + bq * bq + cq * cq + 2.0 * (d * d + e * e + f * f)
    p = np.sqrt(p2 / 6.0)
    det = aq * (bq * cq - f * f) - d * (d * cq - f * e) + e * (d * f - bq * e)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(p > 0.0, det / (2.0 * p * p * p), 0.0)
    disc = 1.0 - r * r
    r = np.clip(r, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = (q + 2.0 * p * np.cos(phi)) * safe
    e3 = (q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)) * safe
    e2 = 3.0 * q * safe - e1 - e3
    return e1, e2, e3, disc


def eigvals_sym3(U: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of one symmetric 3x3 matrix."""
    e1, e2, e3, disc = _closed_form_eigvals3(np.asarray(U, dtype=float))
    if not np.isfinite(disc) or disc < _DEGENERATE_DISC:
        return _jacobi_eigvals3(U)
    return np.array([float(e1), float(e2), float(e3)])


def top2_sym3_batch(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two largest eigenvalues for a batch of symmetric 3x3 matrices."""
    e1, e2, _, disc = _closed_form_eigvals3(U)
    bad = np.nonzero(~np.isfinite(disc) | (disc < _DEGENERATE_DISC))[0]
    if bad.size:
        e1 = np.array(e1, copy=True)
        e2 = np.array(e2, copy=True)
        for k in bad:
            w = _jacobi_eigvals3(U[k])
            e1[k], e2[k] = w[0], w[1]
    return e1, e2


def _unit(v, name: str) -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    if abs(np.linalg.norm(v) - 1.0) > _UNIT_ATOL:
        raise ValueError(f"{name} must have unit norm within {_UNIT_ATOL}")
    return v


@dataclass(frozen=True)
class BellSetting:
    """Four measurement directions (unit vectors in R^3)."""

    a: np.ndarray
    a_prime: np.ndarray
    b: np.ndarray
    b_prime: np.ndarray

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            v = _unit(getattr(self, name), name)
            v.setflags(write=False)
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class BellValue:
    """Maximal CHSH expectation with the eigenvalue pair (u, u')."""

    value: float
    u: float
    u_prime: float
    setting: BellSetting | None = None
    converged: bool = True

    def __post_init__(self):
        if not (0.0 <= self.value <= TSIRELSON + 1e-9):
            raise ValueError(f"Bell value {self.value!r} outside [0, 2*sqrt(2)]")
        if not (-1e-12 <= self.u_prime <= self.u + 1e-12 and self.u <= 1.0 + 1e-12):
            raise ValueError(f"eigenvalue pair ({self.u!r}, {self.u_prime!r}) invalid")

    @property
    def squared(self) -> float:
        # 4(u + u') avoids re-squaring the rooted value
        return 4.0 * (self.u + self.u_prime)


@dataclass(frozen=True)
class MonogamyReport:
    """Squared Bell values of the pivot's pairs against a monogamy bound."""

    pair_values: tuple
    sum: float
    bound: float
    satisfied: bool
    slack: float

    @classmethod
    def build(cls, pair_values, bound):
        total = float(np.sum([v for _, v in pair_values]))
        return cls(
            pair_values=tuple(pair_values),
            sum=total,
            bound=float(bound),
            satisfied=bool(total <= bound + 1e-9),
            slack=float(bound - total),
        )


def horodecki_max(t: CorrelationMatrix) -> BellValue:
    """Closed-form maximal CHSH expectation 2*sqrt(u + u')."""
    U = t.t.T @ t.t
    w = eigvals_sym3(U)
    u = max(float(w[0]), 0.0)
    u_prime = max(float(w[1]), 0.0)
    return BellValue(value=2.0 * _safe_sqrt(u + u_prime), u=u, u_prime=u_prime)


def bell_expectation(t: CorrelationMatrix, s: BellSetting) -> float:
    """CHSH expectation a.T(b+b') + a'.T(b-b') for fixed directions."""
    T = t.t
    return float(s.a @ T @ (s.b + s.b_prime) + s.a_prime @ T @ (s.b - s.b_prime))


def _normalized_or(v: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 1e-300 else fallback


def oracle_max(t: CorrelationMatrix, restarts: int = 16, tol: float = 1e-9,
               max_iter: int = 500, seed: int = 0) -> BellValue:
    """Maximize the CHSH expectation by alternating direction updates.

    For fixed (b, b') the optimal a, a' are the normalized images T(b +- b');
    for fixed (a, a') the optimal b, b' are the normalized images
    T^T(a +- a').  Each half step is an exact argmax, so the value is
    monotone; random restarts guard against local maxima.  This search never
    uses eigenvalues of T^T T, making it an independent check of the closed
    form.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    T = t.t
    rng = np.random.default_rng(seed)
    best_val = -np.inf
    best = None
    all_converged = True
    for _ in range(restarts):
        b = _normalized_or(rng.standard_normal(3), np.array([0.0, 0.0, 1.0]))
        bp = _normalized_or(rng.standard_normal(3), np.array([1.0, 0.0, 0.0]))
        a = _normalized_or(T @ (b + bp), b)
        ap = _normalized_or(T @ (b - bp), bp)
        val = a @ T @ (b + bp) + ap @ T @ (b - bp)
        converged = False
        for _ in range(max_iter):
            b = _normalized_or(T.T @ (a + ap), b)
            bp = _normalized_or(T.T @ (a - ap), bp)
            a = _normalized_or(T @ (b + bp), a)
            ap = _normalized_or(T @ (b - bp), ap)
            new_val = a @ T @ (b + bp) + ap @ T @ (b - bp)
            if abs(new_val - val) < tol:
                val = new_val
                converged = True
                break
            val = new_val
        all_converged = all_converged and converged
        if val > best_val:
            best_val = val
            best = (a, ap, b, bp)
    a, ap, b, bp = best
    # u, u' from the orthogonal pair c = (b+b')/|..|, c' = (b-b')/|..|; at the
    # optimum these are the top-two eigenvalues of T^T T
    c = b + bp
    cp = b - bp
    nc, ncp = np.linalg.norm(c), np.linalg.norm(cp)
    u = float(np.sum((T @ (c / nc)) ** 2)) if nc > 1e-300 else 0.0
    u_prime = float(np.sum((T @ (cp / ncp)) ** 2)) if ncp > 1e-300 else 0.0
    if u < u_prime:
        u, u_prime = u_prime, u
    setting = BellSetting(a, ap, b, bp)
    return BellValue(value=float(min(max(best_val, 0.0), TSIRELSON + 1e-9)),
                     u=min(u, 1.0 + 1e-12), u_prime=min(u_prime, 1.0 + 1e-12),
                     setting=setting, converged=all_converged)


def heisenberg_bell(tzz: float) -> BellValue:
    """Closed form for isotropic pairs: 2*sqrt(2)*|t_zz| with u = u' = t_zz**2.

    Applies when the correlation matrix is diagonal with equal entries, as
    forced by the spin-rotation symmetry of Heisenberg couplings.
    """
    if abs(tzz) > 1.0 + 1e-12:
        raise ValueError(f"|t_zz| = {abs(tzz)!r} exceeds 1")
    u = min(float(tzz) ** 2, 1.0)
    return BellValue(value=TSIRELSON * abs(float(tzz)), u=u, u_prime=u)


def _pair_squared(state: StateVector, i: int, j: int) -> float:
    bv = horodecki_max(correlation_matrix(partial_trace_pair(state, i, j)))
    return bv.squared


def monogamy_triple(state: StateVector, pivot: int) -> MonogamyReport:
    """Three-qubit monogamy: the pivot's two squared Bell maxima sum to <= 8."""
    if state.n_qubits != 3:
        raise ValueError("monogamy_triple needs a 3-qubit state")
    if not 0 <= pivot < 3:
        raise ValueError("pivot out of range")
    others = [q for q in range(3) if q != pivot]
    pairs = [(f"({pivot + 1},{m + 1})", _pair_squared(state, pivot, m)) for m in others]
    return MonogamyReport.build(pairs, bound=8.0)


def bell_sum(state: StateVector, pivot: int) -> MonogamyReport:
    """N-party monogamy: squared Bell maxima of all pivot pairs sum to <= 4(N-1)."""
    n = state.n_qubits
    if n < 3:
        raise ValueError("bell_sum needs at least 3 qubits")
    if not 0 <= pivot < n:
        raise ValueError("pivot out of range")
    pairs = [(f"({pivot + 1},{m + 1})", _pair_squared(state, pivot, m))
             for m in range(n) if m != pivot]
    return MonogamyReport.build(pairs, bound=4.0 * (n - 1))


def real_observable_max(t: CorrelationMatrix) -> float:
    """Maximal CHSH expectation with all four directions in the x-z plane.

    Real symmetric single-qubit observables are exactly the x-z plane
    directions, so this is the maximum available to real measurements.  In a
    plane the optimum is 2*sqrt of the full trace of the restricted T^T T.
    """
    block = t.t[np.ix_([0, 2], [0, 2])]
    return 2.0 * _safe_sqrt(float(np.sum(block * block)))


def _yy_correlator(state: StateVector, p: int, q: int) -> float:
    return float(correlation_matrix(partial_trace_pair(state, p, q)).t[1, 1])


def real_tripartite_max(state: StateVector, i: int, j: int) -> float:
    """Maximal real-observable CHSH value of pair (i, j) in a real 3-qubit state.

    Evaluates 2*sqrt(1 + <yy_ij>**2 - <yy_ik>**2 - <yy_jk>**2) with k the
    remaining qubit.  Valid for unit-norm states with real amplitudes; the
    radicand is then nonnegative up to rounding.
    """
    if state.n_qubits != 3:
        raise ValueError("real_tripartite_max needs a 3-qubit state")
    if np.abs(state.amplitudes.imag).max() > 1e-12:
        raise ValueError("state amplitudes must be real within 1e-12")
    if i == j or not {i, j} <= {0, 1, 2}:
        raise ValueError(f"invalid qubit pair ({i}, {j})")
    k = ({0, 1, 2} - {i, j}).pop()
    t_ij = _yy_correlator(state, i, j)
    t_ik = _yy_correlator(state, i, k)
    t_jk = _yy_correlator(state, j, k)
    radicand = 1.0 + t_ij**2 - t_ik**2 - t_jk**2
    return 2.0 * _safe_sqrt(radicand)


def concurrence(rdm: TwoQubitState) -> float:
    """Wootters concurrence of a two-qubit density operator."""
    rho = rdm.matrix
    rho_tilde = _SY_SY @ rho.conj() @ _SY_SY
    ev = np.linalg.eigvals(rho @ rho_tilde)
    # the spectrum of rho * rho_tilde is real nonnegative up to rounding
    lam = np.sqrt(np.clip(np.sort(ev.real)[::-1], 0.0, None))
    return max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))


def random_two_qubit_mixture(rng: np.random.Generator, max_rank: int = 4) -> TwoQubitState:
    """Random mixed pair state: a weighted mixture of random pure states."""
    rank = int(rng.integers(1, max_rank + 1))
    weights = rng.dirichlet(np.ones(rank))
    rho = np.zeros((4, 4), dtype=complex)
    for w in weights:
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi /= np.linalg.norm(psi)
        rho += w * np.outer(psi, psi.conj())
    return TwoQubitState(rho)
