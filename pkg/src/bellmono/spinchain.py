"""Matrix-free exact diagonalization of the dimerized Heisenberg ring.

The ring Hamiltonian couples sites (2i-1, 2i) with strength J1 and
(2i, 2i+1) with strength J2 (1-based sites, periodic, N even), each bond a
full Pauli-vector dot product.  Total z-magnetization is conserved and the
ground state lives in the zero-magnetization sector, so everything here
works on the basis of N-bit patterns with exactly N/2 set bits.  In that
basis H is real symmetric; all vectors are real.

Per bond (a, b) with coupling J the action on a basis pattern is
``J * s_a * s_b`` on the diagonal (s = +-1 from the bits) plus an amplitude
transfer of 2J between patterns whose bits at a, b differ (the bond
eigenvalues are -3 for a singlet and +1 for a triplet).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import chsh
from .qstate import CorrelationMatrix, TwoQubitState, correlation_matrix

MIN_SITES = 4
MAX_SITES = 24
_DEGENERACY_REL_GAP = 1e-6
_AXES = {"x": 0, "y": 1, "z": 2}


class CrossCheckError(RuntimeError):
    """Closed-form and general Bell routes disagree on a chain ground state."""


class CertificationError(RuntimeError):
    """A certified bound failed on a chain ground state (solver or logic bug)."""


@dataclass(frozen=True)
class ChainSpec:
    """Dimerized ring parameters; boundary is always periodic."""

    n_sites: int
    j1: float
    j2: float

    def __post_init__(self):
        n = self.n_sites
        if n % 2 != 0 or not (MIN_SITES <= n <= MAX_SITES):
            raise ValueError(f"n_sites must be even and in [{MIN_SITES}, {MAX_SITES}], got {n}")
        if not self.j1 > 0.0:
            raise ValueError(f"j1 must be positive, got {self.j1}")

    def bonds(self) -> list[tuple[int, int, float]]:
        """(site_a, site_b, coupling) triples, 0-based, ring-closed."""
        out = []
        n = self.n_sites
        for i in range(1, n // 2 + 1):
            out.append((2 * i - 2, 2 * i - 1, self.j1))
            out.append((2 * i - 1, (2 * i) % n, self.j2))
        return out


def _binomial_table(n: int) -> np.ndarray:
    c = np.zeros((n + 1, n + 2), dtype=np.int64)
    c[:, 0] = 1
    for i in range(1, n + 1):
        c[i, 1:] = c[i - 1, 1:] + c[i - 1, :-1]
    return c


def _colex_rank(patterns, n_bits: int, binom: np.ndarray) -> np.ndarray:
    """Rank of fixed-popcount patterns in ascending integer order.

    The t-th set bit (counted from the least significant) at position p
    contributes C(p, t); summing the contributions gives the colexicographic
    rank, which coincides with the position in the sorted enumeration.
    """
    x = np.asarray(patterns, dtype=np.uint32)
    out = np.zeros(x.shape, dtype=np.int64)
    t = np.zeros(x.shape, dtype=np.int64)
    for p in range(n_bits):
        bit = ((x >> np.uint32(p)) & np.uint32(1)).astype(np.int64)
        t += bit
        out += bit * binom[p, t]
    return out


def _fixed_popcount_states(n_bits: int, k: int) -> np.ndarray:
    x = np.arange(1 << n_bits, dtype=np.uint32)
    return x[np.bitwise_count(x) == k]


class SectorBasis:
    """Zero-magnetization basis: sorted bit patterns plus O(1) rank lookup.

    Ranking uses the colexicographic combinatorial number system: the t-th
    set bit at position p contributes C(p, t), which reproduces the position
    of the pattern in ascending integer order.  The per-key cost is a fixed
    number of bit operations (n_sites passes over the query array).
    """

    def __init__(self, n_sites: int):
        if n_sites % 2 != 0 or not (MIN_SITES <= n_sites <= MAX_SITES):
            raise ValueError(
                f"n_sites must be even and in [{MIN_SITES}, {MAX_SITES}], got {n_sites}"
            )
        self.n_sites = n_sites
        self.states = _fixed_popcount_states(n_sites, n_sites // 2)
        self.states.setflags(write=False)
        self.dim = len(self.states)
        self._binom = _binomial_table(n_sites)
        self._hops: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        self._diag: dict[tuple[int, int], np.ndarray] = {}

    def rank(self, patterns) -> np.ndarray:
        """Positions of fixed-popcount patterns in ascending order."""
        return _colex_rank(patterns, self.n_sites, self._binom)

    def pair_signs(self, a: int, b: int) -> np.ndarray:
        """s_a * s_b = +-1 per basis state (float array, cached)."""
        key = (min(a, b), max(a, b))
        if key not in self._diag:
            st = self.states
            differ = ((st >> np.uint32(a)) ^ (st >> np.uint32(b))) & np.uint32(1)
            d = 1.0 - 2.0 * differ.astype(np.float64)
            d.setflags(write=False)
            self._diag[key] = d
        return self._diag[key]

    def hop(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
        """(idx, partner): states with unequal bits at (a, b) and the rank of
        the pattern with both bits flipped (cached per pair)."""
        key = (min(a, b), max(a, b))
        if key not in self._hops:
            st = self.states
            differ = (((st >> np.uint32(a)) ^ (st >> np.uint32(b))) & np.uint32(1)).astype(bool)
            idx = np.nonzero(differ)[0].astype(np.int64)
            mask = np.uint32((1 << a) | (1 << b))
            partner = self.rank(st[idx] ^ mask)
            idx.setflags(write=False)
            partner.setflags(write=False)
            self._hops[key] = (idx, partner)
        return self._hops[key]


def enumerate_sector(n_sites: int) -> SectorBasis:
    """All zero-magnetization patterns of an n_sites ring."""
    return SectorBasis(n_sites)


def _make_matvec(spec: ChainSpec, basis: SectorBasis):
    bonds = spec.bonds()
    diag = np.zeros(basis.dim)
    hops = []
    for a, b, j in bonds:
        diag += j * basis.pair_signs(a, b)
        idx, partner = basis.hop(a, b)
        hops.append((2.0 * j, idx, partner))

    def matvec(v):
        out = diag * v
        for weight, idx, partner in hops:
            out[idx] += weight * v[partner]
        return out

    return matvec


def apply_hamiltonian(spec: ChainSpec, basis: SectorBasis, v) -> np.ndarray:
    """H @ v over the sector basis, bond by bond, without materializing H."""
    if basis.n_sites != spec.n_sites:
        raise ValueError("basis and spec disagree on n_sites")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (basis.dim,):
        raise ValueError(f"vector has shape {v.shape}, expected ({basis.dim},)")
    return _make_matvec(spec, basis)(v)


@dataclass(frozen=True)
class GroundState:
    """Converged ground vector over the sector basis with solve diagnostics."""

    spec: ChainSpec
    basis: SectorBasis
    vector: np.ndarray
    energy: float
    residual: float
    iterations: int
    gap_estimate: float | None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.ascontiguousarray(self.vector, dtype=np.float64)
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValueError("ground vector must have unit norm")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)


def _start_vector(basis: SectorBasis) -> np.ndarray:
    # Neel pattern (bits 0, 2, 4, ... set) plus a small uniform admixture
    neel = 0
    for q in range(0, basis.n_sites, 2):
        neel |= 1 << q
    v = np.full(basis.dim, 1e-3 / np.sqrt(basis.dim))
    v[int(basis.rank(np.uint32(neel)))] += 1.0
    return v / np.linalg.norm(v)


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    return -v if v[np.argmax(np.abs(v))] < 0.0 else v


def _gap_above(matvec, ground: np.ndarray, energy: float, steps: int = 40) -> float | None:
    """Estimate the lowest excited level by a short deflated Lanczos run."""
    dim = ground.size
    m = min(steps, dim - 1)
    if m < 1:
        return None
    rng = np.random.default_rng(0x6A90)
    q = rng.standard_normal(dim)
    q -= (ground @ q) * ground
    nq = np.linalg.norm(q)
    if nq < 1e-12:
        return None
    q /= nq
    reorth = dim <= 1_000_000
    basis_vecs = np.zeros((m, dim)) if reorth else None
    alpha = np.zeros(m)
    beta = np.zeros(m)
    q_prev = np.zeros(dim)
    b = 0.0
    k = 0
    for k in range(m):
        if reorth:
            basis_vecs[k] = q
        w = matvec(q)
        w -= (ground @ w) * ground
        alpha[k] = q @ w
        w -= alpha[k] * q + b * q_prev
        if reorth:
            w -= basis_vecs[: k + 1].T @ (basis_vecs[: k + 1] @ w)
        b = np.linalg.norm(w)
        beta[k] = b
        if b < 1e-12:
            k += 1
            break
        q_prev = q
        q = w / b
    else:
        k = m
    ritz = eigh_tridiagonal(alpha[:k], beta[: k - 1], eigvals_only=True)
    return float(ritz[0] - energy)


def ground_state(spec: ChainSpec, tol: float = 1e-12, max_iter: int = 100_000, *,
                 method: str = "auto", basis: SectorBasis | None = None,
                 v0: np.ndarray | None = None, residual_tol: float = 1e-10,
                 power_iter_limit: int = 200, gap_check: bool = True) -> GroundState:
    """Ground state of the ring in the zero-magnetization sector.

    ``method`` selects the eigensolver:

    * ``"power"``: shifted power iteration on sigma*I - H with
      sigma = 3*(N/2)*(|J1| + |J2|), an upper bound on ||H|| (each bond term
      has norm 3).  Stops when the Rayleigh quotient changes by less than
      tol*|E| and the residual ||Hv - Ev|| drops below ``residual_tol``.
    * ``"lanczos"``: implicitly restarted Lanczos (ARPACK) on the matrix-free
      operator, started from the same vector.
    * ``"auto"``: power iteration first; hands off to Lanczos when
      ``power_iter_limit`` iterations did not converge.

    A short deflated Lanczos run afterwards estimates the spectral gap; a gap
    below 1e-6*|E| flags the result ``possibly-degenerate`` (power iteration
    in a near-degenerate space converges to a start-dependent mixture, so
    correlators of flagged states are unreliable).
    """
    if method not in ("auto", "power", "lanczos"):
        raise ValueError(f"unknown method {method!r}")
    if basis is None:
        basis = SectorBasis(spec.n_sites)
    elif basis.n_sites != spec.n_sites:
        raise ValueError("basis and spec disagree on n_sites")
    matvec = _make_matvec(spec, basis)
    v = _start_vector(basis) if v0 is None else np.asarray(v0, dtype=np.float64).copy()
    v /= np.linalg.norm(v)

    sigma = 3.0 * (spec.n_sites / 2.0) * (abs(spec.j1) + abs(spec.j2))
    iterations = 0
    flags: list[str] = []
    energy = np.inf
    residual = np.inf
    converged = False

    if method in ("auto", "power"):
        limit = power_iter_limit if method == "auto" else max_iter
        e_prev = np.inf
        while iterations < limit:
            hv = matvec(v)
            iterations += 1
            energy = float(v @ hv)
            residual = float(np.linalg.norm(hv - energy * v))
            if abs(energy - e_prev) < tol * max(abs(energy), 1e-30) and residual <= residual_tol:
                converged = True
                break
            e_prev = energy
            w = sigma * v - hv
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            v = w / nw

    if not converged and method in ("auto", "lanczos"):
        calls = [0]

        def counted(x):
            calls[0] += 1
            return matvec(x)

        op = LinearOperator((basis.dim, basis.dim), matvec=counted, dtype=np.float64)
        try:
            w, vecs = eigsh(op, k=1, which="SA", v0=v, tol=0, maxiter=max_iter)
            v = vecs[:, 0]
            converged = True
        except ArpackNoConvergence as exc:
            flags.append("max-iter")
            if exc.eigenvectors is not None and exc.eigenvectors.size:
                v = exc.eigenvectors[:, 0]
        iterations += calls[0]
    elif not converged:
        flags.append("max-iter")

    v = _canonical_sign(v / np.linalg.norm(v))
    hv = matvec(v)
    energy = float(v @ hv)
    residual = float(np.linalg.norm(hv - energy * v))
    if converged and residual > residual_tol:
        flags.append("residual-above-tol")

    gap = None
    if gap_check:
        gap = _gap_above(matvec, v, energy)
        if gap is not None and gap < _DEGENERACY_REL_GAP * max(abs(energy), 1e-30):
            flags.append("possibly-degenerate")

    return GroundState(spec=spec, basis=basis, vector=v, energy=energy,
                       residual=residual, iterations=iterations,
                       gap_estimate=gap, flags=tuple(flags))


def _site_signs(basis: SectorBasis, q: int) -> np.ndarray:
    return 1.0 - 2.0 * ((basis.states >> np.uint32(q)) & np.uint32(1)).astype(np.float64)


def magnetization_z(state: GroundState, i: int) -> float:
    """<sigma^z_i> in the ground state (x and y vanish in a fixed-Sz sector)."""
    w = state.vector * state.vector
    return float(np.sum(w * _site_signs(state.basis, i)))


def correlator(state: GroundState, axis: str, i: int, j: int) -> float:
    """<sigma^u_i sigma^u_j> for u in {x, y, z}, matrix-free over the sector."""
    basis = state.basis
    n = basis.n_sites
    if i == j:
        raise ValueError("sites must differ")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"site out of range for {n} sites: ({i}, {j})")
    if axis not in _AXES:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    v = state.vector
    if axis == "z":
        w = v * v
        return float(np.sum(w * basis.pair_signs(i, j)))
    # x and y: both transfer amplitude only between patterns whose bits at
    # (i, j) differ; inside a fixed-Sz sector the two phase patterns coincide,
    # so the x and y correlators are computed by the same kernel.
    idx, partner = basis.hop(i, j)
    return float(np.sum(v[idx] * v[partner]))


def _strip_bit(x: np.ndarray, p: int) -> np.ndarray:
    low = np.uint32((1 << p) - 1)
    return (x & low) | ((x >> np.uint32(1)) & ~low)


def reduced_pair_state(state: GroundState, i: int, j: int) -> TwoQubitState:
    """Exact two-site density operator of the sector vector, site i first.

    Fixed total magnetization makes the pair block-diagonal: only the
    |01><10| coherence survives among off-diagonal entries; it is gathered by
    matching the remaining N-2 bits of the two middle blocks.
    """
    basis = state.basis
    n = basis.n_sites
    if i == j:
        raise ValueError("sites must differ")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"site out of range for {n} sites: ({i}, {j})")
    v = state.vector
    st = basis.states
    bi = ((st >> np.uint32(i)) & np.uint32(1)).astype(np.int8)
    bj = ((st >> np.uint32(j)) & np.uint32(1)).astype(np.int8)
    lo, hi = (i, j) if i < j else (j, i)
    rest = _strip_bit(_strip_bit(st, hi), lo)

    rho = np.zeros((4, 4))
    sel01 = (bi == 0) & (bj == 1)
    sel10 = (bi == 1) & (bj == 0)
    rho[0, 0] = np.sum(v[(bi == 0) & (bj == 0)] ** 2)
    rho[3, 3] = np.sum(v[(bi == 1) & (bj == 1)] ** 2)
    rho[1, 1] = np.sum(v[sel01] ** 2)
    rho[2, 2] = np.sum(v[sel10] ** 2)

    binom = _binomial_table(n - 2)
    rest_dim = int(binom[n - 2, n // 2 - 1])
    w01 = np.zeros(rest_dim)
    w10 = np.zeros(rest_dim)
    w01[_colex_rank(rest[sel01], n - 2, binom)] = v[sel01]
    w10[_colex_rank(rest[sel10], n - 2, binom)] = v[sel10]
    rho[1, 2] = rho[2, 1] = float(w01 @ w10)
    return TwoQubitState(rho, (i, j))


def pair_bell(state: GroundState, i: int, j: int,
              crosscheck_tol: float = 1e-8) -> chsh.BellValue:
    """Maximal CHSH expectation of the (i, j) pair of a chain ground state.

    Uses the isotropic closed form 2*sqrt(2)*|<sigma^z_i sigma^z_j>| and
    cross-checks it against the general criterion evaluated on the explicit
    pair density operator; disagreement beyond ``crosscheck_tol`` means the
    spin-rotation symmetry is broken (degenerate solve) or the solver failed.
    """
    tzz = correlator(state, "z", i, j)
    closed = chsh.heisenberg_bell(tzz)
    general = chsh.horodecki_max(correlation_matrix(reduced_pair_state(state, i, j)))
    if abs(closed.value - general.value) > crosscheck_tol:
        raise CrossCheckError(
            f"closed form {closed.value!r} vs general {general.value!r} for pair "
            f"({i}, {j}) of n={state.spec.n_sites}, j2/j1={state.spec.j2 / state.spec.j1!r}"
        )
    return closed


@dataclass(frozen=True)
class SweepResult:
    """Per-point Bell data of a coupling-ratio sweep at fixed J1 = 1."""

    n_sites: int
    grid: np.ndarray
    b12: np.ndarray
    b23: np.ndarray
    db12: np.ndarray
    db23: np.ndarray
    bs: np.ndarray
    energies: np.ndarray
    residuals: np.ndarray
    flags: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for name in ("grid", "b12", "b23", "db12", "db23", "bs", "energies", "residuals"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _sweep_point(n_sites, ratio, tol, residual_tol, method, basis, v0):
    spec = ChainSpec(n_sites, 1.0, float(ratio))
    gs = ground_state(spec, tol, method=method, basis=basis, v0=v0,
                      residual_tol=residual_tol)
    flags = list(gs.flags)
    try:
        bv12 = pair_bell(gs, 0, 1)
        bv23 = pair_bell(gs, 1, 2)
        b12, b23 = bv12.value, bv23.value
        bs = bv12.squared + bv23.squared
    except CrossCheckError as exc:
        flags.append(f"crosscheck-mismatch: {exc}")
        b12 = b23 = bs = np.nan
    return b12, b23, bs, gs.energy, gs.residual, tuple(flags), gs.vector


def _sweep_point_cold(args):
    n_sites, ratio, tol, residual_tol, method = args
    out = _sweep_point(n_sites, ratio, tol, residual_tol, method, None, None)
    return out[:6]


def sweep(n_sites: int, grid, tol: float = 1e-12, *, residual_tol: float = 1e-10,
          method: str = "auto", warm_start: bool = True, workers: int = 1) -> SweepResult:
    """Solve the ground state at every J2/J1 ratio and collect Bell data.

    Points run in grid order, warm-starting each solve from the previous
    vector (the first point cold-starts).  With ``warm_start=False`` the
    points are independent and may be distributed over ``workers`` processes;
    results are identical for any worker count.  Derivatives are central
    finite differences on the grid, one-sided at the endpoints.  Failed
    points are flagged and carry NaN values; they do not abort the sweep.
    """
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly ascending")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid must be finite")

    rows = []
    if not warm_start and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        args = [(n_sites, float(r), tol, residual_tol, method) for r in grid]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point_cold, args))
    else:
        basis = SectorBasis(n_sites)
        v0 = None
        for r in grid:
            point = _sweep_point(n_sites, float(r), tol, residual_tol, method,
                                 basis, v0 if warm_start else None)
            rows.append(point[:6])
            v0 = point[6]

    b12 = np.array([row[0] for row in rows])
    b23 = np.array([row[1] for row in rows])
    bs = np.array([row[2] for row in rows])
    energies = np.array([row[3] for row in rows])
    residuals = np.array([row[4] for row in rows])
    flags = tuple(row[5] for row in rows)
    if grid.size > 1:
        db12 = np.gradient(b12, grid)
        db23 = np.gradient(b23, grid)
    else:
        db12 = np.zeros(1)
        db23 = np.zeros(1)
    return SweepResult(n_sites=n_sites, grid=grid, b12=b12, b23=b23, db12=db12,
                       db23=db23, bs=bs, energies=energies, residuals=residuals,
                       flags=flags)


@dataclass(frozen=True)
class DistanceScan:
    """Bell values by ring distance for a uniform (J1 = J2) chain.

    Distances 1 .. N/2 - 1 are asserted against the classical bound; the
    antipodal distance N/2 falls outside the hypothesis guaranteeing
    nonviolation on even rings, so its value is reported but never asserted.
    """

    n_sites: int
    distances: tuple[int, ...]
    values: tuple[float, ...]
    concurrences: tuple[float, ...]
    antipodal_distance: int | None
    antipodal_value: float | None
    antipodal_concurrence: float | None
    bound: float
    asserted_max: float


def distance_scan(state: GroundState, exclude_antipodal: bool = True,
                  tol: float = 1e-9) -> DistanceScan:
    """Bell correlation at every pair distance of a uniform ring.

    Raises CertificationError if any asserted distance exceeds the classical
    bound 2 beyond ``tol`` (this cannot happen for a correct solve).
    """
    spec = state.spec
    if abs(spec.j1 - spec.j2) >= 1e-12:
        raise ValueError("distance_scan requires uniform couplings (j1 == j2)")
    n = spec.n_sites
    half = n // 2
    distances = []
    values = []
    concs = []
    anti = (half, None, None)
    for d in range(1, half + 1):
        bv = pair_bell(state, 0, d)
        c = chsh.concurrence(reduced_pair_state(state, 0, d))
        if d == half and exclude_antipodal:
            anti = (d, bv.value, c)
        else:
            distances.append(d)
            values.append(bv.value)
            concs.append(c)
    asserted_max = max(values)
    if asserted_max > 2.0 + tol:
        raise CertificationError(
            f"pair at distance {distances[int(np.argmax(values))]} reaches "
            f"{asserted_max!r} > 2 on a uniform {n}-site ring"
        )
    return DistanceScan(
        n_sites=n,
        distances=tuple(distances),
        values=tuple(values),
        concurrences=tuple(concs),
        antipodal_distance=anti[0] if exclude_antipodal else None,
        antipodal_value=anti[1],
        antipodal_concurrence=anti[2],
        bound=2.0,
        asserted_max=float(asserted_max),
    )
