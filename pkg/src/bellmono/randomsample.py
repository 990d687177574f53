"""Random-state campaigns: distribution of the squared-Bell sum B_s2.

A sample's statistic is the sum over partners m of the squared maximal CHSH
expectation of the pair (pivot, m), with the pivot fixed at qubit 0; both
random ensembles are exchange symmetric, so the distribution does not depend
on the pivot.  Every sampled value is checked against the monogamy bound
4*(n-1); an excess beyond 1e-9 aborts the run, because the bound is a
theorem and a violation can only be a bug.

Accumulation is deterministic for any worker count: samples are processed
in fixed-size chunks whose boundaries do not depend on the worker count, and
per-chunk partial results merge in chunk order.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import chsh
from .qstate import RandomEnsemble, pair_correlation_block, sample_states

CHUNK = 8192
BOUND_ATOL = 1e-9
DEFAULT_THRESHOLD_RATIOS = (0.9, 0.95, 0.99, 1.0)

# targets for ensemble auto-selection: reference means of B_s2 at 10**6
# samples for n = 3..6
REFERENCE_MEANS_1M = {3: 6.93124, 4: 6.05616, 5: 4.38381, 6: 2.86035}


def squared_bell_sums(block: np.ndarray, n_qubits: int) -> np.ndarray:
    """B_s2 for every state row of ``block``, pivot at qubit 0."""
    out = np.zeros(block.shape[0])
    for m in range(1, n_qubits):
        t = pair_correlation_block(block, n_qubits, 0, m)
        u = np.einsum("ski,skj->sij", t, t)
        u1, u2 = chsh.top2_sym3_batch(u)
        out += 4.0 * (np.clip(u1, 0.0, None) + np.clip(u2, 0.0, None))
    return out


class _Accumulator:
    """Streaming count/mean/M2, histogram, exact tail counters, extremes."""

    def __init__(self, bound: float, edges: np.ndarray, ratios: tuple[float, ...]):
        self.bound = bound
        self.edges = edges
        self.ratios = ratios
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.hist = np.zeros(len(edges) - 1, dtype=np.int64)
        self.tails = {r: 0 for r in ratios}
        self.min = np.inf
        self.max = -np.inf

    def update(self, values: np.ndarray) -> None:
        c = values.size
        if c == 0:
            return
        mean_b = float(values.mean())
        m2_b = float(((values - mean_b) ** 2).sum())
        self._combine(c, mean_b, m2_b)
        self.hist += np.histogram(values, bins=self.edges)[0]
        for r in self.ratios:
            # ratio 1 counts only values within 1e-9 of the bound
            threshold = self.bound - BOUND_ATOL if r >= 1.0 else r * self.bound
            self.tails[r] += int((values >= threshold).sum())
        self.min = min(self.min, float(values.min()))
        self.max = max(self.max, float(values.max()))

    def _combine(self, c: int, mean: float, m2: float) -> None:
        # Chan's parallel update; stable and associative enough for a fixed
        # merge order
        total = self.count + c
        delta = mean - self.mean
        self.mean += delta * (c / total)
        self.m2 += m2 + delta * delta * (self.count * c / total)
        self.count = total

    def merge(self, other: "_Accumulator") -> None:
        if other.count:
            self._combine(other.count, other.mean, other.m2)
        self.hist += other.hist
        for r in self.ratios:
            self.tails[r] += other.tails[r]
        self.min = min(self.min, other.min)
        self.max = max(self.max, other.max)

    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0


@dataclass(frozen=True)
class SampleStats:
    """Summary of one sampling run."""

    n_qubits: int
    ensemble: RandomEnsemble
    count: int
    mean: float
    variance: float
    histogram: tuple  # (bin lower edge, bin upper edge, count) triples
    bound: float
    min_value: float
    max_value: float
    tail_counts: dict
    checkpoint_means: tuple = ()

    @property
    def stddev(self) -> float:
        return float(np.sqrt(self.variance))


def _chunk_ranges(lo: int, hi: int, chunk: int = CHUNK):
    for start in range(lo, hi, chunk):
        yield start, min(start + chunk, hi)


def _scan_chunk(args):
    n_qubits, ensemble_kind, seed, lo, hi, bound, n_bins, ratios = args
    ensemble = RandomEnsemble(ensemble_kind, seed)
    edges = np.linspace(0.0, bound, n_bins + 1)
    acc = _Accumulator(bound, edges, ratios)
    for a, b in _chunk_ranges(lo, hi):
        block = sample_states(n_qubits, ensemble, a, b - a)
        values = squared_bell_sums(block, n_qubits)
        if values.max() > bound + BOUND_ATOL:
            k = int(np.argmax(values))
            raise chsh.MonogamyViolationError(
                f"sample {a + k} of {ensemble_kind} (seed {seed}, n={n_qubits}) "
                f"has B_s2 = {values[k]!r} > bound {bound} + {BOUND_ATOL}"
            )
        acc.update(values)
    return acc.count, acc.mean, acc.m2, acc.hist, dict(acc.tails), acc.min, acc.max


def run_sampling(n_qubits: int, n_samples: int, ensemble: RandomEnsemble,
                 n_bins: int = 100, *, workers: int = 1,
                 threshold_ratios: tuple[float, ...] = DEFAULT_THRESHOLD_RATIOS,
                 checkpoints=None) -> SampleStats:
    """Sample B_s2 ``n_samples`` times and accumulate its distribution.

    ``checkpoints`` (ascending sample counts) records the running mean at
    exactly those counts.  ``workers`` distributes fixed chunks of the index
    range over processes; the result is bitwise identical for any value.
    """
    if not (3 <= n_qubits <= 8):
        raise ValueError(f"n_qubits must be in [3, 8], got {n_qubits}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n_bins < 10:
        raise ValueError("n_bins must be >= 10")
    checkpoints = sorted(set(int(c) for c in (checkpoints or [])))
    if checkpoints and (checkpoints[0] < 1 or checkpoints[-1] > n_samples):
        raise ValueError("checkpoints must lie in [1, n_samples]")

    bound = 4.0 * (n_qubits - 1)
    edges = np.linspace(0.0, bound, n_bins + 1)
    ratios = tuple(threshold_ratios)
    total = _Accumulator(bound, edges, ratios)
    checkpoint_means = []

    # segment at checkpoint boundaries so running means are exact there
    boundaries = [c for c in checkpoints if c < n_samples] + [n_samples]
    lo = 0
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for hi in boundaries:
            tasks = [(n_qubits, ensemble.kind, ensemble.seed, a, b, bound, n_bins, ratios)
                     for a, b in _chunk_ranges(lo, hi)]
            results = pool.map(_scan_chunk, tasks) if pool else map(_scan_chunk, tasks)
            for count, mean, m2, hist, tails, vmin, vmax in results:
                part = _Accumulator(bound, edges, ratios)
                part.count, part.mean, part.m2 = count, mean, m2
                part.hist = hist
                part.tails = tails
                part.min, part.max = vmin, vmax
                total.merge(part)
            if hi in checkpoints:
                checkpoint_means.append((hi, total.mean))
            lo = hi
    finally:
        if pool:
            pool.shutdown()

    histogram = tuple(
        (float(edges[k]), float(edges[k + 1]), int(total.hist[k]))
        for k in range(n_bins)
    )
    return SampleStats(
        n_qubits=n_qubits,
        ensemble=ensemble,
        count=total.count,
        mean=total.mean,
        variance=total.variance(),
        histogram=histogram,
        bound=bound,
        min_value=total.min,
        max_value=total.max,
        tail_counts=dict(total.tails),
        checkpoint_means=tuple(checkpoint_means),
    )


def saturation_fraction(stats: SampleStats, threshold_ratio: float) -> float:
    """Fraction of samples with B_s2 >= threshold_ratio * bound.

    Read from the exact tail counters maintained during sampling, never from
    histogram bins; the ratio must have been registered for the run (see
    ``threshold_ratios`` of run_sampling).
    """
    if not 0.0 < threshold_ratio <= 1.0:
        raise ValueError("threshold_ratio must be in (0, 1]")
    if threshold_ratio not in stats.tail_counts:
        raise ValueError(
            f"ratio {threshold_ratio} was not tracked during sampling; "
            f"tracked: {sorted(stats.tail_counts)}"
        )
    return stats.tail_counts[threshold_ratio] / stats.count


@dataclass(frozen=True)
class ConvergenceTable:
    """Running means of B_s2 recorded at growing sample counts."""

    ensemble_kind: str
    seed: int
    checkpoints: tuple[int, ...]
    n_values: tuple[int, ...]
    means: dict  # n_qubits -> tuple of means, one per checkpoint


def convergence_table(n_qubits_list, checkpoints, ensemble: RandomEnsemble, *,
                      workers: int = 1, n_bins: int = 100) -> ConvergenceTable:
    """Single streaming run per size, recording the mean at each checkpoint."""
    checkpoints = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly ascending")
    means = {}
    for n in n_qubits_list:
        stats = run_sampling(n, checkpoints[-1], ensemble, n_bins,
                             workers=workers, checkpoints=checkpoints)
        means[int(n)] = tuple(m for _, m in stats.checkpoint_means)
    return ConvergenceTable(
        ensemble_kind=ensemble.kind,
        seed=ensemble.seed,
        checkpoints=tuple(checkpoints),
        n_values=tuple(int(n) for n in n_qubits_list),
        means=means,
    )


def select_matching_ensemble(seed: int, samples: int = 10**6, *,
                             workers: int = 1) -> tuple[str, dict]:
    """Run both ensembles against the reference means and pick the closer one.

    Returns the matching kind plus a report with per-size means and maximal
    absolute deviations.  The outcome is measured, not hard-coded: either
    ensemble may win on a given run.
    """
    report = {}
    for kind in ("complex-haar", "real-orthogonal"):
        ens = RandomEnsemble(kind, seed)
        means = {}
        for n, ref in REFERENCE_MEANS_1M.items():
            stats = run_sampling(n, samples, ens, workers=workers)
            means[n] = stats.mean
        report[kind] = {
            "means": means,
            "max_abs_deviation": max(abs(means[n] - REFERENCE_MEANS_1M[n])
                                     for n in REFERENCE_MEANS_1M),
        }
    winner = min(report, key=lambda k: report[k]["max_abs_deviation"])
    return winner, report
