"""Batch command-line front end.

Commands: ``sweep`` (coupling-ratio sweeps of the dimerized ring), ``bell``
(single pair queries, from a chain or a pair-state file), ``oracle``
(direction-search maximization on a pair-state file), ``random`` (random
state campaigns), ``table1`` (convergence table of the mean squared-Bell sum
with ensemble auto-selection), ``verify`` (cross-module property suite).

All artifacts are written atomically (temp file + rename) with floats at 12
significant digits; identical configurations produce byte-identical files
for any worker count.  Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import chsh, qstate, randomsample, spinchain

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

_ENSEMBLE_BY_FLAG = {"complex": "complex-haar", "real": "real-orthogonal"}
_FLAG_BY_ENSEMBLE = {v: k for k, v in _ENSEMBLE_BY_FLAG.items()}

# checkpoint ladder for the convergence table
_TABLE_CHECKPOINTS = (100, 1_000, 100_000, 1_000_000, 25_000_000, 50_000_000)
_TABLE_SIZES = (3, 4, 5, 6)


@dataclass(frozen=True)
class RunConfig:
    """A validated command invocation: the command name plus its parameters."""

    command: str
    params: dict


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _round12(x: float) -> float:
    return float(_fmt(float(x)))


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=1) + "\n")


def parse_grid(spec: str) -> np.ndarray:
    """Parse ``lo:hi:count`` into an inclusive uniform grid."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be lo:hi:count, got {spec!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"grid must be lo:hi:count with numeric fields, got {spec!r}") from None
    if count < 1:
        raise ValueError("grid count must be >= 1")
    if count == 1:
        if lo != hi:
            raise ValueError("grid with a single point needs lo == hi")
        return np.array([lo])
    if not lo < hi:
        raise ValueError("grid needs lo < hi")
    return np.linspace(lo, hi, count)


def _parse_pair(text: str, n_sites: int) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"pair must be i,j with 1-based site labels, got {text!r}")
    i, j = int(parts[0]), int(parts[1])
    if not (1 <= i <= n_sites and 1 <= j <= n_sites) or i == j:
        raise ValueError(f"pair ({i},{j}) invalid for {n_sites} sites")
    return i - 1, j - 1


def _default_workers() -> int:
    env = os.environ.get("BELLMONO_WORKERS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _bell_value_json(bv: chsh.BellValue) -> dict:
    setting = None
    if bv.setting is not None:
        setting = {
            "a": [_round12(x) for x in bv.setting.a],
            "a_prime": [_round12(x) for x in bv.setting.a_prime],
            "b": [_round12(x) for x in bv.setting.b],
            "b_prime": [_round12(x) for x in bv.setting.b_prime],
        }
    return {
        "value": _round12(bv.value),
        "u": _round12(bv.u),
        "u_prime": _round12(bv.u_prime),
        "setting": setting,
    }


def _cmd_sweep(p: dict) -> int:
    warm = not p["no_warm_start"]
    workers = p["workers"]
    if warm and workers > 1:
        print("note: warm-started sweeps run sequentially; --workers applies "
              "only with --no-warm-start")
        workers = 1
    result = spinchain.sweep(p["n"], parse_grid(p["grid"]), p["tol"],
                             method=p["method"], warm_start=warm, workers=workers)
    lines = ["j2_over_j1,B12,B23,dB12,dB23,Bs2,energy,residual,flags"]
    for k in range(result.grid.size):
        flags = ";".join(result.flags[k])
        lines.append(",".join([
            _fmt(result.grid[k]), _fmt(result.b12[k]), _fmt(result.b23[k]),
            _fmt(result.db12[k]), _fmt(result.db23[k]), _fmt(result.bs[k]),
            _fmt(result.energies[k]), _fmt(result.residuals[k]), flags,
        ]))
    out = p["out"] or f"sweep_n{p['n']}.csv"
    _atomic_write(out, "\n".join(lines) + "\n")
    finite = result.bs[np.isfinite(result.bs)]
    print(f"sweep n={p['n']}: {result.grid.size} points -> {out}; "
          f"max Bs2 = {_fmt(finite.max()) if finite.size else 'nan'}")
    return EXIT_OK


def _cmd_bell(p: dict) -> int:
    if p["state"]:
        rdm = qstate.load_two_qubit_state(p["state"])
        bv = chsh.horodecki_max(qstate.correlation_matrix(rdm))
    else:
        if p["n"] is None or p["j2"] is None or p["pair"] is None:
            raise ValueError("bell needs either --state or all of --n, --j2, --pair")
        i, j = _parse_pair(p["pair"], p["n"])
        spec = spinchain.ChainSpec(p["n"], 1.0, p["j2"])
        gs = spinchain.ground_state(spec, p["tol"], method=p["method"])
        bv = spinchain.pair_bell(gs, i, j)
    out = p["out"] or "bell.json"
    _write_json(out, _bell_value_json(bv))
    print(f"bell value {_fmt(bv.value)} -> {out}")
    return EXIT_OK


def _cmd_oracle(p: dict) -> int:
    rdm = qstate.load_two_qubit_state(p["state"])
    bv = chsh.oracle_max(qstate.correlation_matrix(rdm), p["restarts"], p["tol"],
                         seed=p["seed"])
    out = p["out"] or "oracle.json"
    _write_json(out, _bell_value_json(bv))
    print(f"oracle value {_fmt(bv.value)} -> {out}")
    return EXIT_OK


def _cmd_random(p: dict) -> int:
    ensemble = qstate.RandomEnsemble(_ENSEMBLE_BY_FLAG[p["ensemble"]], p["seed"])
    stats = randomsample.run_sampling(p["n"], p["samples"], ensemble, p["bins"],
                                      workers=p["workers"])
    prefix = p["out_prefix"] or f"random_n{p['n']}"
    total = stats.count
    lines = ["bin_lo,bin_hi,count,frequency"]
    for lo, hi, count in stats.histogram:
        lines.append(f"{_fmt(lo)},{_fmt(hi)},{count},{_fmt(count / total)}")
    _atomic_write(prefix + ".csv", "\n".join(lines) + "\n")
    summary = {
        "n": stats.n_qubits,
        "samples": stats.count,
        "mean": _round12(stats.mean),
        "stddev": _round12(stats.stddev),
        "bound": _round12(stats.bound),
        "saturation_fraction_0.9": _round12(randomsample.saturation_fraction(stats, 0.9)),
        "ensemble": _FLAG_BY_ENSEMBLE[ensemble.kind],
        "seed": ensemble.seed,
    }
    _write_json(prefix + ".json", summary)
    print(f"random n={p['n']}: {total} samples, mean {_fmt(stats.mean)}, "
          f"max {_fmt(stats.max_value)} <= bound {_fmt(stats.bound)} -> {prefix}.csv/.json")
    return EXIT_OK


def _table_csv(table: randomsample.ConvergenceTable) -> str:
    header = "states," + ",".join(f"N={n}" for n in table.n_values)
    lines = [header]
    for k, c in enumerate(table.checkpoints):
        row = [str(c)] + [_fmt(table.means[n][k]) for n in table.n_values]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _cmd_table1(p: dict) -> int:
    samples = p["samples"]
    checkpoints = sorted({c for c in _TABLE_CHECKPOINTS if c <= samples} | {samples})
    kinds = (["complex-haar", "real-orthogonal"] if p["ensemble"] == "both"
             else [_ENSEMBLE_BY_FLAG[p["ensemble"]]])
    prefix = p["out_prefix"] or "table1"
    report = {"samples": samples, "seed": p["seed"], "reference_means":
              {str(n): randomsample.REFERENCE_MEANS_1M[n] for n in _TABLE_SIZES},
              "ensembles": {}}
    deviations = {}
    for kind in kinds:
        ensemble = qstate.RandomEnsemble(kind, p["seed"])
        table = randomsample.convergence_table(_TABLE_SIZES, checkpoints, ensemble,
                                               workers=p["workers"])
        path = f"{prefix}_{_FLAG_BY_ENSEMBLE[kind]}.csv"
        _atomic_write(path, _table_csv(table))
        final = {n: table.means[n][-1] for n in _TABLE_SIZES}
        dev = max(abs(final[n] - randomsample.REFERENCE_MEANS_1M[n]) for n in _TABLE_SIZES)
        deviations[kind] = dev
        report["ensembles"][_FLAG_BY_ENSEMBLE[kind]] = {
            "csv": path,
            "final_means": {str(n): _round12(final[n]) for n in _TABLE_SIZES},
            "max_abs_deviation": _round12(dev),
        }
        print(f"table1 {_FLAG_BY_ENSEMBLE[kind]}: max |mean - reference| = {_fmt(dev)} -> {path}")
    matched = min(deviations, key=deviations.get) if len(kinds) == 2 else None
    report["matched_ensemble"] = _FLAG_BY_ENSEMBLE[matched] if matched else None
    _write_json(prefix + ".json", report)
    if matched:
        print(f"matched ensemble: {_FLAG_BY_ENSEMBLE[matched]}")
    return EXIT_OK


def _singlet_pair_state() -> qstate.TwoQubitState:
    amp = np.zeros(4, dtype=complex)
    amp[1] = 1.0 / math.sqrt(2.0)
    amp[2] = -1.0 / math.sqrt(2.0)
    return qstate.TwoQubitState(np.outer(amp, amp.conj()), (0, 1))


def _cmd_verify(p: dict) -> int:
    checks = []

    def record(name, passed, detail):
        checks.append({"name": name, "passed": bool(passed), "detail": detail})
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    # closed form vs direction search on random mixed pair states
    rng = np.random.default_rng(p["seed"])
    worst = 0.0
    for _ in range(100):
        rdm = chsh.random_two_qubit_mixture(rng)
        t = qstate.correlation_matrix(rdm)
        worst = max(worst, abs(chsh.oracle_max(t, seed=int(rng.integers(2**31))).value
                               - chsh.horodecki_max(t).value))
    t_singlet = qstate.correlation_matrix(_singlet_pair_state())
    singlet_dev = max(abs(chsh.horodecki_max(t_singlet).value - chsh.TSIRELSON),
                      abs(chsh.oracle_max(t_singlet).value - chsh.TSIRELSON))
    record("oracle-equivalence", worst <= 1e-5 and singlet_dev <= 1e-6,
           f"max |oracle - closed| = {worst:.3e} over 100 mixed states; "
           f"singlet deviation {singlet_dev:.3e}")

    # monogamy bound on random states, both ensembles
    for kind in ("complex-haar", "real-orthogonal"):
        ensemble = qstate.RandomEnsemble(kind, p["seed"])
        worst_excess = -np.inf
        try:
            for n in (3, 4, 5, 6):
                stats = randomsample.run_sampling(n, p["samples"], ensemble,
                                                  workers=p["workers"])
                worst_excess = max(worst_excess, stats.max_value - stats.bound)
            record(f"monogamy-random-{_FLAG_BY_ENSEMBLE[kind]}", worst_excess <= 1e-9,
                   f"{p['samples']} samples per size, max (B_s2 - bound) = {worst_excess:.3e}")
        except chsh.MonogamyViolationError as exc:
            record(f"monogamy-random-{_FLAG_BY_ENSEMBLE[kind]}", False, str(exc))

    # uniform ring: no violation at any asserted distance
    n_chain = p["n_chain"]
    try:
        gs = spinchain.ground_state(spinchain.ChainSpec(n_chain, 1.0, 1.0), 1e-12)
        scan = spinchain.distance_scan(gs)
        record("uniform-ring-scan", True,
               f"n={n_chain}: max asserted value {scan.asserted_max:.6f} <= 2; "
               f"antipodal (distance {scan.antipodal_distance}) = {scan.antipodal_value:.6f}, "
               f"reported unasserted")
    except (spinchain.CertificationError, spinchain.CrossCheckError) as exc:
        record("uniform-ring-scan", False, str(exc))

    # sweep: closed form vs general criterion agree point by point, bound holds
    result = spinchain.sweep(8, parse_grid("-1:3:41"), 1e-12)
    clean = all(len(f) == 0 for f in result.flags)
    i0 = int(np.argmin(np.abs(result.grid)))
    dimer_ok = (abs(result.b12[i0] - chsh.TSIRELSON) <= 1e-8
                and abs(result.b23[i0]) <= 1e-8)
    bs_ok = bool(np.nanmax(result.bs) <= 8.0 + 1e-9)
    record("closed-form-consistency", clean and dimer_ok and bs_ok,
           f"n=8, 41 points: flags clean = {clean}, dimer endpoint ok = {dimer_ok}, "
           f"max Bs2 = {np.nanmax(result.bs):.9f}")

    failures = [c["name"] for c in checks if not c["passed"]]
    out = p["out"] or "verify.json"
    _write_json(out, {"passed": not failures, "checks": checks, "failures": failures})
    print(f"verify report -> {out}")
    return EXIT_OK if not failures else EXIT_DOMAIN


_COMMANDS = {
    "sweep": _cmd_sweep,
    "bell": _cmd_bell,
    "oracle": _cmd_oracle,
    "random": _cmd_random,
    "table1": _cmd_table1,
    "verify": _cmd_verify,
}


def run(config: RunConfig) -> int:
    """Execute a validated command; returns the process exit status."""
    return _COMMANDS[config.command](config.params)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellmono",
        description="Maximal CHSH correlations, monogamy certification, and "
                    "dimerized-ring sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sweep", help="ground-state sweep over J2/J1")
    sp.add_argument("--n", type=int, required=True, help="number of ring sites (even)")
    sp.add_argument("--grid", default="-1:3:161", help="lo:hi:count, inclusive endpoints")
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--method", choices=("auto", "power", "lanczos"), default="auto")
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--no-warm-start", action="store_true")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("bell", help="maximal CHSH value of one pair")
    sp.add_argument("--state", default=None, help="pair-state JSON file")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--j2", type=float, default=None)
    sp.add_argument("--pair", default=None, help="1-based site pair i,j")
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--method", choices=("auto", "power", "lanczos"), default="auto")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("oracle", help="direction-search CHSH maximum for a pair state")
    sp.add_argument("--state", required=True, help="pair-state JSON file")
    sp.add_argument("--restarts", type=int, default=16)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("random", help="random-state campaign for B_s2")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--samples", type=int, required=True)
    sp.add_argument("--ensemble", choices=("complex", "real"), default="complex")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--bins", type=int, default=100)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out-prefix", default=None)

    sp = sub.add_parser("table1", help="convergence table of mean B_s2 vs sample count")
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--ensemble", choices=("complex", "real", "both"), default="both")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out-prefix", default=None)

    sp = sub.add_parser("verify", help="cross-module property suite")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-chain", type=int, default=12)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out", default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    params = vars(args)
    command = params.pop("command")
    if params.get("workers") is None and "workers" in params:
        params["workers"] = _default_workers()
    config = RunConfig(command=command, params=params)
    try:
        return run(config)
    except (ValueError, OSError, json.JSONDecodeError, chsh.MonogamyViolationError,
            spinchain.CrossCheckError, spinchain.CertificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
