"""Maximal CHSH Bell correlations of qubit pairs in many-body states,
monogamy certification, dimerized Heisenberg ring sweeps, and random-state
statistics."""

from .chsh import (
    BellSetting,
    BellValue,
    MonogamyReport,
    MonogamyViolationError,
    TSIRELSON,
    bell_expectation,
    bell_sum,
    concurrence,
    heisenberg_bell,
    horodecki_max,
    monogamy_triple,
    oracle_max,
    real_observable_max,
    real_tripartite_max,
)
from .qstate import (
    CorrelationMatrix,
    RandomEnsemble,
    StateVector,
    TwoQubitState,
    correlation_matrix,
    load_two_qubit_state,
    make_state,
    partial_trace_pair,
    random_pure_state,
    sample_states,
    save_two_qubit_state,
)
from .randomsample import (
    ConvergenceTable,
    SampleStats,
    convergence_table,
    run_sampling,
    saturation_fraction,
    select_matching_ensemble,
)
from .spinchain import (
    ChainSpec,
    DistanceScan,
    GroundState,
    SectorBasis,
    SweepResult,
    apply_hamiltonian,
    correlator,
    distance_scan,
    enumerate_sector,
    ground_state,
    pair_bell,
    reduced_pair_state,
    sweep,
)

__version__ = "0.1.0"
