import math

import numpy as np
import pytest

from bellmono import chsh, qstate
from helpers import ghz, singlet, w_state, werner

RT2 = math.sqrt(2.0)


def corr(m):
    return qstate.CorrelationMatrix(np.asarray(m, dtype=float))


def state_corr(amplitudes, n, i, j):
    s = qstate.StateVector(n, amplitudes)
    return qstate.correlation_matrix(qstate.partial_trace_pair(s, i, j))


def test_eigvals_sym3_matches_lapack():
    rng = np.random.default_rng(0)
    for _ in range(300):
        a = rng.standard_normal((3, 3))
        u = a.T @ a
        mine = chsh.eigvals_sym3(u)
        ref = np.linalg.eigvalsh(u)[::-1]
        assert np.abs(mine - ref).max() < 1e-10 * max(1.0, np.abs(ref).max())


def test_eigvals_sym3_degenerate():
    assert np.allclose(chsh.eigvals_sym3(np.eye(3) * 0.7), [0.7, 0.7, 0.7])
    # nearly repeated roots go through the Jacobi fallback
    u = np.diag([0.5, 0.5 + 1e-15, 0.2])
    assert np.abs(chsh.eigvals_sym3(u) - np.array([0.5 + 1e-15, 0.5, 0.2])).max() < 1e-14
    rng = np.random.default_rng(1)
    for _ in range(50):
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        u = q @ np.diag([0.3, 0.3, 0.1]) @ q.T
        u = (u + u.T) / 2
        ref = np.linalg.eigvalsh(u)[::-1]
        assert np.abs(chsh.eigvals_sym3(u) - ref).max() < 1e-12


def test_horodecki_singlet():
    bv = chsh.horodecki_max(corr(np.diag([-1.0, -1.0, -1.0])))
    assert bv.value == pytest.approx(chsh.TSIRELSON, abs=1e-12)
    assert bv.u == pytest.approx(1.0) and bv.u_prime == pytest.approx(1.0)
    assert bv.setting is None


def test_horodecki_product():
    bv = chsh.horodecki_max(corr(np.diag([0.0, 0.0, 1.0])))
    assert bv.value == pytest.approx(2.0, abs=1e-12)
    assert (bv.u, bv.u_prime) == (1.0, 0.0)


def test_horodecki_werner_08():
    bv = chsh.horodecki_max(corr(np.diag([-0.8, -0.8, -0.8])))
    assert bv.value == pytest.approx(1.6 * RT2, abs=1e-12)
    # confirmed by the direction search on the corresponding 4x4 state
    t = qstate.correlation_matrix(qstate.TwoQubitState(werner(0.8)))
    assert chsh.oracle_max(t, seed=3).value == pytest.approx(1.6 * RT2, abs=1e-6)


def test_horodecki_transpose_invariant():
    rng = np.random.default_rng(4)
    for _ in range(50):
        rdm = chsh.random_two_qubit_mixture(rng)
        t = qstate.correlation_matrix(rdm).t
        a = chsh.horodecki_max(corr(t)).value
        b = chsh.horodecki_max(corr(t.T)).value
        assert abs(a - b) < 1e-12


def test_bell_expectation_singlet_optimal():
    t = corr(np.diag([-1.0, -1.0, -1.0]))
    s = chsh.BellSetting(
        a=np.array([1.0, 0.0, 0.0]),
        a_prime=np.array([0.0, 1.0, 0.0]),
        b=np.array([-1.0, -1.0, 0.0]) / RT2,
        b_prime=np.array([-1.0, 1.0, 0.0]) / RT2,
    )
    val = chsh.bell_expectation(t, s)
    assert val == pytest.approx(chsh.TSIRELSON, abs=1e-12)
    assert val == pytest.approx(chsh.horodecki_max(t).value, abs=1e-12)


def test_bell_expectation_collapsed_settings():
    rng = np.random.default_rng(5)
    t = corr(rng.uniform(-0.5, 0.5, (3, 3)))
    b = rng.standard_normal(3)
    b /= np.linalg.norm(b)
    a = rng.standard_normal(3)
    a /= np.linalg.norm(a)
    ap = rng.standard_normal(3)
    ap /= np.linalg.norm(ap)
    # b == b' cancels the second term
    s = chsh.BellSetting(a, ap, b, b)
    assert chsh.bell_expectation(t, s) == pytest.approx(float(a @ t.t @ (2 * b)), abs=1e-14)
    assert abs(chsh.bell_expectation(t, s)) <= 2.0 + 1e-12


def test_bell_expectation_zero_matrix():
    t = corr(np.zeros((3, 3)))
    rng = np.random.default_rng(6)
    for _ in range(10):
        vs = rng.standard_normal((4, 3))
        vs /= np.linalg.norm(vs, axis=1, keepdims=True)
        assert chsh.bell_expectation(t, chsh.BellSetting(*vs)) == 0.0


def test_bell_setting_requires_unit_vectors():
    with pytest.raises(ValueError):
        chsh.BellSetting(
            np.array([1.0, 1.0, 0.0]),
            np.array([0.0, 1.0, 0.0]),
            np.array([1.0, 0.0, 0.0]),
            np.array([0.0, 0.0, 1.0]),
        )


def test_oracle_matches_closed_form_on_anchors():
    assert chsh.oracle_max(corr(np.diag([-1, -1, -1])), seed=0).value == pytest.approx(
        chsh.TSIRELSON, abs=1e-6
    )
    assert chsh.oracle_max(corr(np.diag([0, 0, 1])), seed=0).value == pytest.approx(
        2.0, abs=1e-6
    )


def test_oracle_equivalence_random_mixtures():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        rdm = chsh.random_two_qubit_mixture(rng)
        t = qstate.correlation_matrix(rdm)
        closed = chsh.horodecki_max(t)
        searched = chsh.oracle_max(t, seed=int(rng.integers(2**31)))
        worst = max(worst, abs(closed.value - searched.value))
        # the split of u + u' is not unique at the optimum (any rotation in
        # the top eigenplane keeps the sum), but the sum is
        assert abs((searched.u + searched.u_prime) - (closed.u + closed.u_prime)) < 1e-4
        assert searched.value == pytest.approx(2.0 * math.sqrt(searched.u + searched.u_prime),
                                               abs=1e-7)
    assert worst < 1e-5


def test_oracle_dominance():
    rng = np.random.default_rng(8)
    for _ in range(30):
        rdm = chsh.random_two_qubit_mixture(rng)
        t = qstate.correlation_matrix(rdm)
        cap = chsh.horodecki_max(t).value
        for _ in range(20):
            vs = rng.standard_normal((4, 3))
            vs /= np.linalg.norm(vs, axis=1, keepdims=True)
            assert chsh.bell_expectation(t, chsh.BellSetting(*vs)) <= cap + 1e-9


def test_oracle_reports_setting_achieving_value():
    rng = np.random.default_rng(9)
    rdm = chsh.random_two_qubit_mixture(rng)
    t = qstate.correlation_matrix(rdm)
    bv = chsh.oracle_max(t, seed=11)
    assert bv.setting is not None
    assert chsh.bell_expectation(t, bv.setting) == pytest.approx(bv.value, abs=1e-9)


def test_tsirelson_bound_random_states():
    rng = np.random.default_rng(10)
    for _ in range(200):
        t = qstate.correlation_matrix(chsh.random_two_qubit_mixture(rng))
        assert chsh.horodecki_max(t).value <= chsh.TSIRELSON + 1e-9


def test_heisenberg_bell_values():
    assert chsh.heisenberg_bell(-1.0).value == pytest.approx(chsh.TSIRELSON, abs=1e-15)
    assert chsh.heisenberg_bell(0.0).value == 0.0
    bv = chsh.heisenberg_bell(-2.0 / 3.0)
    # nearest-neighbor correlator of the uniform 4-site ring; the dense
    # cross-check lives in the spinchain tests
    assert bv.value == pytest.approx(4.0 * RT2 / 3.0, abs=1e-15)
    assert bv.u == bv.u_prime == pytest.approx(4.0 / 9.0)
    with pytest.raises(ValueError):
        chsh.heisenberg_bell(1.5)


def test_safe_sqrt_clamps_and_raises():
    assert chsh._safe_sqrt(-5e-11) == 0.0
    with pytest.raises(ValueError):
        chsh._safe_sqrt(-1e-9)


def test_monogamy_triple_ghz():
    report = chsh.monogamy_triple(qstate.StateVector(3, ghz(3)), 0)
    values = [v for _, v in report.pair_values]
    assert values == pytest.approx([4.0, 4.0], abs=1e-12)
    assert report.sum == pytest.approx(8.0, abs=1e-12)
    assert report.satisfied and report.slack == pytest.approx(0.0, abs=1e-9)
    assert [label for label, _ in report.pair_values] == ["(1,2)", "(1,3)"]


def test_monogamy_triple_w_state():
    report = chsh.monogamy_triple(qstate.StateVector(3, w_state()), 0)
    # T = diag(2/3, 2/3, -1/3) per pair, so each squared value is 32/9
    for _, v in report.pair_values:
        assert v == pytest.approx(32.0 / 9.0, abs=1e-12)
    assert report.sum == pytest.approx(64.0 / 9.0, abs=1e-12)
    assert report.satisfied


def test_monogamy_triple_product():
    amp = np.zeros(8, dtype=complex)
    amp[0] = 1.0
    report = chsh.monogamy_triple(qstate.StateVector(3, amp), 0)
    assert [v for _, v in report.pair_values] == pytest.approx([4.0, 4.0], abs=1e-12)
    assert report.slack == pytest.approx(0.0, abs=1e-9)


def test_monogamy_triple_wrong_size():
    with pytest.raises(ValueError):
        chsh.monogamy_triple(qstate.StateVector(2, singlet()), 0)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_bell_sum_product_state_saturates(n):
    amp = np.zeros(1 << n, dtype=complex)
    amp[0] = 1.0  # all spins up
    report = chsh.bell_sum(qstate.StateVector(n, amp), 0)
    assert report.bound == 4.0 * (n - 1)
    assert report.sum == pytest.approx(report.bound, abs=1e-12)
    assert report.satisfied and report.slack == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_bell_sum_ghz(n):
    report = chsh.bell_sum(qstate.StateVector(n, ghz(n)), 0)
    assert report.sum == pytest.approx(4.0 * (n - 1), abs=1e-12)
    assert report.satisfied


def test_bell_sum_singlet_plus_idle():
    amp = np.kron(np.array([1.0, 0.0]), singlet())  # qubit 2 idle in |0>
    report = chsh.bell_sum(qstate.StateVector(3, amp), 0)
    values = dict(report.pair_values)
    assert values["(1,2)"] == pytest.approx(8.0, abs=1e-12)
    assert values["(1,3)"] == pytest.approx(0.0, abs=1e-12)
    assert report.satisfied


def test_bell_sum_wrong_size():
    with pytest.raises(ValueError):
        chsh.bell_sum(qstate.StateVector(2, singlet()), 0)


def test_monogamy_random_states_small():
    # the full 1e5-per-size version runs in the acceptance suite
    for kind in qstate.ENSEMBLE_KINDS:
        ens = qstate.RandomEnsemble(kind, 42)
        for k in range(300):
            report = chsh.monogamy_triple(qstate.random_pure_state(3, ens, k), 0)
            assert report.satisfied, report


def test_real_tripartite_max_ghz():
    state = qstate.StateVector(3, ghz(3))
    # all three y-y correlators vanish for this state
    for i, j in ((0, 1), (0, 2), (1, 2)):
        t = state_corr(ghz(3), 3, i, j)
        assert abs(t.t[1, 1]) < 1e-14
    val = chsh.real_tripartite_max(state, 0, 1)
    assert val == pytest.approx(2.0, abs=1e-12)
    hor = chsh.horodecki_max(state_corr(ghz(3), 3, 0, 1)).value
    assert val == pytest.approx(hor, abs=1e-12)


def test_real_tripartite_max_singlet_plus_idle():
    amp = np.kron(np.array([1.0, 0.0]), singlet())
    state = qstate.StateVector(3, amp)
    assert chsh.real_tripartite_max(state, 0, 1) == pytest.approx(chsh.TSIRELSON, abs=1e-12)


def test_real_tripartite_max_rejects_complex():
    ens = qstate.RandomEnsemble("complex-haar", 12)
    state = qstate.random_pure_state(3, ens, 0)
    with pytest.raises(ValueError):
        chsh.real_tripartite_max(state, 0, 1)


def test_real_tripartite_equals_planar_maximum():
    # the identity the formula actually certifies: it equals the maximal
    # expectation over x-z plane (real) observables, and it never exceeds
    # the unrestricted maximum
    ens = qstate.RandomEnsemble("real-orthogonal", 13)
    for k in range(500):
        state = qstate.random_pure_state(3, ens, k)
        t = qstate.correlation_matrix(qstate.partial_trace_pair(state, 0, 1))
        val = chsh.real_tripartite_max(state, 0, 1)
        assert val == pytest.approx(chsh.real_observable_max(t), abs=1e-9)
        assert val <= chsh.horodecki_max(t).value + 1e-9


def test_real_tripartite_under_horodecki_strictly_sometimes():
    # the W state is an explicit case where the unrestricted maximum needs
    # the y axis: the real-observable value 2*sqrt(5/9) sits strictly below
    # the closed-form 2*sqrt(8/9)
    state = qstate.StateVector(3, w_state())
    val = chsh.real_tripartite_max(state, 0, 1)
    hor = chsh.horodecki_max(state_corr(w_state(), 3, 0, 1)).value
    assert val == pytest.approx(2.0 * math.sqrt(5.0 / 9.0), abs=1e-12)
    assert hor == pytest.approx(2.0 * math.sqrt(8.0 / 9.0), abs=1e-12)
    assert val < hor - 0.3


def test_concurrence_anchors():
    rdm = qstate.TwoQubitState(np.outer(singlet(), singlet().conj()))
    assert chsh.concurrence(rdm) == pytest.approx(1.0, abs=1e-12)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0
    assert chsh.concurrence(qstate.TwoQubitState(rho)) == 0.0


@pytest.mark.parametrize("p", [0.0, 0.2, 1.0 / 3.0, 0.5, 0.8, 1.0])
def test_concurrence_werner_family(p):
    # closed form max(0, (3p - 1)/2) from the Wootters formula
    c = chsh.concurrence(qstate.TwoQubitState(werner(p)))
    assert c == pytest.approx(max(0.0, (3.0 * p - 1.0) / 2.0), abs=1e-10)


def test_entangled_but_local_witness():
    # Werner p = 0.6: clearly entangled yet no CHSH violation
    rdm = qstate.TwoQubitState(werner(0.6))
    assert chsh.concurrence(rdm) > 0.3
    assert chsh.horodecki_max(qstate.correlation_matrix(rdm)).value <= 2.0


def test_bell_value_validation():
    with pytest.raises(ValueError):
        chsh.BellValue(value=3.0, u=1.5, u_prime=0.75)
    with pytest.raises(ValueError):
        chsh.BellValue(value=1.0, u=0.1, u_prime=0.5)
