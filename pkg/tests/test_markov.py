import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intersense.markov import (
    DegenerateChainError,
    DualPeriodPolicy,
    InfeasibleOverheadError,
    channel_metrics,
    four_state_matrix,
    joint_metrics,
    joint_transition_matrix,
    joint_transition_matrix_2ch,
    network_metrics,
    network_throughput,
    overhead_sum,
    steady_state,
    two_channel_throughput,
)
from intersense.renewal import (
    ChannelParams,
    expected_free_time_from_busy,
    expected_free_time_from_free,
    prob_free_given_busy,
    prob_free_given_free,
)
from intersense.sensing import SensingErrorModel

FIG1 = [ChannelParams(a, b) for a, b in zip([0.2, 0.17, 0.15, 0.13, 0.11], [1.0, 0.9, 0.8, 0.7, 0.6])]
PERFECT = [SensingErrorModel()] * 5

rates = st.floats(min_value=0.01, max_value=10.0)
periods = st.floats(min_value=0.01, max_value=50.0)
probs = st.floats(min_value=0.0, max_value=0.45)


def _power_iteration(m, iters=20000):
    p = np.full(m.shape[0], 1.0 / m.shape[0])
    for _ in range(iters):
        p = p @ m
    return p


def test_policy_validation():
    with pytest.raises(ValueError):
        DualPeriodPolicy(0.0, 1.0)
    with pytest.raises(ValueError):
        DualPeriodPolicy(1.0, 0.5).check_floor(0.6)
    assert DualPeriodPolicy.single(2.0) == DualPeriodPolicy(2.0, 2.0)


@settings(max_examples=100, deadline=None)
@given(rates, rates, periods, periods, probs, probs)
def test_four_state_rows_and_stationary(a, b, tf, tb, fa, md):
    ch = ChannelParams(a, b)
    m = four_state_matrix(ch, SensingErrorModel(fa, md), DualPeriodPolicy(tf, tb))
    assert np.all(m >= 0)
    assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)
    pi = steady_state(m)
    assert pi.sum() == pytest.approx(1.0)
    assert np.allclose(pi @ m, pi, atol=1e-10)


def test_steady_state_matches_power_iteration():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = rng.random((4, 4)) + 0.05
        m /= m.sum(axis=1, keepdims=True)
        assert np.allclose(steady_state(m), _power_iteration(m, 500), atol=1e-12)


def test_steady_state_degenerate_and_invalid():
    with pytest.raises(DegenerateChainError):
        steady_state(np.eye(3))
    with pytest.raises(ValueError):
        steady_state(np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        steady_state(np.ones((2, 3)) / 3)
    with pytest.raises(ValueError):
        steady_state(np.full((20, 20), 0.05))


def test_perfect_sensing_has_no_mixed_states():
    pi = steady_state(four_state_matrix(FIG1[0], SensingErrorModel(), DualPeriodPolicy(0.6, 0.3)))
    assert pi[1] == pytest.approx(0.0, abs=1e-15)
    assert pi[2] == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(rates, rates, periods, periods, probs, probs)
def test_occupancy_identity(a, b, tf, tb, fa, md):
    # all free time, explored or not, adds up to the stationary free share
    ch = ChannelParams(a, b)
    pol = DualPeriodPolicy(tf, tb)
    pi = steady_state(four_state_matrix(ch, SensingErrorModel(fa, md), pol))
    mu = (pi[0] + pi[2]) * tb + (pi[1] + pi[3]) * tf
    free = (
        pi[3] * expected_free_time_from_free(ch, tf)
        + pi[1] * expected_free_time_from_busy(ch, tf)
        + pi[2] * expected_free_time_from_free(ch, tb)
        + pi[0] * expected_free_time_from_busy(ch, tb)
    )
    assert free / mu == pytest.approx(1 - ch.utilization, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(rates, rates, periods, periods, probs, probs, st.floats(min_value=0.0, max_value=0.5))
def test_metrics_partition_time(a, b, tf, tb, fa, md, s):
    ch = ChannelParams(a, b)
    m = channel_metrics(ch, SensingErrorModel(fa, md), DualPeriodPolicy(tf, tb), s)
    # free time splits into transmitted, overhead and unexplored (incl. false alarms)
    assert m.throughput + m.overhead_fraction + m.unexplored_fraction <= 1 - ch.utilization + 1e-9
    assert 0 <= m.interference_fraction <= ch.utilization + 1e-12
    assert m.throughput >= 0 and m.overhead_fraction >= 0


def test_infeasible_overhead():
    with pytest.raises(InfeasibleOverheadError):
        channel_metrics(FIG1[0], SensingErrorModel(), DualPeriodPolicy(0.1, 0.1), 1.0)
    with pytest.raises(InfeasibleOverheadError):
        network_metrics(FIG1, PERFECT, [DualPeriodPolicy.single(0.02)] * 5, 0.01)


def test_overhead_models_agree_for_single_period():
    pols = [DualPeriodPolicy.single(0.7)] * 5
    assert overhead_sum(FIG1, PERFECT, pols, 0.01, "sensing-rate") == pytest.approx(
        overhead_sum(FIG1, PERFECT, pols, 0.01, "free-period")
    )
    with pytest.raises(ValueError):
        overhead_sum(FIG1, PERFECT, pols, 0.01, "bogus")


def test_zero_sensing_time_means_no_overhead():
    pols = [DualPeriodPolicy(0.6, 0.3)] * 5
    for m in network_metrics(FIG1, PERFECT, pols, 0.0):
        assert m.overhead_fraction == 0.0


def test_fig1_reported_optimum_value():
    # policies reported alongside the five-channel, i_max = u/4 result
    tf = [0.615, 0.68, 0.765, 0.872, 1.015]
    tb = [0.335, 0.319, 0.351, 0.361, 0.393]
    r = network_throughput(FIG1, PERFECT, [DualPeriodPolicy(a, b) for a, b in zip(tf, tb)], 0.01)
    assert r == pytest.approx(3.8068, rel=2e-4)


def test_network_metrics_length_mismatch():
    with pytest.raises(ValueError):
        network_metrics(FIG1, PERFECT[:4], [DualPeriodPolicy.single(1.0)] * 5, 0.01)


# joint chain


C1, C2 = ChannelParams(0.4e-3, 0.6e-3), ChannelParams(0.7e-3, 0.3e-3)


def _joint_2ch_reference(ch1, ch2, d):
    # explicit product construction for two channels, order 00, 01, 10, 11
    m = np.zeros((4, 4))
    for k, (s1, s2) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        t = d[k]
        p1 = prob_free_given_free(ch1, t) if s1 else prob_free_given_busy(ch1, t)
        p2 = prob_free_given_free(ch2, t) if s2 else prob_free_given_busy(ch2, t)
        for j, (r1, r2) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            m[k, j] = (p1 if r1 else 1 - p1) * (p2 if r2 else 1 - p2)
    return m


def test_joint_matrix_two_channel_form():
    d = [10.0, 174.0, 213.0, 650.0]
    m = joint_transition_matrix_2ch(C1, C2, d)
    assert np.allclose(m, _joint_2ch_reference(C1, C2, d), atol=1e-15)
    table = {(0, 0): 10.0, (0, 1): 174.0, (1, 0): 213.0, (1, 1): 650.0}
    assert np.allclose(joint_transition_matrix([C1, C2], table), m)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(rates, rates), min_size=1, max_size=4), st.data())
def test_joint_chain_stationary(pairs, data):
    chs = [ChannelParams(a, b) for a, b in pairs]
    d = data.draw(st.lists(periods, min_size=2 ** len(chs), max_size=2 ** len(chs)))
    m = joint_transition_matrix(chs, d)
    assert np.allclose(m.sum(axis=1), 1.0)
    pi = steady_state(m)
    assert np.allclose(pi @ m, pi, atol=1e-10)


def test_joint_metrics_values():
    table = {(0, 0): 10.0, (0, 1): 129.54, (1, 0): 179.115, (1, 1): 203.503}
    jm = joint_metrics([C1, C2], table, 10.0)
    assert jm.R == pytest.approx(0.8338, rel=1e-3)
    out = two_channel_throughput(C1, C2, table, 10.0)
    assert out["R"] == jm.R and out["mu"] == jm.mu
    # per-channel free time is split into throughput, overhead and unexplored
    for i, ch in enumerate([C1, C2]):
        total = jm.throughput[i] + jm.overhead[i] + jm.unexplored[i]
        assert total == pytest.approx(1 - ch.utilization, rel=1e-9)


def test_joint_table_errors():
    with pytest.raises(KeyError):
        joint_transition_matrix([C1, C2], {(0, 0): 1.0})
    with pytest.raises(ValueError):
        joint_transition_matrix([C1, C2], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        joint_transition_matrix([C1, C2], [1.0, 2.0, 0.0, 3.0])
