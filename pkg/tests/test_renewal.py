import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from intersense.renewal import (
    ChannelParams,
    SojournDistribution,
    delta_numeric_oracle,
    expected_free_time_from_busy,
    expected_free_time_from_free,
    prob_free_given_busy,
    prob_free_given_free,
    utilization,
)

rates = st.floats(min_value=1e-3, max_value=50.0, allow_nan=False)
times = st.floats(min_value=0.0, max_value=1e3, allow_nan=False)


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(0.0, 1.0)
    with pytest.raises(ValueError):
        ChannelParams(1.0, float("inf"))
    with pytest.raises(ValueError):
        ChannelParams(-1.0, 1.0)


def test_utilization_and_means():
    ch = ChannelParams(0.2, 1.0)
    assert utilization(ch) == pytest.approx(0.2 / 1.2)
    assert ch.mean_free == pytest.approx(5.0)
    assert ch.mean_busy == pytest.approx(1.0)
    # busy share of the mean cycle equals u
    assert ch.mean_busy / ch.mean_cycle == pytest.approx(ch.utilization)


def test_zero_interval():
    ch = ChannelParams(0.3, 0.7)
    assert expected_free_time_from_free(ch, 0.0) == 0.0
    assert expected_free_time_from_busy(ch, 0.0) == 0.0
    assert prob_free_given_free(ch, 0.0) == 1.0
    assert prob_free_given_busy(ch, 0.0) == 0.0


def test_negative_time_rejected():
    ch = ChannelParams(0.3, 0.7)
    for f in (expected_free_time_from_free, expected_free_time_from_busy, prob_free_given_free, prob_free_given_busy):
        with pytest.raises(ValueError):
            f(ch, -1.0)


def test_long_interval_limit():
    ch = ChannelParams(0.3, 0.7)
    t = 1e6
    assert expected_free_time_from_free(ch, t) / t == pytest.approx(1 - ch.utilization, rel=1e-5)
    assert expected_free_time_from_busy(ch, t) / t == pytest.approx(1 - ch.utilization, rel=1e-5)
    assert prob_free_given_busy(ch, 1e3) == pytest.approx(1 - ch.utilization)


def test_small_time_series_branch_is_continuous():
    ch = ChannelParams(2.0, 3.0)
    t = np.array([1e-10, 1.999e-9, 2.001e-9, 1e-7])
    d0 = expected_free_time_from_busy(ch, t)
    # leading order (1-u) c t^2 / 2
    assert np.allclose(d0, (1 - ch.utilization) * ch.total_rate * t**2 / 2, rtol=1e-6)
    d1 = expected_free_time_from_free(ch, t)
    assert np.all(d1 <= t) and np.allclose(d1, t, rtol=1e-6)


def test_vector_input_returns_array():
    ch = ChannelParams(0.5, 0.5)
    out = expected_free_time_from_free(ch, [0.1, 1.0, 10.0])
    assert isinstance(out, np.ndarray) and out.shape == (3,)
    assert isinstance(expected_free_time_from_free(ch, 1.0), float)


@settings(max_examples=200, deadline=None)
@given(rates, rates, times)
def test_delta_properties(a, b, t):
    ch = ChannelParams(a, b)
    d1 = expected_free_time_from_free(ch, t)
    d0 = expected_free_time_from_busy(ch, t)
    tol = 1e-9 * max(t, 1.0)
    assert -tol <= d0 <= d1 + tol
    assert d1 <= t + tol
    # stationary mixture of the two starts accrues (1-u) t free time
    u = ch.utilization
    assert (1 - u) * d1 + u * d0 == pytest.approx((1 - u) * t, rel=1e-9, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(rates, rates, times)
def test_transition_probabilities(a, b, t):
    ch = ChannelParams(a, b)
    p11 = prob_free_given_free(ch, t)
    p01 = prob_free_given_busy(ch, t)
    assert 0.0 <= p01 <= p11 <= 1.0 + 1e-15
    # stationary law is preserved by one step
    u = ch.utilization
    assert (1 - u) * p11 + u * p01 == pytest.approx(1 - u, rel=1e-12, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(rates, rates, st.floats(min_value=1e-3, max_value=100.0))
def test_delta_derivative_is_transition_probability(a, b, t):
    ch = ChannelParams(a, b)
    h = 1e-6 * t
    d1 = (expected_free_time_from_free(ch, t + h) - expected_free_time_from_free(ch, t - h)) / (2 * h)
    d0 = (expected_free_time_from_busy(ch, t + h) - expected_free_time_from_busy(ch, t - h)) / (2 * h)
    assert d1 == pytest.approx(prob_free_given_free(ch, t), abs=1e-5)
    assert d0 == pytest.approx(prob_free_given_busy(ch, t), abs=1e-5)


@pytest.mark.parametrize("lam_f,lam_b,t", [(0.2, 1.0, 0.7), (1.0, 1.0, 3.0), (0.5, 2.0, 5.0)])
def test_oracle_matches_closed_form(lam_f, lam_b, t):
    ch = ChannelParams(lam_f, lam_b)
    fd = SojournDistribution.exponential(lam_f)
    bd = SojournDistribution.exponential(lam_b)
    assert delta_numeric_oracle(fd, bd, t, "free-equilibrium") == pytest.approx(
        expected_free_time_from_free(ch, t), abs=1e-6
    )
    assert delta_numeric_oracle(fd, bd, t, "busy-equilibrium") == pytest.approx(
        expected_free_time_from_busy(ch, t), abs=1e-6
    )


def test_oracle_fresh_start_exponential_equals_equilibrium():
    # memoryless sojourns: fresh and equilibrium starts coincide
    fd, bd = SojournDistribution.exponential(0.4), SojournDistribution.exponential(0.9)
    a = delta_numeric_oracle(fd, bd, 2.0, "free-fresh")
    b = delta_numeric_oracle(fd, bd, 2.0, "free-equilibrium")
    assert a == pytest.approx(b, abs=1e-6)


def test_oracle_non_exponential_long_run_rate():
    # gamma sojourns: free share still tends to E[free] / E[cycle]
    fd = SojournDistribution.from_scipy(stats.gamma(2.0, scale=1.0))
    bd = SojournDistribution.from_scipy(stats.gamma(3.0, scale=0.5))
    t = 60.0
    d = delta_numeric_oracle(fd, bd, t, "free-equilibrium", step=0.01)
    assert d / t == pytest.approx(2.0 / 3.5, rel=2e-2)
    assert 0 < delta_numeric_oracle(fd, bd, 1.0, "busy-fresh", step=0.005) < 1.0


def test_oracle_rejects_bad_inputs():
    fd = SojournDistribution.exponential(1.0)
    with pytest.raises(ValueError):
        delta_numeric_oracle(fd, fd, 1.0, "sideways")
    with pytest.raises(ValueError):
        delta_numeric_oracle(fd, fd, -1.0, "free-fresh")
    bad = SojournDistribution(pdf=lambda x: 2 * np.exp(-np.asarray(x)), cdf=fd.cdf, mean=1.0)
    with pytest.raises(ValueError):
        delta_numeric_oracle(bad, fd, 1.0, "free-fresh")
    assert delta_numeric_oracle(fd, fd, 0.0, "busy-equilibrium") == 0.0


def test_exponential_distribution_validates():
    SojournDistribution.exponential(3.0).validate()
    assert math.isclose(SojournDistribution.exponential(4.0).mean, 0.25)
