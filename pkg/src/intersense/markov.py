"""Embedded Markov-chain evaluation of inter-sensing policies.

Two chains are covered. The per-channel chain tracks (true state, sensed
state) at sensing instants for a dual-period policy; the joint chain tracks
the vector of sensed outcomes when every channel is sensed at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .renewal import (
    ChannelParams,
    expected_free_time_from_busy,
    expected_free_time_from_free,
    prob_free_given_busy,
    prob_free_given_free,
)
from .sensing import SensingErrorModel

__all__ = [
    "DegenerateChainError",
    "InfeasibleOverheadError",
    "DualPeriodPolicy",
    "FourStateDistribution",
    "ChannelMetrics",
    "OVERHEAD_MODELS",
    "four_state_matrix",
    "steady_state",
    "channel_metrics",
    "overhead_sum",
    "network_metrics",
    "network_throughput",
    "joint_transition_matrix",
    "joint_transition_matrix_2ch",
    "joint_metrics",
    "two_channel_throughput",
]

OVERHEAD_MODELS = ("sensing-rate", "free-period")


class DegenerateChainError(ArithmeticError):
    """The chain has no unique stationary distribution."""


class InfeasibleOverheadError(ValueError):
    """Sensing would consume all available time."""


@dataclass(frozen=True)
class DualPeriodPolicy:
    """Inter-sensing times after a free (``t_free``) or busy (``t_busy``) outcome."""

    t_free: float
    t_busy: float

    def __post_init__(self):
        if not (self.t_free > 0 and self.t_busy > 0):
            raise ValueError("inter-sensing times must be positive")

    @classmethod
    def single(cls, period: float) -> "DualPeriodPolicy":
        return cls(period, period)

    def check_floor(self, t_s: float) -> None:
        if self.t_free < t_s or self.t_busy < t_s:
            raise ValueError(f"inter-sensing times must be at least the sensing time {t_s:g}")


@dataclass(frozen=True)
class FourStateDistribution:
    """Stationary law indexed by (true state, sensed state); 1 means free."""

    pi_00: float
    pi_01: float
    pi_10: float
    pi_11: float

    def as_array(self) -> np.ndarray:
        return np.array([self.pi_00, self.pi_01, self.pi_10, self.pi_11])

    @property
    def sensed_free(self) -> float:
        return self.pi_01 + self.pi_11

    @property
    def actually_free(self) -> float:
        return self.pi_10 + self.pi_11


@dataclass(frozen=True)
class ChannelMetrics:
    mean_cycle: float
    throughput: float
    interference_fraction: float
    overhead_fraction: float
    unexplored_fraction: float


def four_state_matrix(ch: ChannelParams, err: SensingErrorModel, pol: DualPeriodPolicy) -> np.ndarray:
    """Transition matrix of the (true, sensed) chain between sensing instants.

    Rows and columns are ordered (busy, sensed busy), (busy, sensed free),
    (free, sensed busy), (free, sensed free). A row whose sensed state is busy
    waits ``t_busy``, otherwise ``t_free``.
    """
    p01_b = prob_free_given_busy(ch, pol.t_busy)
    p01_f = prob_free_given_busy(ch, pol.t_free)
    p11_b = prob_free_given_free(ch, pol.t_busy)
    p11_f = prob_free_given_free(ch, pol.t_free)
    fa, md = err.p_fa, err.p_md
    rows = []
    for p in (p01_b, p01_f, p11_b, p11_f):
        rows.append([(1 - p) * (1 - md), (1 - p) * md, p * fa, p * (1 - fa)])
    return np.array(rows)


def steady_state(m) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix.

    Raises:
        DegenerateChainError: if elimination meets a vanishing pivot, i.e. the
            chain does not have a unique stationary law.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if m.shape[0] > 16:
        raise ValueError("steady_state is meant for chains with at most 16 states")
    if np.any(m < -1e-12) or np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("matrix is not row-stochastic")
    out = np.empty(m.shape[0])
    if not kernels._stationary(np.ascontiguousarray(m), out):
        raise DegenerateChainError("transition matrix has no unique stationary distribution")
    return out


def _pi4(ch, err, pol) -> FourStateDistribution:
    return FourStateDistribution(*steady_state(four_state_matrix(ch, err, pol)))


def overhead_sum(chs, errs, pols, t_s: float, model: str = "sensing-rate") -> float:
    """Network-wide fraction of time the single sensor spends sensing.

    ``sensing-rate`` charges each channel ``t_s / mean_cycle`` (its long-run
    sensing frequency); ``free-period`` charges ``t_s / t_free``, which only
    coincides with it for single-period policies.
    """
    if model == "free-period":
        return float(sum(t_s / p.t_free for p in pols))
    if model != "sensing-rate":
        raise ValueError(f"unknown overhead model {model!r}; expected one of {OVERHEAD_MODELS}")
    total = 0.0
    for ch, err, pol in zip(chs, errs, pols):
        pi = _pi4(ch, err, pol)
        total += t_s / (pi.sensed_free * pol.t_free + (1 - pi.sensed_free) * pol.t_busy)
    return total


def channel_metrics(
    ch: ChannelParams, err: SensingErrorModel, pol: DualPeriodPolicy, overhead_sum: float
) -> ChannelMetrics:
    """Long-run metrics of one channel under a dual-period policy.

    ``overhead_sum`` is the network-wide sensing fraction (see
    :func:`overhead_sum`); it scales down the throughput and is reported as
    the overhead this channel suffers.
    """
    if not 0.0 <= overhead_sum < 1.0:
        raise InfeasibleOverheadError(f"sensing overhead {overhead_sum:g} leaves no time to transmit")
    pi = _pi4(ch, err, pol)
    tf, tb = pol.t_free, pol.t_busy
    mu = (pi.pi_00 + pi.pi_10) * tb + (pi.pi_01 + pi.pi_11) * tf
    d1f = expected_free_time_from_free(ch, tf)
    d0f = expected_free_time_from_busy(ch, tf)
    d1b = expected_free_time_from_free(ch, tb)
    d0b = expected_free_time_from_busy(ch, tb)
    raw = (pi.pi_11 * d1f + pi.pi_01 * d0f) / mu
    return ChannelMetrics(
        mean_cycle=mu,
        throughput=raw * (1.0 - overhead_sum),
        interference_fraction=(pi.pi_11 * (tf - d1f) + pi.pi_01 * (tf - d0f)) / mu,
        overhead_fraction=raw * overhead_sum,
        unexplored_fraction=(pi.pi_00 * d0b + pi.pi_10 * d1b) / mu,
    )


def network_metrics(chs, errs, pols, t_s: float, model: str = "sensing-rate") -> list[ChannelMetrics]:
    if not (len(chs) == len(errs) == len(pols)):
        raise ValueError("channel, error and policy lists must have equal length")
    s = overhead_sum(chs, errs, pols, t_s, model)
    return [channel_metrics(c, e, p, s) for c, e, p in zip(chs, errs, pols)]


def network_throughput(chs, errs, pols, t_s: float, model: str = "sensing-rate") -> float:
    """Aggregate normalised secondary throughput of a set of dual-period policies."""
    return float(sum(m.throughput for m in network_metrics(chs, errs, pols, t_s, model)))


# --------------------------------------------------------------------------
# joint chain over sensed-outcome vectors


def _table_array(durations: Mapping[tuple, float] | Sequence[float], n_ch: int) -> np.ndarray:
    n_st = 2**n_ch
    if isinstance(durations, Mapping):
        out = np.empty(n_st)
        for k, bits in enumerate(kernels.outcome_bits(n_ch)):
            key = tuple(int(b) for b in bits)
            if key not in durations:
                raise KeyError(f"missing duration for outcome {key}")
            out[k] = durations[key]
    else:
        out = np.asarray(durations, dtype=float)
        if out.shape != (n_st,):
            raise ValueError(f"expected {n_st} durations")
    if np.any(out <= 0):
        raise ValueError("durations must be positive")
    return out


def joint_transition_matrix(chs: Sequence[ChannelParams], durations) -> np.ndarray:
    """Transition matrix over sensed-outcome vectors under perfect sensing.

    Outcome ``k`` lists channel 0 as its most significant bit, so for two
    channels the order is (0,0), (0,1), (1,0), (1,1).
    """
    c = np.array([ch.total_rate for ch in chs])
    u = np.array([ch.utilization for ch in chs])
    return kernels.joint_matrices(c, u, _table_array(durations, len(chs))[None, :])[0]


def joint_transition_matrix_2ch(ch1: ChannelParams, ch2: ChannelParams, durations) -> np.ndarray:
    return joint_transition_matrix([ch1, ch2], durations)


@dataclass(frozen=True)
class JointMetrics:
    R: float
    mu: float
    stationary: np.ndarray
    throughput: np.ndarray
    overhead: np.ndarray
    interference: np.ndarray
    unexplored: np.ndarray


def joint_metrics(chs: Sequence[ChannelParams], durations, t_s: float) -> JointMetrics:
    d = _table_array(durations, len(chs))
    pi = steady_state(joint_transition_matrix(chs, d))
    bits = kernels.outcome_bits(len(chs))
    mu = float(pi @ d)
    n = len(chs)
    thr, ovh, intf, unexp = (np.zeros(n) for _ in range(4))
    for i, ch in enumerate(chs):
        d1 = np.array([expected_free_time_from_free(ch, t) for t in d])
        d0 = np.array([expected_free_time_from_busy(ch, t) for t in d])
        on = bits[:, i] == 1
        thr[i] = np.sum((pi * d1 * (1 - t_s / d))[on]) / mu
        ovh[i] = np.sum((pi * d1 * t_s / d)[on]) / mu
        intf[i] = np.sum((pi * (d - d1))[on]) / mu
        unexp[i] = np.sum((pi * d0)[~on]) / mu
    return JointMetrics(
        R=float(thr.sum()),
        mu=mu,
        stationary=pi,
        throughput=thr,
        overhead=ovh,
        interference=intf,
        unexplored=unexp,
    )


def two_channel_throughput(ch1: ChannelParams, ch2: ChannelParams, durations, t_s: float) -> dict:
    """Throughput, per-channel interference and mean cycle of a two-channel table."""
    jm = joint_metrics([ch1, ch2], durations, t_s)
    return {"R": jm.R, "interference": jm.interference.copy(), "mu": jm.mu}
