"""Single-channel access: constraint-saturating access durations and search order.

A user that can occupy one channel at a time senses channels one by one until
it finds a free one, then transmits on it for a fixed duration chosen so that
the expected share of that access overlapping primary activity equals the
tolerated limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import bisect

from .renewal import ChannelParams, prob_free_given_busy, prob_free_given_free
from .sensing import PERFECT_SENSING, SensingErrorModel
from .simulator import PerformanceReport, SimConfig, simulate_limited_access

__all__ = [
    "UnboundedAccessError",
    "ChannelBelief",
    "access_interference",
    "access_duration_for_constraint",
    "channel_rank",
    "next_channel_order",
    "run_limited_access_policy",
]


class UnboundedAccessError(ValueError):
    """The limit is never reached, however long the access."""


@dataclass(frozen=True)
class ChannelBelief:
    """Most recent sensing result of a channel; ``last_sensed_free`` is True for free."""

    last_sensed_free: bool
    last_sense_time: float


def _excess(c, t):
    # t + (exp(-c t) - 1)/c without cancellation for small c t
    x = c * t
    if x < 1e-4:
        return t * x * (0.5 - x / 6.0 + x * x / 24.0)
    return t + math.expm1(-x) / c


def access_interference(ch: ChannelParams, t: float, err: SensingErrorModel = PERFECT_SENSING) -> float:
    """Expected fraction of an access of length ``t`` that overlaps primary activity.

    The access starts right after a free outcome. With perfect sensing this is
    ``u (1 + (exp(-c t) - 1) / (c t))``, rising from 0 to ``u``.
    """
    if not t > 0:
        raise ValueError("access duration must be positive")
    u = ch.utilization
    g = _excess(ch.total_rate, t)
    busy_after_free = u * g  # t - delta1(t)
    busy_after_busy = t - (1 - u) * g  # t - delta0(t)
    return ((1 - err.p_fa) * busy_after_free + err.p_md * busy_after_busy) / t


def _limits(ch, err):
    lo = err.p_md
    hi = (1 - err.p_fa + err.p_md) * ch.utilization
    return lo, hi


def _check_monotone(ch, err):
    t = np.geomspace(1e-4, 1e4, 2001) / ch.total_rate
    v = np.array([access_interference(ch, x, err) for x in t])
    if np.any(np.diff(v) <= 0):
        raise ValueError("access interference is not increasing in the duration for these error rates")


def access_duration_for_constraint(
    ch: ChannelParams,
    i_max: float,
    err: SensingErrorModel = PERFECT_SENSING,
    cap: float | None = None,
) -> float:
    """Longest access duration whose expected interference share equals ``i_max``.

    Solved by bisection on a bracket whose upper end doubles until the limit
    is exceeded.

    Raises:
        UnboundedAccessError: ``i_max`` is at or above the long-access limit
            (``u`` for perfect sensing) and no ``cap`` was given.
        ValueError: ``i_max`` is not positive or cannot be met at all.
    """
    if not i_max > 0:
        raise ValueError("interference limit must be positive")
    lo_lim, hi_lim = _limits(ch, err)
    if i_max >= hi_lim:
        if cap is not None:
            return float(cap)
        raise UnboundedAccessError(
            f"limit {i_max:g} is at or above the supremum {hi_lim:g}; access duration is unbounded"
        )
    if i_max <= lo_lim:
        raise ValueError(f"limit {i_max:g} is below the misdetection floor {lo_lim:g}")
    if not err.perfect:
        _check_monotone(ch, err)

    def f(t):
        return access_interference(ch, t, err) - i_max

    lo = 1e-6 / ch.total_rate
    while f(lo) >= 0:
        lo *= 0.5
    hi = 1.0 / ch.total_rate
    while f(hi) <= 0:
        hi *= 2.0
    t = bisect(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
    if cap is not None:
        t = min(t, float(cap))
    return float(t)


def channel_rank(ch: ChannelParams, belief: ChannelBelief, now: float, t_s: float) -> float:
    """Probability the channel is free now, per unit of sensing time."""
    if not t_s > 0:
        raise ValueError("sensing time must be positive")
    elapsed = now - belief.last_sense_time
    if elapsed < 0:
        raise ValueError("belief is from the future")
    p = prob_free_given_free(ch, elapsed) if belief.last_sensed_free else prob_free_given_busy(ch, elapsed)
    return float(p) / t_s


def next_channel_order(beliefs: Sequence[ChannelBelief], chs: Sequence[ChannelParams], now: float, t_s: float) -> list[int]:
    """Channel indices by descending rank; equal ranks keep ascending index."""
    if len(beliefs) != len(chs):
        raise ValueError("one belief per channel is required")
    g = [channel_rank(ch, b, now, t_s) for ch, b in zip(chs, beliefs)]
    return sorted(range(len(chs)), key=lambda i: -g[i])


def run_limited_access_policy(
    chs: Sequence[ChannelParams],
    i_max: Sequence[float],
    t_s: float,
    horizon: float,
    seed: int = 0,
    *,
    runs: int = 20,
    warmup: float = 0.0,
    cap: float | None = None,
    jobs: int = 1,
) -> PerformanceReport:
    """Simulate the search-then-access loop with constraint-saturating durations.

    The report's extras carry ``search_delay`` (mean time from the end of an
    access to the next free channel found) and ``windows_on_busy`` (accesses
    that began on a busy channel; always zero here since sensing is exact).
    """
    t_access = [access_duration_for_constraint(ch, im, cap=cap) for ch, im in zip(chs, i_max)]
    cfg = SimConfig(horizon=horizon, seed=seed, warmup=warmup, runs=runs, jobs=jobs)
    return simulate_limited_access(chs, t_access, t_s, cfg)
