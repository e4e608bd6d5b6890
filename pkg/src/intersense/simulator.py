"""Monte-Carlo validation of the analytic policy evaluations.

Primary activity is drawn as an alternating renewal trace per channel. A
sequential event loop (see :mod:`intersense.kernels`) then plays one of the
access schemes against the traces and records two interval lists: the access
windows of each channel (periods the user treats the channel as sensed free)
and the sensing pauses during which nothing is transmitted. Time accounting
is done afterwards on those intervals.

Timing conventions:

* a sensing action occupies ``t_s`` and its outcome reflects the channel
  state at the end of that action; an access window starts at that instant;
* the next outcome instant of a channel is ``t_free``/``t_busy`` after the
  previous one, so the sensing action itself falls at the end of the current
  window. A busy sensor delays it (back-to-back, ascending channel index).

Per channel, the measured interval ``[warmup, horizon]`` is split into five
buckets that always sum to its length:

* ``throughput``: free, inside a window, not paused;
* ``overhead``: free, inside a window, paused for sensing;
* ``interference``: busy inside a window (the user is committed to the
  channel; ``collision`` excludes the paused part);
* ``unexplored``: free outside any window;
* ``idle``: busy outside any window.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .markov import DualPeriodPolicy
from .renewal import ChannelParams
from .sensing import SensingErrorModel

__all__ = [
    "RenewalTrace",
    "SimConfig",
    "PerformanceReport",
    "generate_trace",
    "simulate_dual_period",
    "simulate_full",
    "simulate_limited_access",
    "export_traces_csv",
    "METRICS",
]

METRICS = (
    "throughput",
    "overhead",
    "interference",
    "unexplored",
    "idle",
    "collision",
    "access",
    "interference_per_access",
)


@dataclass(frozen=True)
class RenewalTrace:
    """Busy/free switching times of one channel on ``[0, horizon]``.

    ``initial_state`` is 1 for free, 0 for busy; the state flips at each entry
    of ``transition_times``.
    """

    channel_index: int
    transition_times: np.ndarray
    initial_state: int
    horizon: float

    def __post_init__(self):
        t = self.transition_times
        if t.size and (np.any(np.diff(t) <= 0) or t[0] <= 0 or t[-1] >= self.horizon):
            raise ValueError("transition times must be strictly increasing inside (0, horizon)")
        if self.initial_state not in (0, 1):
            raise ValueError("initial_state must be 0 (busy) or 1 (free)")

    def state_at(self, t):
        k = np.searchsorted(self.transition_times, t, side="right")
        return (self.initial_state + k) % 2

    def _knots(self):
        knots = np.concatenate([[0.0], self.transition_times, [self.horizon]])
        seg = np.diff(knots)
        free = (self.initial_state + np.arange(seg.size)) % 2 == 1
        cum = np.concatenate([[0.0], np.cumsum(np.where(free, seg, 0.0))])
        return knots, cum

    def free_time_until(self, t):
        """Cumulative free time on ``[0, t]`` (vectorised)."""
        knots, cum = self._knots()
        return np.interp(t, knots, cum)


def generate_trace(ch: ChannelParams, horizon: float, seed, channel_index: int = 0) -> RenewalTrace:
    """Draw a stationary alternating trace.

    The initial state is free with probability ``1 - u``; with exponential
    sojourns the residual of the first period has the full sojourn law.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    init = int(rng.random() >= ch.utilization)
    first, second = (ch.mean_free, ch.mean_busy) if init == 1 else (ch.mean_busy, ch.mean_free)
    chunk = int(horizon / ch.mean_cycle + 4 * math.sqrt(horizon / ch.mean_cycle) + 16)
    times = []
    t = 0.0
    while t < horizon:
        d = np.empty(2 * chunk)
        d[0::2] = rng.exponential(first, chunk)
        d[1::2] = rng.exponential(second, chunk)
        c = t + np.cumsum(d)
        times.append(c)
        t = c[-1]
    # parity is preserved because every chunk has even length
    allt = np.concatenate(times)
    allt = allt[allt < horizon]
    return RenewalTrace(channel_index, allt, init, float(horizon))


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    seed: int = 0
    warmup: float = 0.0
    runs: int = 20
    jobs: int = 1

    def __post_init__(self):
        if not self.horizon > self.warmup >= 0:
            raise ValueError("need horizon > warmup >= 0")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")

    @classmethod
    def for_channels(cls, chs: Sequence[ChannelParams], cycles: float = 1000, warmup_cycles: float = 20, **kw):
        """Horizon and warmup measured in mean busy/free cycles of the slowest channel."""
        cyc = max(ch.mean_cycle for ch in chs)
        return cls(horizon=cycles * cyc, warmup=warmup_cycles * cyc, **kw)


@dataclass
class PerformanceReport:
    """Per-run empirical metrics; ``metrics[name]`` has shape ``(runs, channels)``."""

    metrics: dict[str, np.ndarray]
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def runs(self) -> int:
        return next(iter(self.metrics.values())).shape[0]

    @property
    def n_channels(self) -> int:
        return next(iter(self.metrics.values())).shape[1]

    def mean(self, name: str) -> np.ndarray:
        return np.mean(self._get(name), axis=0)

    def stderr(self, name: str) -> np.ndarray:
        x = self._get(name)
        if x.shape[0] < 2:
            return np.full(x.shape[1:], np.nan)
        return np.std(x, axis=0, ddof=1) / math.sqrt(x.shape[0])

    def _get(self, name):
        if name in self.metrics:
            return self.metrics[name]
        return self.extras[name]

    @property
    def per_run_R(self) -> np.ndarray:
        return self.metrics["throughput"].sum(axis=1)

    @property
    def R(self) -> float:
        return float(self.per_run_R.mean())

    @property
    def R_stderr(self) -> float:
        r = self.per_run_R
        return float(np.std(r, ddof=1) / math.sqrt(r.size)) if r.size > 1 else float("nan")


# --------------------------------------------------------------------------
# run plumbing


def _streams(seed: int, runs: int, n_ch: int):
    """One generator per (run, channel), independent of how runs are scheduled."""
    return [
        [np.random.default_rng(s) for s in run_ss.spawn(n_ch)]
        for run_ss in np.random.SeedSequence(seed).spawn(runs)
    ]


def _pack(traces):
    offsets = np.zeros(len(traces) + 1, dtype=np.int64)
    for i, tr in enumerate(traces):
        offsets[i + 1] = offsets[i] + tr.transition_times.size
    trans = np.concatenate([tr.transition_times for tr in traces]) if traces else np.empty(0)
    init = np.array([tr.initial_state for tr in traces], dtype=np.int64)
    return np.ascontiguousarray(trans, dtype=np.float64), offsets, init


def _uniforms(rngs, counts):
    uoff = np.zeros(len(counts) + 1, dtype=np.int64)
    uoff[1:] = np.cumsum(counts)
    unif = np.concatenate([rng.random(int(n)) for rng, n in zip(rngs, counts)])
    return unif, uoff


def _account(traces, w_chan, w_start, w_end, p_start, p_end, warmup, horizon):
    n_ch = len(traces)
    span = horizon - warmup
    out = {name: np.zeros(n_ch) for name in METRICS}
    ps = np.clip(p_start, warmup, horizon)
    pe = np.clip(p_end, warmup, horizon)
    keep = pe > ps
    ps, pe = np.ascontiguousarray(ps[keep]), np.ascontiguousarray(pe[keep])
    for i, tr in enumerate(traces):
        sel = w_chan == i
        ws = np.ascontiguousarray(np.clip(w_start[sel], warmup, horizon))
        we = np.ascontiguousarray(np.clip(w_end[sel], warmup, horizon))
        buf_s = np.empty(ws.size + ps.size)
        buf_e = np.empty(ws.size + ps.size)
        k = kernels.intersect_intervals(ws, we, ps, pe, buf_s, buf_e)
        xs, xe = buf_s[:k], buf_e[:k]
        free_total = tr.free_time_until(horizon) - tr.free_time_until(warmup)
        w_len = np.sum(we - ws)
        w_free = np.sum(tr.free_time_until(we) - tr.free_time_until(ws))
        x_len = np.sum(xe - xs)
        x_free = np.sum(tr.free_time_until(xe) - tr.free_time_until(xs))
        out["throughput"][i] = (w_free - x_free) / span
        out["overhead"][i] = x_free / span
        out["interference"][i] = (w_len - w_free) / span
        out["collision"][i] = (w_len - w_free - (x_len - x_free)) / span
        out["unexplored"][i] = (free_total - w_free) / span
        out["idle"][i] = (span - free_total - (w_len - w_free)) / span
        out["access"][i] = w_len / span
        out["interference_per_access"][i] = (w_len - w_free) / w_len if w_len > 0 else np.nan
    sensing = float(np.sum(pe - ps)) / span
    return out, {"sensing_fraction": sensing}


def _collect(results):
    metrics = {name: np.array([r[0][name] for r in results]) for name in METRICS}
    extra_keys = results[0][1].keys()
    extras = {k: np.array([r[1][k] for r in results]) for k in extra_keys}
    return PerformanceReport(metrics, extras)


def _map_runs(fn, jobs, run_args):
    if jobs > 1 and len(run_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, *zip(*run_args)))
    return [fn(*a) for a in run_args]


# --------------------------------------------------------------------------
# schemes


def _one_dual(chs, errs, t_free, t_busy, t_s, horizon, warmup, rngs):
    traces = [generate_trace(ch, horizon, rng, i) for i, (ch, rng) in enumerate(zip(chs, rngs))]
    trans, offsets, init = _pack(traces)
    n_ch = len(chs)
    cap = [int(math.ceil(horizon / min(t_free[i], t_busy[i]))) + 3 for i in range(n_ch)]
    unif, uoff = _uniforms(rngs, cap)
    total = int(sum(cap))
    p_start, p_end, w_start, w_end = (np.empty(total + n_ch) for _ in range(4))
    w_chan = np.empty(total + n_ch, dtype=np.int64)
    n_sense = np.zeros(n_ch, dtype=np.int64)
    n_free = np.zeros(n_ch, dtype=np.int64)
    n_p, n_w = kernels.dual_period_events(
        trans, offsets, init, np.asarray(t_free, float), np.asarray(t_busy, float), float(t_s),
        np.array([e.p_fa for e in errs]), np.array([e.p_md for e in errs]), unif, uoff, float(horizon),
        p_start, p_end, w_chan, w_start, w_end, n_sense, n_free,
    )
    return _account(traces, w_chan[:n_w], w_start[:n_w], w_end[:n_w], p_start[:n_p], p_end[:n_p], warmup, horizon)


def simulate_dual_period(
    chs: Sequence[ChannelParams],
    errs: Sequence[SensingErrorModel],
    pols: Sequence[DualPeriodPolicy],
    t_s: float,
    cfg: SimConfig,
) -> PerformanceReport:
    """Simulate per-channel dual-period sensing with one shared sensor."""
    if not (len(chs) == len(errs) == len(pols)):
        raise ValueError("channel, error and policy lists must have equal length")
    t_free = np.array([p.t_free for p in pols])
    t_busy = np.array([p.t_busy for p in pols])
    if t_s < 0 or np.any(t_free < t_s) or np.any(t_busy < t_s) or np.any(np.minimum(t_free, t_busy) <= 0):
        raise ValueError("inter-sensing times must be positive and at least the sensing time")
    args = [
        (chs, errs, t_free, t_busy, t_s, cfg.horizon, cfg.warmup, rngs)
        for rngs in _streams(cfg.seed, cfg.runs, len(chs))
    ]
    return _collect(_map_runs(_one_dual, cfg.jobs, args))


def _one_full(chs, errs, durations, t_s, horizon, warmup, rngs):
    traces = [generate_trace(ch, horizon, rng, i) for i, (ch, rng) in enumerate(zip(chs, rngs))]
    trans, offsets, init = _pack(traces)
    n_ch = len(chs)
    n_ev = int(math.ceil(horizon / durations.min())) + 3
    unif, uoff = _uniforms(rngs, [n_ev] * n_ch)
    p_start, p_end = np.empty(n_ev), np.empty(n_ev)
    w_start, w_end = np.empty(n_ev * n_ch + n_ch), np.empty(n_ev * n_ch + n_ch)
    w_chan = np.empty(n_ev * n_ch + n_ch, dtype=np.int64)
    n_sense = np.zeros(n_ch, dtype=np.int64)
    n_free = np.zeros(n_ch, dtype=np.int64)
    outcome_count = np.zeros(2**n_ch, dtype=np.int64)
    n_p, n_w = kernels.full_scheme_events(
        trans, offsets, init, durations, float(t_s),
        np.array([e.p_fa for e in errs]), np.array([e.p_md for e in errs]), unif, uoff, float(horizon),
        p_start, p_end, w_chan, w_start, w_end, n_sense, n_free, outcome_count,
    )
    out, extra = _account(traces, w_chan[:n_w], w_start[:n_w], w_end[:n_w], p_start[:n_p], p_end[:n_p], warmup, horizon)
    extra["outcome_share"] = outcome_count / max(outcome_count.sum(), 1)
    return out, extra


def simulate_full(chs, errs, table, t_s: float, cfg: SimConfig) -> PerformanceReport:
    """Simulate joint sensing of all channels with an outcome-duration table."""
    from .full import OutcomeDurationTable

    if not isinstance(table, OutcomeDurationTable):
        table = OutcomeDurationTable(table)
    durations = table.as_array()
    if np.any(durations < t_s) or np.any(durations <= 0):
        raise ValueError("every duration must be positive and at least the sensing time")
    args = [
        (chs, errs, durations, t_s, cfg.horizon, cfg.warmup, rngs)
        for rngs in _streams(cfg.seed, cfg.runs, len(chs))
    ]
    return _collect(_map_runs(_one_full, cfg.jobs, args))


def _one_access(chs, t_access, t_s, horizon, warmup, rngs):
    traces = [generate_trace(ch, horizon, rng, i) for i, (ch, rng) in enumerate(zip(chs, rngs))]
    trans, offsets, init = _pack(traces)
    n_ch = len(chs)
    n_ev = int(math.ceil(horizon / t_s)) + 3
    p_start, p_end, w_start, w_end, delays = (np.empty(n_ev) for _ in range(5))
    w_chan = np.empty(n_ev, dtype=np.int64)
    n_sense = np.zeros(n_ch, dtype=np.int64)
    n_free = np.zeros(n_ch, dtype=np.int64)
    c = np.array([ch.total_rate for ch in chs])
    u = np.array([ch.utilization for ch in chs])
    n_p, n_w, n_d = kernels.limited_access_events(
        trans, offsets, init, c, u, np.asarray(t_access, float), float(t_s), float(horizon),
        p_start, p_end, w_chan, w_start, w_end, n_sense, n_free, delays,
    )
    out, extra = _account(traces, w_chan[:n_w], w_start[:n_w], w_end[:n_w], p_start[:n_p], p_end[:n_p], warmup, horizon)
    extra["search_delay"] = float(delays[:n_d].mean()) if n_d else float("nan")
    extra["windows_on_busy"] = float(sum(
        np.sum(traces[i].state_at(w_start[:n_w][w_chan[:n_w] == i]) == 0) for i in range(n_ch)
    ))
    return out, extra


def simulate_limited_access(chs, t_access, t_s: float, cfg: SimConfig) -> PerformanceReport:
    """Simulate single-channel access with rank-ordered sequential search.

    The user senses channels one at a time (highest rank first, rank
    recomputed after every attempt) until one is free, then transmits on it
    for that channel's access duration. Sensing is error-free.
    """
    t_access = np.asarray(t_access, dtype=float)
    if t_s <= 0:
        raise ValueError("limited-access search needs a positive sensing time")
    if t_access.shape != (len(chs),) or np.any(~np.isfinite(t_access)) or np.any(t_access <= 0):
        raise ValueError("access durations must be positive and finite, one per channel")
    args = [(chs, t_access, t_s, cfg.horizon, cfg.warmup, rngs) for rngs in _streams(cfg.seed, cfg.runs, len(chs))]
    return _collect(_map_runs(_one_access, cfg.jobs, args))


def export_traces_csv(traces: Sequence[RenewalTrace], path) -> None:
    """Write switching times as ``channel,initial_state,index,time`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "initial_state", "index", "time"])
        for tr in traces:
            for k, t in enumerate(tr.transition_times):
                w.writerow([tr.channel_index, tr.initial_state, k, repr(float(t))])
