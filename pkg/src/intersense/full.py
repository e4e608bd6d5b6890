"""Outcome-dependent access durations when every channel is sensed at once.

After each joint sensing event the secondary user holds the sensed-free
channels for a duration chosen from the sensed-outcome vector. Two ways of
picking that table are provided: a myopic per-outcome rule and, for two
channels, a search on the long-run throughput of the joint chain.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .kernels import joint_grid, outcome_bits
from .markov import joint_metrics
from .optimize import GridSpec, InfeasibleError
from .renewal import ChannelParams, expected_free_time_from_busy, expected_free_time_from_free
from .sensing import SensingErrorModel

__all__ = [
    "OutcomeDurationTable",
    "MyopicChoice",
    "myopic_objective",
    "myopic_interference",
    "myopic_duration",
    "myopic_table",
    "TwoChannelOptimum",
    "optimal_two_channel",
]


class OutcomeDurationTable(Mapping):
    """Access duration for every sensed-outcome vector."""

    def __init__(self, durations: Mapping[tuple, float], t_s: float | None = None):
        keys = list(durations)
        if not keys:
            raise ValueError("empty duration table")
        n = len(keys[0])
        expected = {tuple(int(b) for b in row) for row in outcome_bits(n)}
        got = {tuple(int(b) for b in k) for k in keys}
        if got != expected:
            missing = sorted(expected - got)
            raise ValueError(f"duration table must cover all {2**n} outcomes; missing {missing}")
        self._d = {tuple(int(b) for b in k): float(v) for k, v in durations.items()}
        self.n_channels = n
        if t_s is not None:
            low = [k for k, v in self._d.items() if v < t_s * (1 - 1e-12)]
            if low:
                raise ValueError(f"durations below the sensing time for outcomes {low}")

    @classmethod
    def from_array(cls, values: Sequence[float], n_channels: int, t_s: float | None = None):
        keys = [tuple(int(b) for b in row) for row in outcome_bits(n_channels)]
        return cls(dict(zip(keys, values)), t_s)

    def as_array(self) -> np.ndarray:
        return np.array([self._d[tuple(int(b) for b in row)] for row in outcome_bits(self.n_channels)])

    def __getitem__(self, key) -> float:
        return self._d[tuple(int(b) for b in key)]

    def __iter__(self) -> Iterator[tuple]:
        return (tuple(int(b) for b in row) for row in outcome_bits(self.n_channels))

    def __len__(self) -> int:
        return len(self._d)

    def __repr__(self):
        body = ", ".join(f"{''.join(map(str, k))}: {v:.6g}" for k, v in self.items())
        return f"OutcomeDurationTable({{{body}}})"


def _terms(ch: ChannelParams, err: SensingErrorModel, t):
    d1 = expected_free_time_from_free(ch, t)
    d0 = expected_free_time_from_busy(ch, t)
    interference = (1 - err.p_fa) * (t - d1) + err.p_md * (t - d0)
    lost = (1 - err.p_md) * d0 + err.p_fa * d1
    return d1, d0, interference, lost


def myopic_interference(ch, err, t):
    """Interference time accumulated over one access of length ``t``."""
    return _terms(ch, err, np.asarray(t, dtype=float))[2]


def myopic_objective(chs, errs, omega, t_s: float, t):
    """Immediate normalised reward of holding outcome ``omega`` for ``t``.

    Sensed-free channels earn their transmission time net of interference and
    sensing interruption; sensed-busy channels are charged the opportunity
    they leave undiscovered.
    """
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for ch, err, s in zip(chs, errs, omega):
        d1, d0, interference, lost = _terms(ch, err, t)
        if s:
            overhead = ((1 - err.p_fa) * d1 + err.p_md * d0) * t_s / t
            total = total + (t - interference - overhead) / t
        else:
            total = total - lost / t
    return total


@dataclass(frozen=True)
class MyopicChoice:
    duration: float
    objective: float
    feasible: bool


def myopic_duration(chs, errs, omega, t_s: float, i_max: Sequence[float], grid: GridSpec | None = None) -> MyopicChoice:
    """Best access duration for one sensed outcome, by refined 1-D grid search.

    Every sensed-free channel must keep its interference time, as a fraction
    of the access duration, below its limit. When no duration qualifies, the
    sensing time itself is returned (sense again at once) with
    ``feasible=False``.
    """
    if len(omega) != len(chs):
        raise ValueError("outcome vector length must equal the number of channels")
    if grid is None:
        grid = GridSpec.default(chs, t_s)
    grid.check_floor(t_s)

    def score(t):
        obj = myopic_objective(chs, errs, omega, t_s, t)
        ok = np.ones(t.shape, dtype=bool)
        for ch, err, s, im in zip(chs, errs, omega, i_max):
            if s:
                ok &= myopic_interference(ch, err, t) / t <= im
        return np.where(ok, obj, -np.inf)

    t = grid.coarse()
    sc = score(t)
    if not np.isfinite(sc).any():
        return MyopicChoice(grid.t_min, float(myopic_objective(chs, errs, omega, t_s, np.array([grid.t_min]))[0]), False)
    k = int(np.argmax(sc))
    best_t, best_s = float(t[k]), float(sc[k])
    for _, offsets in grid.levels():
        t = grid.local(best_t, offsets)
        sc = score(t)
        k = int(np.argmax(sc))
        if sc[k] > best_s:
            best_t, best_s = float(t[k]), float(sc[k])
    return MyopicChoice(best_t, best_s, True)


def myopic_table(chs, errs, t_s, i_max, grid=None) -> tuple[OutcomeDurationTable, dict]:
    """Myopic duration for every outcome; also returns the per-outcome choices."""
    choices = {}
    for row in outcome_bits(len(chs)):
        omega = tuple(int(b) for b in row)
        choices[omega] = myopic_duration(chs, errs, omega, t_s, i_max, grid)
    table = OutcomeDurationTable({k: v.duration for k, v in choices.items()})
    return table, choices


@dataclass(frozen=True)
class TwoChannelOptimum:
    table: OutcomeDurationTable
    R: float
    interference: np.ndarray
    mu: float


def optimal_two_channel(
    ch1: ChannelParams,
    ch2: ChannelParams,
    t_s: float,
    i_max: Sequence[float],
    grid: GridSpec | None = None,
) -> TwoChannelOptimum:
    """Maximise long-run two-channel throughput over the outcome-duration table.

    The all-busy duration is pinned to the sensing time: nothing is
    transmitted during it, so returning to sense sooner is never worse. The
    remaining three durations are searched on a cubic grid with local
    refinement, rejecting tables that violate either interference limit.
    Perfect sensing is assumed.
    """
    chs = [ch1, ch2]
    if grid is None:
        t_max = 20.0 / min(ch.total_rate for ch in chs)
        grid = GridSpec(t_s, t_max, (t_max - t_s) / 40, refine_levels=3, refine_shrink=0.25)
    grid.check_floor(t_s)
    c = np.array([ch.total_rate for ch in chs])
    u = np.array([ch.utilization for ch in chs])
    lim = np.asarray(i_max, dtype=float)

    def search(a, b, d):
        mesh = [m.ravel() for m in np.meshgrid(a, b, d, indexing="ij")]
        table = np.column_stack([np.full(mesh[0].shape, t_s)] + mesh)
        thr, _, intf, _, _, ok = joint_grid(c, u, table, t_s)
        feasible = ok & np.all(intf <= lim, axis=1)
        r = np.where(feasible, thr.sum(axis=1), -np.inf)
        k = int(np.argmax(r))
        return table[k, 1:], float(r[k])

    g = grid.coarse()
    x, best = search(g, g, g)
    if not np.isfinite(best):
        raise InfeasibleError("no duration table satisfies both interference limits")
    for _, offsets in grid.levels():
        cand, r = search(*(grid.local(v, offsets) for v in x))
        if r > best:
            x, best = cand, r
    table = OutcomeDurationTable.from_array([t_s, *x], 2)
    jm = joint_metrics(chs, table, t_s)
    return TwoChannelOptimum(table=table, R=jm.R, interference=jm.interference, mu=jm.mu)
