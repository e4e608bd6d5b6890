"""Throughput-maximising inter-sensing periods for a single shared sensor.

Channels interact only through the sensing overhead, which is a scalar sum of
per-channel terms. That makes coordinate descent natural: each channel's pair
of periods is grid-searched with every other channel held fixed, round-robin,
until the aggregate throughput stops improving.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .kernels import dual_period_grid
from .markov import ChannelMetrics, DualPeriodPolicy, network_metrics
from .renewal import ChannelParams
from .sensing import SensingErrorModel

log = logging.getLogger(__name__)

__all__ = [
    "InfeasibleError",
    "GridSpec",
    "OptimizationResult",
    "optimize_dual_period",
    "optimize_single_period",
    "optimize_with_errors",
]


class InfeasibleError(ValueError):
    """No grid point satisfies the interference constraint."""


@dataclass(frozen=True)
class GridSpec:
    """A coarse uniform grid plus local refinement around the incumbent.

    Each refinement level shrinks the step by ``refine_shrink`` and searches
    ``refine_halfwidth`` previous steps either side of the current best point.
    """

    t_min: float
    t_max: float
    step: float
    refine_levels: int = 3
    refine_shrink: float = 0.2
    refine_halfwidth: float = 2.0

    def __post_init__(self):
        if not self.t_min > 0:
            raise ValueError("t_min must be positive")
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.refine_levels < 0:
            raise ValueError("refine_levels must be non-negative")
        if not 0 < self.refine_shrink < 1:
            raise ValueError("refine_shrink must lie in (0, 1)")

    @classmethod
    def default(cls, chs: Sequence[ChannelParams], t_s: float, points: int = 400, **kw) -> "GridSpec":
        t_max = 20.0 / min(ch.total_rate for ch in chs)
        t_min = max(t_s, 1e-9 * t_max)
        return cls(t_min=t_min, t_max=t_max, step=(t_max - t_min) / points, **kw)

    def check_floor(self, t_s: float) -> None:
        if self.t_min < t_s:
            raise ValueError(f"grid t_min {self.t_min:g} is below the sensing time {t_s:g}")

    def coarse(self) -> np.ndarray:
        n = int(math.floor((self.t_max - self.t_min) / self.step + 1e-9))
        g = self.t_min + self.step * np.arange(n + 1)
        if g[-1] < self.t_max:
            g = np.append(g, self.t_max)
        return g

    def levels(self):
        """Yield ``(step, offsets)`` for each refinement level."""
        step = self.step
        for _ in range(self.refine_levels):
            width = step * self.refine_halfwidth
            step *= self.refine_shrink
            m = int(math.ceil(width / step - 1e-9))
            yield step, step * np.arange(-m, m + 1)

    def local(self, center: float, offsets: np.ndarray) -> np.ndarray:
        return np.unique(np.clip(center + offsets, self.t_min, self.t_max))

    def finest_step(self) -> float:
        return self.step * self.refine_shrink**self.refine_levels


@dataclass
class OptimizationResult:
    policies: list[DualPeriodPolicy]
    objective: float
    per_channel: list[ChannelMetrics]
    constraint_active: list[bool]
    converged: bool = True
    rounds: int = 0
    overhead_model: str = "sensing-rate"
    i_max: list[float] = field(default_factory=list)

    @property
    def t_free(self) -> np.ndarray:
        return np.array([p.t_free for p in self.policies])

    @property
    def t_busy(self) -> np.ndarray:
        return np.array([p.t_busy for p in self.policies])


def _check_inputs(chs, errs, t_s, i_max):
    n = len(chs)
    if n == 0:
        raise ValueError("at least one channel is required")
    if len(errs) != n or len(i_max) != n:
        raise ValueError("channel, error and constraint lists must have equal length")
    if t_s < 0:
        raise ValueError("sensing time must be non-negative")
    for k, (ch, im) in enumerate(zip(chs, i_max)):
        if not 0 < im <= ch.utilization + 1e-12:
            raise ValueError(f"channel {k}: interference limit {im:g} must lie in (0, u={ch.utilization:g}]")


class _ChannelScorer:
    def __init__(self, ch: ChannelParams, err: SensingErrorModel, t_s: float, i_max: float, model: str):
        self.c = ch.total_rate
        self.u = ch.utilization
        self.err = err
        self.t_s = t_s
        self.i_max = i_max
        self.model = model

    def overhead(self, tf, mu):
        return self.t_s / (tf if self.model == "free-period" else mu)

    def raw(self, tf, tb):
        """(raw throughput, overhead share) for a single policy."""
        thr, _, mu, _, _ = dual_period_grid(self.c, self.u, self.err.p_fa, self.err.p_md, [tf], [tb])
        return float(thr[0]), float(self.overhead(tf, mu[0]))

    def score(self, tf, tb, other_thr, other_ovh):
        thr, intf, mu, _, ok = dual_period_grid(self.c, self.u, self.err.p_fa, self.err.p_md, tf, tb)
        tf = np.ravel(tf)
        r = (1.0 - other_ovh - self.overhead(tf, mu)) * (thr + other_thr)
        feasible = ok & (intf <= self.i_max)
        return np.where(feasible, r, -np.inf)


def _best(tf, tb, scores):
    k = int(np.argmax(scores))  # first max: smallest t_free, then smallest t_busy
    return float(tf[k]), float(tb[k]), float(scores[k])


def _search(scorer, grid, single, other_thr, other_ovh, label):
    g = grid.coarse()
    if single:
        tf = tb = g
    else:
        tf, tb = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    scores = scorer.score(tf, tb, other_thr, other_ovh)
    if not np.isfinite(scores).any():
        raise InfeasibleError(f"{label}: no grid point satisfies the interference limit {scorer.i_max:g}")
    bf, bb, bs = _best(tf, tb, scores)
    for _, offsets in grid.levels():
        lf = grid.local(bf, offsets)
        if single:
            tf = tb = lf
        else:
            lb = grid.local(bb, offsets)
            tf, tb = (a.ravel() for a in np.meshgrid(lf, lb, indexing="ij"))
        scores = scorer.score(tf, tb, other_thr, other_ovh)
        f, b, s = _best(tf, tb, scores)
        if s > bs or (s == bs and (f, b) < (bf, bb)):
            bf, bb, bs = f, b, s
    return bf, bb, bs


def _coordinate_descent(chs, errs, t_s, i_max, grid, single, model, max_rounds, rel_tol):
    _check_inputs(chs, errs, t_s, i_max)
    if grid is None:
        grid = GridSpec.default(chs, t_s)
    grid.check_floor(t_s)
    if model not in ("sensing-rate", "free-period"):
        raise ValueError(f"unknown overhead model {model!r}")
    n = len(chs)
    scorers = [_ChannelScorer(c, e, t_s, im, model) for c, e, im in zip(chs, errs, i_max)]
    tf = np.zeros(n)
    tb = np.zeros(n)
    thr = np.zeros(n)
    ovh = np.zeros(n)
    best = -np.inf
    converged = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        for i in range(n):
            # first round: channels not yet placed contribute nothing
            others = [j for j in range(n) if j != i and (rounds > 1 or j < i)]
            tf[i], tb[i], _ = _search(
                scorers[i], grid, single, thr[others].sum(), ovh[others].sum(), f"channel {i}"
            )
            thr[i], ovh[i] = scorers[i].raw(tf[i], tb[i])
        r = (1.0 - ovh.sum()) * thr.sum()
        log.debug("round %d: R=%.10g", rounds, r)
        if rounds > 1 and abs(r - best) <= rel_tol * abs(best):
            best = max(best, r)
            converged = True
            break
        best = r
    if not converged:
        log.warning("coordinate descent stopped after %d rounds without converging", max_rounds)
    pols = [DualPeriodPolicy(float(a), float(b)) for a, b in zip(tf, tb)]
    metrics = network_metrics(chs, errs, pols, t_s, model)
    active = [m.interference_fraction >= im * (1 - 1e-3) for m, im in zip(metrics, i_max)]
    return OptimizationResult(
        policies=pols,
        objective=float(sum(m.throughput for m in metrics)),
        per_channel=metrics,
        constraint_active=active,
        converged=converged,
        rounds=rounds,
        overhead_model=model,
        i_max=list(i_max),
    )


def optimize_dual_period(
    chs: Sequence[ChannelParams],
    errs: Sequence[SensingErrorModel],
    t_s: float,
    i_max: Sequence[float],
    grid: GridSpec | None = None,
    *,
    overhead_model: str = "sensing-rate",
    max_rounds: int = 50,
    rel_tol: float = 1e-6,
) -> OptimizationResult:
    """Optimise free and busy inter-sensing periods for every channel.

    Args:
        chs: channel activity models.
        errs: per-channel sensing error rates.
        t_s: sensing duration; also the lower bound on every period.
        i_max: per-channel limit on the long-run interference fraction.
        grid: search grid; defaults to :meth:`GridSpec.default`.
        overhead_model: how sensing time is charged, see
            :func:`intersense.markov.overhead_sum`.

    Raises:
        InfeasibleError: a channel has no grid point meeting its limit.
    """
    return _coordinate_descent(chs, errs, t_s, list(i_max), grid, False, overhead_model, max_rounds, rel_tol)


def optimize_single_period(
    chs, errs, t_s, i_max, grid=None, *, overhead_model="sensing-rate", max_rounds=50, rel_tol=1e-6
) -> OptimizationResult:
    """Baseline: one inter-sensing period per channel regardless of outcome."""
    return _coordinate_descent(chs, errs, t_s, list(i_max), grid, True, overhead_model, max_rounds, rel_tol)


def optimize_with_errors(chs, errs, t_s, i_max, grid=None, **kw) -> OptimizationResult:
    """Dual-period optimisation under imperfect sensing (same search as the error-free case)."""
    return optimize_dual_period(chs, errs, t_s, i_max, grid, **kw)


def with_step(grid: GridSpec, step: float) -> GridSpec:
    return replace(grid, step=step)
