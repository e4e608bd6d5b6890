"""Evaluate access schemes on a scenario and collect long-format result rows."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import access, full, optimize, simulator
from .markov import joint_metrics
from .scenario import ConfigError, Scenario, SimSpec

__all__ = ["SimOverrides", "SchemeResult", "evaluate", "grid_for"]


@dataclass(frozen=True)
class SimOverrides:
    enabled: bool = True
    seed: int | None = None
    runs: int | None = None
    horizon: float | None = None
    jobs: int = 1
    grid_step: float | None = None


@dataclass
class SchemeResult:
    scheme: str
    variant: str
    R_analytic: float
    R_empirical: float | None = None
    R_stderr: float | None = None
    policy: list[tuple] = field(default_factory=list)  # (channel, parameter, value)
    metrics: list[tuple] = field(default_factory=list)  # (channel, metric, analytic, empirical, stderr)
    notes: list[str] = field(default_factory=list)


def grid_for(s: Scenario, scheme: str, step: float | None) -> optimize.GridSpec | None:
    g = dict(s.grid)
    if step is not None:
        g["step"] = step
    if not g:
        return None
    t_s = s.sensing_time
    t_max = g.pop("t_max", 20.0 / min(ch.total_rate for ch in s.channels))
    t_min = g.pop("t_min", t_s if t_s > 0 else 1e-9 * t_max)
    if scheme == "full-optimal":
        base = {"step": (t_max - t_min) / 40, "refine_levels": 3, "refine_shrink": 0.25}
    else:
        base = {"step": (t_max - t_min) / 400}
    base.update(g)
    try:
        return optimize.GridSpec(t_min=t_min, t_max=t_max, **base)
    except ValueError as exc:
        raise ConfigError(str(exc), "grid") from exc


def _sim_config(s: Scenario, ov: SimOverrides):
    if not ov.enabled or (s.sim is None and ov.runs is None and ov.horizon is None):
        return None
    spec = s.sim or SimSpec()
    cyc = max(ch.mean_cycle for ch in s.channels)
    horizon = ov.horizon or spec.horizon or spec.horizon_cycles * cyc
    warmup = min(spec.warmup_cycles * cyc, 0.5 * horizon)
    return simulator.SimConfig(
        horizon=horizon,
        seed=spec.seed if ov.seed is None else ov.seed,
        warmup=warmup,
        runs=ov.runs or spec.runs,
        jobs=ov.jobs,
    )


def _per_channel_rows(analytic: dict, rep, names):
    rows = []
    n = len(next(iter(analytic.values())))
    for i in range(n):
        for name in names:
            a = analytic.get(name)
            av = float(a[i]) if a is not None else None
            if rep is not None:
                rows.append((str(i), name, av, float(rep.mean(name)[i]), float(rep.stderr(name)[i])))
            else:
                rows.append((str(i), name, av, None, None))
    return rows


_METRIC_NAMES = ("throughput", "interference", "overhead", "unexplored")


def _dual(s, scheme, ov, res):
    grid = grid_for(s, scheme, ov.grid_step)
    fn = optimize.optimize_dual_period if scheme == "limited-sensing" else optimize.optimize_single_period
    opt = fn(list(s.channels), list(s.errors), s.sensing_time, s.i_max_values, grid, overhead_model=s.overhead_model)
    res.R_analytic = opt.objective
    for i, p in enumerate(opt.policies):
        res.policy += [(str(i), "t_free", p.t_free), (str(i), "t_busy", p.t_busy)]
    if not opt.converged:
        res.notes.append("coordinate descent did not converge")
    m = opt.per_channel
    analytic = {
        "throughput": [x.throughput for x in m],
        "interference": [x.interference_fraction for x in m],
        "overhead": [x.overhead_fraction for x in m],
        "unexplored": [x.unexplored_fraction for x in m],
    }
    cfg = _sim_config(s, ov)
    rep = simulator.simulate_dual_period(s.channels, s.errors, opt.policies, s.sensing_time, cfg) if cfg else None
    res.metrics += _per_channel_rows(analytic, rep, _METRIC_NAMES)
    res.metrics += [(str(i), "i_max", v, None, None) for i, v in enumerate(s.i_max_values)]
    return rep


def _require_perfect(s, scheme):
    if any(not e.perfect for e in s.errors):
        raise ConfigError(f"scheme {scheme} is evaluated with perfect sensing only", "errors")


def _full(s, scheme, ov, res):
    _require_perfect(s, scheme)
    chs = list(s.channels)
    grid = grid_for(s, scheme, ov.grid_step)
    if scheme == "full-optimal":
        if len(chs) != 2:
            raise ConfigError("full-optimal needs exactly 2 channels", "channels")
        table = full.optimal_two_channel(chs[0], chs[1], s.sensing_time, s.i_max_values, grid).table
    else:
        table, choices = full.myopic_table(chs, list(s.errors), s.sensing_time, s.i_max_values, grid)
        bad = ["".join(map(str, k)) for k, c in choices.items() if not c.feasible]
        if bad:
            res.notes.append(f"no feasible myopic duration for outcomes {', '.join(bad)}; sensing again at once")
    for k, v in table.items():
        res.policy.append(("all", "T_" + "".join(map(str, k)), v))
    jm = joint_metrics(chs, table, s.sensing_time)
    res.R_analytic = jm.R
    analytic = {
        "throughput": jm.throughput,
        "interference": jm.interference,
        "overhead": jm.overhead,
        "unexplored": jm.unexplored,
    }
    cfg = _sim_config(s, ov)
    rep = simulator.simulate_full(chs, s.errors, table, s.sensing_time, cfg) if cfg else None
    res.metrics += _per_channel_rows(analytic, rep, _METRIC_NAMES)
    res.metrics += [(str(i), "i_max", v, None, None) for i, v in enumerate(s.i_max_values)]
    return rep


def _limited_access(s, scheme, ov, res):
    _require_perfect(s, scheme)
    if not s.sensing_time > 0:
        raise ConfigError("limited-access search needs a positive sensing time", "sensing_time")
    chs = list(s.channels)
    t_acc = [access.access_duration_for_constraint(ch, im, cap=s.access_cap) for ch, im in zip(chs, s.i_max_values)]
    for i, t in enumerate(t_acc):
        res.policy.append((str(i), "t_access", t))
    res.R_analytic = float("nan")
    analytic = {"interference_per_access": [access.access_interference(ch, t) for ch, t in zip(chs, t_acc)]}
    cfg = _sim_config(s, ov)
    rep = simulator.simulate_limited_access(chs, t_acc, s.sensing_time, cfg) if cfg else None
    res.metrics += _per_channel_rows(analytic, rep, ("interference_per_access",))
    if rep is not None:
        for i in range(len(chs)):
            for name in ("throughput", "interference", "access"):
                res.metrics.append((str(i), name, None, float(rep.mean(name)[i]), float(rep.stderr(name)[i])))
        d = rep.extras["search_delay"]
        se = float(np.std(d, ddof=1) / np.sqrt(d.size)) if d.size > 1 else None
        res.metrics.append(("all", "search_delay", None, float(d.mean()), se))
    return rep


def evaluate(s: Scenario, scheme: str, variant: str = "base", ov: SimOverrides = SimOverrides()) -> SchemeResult:
    """Optimise (or construct) the scheme's policy, evaluate it, and optionally simulate it."""
    res = SchemeResult(scheme, variant, float("nan"))
    if scheme in ("limited-sensing", "single-period-baseline"):
        rep = _dual(s, scheme, ov, res)
    elif scheme in ("full-myopic", "full-optimal"):
        rep = _full(s, scheme, ov, res)
    elif scheme == "limited-access":
        rep = _limited_access(s, scheme, ov, res)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}", "scheme")
    if rep is not None:
        res.R_empirical, res.R_stderr = rep.R, rep.R_stderr
        if rep.runs < 2:
            res.R_stderr = None
    res.metrics.insert(0, ("all", "R", None if np.isnan(res.R_analytic) else res.R_analytic, res.R_empirical, res.R_stderr))
    return res


def with_schemes(s: Scenario, schemes) -> Scenario:
    return replace(s, schemes=tuple(schemes))
