"""YAML scenario files: parsing with line-level diagnostics and canonical dumping.

A scenario names the channels, sensing model, interference limits and the
schemes to evaluate. Example::

    name: example
    channels:
      - {lambda_free: 0.2, lambda_busy: 1.0}
      - {lambda_free: 0.17, lambda_busy: 0.9}
    errors: {p_fa: 0.0, p_md: 0.0}     # one mapping for all, or a list
    sensing_time: 0.01                 # or detector: {sampling_freq, snr, p_fa, p_md}
    i_max: {fraction_of_u: 0.25}       # or {absolute: [0.04, 0.04]}
    scheme: [limited-sensing, single-period-baseline]
    grid: {step: 0.05}                 # optional GridSpec fields
    sim: {runs: 20, seed: 1, horizon_cycles: 1000, warmup_cycles: 20}
    variants:
      - {name: relaxed, i_max: {fraction_of_u: 0.75}}
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Any

import yaml

from .markov import OVERHEAD_MODELS
from .renewal import ChannelParams
from .sensing import DetectorSpec, SensingErrorModel, required_sensing_time

__all__ = [
    "SCHEMES",
    "ConfigError",
    "ImaxSpec",
    "SimSpec",
    "Variant",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "dump_scenario",
    "scenario_to_dict",
]

SCHEMES = ("limited-sensing", "single-period-baseline", "full-myopic", "full-optimal", "limited-access")
_GRID_KEYS = ("t_min", "t_max", "step", "refine_levels", "refine_shrink", "refine_halfwidth")


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-6``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+][0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """Malformed scenario; carries the offending field and source line."""

    def __init__(self, message: str, field: str = "", line: int | None = None, source: str = ""):
        self.field = field
        self.line = line
        self.source = source
        where = source or "<scenario>"
        if line is not None:
            where += f":{line}"
        prefix = f"{where}: " + (f"{field}: " if field else "")
        super().__init__(prefix + message)


@dataclass(frozen=True)
class ImaxSpec:
    """Interference limits as a multiple of each channel's utilisation, or absolute."""

    fraction_of_u: float | None = None
    absolute: tuple[float, ...] | None = None

    def resolve(self, chs) -> list[float]:
        if self.fraction_of_u is not None:
            return [self.fraction_of_u * ch.utilization for ch in chs]
        return list(self.absolute)

    def to_dict(self):
        if self.fraction_of_u is not None:
            return {"fraction_of_u": self.fraction_of_u}
        return {"absolute": list(self.absolute)}


@dataclass(frozen=True)
class SimSpec:
    runs: int = 20
    seed: int = 0
    horizon: float | None = None
    horizon_cycles: float = 1000.0
    warmup_cycles: float = 20.0

    def to_dict(self):
        d = {"runs": self.runs, "seed": self.seed}
        if self.horizon is not None:
            d["horizon"] = self.horizon
        else:
            d["horizon_cycles"] = self.horizon_cycles
        d["warmup_cycles"] = self.warmup_cycles
        return d


@dataclass(frozen=True)
class Variant:
    name: str
    errors: tuple[SensingErrorModel, ...] | None = None
    i_max: ImaxSpec | None = None
    sensing_time: float | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    channels: tuple[ChannelParams, ...]
    errors: tuple[SensingErrorModel, ...]
    sensing_time: float
    i_max: ImaxSpec
    schemes: tuple[str, ...]
    grid: dict = field(default_factory=dict)
    sim: SimSpec | None = None
    overhead_model: str = "sensing-rate"
    access_cap: float | None = None
    detector: dict | None = None
    description: str = ""
    variants: tuple[Variant, ...] = ()

    @property
    def i_max_values(self) -> list[float]:
        return self.i_max.resolve(self.channels)

    def expand(self) -> list[tuple[str, "Scenario"]]:
        """The base case followed by each variant, as standalone scenarios."""
        out = [("base", replace(self, variants=()))]
        for v in self.variants:
            s = replace(self, variants=())
            if v.errors is not None:
                s = replace(s, errors=v.errors)
            if v.i_max is not None:
                s = replace(s, i_max=v.i_max)
            if v.sensing_time is not None:
                s = replace(s, sensing_time=v.sensing_time, detector=None)
            out.append((v.name, s))
        return out


# --------------------------------------------------------------------------
# parsing


class _Ctx:
    """Resolves a key path to the line of the YAML node it came from."""

    def __init__(self, root, source):
        self.root = root
        self.source = source

    def line(self, path):
        node = self.root
        for key in path:
            if isinstance(node, yaml.MappingNode):
                nxt = None
                for k, v in node.value:
                    if k.value == key:
                        nxt = v
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                nxt = node.value[key]
            else:
                nxt = None
            if nxt is None:
                break
            node = nxt
        return node.start_mark.line + 1 if node is not None else None

    def error(self, msg, path):
        name = ".".join(f"[{p}]" if isinstance(p, int) else str(p) for p in path).replace(".[", "[")
        return ConfigError(msg, name, self.line(path), self.source)


def _num(ctx, d, key, path, positive=False, nonneg=False, required=True, default=None):
    if key not in d:
        if required:
            raise ctx.error("missing required field", path + [key])
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ctx.error(f"expected a finite number, got {v!r}", path + [key])
    if positive and not v > 0:
        raise ctx.error(f"must be positive, got {v!r}", path + [key])
    if nonneg and v < 0:
        raise ctx.error(f"must be non-negative, got {v!r}", path + [key])
    return float(v)


def _mapping(ctx, v, path):
    if not isinstance(v, dict):
        raise ctx.error("expected a mapping", path)
    return v


def _unknown(ctx, d, allowed, path):
    for k in d:
        if k not in allowed:
            raise ctx.error(f"unknown field (allowed: {', '.join(allowed)})", path + [k])


def _error_model(ctx, d, path):
    _mapping(ctx, d, path)
    _unknown(ctx, d, ("p_fa", "p_md"), path)
    fa = _num(ctx, d, "p_fa", path, required=False, default=0.0)
    md = _num(ctx, d, "p_md", path, required=False, default=0.0)
    for k, v in (("p_fa", fa), ("p_md", md)):
        if not 0 <= v < 1:
            raise ctx.error(f"must lie in [0, 1), got {v!r}", path + [k])
    return SensingErrorModel(fa, md)


def _errors(ctx, v, n, path):
    if isinstance(v, list):
        if len(v) != n:
            raise ctx.error(f"expected {n} entries (one per channel), got {len(v)}", path)
        return tuple(_error_model(ctx, e, path + [k]) for k, e in enumerate(v))
    return (_error_model(ctx, v, path),) * n


def _imax(ctx, v, chs, path):
    d = _mapping(ctx, v, path)
    if len(d) != 1 or next(iter(d)) not in ("fraction_of_u", "absolute"):
        raise ctx.error("expected exactly one of fraction_of_u or absolute", path)
    if "fraction_of_u" in d:
        f = _num(ctx, d, "fraction_of_u", path, positive=True)
        if f > 1:
            raise ctx.error(f"must not exceed 1, got {f!r}", path + ["fraction_of_u"])
        return ImaxSpec(fraction_of_u=f)
    vals = d["absolute"]
    if not isinstance(vals, list) or len(vals) != len(chs):
        raise ctx.error(f"expected a list of {len(chs)} limits", path + ["absolute"])
    out = []
    for k, x in enumerate(vals):
        p = path + ["absolute", k]
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not 0 < x <= 1:
            raise ctx.error(f"limit must lie in (0, 1], got {x!r}", p)
        out.append(float(x))
    return ImaxSpec(absolute=tuple(out))


def _int(ctx, d, key, path, default, minimum=0):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ctx.error(f"expected an integer >= {minimum}, got {v!r}", path + [key])
    return v


def parse_scenario(text: str, source: str = "") -> Scenario:
    """Parse and validate scenario YAML text."""
    try:
        root = yaml.compose(text, Loader=_Loader)
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", "", mark.line + 1 if mark else None, source) from exc
    ctx = _Ctx(root, source)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", "", 1, source)
    allowed = (
        "name", "description", "channels", "errors", "sensing_time", "detector", "i_max", "scheme",
        "grid", "sim", "overhead_model", "access_cap", "variants",
    )
    _unknown(ctx, data, allowed, [])

    name = data.get("name", "scenario")
    if not isinstance(name, str):
        raise ctx.error("expected a string", ["name"])

    raw = data.get("channels")
    if not isinstance(raw, list) or not raw:
        raise ctx.error("expected a non-empty list of channels", ["channels"])
    chs = []
    for k, c in enumerate(raw):
        p = ["channels", k]
        _mapping(ctx, c, p)
        _unknown(ctx, c, ("lambda_free", "lambda_busy"), p)
        chs.append(ChannelParams(_num(ctx, c, "lambda_free", p, positive=True), _num(ctx, c, "lambda_busy", p, positive=True)))
    n = len(chs)

    errors = _errors(ctx, data.get("errors", {}), n, ["errors"])

    detector = None
    if "detector" in data:
        if "sensing_time" in data:
            raise ctx.error("give either sensing_time or detector, not both", ["detector"])
        d = _mapping(ctx, data["detector"], ["detector"])
        _unknown(ctx, d, ("sampling_freq", "snr", "p_fa", "p_md"), ["detector"])
        vals = {k: _num(ctx, d, k, ["detector"], positive=True) for k in ("sampling_freq", "snr", "p_fa", "p_md")}
        for k in ("p_fa", "p_md"):
            if not vals[k] < 1:
                raise ctx.error("must lie in (0, 1)", ["detector", k])
        detector = vals
        t_s = required_sensing_time(DetectorSpec(vals["sampling_freq"], vals["snr"]), vals["p_fa"], vals["p_md"])
    else:
        t_s = _num(ctx, data, "sensing_time", [], nonneg=True)

    if "i_max" not in data:
        raise ctx.error("missing required field", ["i_max"])
    i_max = _imax(ctx, data["i_max"], chs, ["i_max"])

    sch = data.get("scheme")
    sch_list = [sch] if isinstance(sch, str) else sch
    if not isinstance(sch_list, list) or not sch_list:
        raise ctx.error(f"expected a scheme name or list of them ({', '.join(SCHEMES)})", ["scheme"])
    for k, s in enumerate(sch_list):
        if s not in SCHEMES:
            raise ctx.error(f"unknown scheme {s!r} (expected one of {', '.join(SCHEMES)})", ["scheme"] + ([k] if not isinstance(sch, str) else []))

    grid = {}
    if "grid" in data:
        g = _mapping(ctx, data["grid"], ["grid"])
        _unknown(ctx, g, _GRID_KEYS, ["grid"])
        for k in _GRID_KEYS:
            if k == "refine_levels":
                if k in g:
                    grid[k] = _int(ctx, g, k, ["grid"], 3)
            elif k in g:
                grid[k] = _num(ctx, g, k, ["grid"], positive=True)
        if "t_min" in grid and grid["t_min"] < t_s:
            raise ctx.error(f"must be at least the sensing time {t_s:g}", ["grid", "t_min"])

    sim = None
    if "sim" in data:
        s = _mapping(ctx, data["sim"] or {}, ["sim"])
        _unknown(ctx, s, ("runs", "seed", "horizon", "horizon_cycles", "warmup_cycles"), ["sim"])
        if "horizon" in s and "horizon_cycles" in s:
            raise ctx.error("give either horizon or horizon_cycles", ["sim", "horizon"])
        sim = SimSpec(
            runs=_int(ctx, s, "runs", ["sim"], 20, minimum=1),
            seed=_int(ctx, s, "seed", ["sim"], 0),
            horizon=_num(ctx, s, "horizon", ["sim"], positive=True, required=False),
            horizon_cycles=_num(ctx, s, "horizon_cycles", ["sim"], positive=True, required=False, default=1000.0),
            warmup_cycles=_num(ctx, s, "warmup_cycles", ["sim"], nonneg=True, required=False, default=20.0),
        )

    model = data.get("overhead_model", "sensing-rate")
    if model not in OVERHEAD_MODELS:
        raise ctx.error(f"expected one of {', '.join(OVERHEAD_MODELS)}", ["overhead_model"])

    cap = _num(ctx, data, "access_cap", [], positive=True, required=False)

    variants = []
    for k, v in enumerate(data.get("variants") or []):
        p = ["variants", k]
        _mapping(ctx, v, p)
        _unknown(ctx, v, ("name", "errors", "i_max", "sensing_time"), p)
        if not isinstance(v.get("name"), str):
            raise ctx.error("each variant needs a string name", p + ["name"])
        variants.append(
            Variant(
                name=v["name"],
                errors=_errors(ctx, v["errors"], n, p + ["errors"]) if "errors" in v else None,
                i_max=_imax(ctx, v["i_max"], chs, p + ["i_max"]) if "i_max" in v else None,
                sensing_time=_num(ctx, v, "sensing_time", p, nonneg=True, required=False),
            )
        )
    names = [v.name for v in variants]
    if "base" in names or len(set(names)) != len(names):
        raise ctx.error("variant names must be unique and not 'base'", ["variants"])

    desc = data.get("description", "")
    return Scenario(
        name=name,
        channels=tuple(chs),
        errors=errors,
        sensing_time=t_s,
        i_max=i_max,
        schemes=tuple(sch_list),
        grid=grid,
        sim=sim,
        overhead_model=model,
        access_cap=cap,
        detector=detector,
        description=desc if isinstance(desc, str) else str(desc),
        variants=tuple(variants),
    )


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", "", None, str(path)) from exc
    return parse_scenario(text, str(path))


# --------------------------------------------------------------------------
# dumping


def _errors_out(errs):
    rows = [{"p_fa": e.p_fa, "p_md": e.p_md} for e in errs]
    if all(r == rows[0] for r in rows):
        return rows[0]
    return rows


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    d: dict[str, Any] = {"name": s.name}
    if s.description:
        d["description"] = s.description
    d["channels"] = [{"lambda_free": c.lambda_free, "lambda_busy": c.lambda_busy} for c in s.channels]
    d["errors"] = _errors_out(s.errors)
    if s.detector is not None:
        d["detector"] = dict(s.detector)
    else:
        d["sensing_time"] = s.sensing_time
    d["i_max"] = s.i_max.to_dict()
    d["scheme"] = s.schemes[0] if len(s.schemes) == 1 else list(s.schemes)
    if s.grid:
        d["grid"] = dict(s.grid)
    if s.sim is not None:
        d["sim"] = s.sim.to_dict()
    if s.overhead_model != "sensing-rate":
        d["overhead_model"] = s.overhead_model
    if s.access_cap is not None:
        d["access_cap"] = s.access_cap
    if s.variants:
        vs = []
        for v in s.variants:
            vd: dict[str, Any] = {"name": v.name}
            if v.errors is not None:
                vd["errors"] = _errors_out(v.errors)
            if v.i_max is not None:
                vd["i_max"] = v.i_max.to_dict()
            if v.sensing_time is not None:
                vd["sensing_time"] = v.sensing_time
            vs.append(vd)
        d["variants"] = vs
    return d


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None)
