"""Renewal-theory primitives for alternating busy/free primary channels.

Closed forms assume exponential sojourns. ``delta_numeric_oracle`` integrates
the general renewal recursions on a grid and is used to check the closed forms
(and to explore non-exponential sojourns in tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = [
    "ChannelParams",
    "SojournDistribution",
    "utilization",
    "expected_free_time_from_busy",
    "expected_free_time_from_free",
    "prob_free_given_free",
    "prob_free_given_busy",
    "delta_numeric_oracle",
    "START_STATES",
]

_SERIES_CUTOFF = 1e-8


@dataclass(frozen=True)
class ChannelParams:
    """Exponential activity model of one primary channel.

    Attributes:
        lambda_free: rate of the free-period duration (mean free time is
            ``1 / lambda_free``).
        lambda_busy: rate of the busy-period duration.
    """

    lambda_free: float
    lambda_busy: float

    def __post_init__(self):
        for name in ("lambda_free", "lambda_busy"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite rate, got {v!r}")

    @property
    def total_rate(self) -> float:
        return self.lambda_free + self.lambda_busy

    @property
    def utilization(self) -> float:
        return utilization(self)

    @property
    def mean_free(self) -> float:
        return 1.0 / self.lambda_free

    @property
    def mean_busy(self) -> float:
        return 1.0 / self.lambda_busy

    @property
    def mean_cycle(self) -> float:
        return self.mean_free + self.mean_busy


@dataclass(frozen=True)
class SojournDistribution:
    """A sojourn-time law given by its density, CDF and mean."""

    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    mean: float

    @classmethod
    def exponential(cls, rate: float) -> "SojournDistribution":
        return cls(
            pdf=lambda x: rate * np.exp(-rate * np.asarray(x, dtype=float)),
            cdf=lambda x: -np.expm1(-rate * np.asarray(x, dtype=float)),
            mean=1.0 / rate,
        )

    @classmethod
    def from_scipy(cls, frozen) -> "SojournDistribution":
        """Wrap a frozen ``scipy.stats`` continuous distribution."""
        return cls(pdf=frozen.pdf, cdf=frozen.cdf, mean=float(frozen.mean()))

    def validate(self, rtol: float = 1e-3) -> None:
        if not (self.mean > 0 and math.isfinite(self.mean)):
            raise ValueError(f"mean must be positive and finite, got {self.mean}")
        if abs(float(self.cdf(0.0))) > 1e-12:
            raise ValueError("cdf(0) must be 0")
        # E[T] = int_0^inf (1 - F); a density that does not integrate to one fails this.
        tail, _ = integrate.quad(lambda x: 1.0 - float(self.cdf(x)), 0, np.inf, limit=200)
        mass, _ = integrate.quad(lambda x: float(self.pdf(x)), 0, np.inf, limit=200)
        if abs(mass - 1.0) > rtol or abs(tail - self.mean) > rtol * self.mean:
            raise ValueError(
                f"distribution is not normalised (mass={mass:.6g}, "
                f"integrated mean={tail:.6g}, declared mean={self.mean:.6g})"
            )


def utilization(params: ChannelParams) -> float:
    """Long-run busy fraction ``lambda_free / (lambda_free + lambda_busy)``."""
    return params.lambda_free / (params.lambda_free + params.lambda_busy)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("durations must be non-negative")
    return t


def _relaxation_term(rate_sum, t):
    """``t + (exp(-c t) - 1) / c`` evaluated without cancellation at small ``c t``."""
    x = rate_sum * t
    small = x < _SERIES_CUTOFF
    safe_x = np.where(small, 1.0, x)
    exact = t + np.expm1(-safe_x) / rate_sum
    # t - t(1 - x/2 + x^2/6) = t x (1/2 - x/6)
    series = t * x * (0.5 - x / 6.0)
    return np.where(small, series, exact)


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def expected_free_time_from_busy(params: ChannelParams, t):
    """Expected free time in ``[0, t]`` for a channel busy (in equilibrium) at 0."""
    t = _check_t(t)
    u = params.utilization
    return _out((1.0 - u) * _relaxation_term(params.total_rate, t))


def expected_free_time_from_free(params: ChannelParams, t):
    """Expected free time in ``[0, t]`` for a channel free (in equilibrium) at 0."""
    t = _check_t(t)
    u = params.utilization
    return _out(t - u * _relaxation_term(params.total_rate, t))


def prob_free_given_free(params: ChannelParams, t):
    t = _check_t(t)
    u = params.utilization
    return _out((1.0 - u) + u * np.exp(-params.total_rate * t))


def prob_free_given_busy(params: ChannelParams, t):
    t = _check_t(t)
    u = params.utilization
    return _out(-(1.0 - u) * np.expm1(-params.total_rate * t))


START_STATES = ("free-equilibrium", "busy-equilibrium", "free-fresh", "busy-fresh")


def delta_numeric_oracle(
    free_dist: SojournDistribution,
    busy_dist: SojournDistribution,
    t: float,
    start_state: str,
    step: float | None = None,
    validate: bool = True,
) -> float:
    """Expected free time in ``[0, t]`` from the renewal recursions.

    The fresh-start functions (a state change exactly at 0) satisfy a coupled
    pair of Volterra equations, which are swept forward on a uniform grid with
    the trapezoidal rule; the implicit diagonal terms are solved as a 2x2
    system at each node. Equilibrium starts then convolve the fresh solutions
    with the residual-life densities ``(1 - F(x)) / E[T]``.

    Args:
        free_dist: free-period law.
        busy_dist: busy-period law.
        t: interval length.
        start_state: one of ``START_STATES``.
        step: grid spacing; defaults to the smaller mean sojourn over 1000.
        validate: check normalisation of both laws first.
    """
    if start_state not in START_STATES:
        raise ValueError(f"start_state must be one of {START_STATES}, got {start_state!r}")
    if t < 0:
        raise ValueError("t must be non-negative")
    if step is None:
        step = min(free_dist.mean, busy_dist.mean) / 1000.0
    if not step > 0:
        raise ValueError("quadrature step must be positive")
    if validate:
        free_dist.validate()
        busy_dist.validate()
    if t == 0:
        return 0.0

    n = max(int(math.ceil(t / step)), 2)
    h = t / n
    x = np.linspace(0.0, t, n + 1)
    f1 = np.asarray(free_dist.pdf(x), dtype=float)
    f0 = np.asarray(busy_dist.pdf(x), dtype=float)
    surv1 = 1.0 - np.asarray(free_dist.cdf(x), dtype=float)
    surv0 = 1.0 - np.asarray(busy_dist.cdf(x), dtype=float)

    # fresh_free[k]: expected free time in [0, x_k] right after a busy->free switch
    fresh_free = np.zeros(n + 1)
    fresh_busy = np.zeros(n + 1)
    xf1 = x * f1
    for k in range(1, n + 1):
        # int_0^{x_k} f1(s) s ds + x_k (1 - F1(x_k)), trapezoid
        own = h * (xf1[: k + 1].sum() - 0.5 * (xf1[0] + xf1[k])) + x[k] * surv1[k]
        # convolution terms excluding the j=0 node (which carries the unknown at k)
        conv1 = h * (np.dot(f1[1 : k + 1], fresh_busy[k - 1 :: -1]) - 0.5 * f1[k] * fresh_busy[0])
        conv0 = h * (np.dot(f0[1 : k + 1], fresh_free[k - 1 :: -1]) - 0.5 * f0[k] * fresh_free[0])
        a1 = 0.5 * h * f1[0]
        a0 = 0.5 * h * f0[0]
        rhs1 = own + conv1
        rhs0 = conv0
        det = 1.0 - a1 * a0
        fresh_free[k] = (rhs1 + a1 * rhs0) / det
        fresh_busy[k] = (rhs0 + a0 * rhs1) / det

    if start_state == "free-fresh":
        return float(fresh_free[n])
    if start_state == "busy-fresh":
        return float(fresh_busy[n])

    def trap(y):
        return h * (y.sum() - 0.5 * (y[0] + y[-1]))

    if start_state == "free-equilibrium":
        g1 = surv1 / free_dist.mean
        tail = 1.0 - trap(g1)  # P(residual free time > t)
        return float(t * tail + trap(g1 * (x + fresh_busy[::-1])))
    g0 = surv0 / busy_dist.mean
    return float(trap(g0 * fresh_free[::-1]))
