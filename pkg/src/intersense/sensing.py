"""Sensing-error parameters and the energy-detector sensing-time formula."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy.stats import norm

__all__ = [
    "SensingErrorModel",
    "DetectorSpec",
    "PERFECT_SENSING",
    "inverse_q",
    "required_sensing_time",
    "check_sensing_time",
]


@dataclass(frozen=True)
class SensingErrorModel:
    """Per-channel detector error rates.

    ``p_fa`` is the probability a free channel is reported busy, ``p_md`` the
    probability a busy channel is reported free.
    """

    p_fa: float = 0.0
    p_md: float = 0.0

    def __post_init__(self):
        for name in ("p_fa", "p_md"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v!r}")

    @property
    def perfect(self) -> bool:
        return self.p_fa == 0.0 and self.p_md == 0.0


PERFECT_SENSING = SensingErrorModel()


@dataclass(frozen=True)
class DetectorSpec:
    sampling_freq: float
    snr: float

    def __post_init__(self):
        if not self.sampling_freq > 0:
            raise ValueError("sampling_freq must be positive")
        if not self.snr > 0:
            raise ValueError("snr must be positive")


def inverse_q(p: float) -> float:
    """Inverse of the standard Gaussian tail ``Q(x) = P(Z > x)``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    return float(norm.isf(p))


def required_sensing_time(det: DetectorSpec, p_fa: float, p_md: float) -> float:
    """Minimum energy-detector sensing time meeting the target error rates."""
    bracket = inverse_q(p_fa) - inverse_q(1.0 - p_md) * math.sqrt(1.0 + 2.0 * det.snr)
    return 2.0 / det.sampling_freq * bracket**2 / det.snr**2


def check_sensing_time(t_s: float, mean_sojourns) -> None:
    """Warn when sensing is not short relative to the channel dynamics."""
    shortest = min(mean_sojourns)
    if t_s > 0.1 * shortest:
        warnings.warn(
            f"sensing time {t_s:g} exceeds 10% of the shortest mean sojourn "
            f"({shortest:g}); channel state may change during sensing",
            stacklevel=2,
        )
