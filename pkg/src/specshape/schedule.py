"""Logistic spectral-exponent schedule and stable operator dispatch.

The exponent decays from ``p_max`` to ``p_min`` along a logistic curve in
``t / total_steps``; the dispatch rule anchors large positive exponents to the
raw update and the [0, 1/4) band to plain orthogonalization, reserving the
fast fractional path for negative exponents where its Taylor correction is a
mild adjustment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import StepOutOfRangeError, ValidationError

# Exponents at or above this threshold use the raw update; [0, threshold)
# uses Newton-Schulz; below 0 uses the fast fractional path.
RAW_THRESHOLD = 0.25


class ShaperKind(str, Enum):
    RAW = "raw"
    NEWTON_SCHULZ = "newton_schulz"
    FAST_SPECTRAL = "fast_spectral"


@dataclass(frozen=True)
class SpectralSchedule:
    """Logistic schedule p(t) = p_min + (p_max - p_min) / (1 + exp((t/T - tau)/w))."""

    total_steps: int
    p_max: float = 1.0
    p_min: float = -0.25
    tau: float = 0.02
    w: float = 0.01

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValidationError("total_steps must be >= 1")
        if not self.p_max > self.p_min:
            raise ValidationError("p_max must exceed p_min")
        if not 0.0 < self.tau < 1.0:
            raise ValidationError("tau must lie in (0, 1)")
        if not self.w > 0.0:
            raise ValidationError("w must be positive")

    @classmethod
    def wide(cls, total_steps: int, p_max: float = 1.0, p_min: float = -0.25):
        """Preset with a later and wider transition (tau = w = 0.04)."""
        return cls(total_steps=total_steps, p_max=p_max, p_min=p_min, tau=0.04, w=0.04)


@dataclass(frozen=True)
class ShaperChoice:
    kind: ShaperKind
    exponent: float


def exponent_at(sched: SpectralSchedule, t: int) -> float:
    """Scheduled exponent at 0-based step ``t``; strictly decreasing over [0, T]."""
    if not 0 <= t <= sched.total_steps:
        raise StepOutOfRangeError(f"step {t} outside [0, {sched.total_steps}]")
    u = (t / sched.total_steps - sched.tau) / sched.w
    a = 1.0 / (1.0 + math.exp(u)) if u < 700 else 0.0
    return sched.p_min + a * (sched.p_max - sched.p_min)


def classify_exponent(p: float) -> ShaperKind:
    """Map an exponent to its anchored operator."""
    if p >= RAW_THRESHOLD:
        return ShaperKind.RAW
    if p >= 0.0:
        return ShaperKind.NEWTON_SCHULZ
    return ShaperKind.FAST_SPECTRAL


def select_shaper(sched: SpectralSchedule, t: int) -> ShaperChoice:
    """Scheduled exponent plus the operator it is anchored to."""
    p = exponent_at(sched, t)
    return ShaperChoice(kind=classify_exponent(p), exponent=p)
