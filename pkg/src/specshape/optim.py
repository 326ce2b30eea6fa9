"""Step rules over named matrix parameters: scheduled spectral shaping (dynmuon),
plain orthogonalized updates (muon), AdamW, and momentum SGD, plus the
warmup-cosine-warmdown learning-rate schedule.

All step functions mutate ``params`` and the optimizer state in place and
advance the state's step counter by exactly one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NonFiniteError,
    ShapeMismatchError,
    StepOutOfRangeError,
    ValidationError,
)
from .schedule import (
    ShaperChoice,
    ShaperKind,
    SpectralSchedule,
    classify_exponent,
    select_shaper,
)
from .spectral import DEFAULT_NS, NewtonSchulzConfig, fast_spectral, newton_schulz

# Momentum norms below this floor shape to the zero direction instead of
# dividing by a vanishing Frobenius norm.
MOMENTUM_FLOOR = 1e-30

SCHEDULE_SHAPES = ("logistic", "abrupt", "fixed_min")


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to ``base_lr`` then cosine decay to ``warmdown_ratio * base_lr``."""

    total_steps: int
    warmup_frac: float = 0.01
    warmdown_ratio: float = 0.2

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValidationError("total_steps must be >= 1")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValidationError("warmup_frac must lie in [0, 1)")
        if not 0.0 < self.warmdown_ratio <= 1.0:
            raise ValidationError("warmdown_ratio must lie in (0, 1]")


def lr_at(sched: LrSchedule, base_lr: float, t: int) -> float:
    """Learning rate at 0-based step ``t``."""
    if not 0 <= t <= sched.total_steps:
        raise StepOutOfRangeError(f"step {t} outside [0, {sched.total_steps}]")
    warmup_steps = int(round(sched.warmup_frac * sched.total_steps))
    if t < warmup_steps:
        return base_lr * (t + 1) / warmup_steps
    span = sched.total_steps - warmup_steps
    if span <= 0:
        return base_lr
    frac = (t - warmup_steps) / span
    cosine = 0.5 * (1.0 + math.cos(math.pi * frac))
    wr = sched.warmdown_ratio
    return base_lr * (wr + (1.0 - wr) * cosine)


@dataclass
class OptimizerHyper:
    """Hyperparameters shared by the four step rules.

    ``schedule`` drives the dynmuon exponent; ``schedule_shape`` selects the
    logistic curve or one of its ablations (abrupt switch at tau*T, or the
    minimum exponent throughout). ``scalar_lr`` is the AdamW rate used for
    row/column-vector parameters routed away from the spectral path.
    """

    base_lr: float = 0.01
    momentum_beta: float = 0.95
    nesterov: bool = False
    weight_decay: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    scalar_lr: float = 0.001
    shape_scale: bool = False
    ns: NewtonSchulzConfig = DEFAULT_NS
    schedule: SpectralSchedule | None = None
    schedule_shape: str = "logistic"
    lr_schedule: LrSchedule | None = None

    def __post_init__(self):
        if not self.base_lr > 0 or not math.isfinite(self.base_lr):
            raise ValidationError("base_lr must be positive and finite")
        if not 0.0 <= self.momentum_beta < 1.0:
            raise ValidationError("momentum_beta must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be non-negative")
        for name in ("adam_beta1", "adam_beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValidationError(f"{name} must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise ValidationError("adam_eps must be positive")
        if self.schedule_shape not in SCHEDULE_SHAPES:
            raise ValidationError(f"schedule_shape must be one of {SCHEDULE_SHAPES}")


@dataclass
class OptimizerState:
    """Per-parameter buffers plus the step counter.

    ``momentum`` holds the matrix momentum (or the AdamW first moment);
    ``second_moment`` is populated only by AdamW-style updates.
    """

    hyper: OptimizerHyper
    step: int = 0
    momentum: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def _check_pair(name: str, w: np.ndarray, g: np.ndarray) -> None:
    if w.shape != g.shape:
        raise ShapeMismatchError(
            f"parameter {name!r} has shape {w.shape} but gradient has {g.shape}"
        )
    if not np.isfinite(g).all():
        raise NonFiniteError(f"gradient for {name!r} contains NaN or Inf")


def _buffer(buffers: dict, name: str, like: np.ndarray) -> np.ndarray:
    if name not in buffers:
        buffers[name] = np.zeros_like(like)
    return buffers[name]


def _base_lr_at(hyper: OptimizerHyper, t: int) -> float:
    if hyper.lr_schedule is None:
        return hyper.base_lr
    return lr_at(hyper.lr_schedule, hyper.base_lr, t)


def _adamw_update(
    state: OptimizerState,
    name: str,
    w: np.ndarray,
    g: np.ndarray,
    t: int,
    lr: float,
    weight_decay: float,
) -> None:
    hyper = state.hyper
    m = _buffer(state.momentum, name, w)
    v = _buffer(state.second_moment, name, w)
    b1, b2 = hyper.adam_beta1, hyper.adam_beta2
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1 ** (t + 1))
    v_hat = v / (1.0 - b2 ** (t + 1))
    if weight_decay:
        w *= 1.0 - lr * weight_decay
    w -= lr * m_hat / (np.sqrt(v_hat) + hyper.adam_eps)


def _is_vector_like(w: np.ndarray) -> bool:
    return min(w.shape) == 1


def shaped_direction(m: np.ndarray, choice: ShaperChoice, ns: NewtonSchulzConfig) -> np.ndarray:
    """Momentum matrix -> update direction under the anchored operator."""
    if float(np.linalg.norm(m)) < MOMENTUM_FLOOR:
        return np.zeros_like(m)
    if choice.kind is ShaperKind.RAW:
        return m
    if choice.kind is ShaperKind.NEWTON_SCHULZ:
        return newton_schulz(m, ns)
    return fast_spectral(m, choice.exponent, ns)


def _spectral_family_step(state, params, grads, t, choose) -> None:
    hyper = state.hyper
    lr = _base_lr_at(hyper, t)
    # Vector-like parameters follow the scalar AdamW rate, rescaled by the
    # same schedule multiplier as the matrix group, without weight decay.
    scalar_lr = hyper.scalar_lr * (lr / hyper.base_lr)
    for name, w in params.items():
        g = grads[name]
        _check_pair(name, w, g)
        if _is_vector_like(w):
            _adamw_update(state, name, w, g, t, scalar_lr, 0.0)
            continue
        m = _buffer(state.momentum, name, w)
        m *= hyper.momentum_beta
        m += g
        base = g + hyper.momentum_beta * m if hyper.nesterov else m
        choice = choose(t)
        d = shaped_direction(base, choice, hyper.ns)
        scale = math.sqrt(max(w.shape)) if hyper.shape_scale else 1.0
        if hyper.weight_decay:
            w *= 1.0 - lr * hyper.weight_decay
        w -= (lr * scale) * d
    state.step += 1


def dynmuon_choice(hyper: OptimizerHyper, t: int) -> ShaperChoice:
    """Exponent and operator for the configured schedule shape at step ``t``."""
    sched = hyper.schedule
    if sched is None:
        raise ValidationError("dynmuon requires a spectral schedule")
    if hyper.schedule_shape == "logistic":
        return select_shaper(sched, t)
    if hyper.schedule_shape == "abrupt":
        p = sched.p_max if t < sched.tau * sched.total_steps else sched.p_min
    else:  # fixed_min
        p = sched.p_min
    return ShaperChoice(kind=classify_exponent(p), exponent=p)


def dynmuon_step(state: OptimizerState, params: dict, grads: dict, t: int) -> None:
    """Momentum accumulation, scheduled spectral shaping, decoupled weight decay."""
    _spectral_family_step(state, params, grads, t, lambda step: dynmuon_choice(state.hyper, step))


def muon_step(state: OptimizerState, params: dict, grads: dict, t: int) -> None:
    """dynmuon with the shaper pinned to Newton-Schulz orthogonalization (p = 0)."""
    fixed = ShaperChoice(kind=ShaperKind.NEWTON_SCHULZ, exponent=0.0)
    _spectral_family_step(state, params, grads, t, lambda step: fixed)


def sgd_step(state: OptimizerState, params: dict, grads: dict, t: int) -> None:
    """Raw momentum update (p = 1) with decoupled weight decay."""
    fixed = ShaperChoice(kind=ShaperKind.RAW, exponent=1.0)
    _spectral_family_step(state, params, grads, t, lambda step: fixed)


def adamw_step(state: OptimizerState, params: dict, grads: dict, t: int) -> None:
    """Bias-corrected AdamW with decoupled weight decay on every parameter."""
    hyper = state.hyper
    lr = _base_lr_at(hyper, t)
    for name, w in params.items():
        g = grads[name]
        _check_pair(name, w, g)
        _adamw_update(state, name, w, g, t, lr, hyper.weight_decay)
    state.step += 1


STEP_FUNCTIONS = {
    "dynmuon": dynmuon_step,
    "muon": muon_step,
    "adamw": adamw_step,
    "sgd": sgd_step,
}
