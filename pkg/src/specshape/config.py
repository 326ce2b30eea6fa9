"""Strict key=value run configuration.

Flat UTF-8 lines with dotted keys (``optimizer.lr = 0.01``), ``#`` comments,
and a closed key table: unknown or duplicate keys fail with their line number.
Defaults follow the shipped training recipe (matrix lr 0.01, AdamW lr 0.002,
weight decay 0.01, schedule 1 -> -0.25 with tau=0.02 / w=0.01, warmdown 0.2).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError
from .optim import SCHEDULE_SHAPES, LrSchedule, OptimizerHyper
from .schedule import SpectralSchedule
from .spectral import NewtonSchulzConfig

TASK_KINDS = ("quadratic", "clusters")
OPTIMIZER_KINDS = ("dynmuon", "muon", "adamw", "sgd")
SCHEDULE_PRESETS = ("default", "wide")

_DEFAULT_LR = {"dynmuon": 0.01, "muon": 0.01, "sgd": 0.01, "adamw": 0.002}


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_float_list(raw: str):
    return tuple(float(tok) for tok in raw.split(",") if tok.strip())


# key -> (converter, default); REQUIRED means the key must be present.
_REQUIRED = object()

_KEY_TABLE = {
    "task.kind": (str, _REQUIRED),
    "task.dim": (int, 32),
    "task.cols": (int, 8),
    "task.h_min": (float, 0.01),
    "task.spectrum": (_parse_float_list, None),
    "task.kappa": (float, 1.0),
    "task.noise_std": (float, 0.0),
    "task.signal_strong": (float, 1.0),
    "task.signal_flat": (float, 1.0),
    "task.residual_scale": (float, 1.0),
    "task.classes": (int, 4),
    "task.input_dim": (int, 16),
    "task.hidden_dim": (int, 32),
    "task.margin": (float, 3.0),
    "task.train_samples": (int, 8192),
    "task.eval_samples": (int, 4096),
    "task.loss_lambda": (float, 0.0),
    "optimizer.kind": (str, _REQUIRED),
    "optimizer.lr": (float, None),
    "optimizer.momentum": (float, 0.95),
    "optimizer.nesterov": (_parse_bool, False),
    "optimizer.weight_decay": (float, 0.01),
    "optimizer.shape_scale": (_parse_bool, False),
    "optimizer.adam_beta1": (float, 0.9),
    "optimizer.adam_beta2": (float, 0.999),
    "optimizer.adam_eps": (float, 1e-8),
    "optimizer.scalar_lr": (float, 0.001),
    "ns.steps": (int, 5),
    "ns.a": (float, 3.4445),
    "ns.b": (float, -4.7750),
    "ns.c": (float, 2.0315),
    "schedule.preset": (str, "default"),
    "schedule.shape": (str, "logistic"),
    "schedule.p_max": (float, None),
    "schedule.p_min": (float, None),
    "schedule.tau": (float, None),
    "schedule.w": (float, None),
    "lr.warmup_frac": (float, 0.01),
    "lr.warmdown_ratio": (float, 0.2),
    "run.seed": (int, 0),
    "run.total_steps": (int, 1000),
    "run.batch_size": (int, 64),
    "run.eval_stride": (int, 50),
    "run.target_loss": (float, None),
    "run.out_dir": (str, None),
    "run.record_wall_time": (_parse_bool, False),
    "probe.stride": (int, 100),
    "probe.k": (int, None),
    "probe.n_batches": (int, 32),
    "probe.bucket_size": (int, 8),
    "probe.param": (str, None),
    "sim.curvatures": (_parse_float_list, None),
    "sim.kappa": (float, 1.0),
    "sim.eta": (float, 0.1),
    "sim.exponent": (float, 0.0),
    "sim.noise": (_parse_float_list, None),
    "sim.initial": (_parse_float_list, None),
    "sim.steps": (int, 100),
    "sim.mode": (str, "closed_form"),
    "sim.metrics": (_parse_bool, False),
    "sim.bucket_size": (int, 8),
}


@dataclass
class RunConfig:
    """Fully resolved run configuration; ``values`` maps every known key."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def task_kind(self) -> str:
        return self.values["task.kind"]

    @property
    def optimizer_kind(self) -> str:
        return self.values["optimizer.kind"]

    @property
    def seed(self) -> int:
        return self.values["run.seed"]

    @property
    def total_steps(self) -> int:
        return self.values["run.total_steps"]

    def spectral_schedule(self) -> SpectralSchedule:
        v = self.values
        if v["schedule.preset"] == "wide":
            base = SpectralSchedule.wide(self.total_steps)
        else:
            base = SpectralSchedule(total_steps=self.total_steps)
        return SpectralSchedule(
            total_steps=self.total_steps,
            p_max=v["schedule.p_max"] if v["schedule.p_max"] is not None else base.p_max,
            p_min=v["schedule.p_min"] if v["schedule.p_min"] is not None else base.p_min,
            tau=v["schedule.tau"] if v["schedule.tau"] is not None else base.tau,
            w=v["schedule.w"] if v["schedule.w"] is not None else base.w,
        )

    def ns_config(self) -> NewtonSchulzConfig:
        v = self.values
        return NewtonSchulzConfig(
            coefficients=(v["ns.a"], v["ns.b"], v["ns.c"]), steps=v["ns.steps"]
        )

    def lr_schedule(self) -> LrSchedule:
        v = self.values
        return LrSchedule(
            total_steps=self.total_steps,
            warmup_frac=v["lr.warmup_frac"],
            warmdown_ratio=v["lr.warmdown_ratio"],
        )

    def base_lr(self) -> float:
        explicit = self.values["optimizer.lr"]
        return explicit if explicit is not None else _DEFAULT_LR[self.optimizer_kind]

    def optimizer_hyper(self) -> OptimizerHyper:
        v = self.values
        return OptimizerHyper(
            base_lr=self.base_lr(),
            momentum_beta=v["optimizer.momentum"],
            nesterov=v["optimizer.nesterov"],
            weight_decay=v["optimizer.weight_decay"],
            adam_beta1=v["optimizer.adam_beta1"],
            adam_beta2=v["optimizer.adam_beta2"],
            adam_eps=v["optimizer.adam_eps"],
            scalar_lr=v["optimizer.scalar_lr"],
            shape_scale=v["optimizer.shape_scale"],
            ns=self.ns_config(),
            schedule=self.spectral_schedule(),
            schedule_shape=v["schedule.shape"],
            lr_schedule=self.lr_schedule(),
        )

    def resolved_text(self) -> str:
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if val is None:
                continue
            if isinstance(val, tuple):
                val = ",".join(repr(float(x)) for x in val)
            elif isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    if v["task.kind"] not in TASK_KINDS:
        raise ValidationError(f"task.kind must be one of {TASK_KINDS}")
    if v["optimizer.kind"] not in OPTIMIZER_KINDS:
        raise ValidationError(f"optimizer.kind must be one of {OPTIMIZER_KINDS}")
    if v["schedule.preset"] not in SCHEDULE_PRESETS:
        raise ValidationError(f"schedule.preset must be one of {SCHEDULE_PRESETS}")
    if v["schedule.shape"] not in SCHEDULE_SHAPES:
        raise ValidationError(f"schedule.shape must be one of {SCHEDULE_SHAPES}")
    for key in ("run.total_steps", "run.batch_size", "run.eval_stride", "probe.stride",
                "probe.n_batches", "task.dim", "task.cols"):
        if v[key] < 1:
            raise ValidationError(f"{key} must be >= 1")
    if v["optimizer.lr"] is not None and v["optimizer.lr"] <= 0:
        raise ValidationError("optimizer.lr must be positive")
    # Constructing the derived objects runs their own validation.
    cfg.spectral_schedule()
    cfg.ns_config()
    cfg.lr_schedule()
    cfg.optimizer_hyper()


def parse_config_text(text: str) -> RunConfig:
    values = {k: (None if d is _REQUIRED else d) for k, (_, d) in _KEY_TABLE.items()}
    seen = set()
    required_seen = set()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(line_no, "expected 'key = value'")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _KEY_TABLE:
            raise ParseError(line_no, f"unknown key {key!r}")
        if key in seen:
            raise ParseError(line_no, f"duplicate key {key!r}")
        seen.add(key)
        if not raw_value:
            raise ParseError(line_no, f"missing value for {key!r}")
        converter, default = _KEY_TABLE[key]
        try:
            values[key] = converter(raw_value)
        except ValueError as exc:
            raise ParseError(line_no, f"bad value for {key!r}: {exc}") from None
        if default is _REQUIRED:
            required_seen.add(key)
    missing = [k for k, (_, d) in _KEY_TABLE.items() if d is _REQUIRED and k not in required_seen]
    if missing:
        raise ValidationError(f"missing required keys: {missing}")
    cfg = RunConfig(values=values)
    _validate(cfg)
    return cfg


def parse_config(path) -> RunConfig:
    """Parse and validate a config file; unknown keys fail with their line number."""
    if not os.path.exists(path):
        raise ValidationError(f"no such config file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
