"""Run orchestration: training loops, probe scheduling, sweeps, metric files.

Every random draw comes from a substream keyed by (seed, purpose, step), so
attaching probes never perturbs the training stream and a (config, seed) pair
determines every output file byte for byte. Wall time is recorded as 0 unless
``run.record_wall_time`` is enabled, because real timings would break that
contract.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import (
    DivergedError,
    MalformedMetricsError,
    SpecshapeError,
    ValidationError,
)
from .linalg import write_matrix_text
from .models import (
    gen_gaussian_clusters,
    gen_quadratic_problem,
    init_mlp,
    mlp_forward_backward,
    quadratic_loss_grad,
)
from .modemodel import signal_metrics
from .optim import STEP_FUNCTIONS, OptimizerState, dynmuon_choice, lr_at
from .probes import (
    CURVATURE_FLOOR,
    ProbeReport,
    extract_modes,
    fit_power_law,
    hvp_curvature,
    mode_projection,
    noise_variance,
    residual_energy,
)
from .schedule import ShaperKind

METRICS_HEADER = ["step", "train_loss", "eval_loss", "p_t", "lr_t", "shaper", "wall_ms"]
PROBES_HEADER = [
    "step", "mode_rank", "h_hat", "c_hat", "delta2_hat", "g_probe",
    "pi_t", "u_flat_med", "omega_t", "beta_t", "r2",
]
SWEEP_HEADER = ["axis", "value", "status", "best_eval_loss", "final_eval_loss", "steps_to_target"]

LOSS_DIVERGENCE_LIMIT = 1e12
N_PROBE_BATCHES_FIXED = 8

_STREAM_TAGS = {
    "data": 0,
    "init": 1,
    "train": 2,
    "eval": 3,
    "noise_batch": 4,
    "probe_fixed": 5,
}


def stream_rng(seed: int, purpose: str, step: int = 0) -> np.random.Generator:
    """Deterministic substream for one purpose at one step."""
    tag = _STREAM_TAGS[purpose]
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(tag, int(step)))
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class QuadraticTask:
    """Quadratic matrix problem with a controllable per-mode residual profile.

    The initial residual along mode ``i`` has amplitude
    ``residual_scale * (signal_flat + (signal_strong - signal_flat) * h_i)``,
    so signal can be concentrated in strong or flat curvature directions.
    Mini-batch gradient noise has per-entry std ``noise_std / sqrt(batch)``.
    """

    def __init__(self, cfg: RunConfig):
        v = cfg.values
        self.seed = cfg.seed
        self.batch_size = v["run.batch_size"]
        self.problem = gen_quadratic_problem(
            dim=v["task.dim"],
            cols=v["task.cols"],
            h_min=v["task.h_min"],
            spectrum=v["task.spectrum"],
            kappa=v["task.kappa"],
            noise_std=v["task.noise_std"],
            seed=cfg.seed,
        )
        eig = np.linalg.eigh(self.problem.h)
        self._evals = eig[0][::-1].copy()
        self._q = eig[1][:, ::-1].copy()
        rng = stream_rng(cfg.seed, "init")
        amp = v["task.signal_flat"] + (v["task.signal_strong"] - v["task.signal_flat"]) * self._evals
        amp = v["task.residual_scale"] * amp
        rows = rng.standard_normal((v["task.dim"], v["task.cols"]))
        rows /= np.maximum(np.linalg.norm(rows, axis=1, keepdims=True), 1e-12)
        self._w0 = self.problem.w_star + self._q @ (amp[:, None] * rows)
        self._probe_noise = None

    def init_params(self) -> dict:
        return {"w": self._w0.copy()}

    def noise_scale(self) -> float:
        return self.problem.noise_std / math.sqrt(self.batch_size)

    def train_loss_grad(self, params: dict, step: int):
        rng = stream_rng(self.seed, "train", step)
        loss, grad = quadratic_loss_grad(self.problem, params["w"])
        scale = self.noise_scale()
        if scale > 0:
            grad = grad + rng.normal(0.0, scale, size=grad.shape)
        return loss, {"w": grad}

    def eval_loss(self, params: dict) -> float:
        loss, _ = quadratic_loss_grad(self.problem, params["w"])
        return loss

    # --- probe surface ---

    def probe_param_names(self):
        return ["w"]

    def probe_grad_fn(self, params: dict, name: str):
        def fn(w):
            _, grad = quadratic_loss_grad(self.problem, w)
            return grad
        return fn

    def _fixed_probe_noise(self):
        if self._probe_noise is None:
            rng = stream_rng(self.seed, "probe_fixed")
            scale = self.noise_scale()
            shape = self.problem.w_star.shape
            self._probe_noise = [
                rng.normal(0.0, scale, size=shape) if scale > 0 else np.zeros(shape)
                for _ in range(N_PROBE_BATCHES_FIXED)
            ]
        return self._probe_noise

    def probe_fixed_grad(self, params: dict, name: str) -> np.ndarray:
        _, grad = quadratic_loss_grad(self.problem, params["w"])
        noise = self._fixed_probe_noise()
        return grad + sum(noise) / len(noise)

    def noise_batch_grads(self, params: dict, name: str, step: int, n_b: int):
        rng = stream_rng(self.seed, "noise_batch", step)
        _, grad = quadratic_loss_grad(self.problem, params["w"])
        scale = self.noise_scale()
        return [grad + rng.normal(0.0, scale, size=grad.shape) for _ in range(n_b)]


class ClusterTask:
    """Gaussian-cluster classification with the two-layer squared-ReLU model."""

    def __init__(self, cfg: RunConfig):
        v = cfg.values
        self.seed = cfg.seed
        self.batch_size = v["run.batch_size"]
        self.lam = v["task.loss_lambda"]
        total = v["task.train_samples"] + v["task.eval_samples"]
        data = gen_gaussian_clusters(
            classes=v["task.classes"],
            input_dim=v["task.input_dim"],
            samples=total,
            margin=v["task.margin"],
            seed=cfg.seed,
        )
        n_train = v["task.train_samples"]
        self.x_train, self.y_train = data.x[:n_train], data.labels[:n_train]
        self.x_eval, self.y_eval = data.x[n_train:], data.labels[n_train:]
        self.model = init_mlp(
            v["task.input_dim"], v["task.hidden_dim"], v["task.classes"],
            stream_rng(cfg.seed, "init"),
        )
        self._probe_batches = None

    def init_params(self) -> dict:
        return {"w1": self.model.w1.copy(), "w2": self.model.w2.copy()}

    def _batch(self, rng: np.random.Generator):
        idx = rng.integers(0, self.x_train.shape[0], size=self.batch_size)
        return self.x_train[idx], self.y_train[idx]

    def _loss_grads_at(self, params: dict, x, y):
        from .models import MlpModel

        model = MlpModel(w1=params["w1"], w2=params["w2"])
        return mlp_forward_backward(model, x, y, self.lam)

    def train_loss_grad(self, params: dict, step: int):
        x, y = self._batch(stream_rng(self.seed, "train", step))
        return self._loss_grads_at(params, x, y)

    def eval_loss(self, params: dict) -> float:
        loss, _ = self._loss_grads_at(params, self.x_eval, self.y_eval)
        return loss

    # --- probe surface ---

    def probe_param_names(self):
        return ["w1", "w2"]

    def _fixed_probe_sets(self):
        if self._probe_batches is None:
            rng = stream_rng(self.seed, "probe_fixed")
            self._probe_batches = [
                rng.integers(0, self.x_train.shape[0], size=self.batch_size)
                for _ in range(N_PROBE_BATCHES_FIXED)
            ]
        return self._probe_batches

    def _probe_set_grad(self, params: dict, name: str) -> np.ndarray:
        idx = np.concatenate(self._fixed_probe_sets())
        _, grads = self._loss_grads_at(params, self.x_train[idx], self.y_train[idx])
        return grads[name]

    def probe_grad_fn(self, params: dict, name: str):
        idx = np.concatenate(self._fixed_probe_sets())
        x, y = self.x_train[idx], self.y_train[idx]

        def fn(w):
            trial = dict(params)
            trial[name] = w
            _, grads = self._loss_grads_at(trial, x, y)
            return grads[name]

        return fn

    def probe_fixed_grad(self, params: dict, name: str) -> np.ndarray:
        return self._probe_set_grad(params, name)

    def noise_batch_grads(self, params: dict, name: str, step: int, n_b: int):
        rng = stream_rng(self.seed, "noise_batch", step)
        out = []
        for _ in range(n_b):
            x, y = self._batch(rng)
            _, grads = self._loss_grads_at(params, x, y)
            out.append(grads[name])
        return out


def build_task(cfg: RunConfig):
    if cfg.task_kind == "quadratic":
        return QuadraticTask(cfg)
    return ClusterTask(cfg)


def run_probe_step(task, cfg: RunConfig, params: dict, state: OptimizerState, step: int) -> ProbeReport:
    """Estimate per-mode curvature, noise, and residual energy at one step."""
    v = cfg.values
    name = v["probe.param"] or task.probe_param_names()[0]
    if name not in params:
        raise ValidationError(
            f"probe.param {name!r} is not a parameter; have {sorted(params)}"
        )
    w = params[name]
    update = state.momentum.get(name)
    if update is None or float(np.linalg.norm(update)) < 1e-30:
        update = task.probe_fixed_grad(params, name)
    k = v["probe.k"] if v["probe.k"] is not None else min(256, min(w.shape))
    modes = extract_modes(update, k)
    grad_fn = task.probe_grad_fn(params, name)
    probe_grad = task.probe_fixed_grad(params, name)
    batch_grads = task.noise_batch_grads(params, name, step, v["probe.n_batches"])

    h_hat = np.empty(len(modes))
    c_hat = np.empty(len(modes))
    g_probe = np.empty(len(modes))
    delta2 = np.empty(len(modes))
    for i, mode in enumerate(modes):
        h_hat[i] = hvp_curvature(grad_fn, w, mode)
        c_hat[i] = noise_variance(batch_grads, mode)
        g_probe[i] = mode_projection(probe_grad, mode)
        if abs(h_hat[i]) >= CURVATURE_FLOOR:
            delta2[i] = residual_energy(probe_grad, mode, h_hat[i])
        else:
            delta2[i] = np.nan

    metrics = None
    bucket = v["probe.bucket_size"]
    usable = np.isfinite(delta2) & (delta2 > 0) & (c_hat > 0)
    if usable.all() and len(modes) >= 2 * bucket:
        metrics = signal_metrics(delta2, c_hat, h_hat, bucket_size=bucket)

    power_law = None
    pos = (h_hat > 0) & (c_hat > 0)
    if pos.sum() >= 3:
        try:
            power_law = fit_power_law(h_hat[pos], c_hat[pos])
        except SpecshapeError:
            power_law = None

    return ProbeReport(
        step=step, h_hat=h_hat, c_hat=c_hat, delta2_hat=delta2,
        g_probe=g_probe, metrics=metrics, power_law=power_law,
    )


def _probe_rows(report: ProbeReport):
    rows = []
    for i in range(report.h_hat.size):
        d2 = report.delta2_hat[i]
        rows.append([
            str(report.step), str(i),
            _fmt(float(report.h_hat[i])), _fmt(float(report.c_hat[i])),
            _fmt(float(d2)) if np.isfinite(d2) else "",
            _fmt(float(report.g_probe[i])),
            "", "", "", "", "",
        ])
    summary = [str(report.step), "-1", "", "", "", ""]
    if report.metrics is not None:
        m = report.metrics
        from .modemodel import lower_median

        u_flat = lower_median(m.noise_adjusted[m.flat_bucket])
        summary += [_fmt(m.residual_shift), _fmt(u_flat), _fmt(m.flat_advantage)]
    else:
        summary += ["", "", ""]
    if report.power_law is not None:
        summary += [_fmt(report.power_law.beta), _fmt(report.power_law.r_squared)]
    else:
        summary += ["", ""]
    rows.append(summary)
    return rows


@dataclass
class RunResult:
    out_dir: str
    final_eval_loss: float
    best_eval_loss: float
    metrics_path: str
    steps: int


def run_train(cfg: RunConfig, out_dir: str, probe_stride: int | None = None) -> RunResult:
    """Execute the configured run; write config.resolved, metrics.csv, checkpoint/.

    Raises DivergedError (with the offending step) when the training loss
    exceeds the divergence limit or turns non-finite; files written so far are
    flushed first.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.resolved"), "w", encoding="utf-8") as fh:
        fh.write(cfg.resolved_text())

    task = build_task(cfg)
    params = task.init_params()
    hyper = cfg.optimizer_hyper()
    state = OptimizerState(hyper=hyper)
    step_fn = STEP_FUNCTIONS[cfg.optimizer_kind]
    total = cfg.total_steps
    eval_stride = cfg.values["run.eval_stride"]
    record_wall = cfg.values["run.record_wall_time"]

    metrics_path = os.path.join(out_dir, "metrics.csv")
    probes_path = os.path.join(out_dir, "probes.csv")
    best_eval = math.inf
    final_eval = math.inf
    probe_rows = []

    with open(metrics_path, "w", encoding="utf-8", newline="") as mfh:
        writer = csv.writer(mfh)
        writer.writerow(METRICS_HEADER)
        t_prev = time.perf_counter()
        for t in range(total):
            if probe_stride is not None and t % probe_stride == 0:
                report = run_probe_step(task, cfg, params, state, t)
                probe_rows.extend(_probe_rows(report))
            train_loss, grads = task.train_loss_grad(params, t)
            if not math.isfinite(train_loss) or train_loss > LOSS_DIVERGENCE_LIMIT:
                mfh.flush()
                _write_probe_file(probes_path, probe_rows, probe_stride)
                raise DivergedError(t, "training loss diverged")
            step_fn(state, params, grads, t)
            done = t + 1
            if done % eval_stride == 0 or done == total:
                eval_loss = task.eval_loss(params)
                if not math.isfinite(eval_loss) or eval_loss > LOSS_DIVERGENCE_LIMIT:
                    mfh.flush()
                    _write_probe_file(probes_path, probe_rows, probe_stride)
                    raise DivergedError(t, "evaluation loss diverged")
                p_t, shaper = _shaper_info(cfg, hyper, t)
                lr_t = lr_at(hyper.lr_schedule, hyper.base_lr, t)
                now = time.perf_counter()
                wall_ms = (now - t_prev) * 1e3 if record_wall else 0.0
                t_prev = now
                writer.writerow([
                    str(done), _fmt(train_loss), _fmt(eval_loss), p_t,
                    _fmt(lr_t), shaper, _fmt(wall_ms),
                ])
                best_eval = min(best_eval, eval_loss)
                final_eval = eval_loss

    _write_probe_file(probes_path, probe_rows, probe_stride)
    _write_checkpoint(os.path.join(out_dir, "checkpoint"), params, state)
    return RunResult(
        out_dir=out_dir,
        final_eval_loss=final_eval,
        best_eval_loss=best_eval,
        metrics_path=metrics_path,
        steps=total,
    )


def _shaper_info(cfg: RunConfig, hyper, t: int):
    kind = cfg.optimizer_kind
    if kind == "dynmuon":
        choice = dynmuon_choice(hyper, t)
        return _fmt(choice.exponent), choice.kind.value
    if kind == "muon":
        return _fmt(0.0), ShaperKind.NEWTON_SCHULZ.value
    if kind == "sgd":
        return _fmt(1.0), ShaperKind.RAW.value
    return "", "adamw"


def _write_probe_file(path: str, rows, probe_stride) -> None:
    if probe_stride is None:
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROBES_HEADER)
        writer.writerows(rows)


def _write_checkpoint(ckpt_dir: str, params: dict, state: OptimizerState) -> None:
    os.makedirs(ckpt_dir, exist_ok=True)
    manifest = [f"step {state.step}"]
    for group, buffers in (
        ("param", params), ("momentum", state.momentum), ("second_moment", state.second_moment),
    ):
        for name in sorted(buffers):
            arr = buffers[name]
            fname = f"{group}_{name}.txt"
            write_matrix_text(arr, os.path.join(ckpt_dir, fname))
            manifest.append(f"{group} {name} {arr.shape[0]} {arr.shape[1]} {fname}")
    with open(os.path.join(ckpt_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest) + "\n")


_SWEEP_AXES = {
    "p_min": "schedule.p_min",
    "lr": "optimizer.lr",
    "tau": "schedule.tau",
    "w": "schedule.w",
    "schedule_shape": "schedule.shape",
}


def run_sweep(cfg: RunConfig, axis: str, values, out_dir: str) -> list[dict]:
    """Independent runs per axis value; a diverged run yields a diverged row
    without aborting its siblings. Writes sweep.csv and returns the rows."""
    if axis not in _SWEEP_AXES:
        raise ValidationError(f"sweep axis must be one of {sorted(_SWEEP_AXES)}")
    if not values:
        raise ValidationError("sweep needs at least one value")
    os.makedirs(out_dir, exist_ok=True)
    key = _SWEEP_AXES[axis]
    target = cfg.values["run.target_loss"]
    rows = []
    for value in values:
        sub_values = dict(cfg.values)
        sub_values[key] = value if key == "schedule.shape" else float(value)
        sub_cfg = RunConfig(values=sub_values)
        run_dir = os.path.join(out_dir, f"{axis}={value}")
        row = {"axis": axis, "value": value, "status": "ok",
               "best_eval_loss": "", "final_eval_loss": "", "steps_to_target": ""}
        try:
            result = run_train(sub_cfg, run_dir)
            row["best_eval_loss"] = _fmt(result.best_eval_loss)
            row["final_eval_loss"] = _fmt(result.final_eval_loss)
            if target is not None:
                reached = steps_to_target(result.metrics_path, target)
                row["steps_to_target"] = str(reached) if reached is not None else "not_reached"
        except DivergedError as exc:
            row["status"] = "diverged"
            row["steps_to_target"] = f"diverged@{exc.step}"
        rows.append(row)
    with open(os.path.join(out_dir, "sweep.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_HEADER)
        writer.writeheader()
        writer.writerows(rows)
    return rows


def steps_to_target(metrics_path: str, target_loss: float):
    """First recorded step whose eval loss is at or below the target, else None."""
    if not os.path.exists(metrics_path):
        raise MalformedMetricsError(f"no such metrics file: {metrics_path}")
    with open(metrics_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(["step", "eval_loss"]).issubset(reader.fieldnames):
            raise MalformedMetricsError("metrics file lacks step/eval_loss columns")
        for row in reader:
            raw = row.get("eval_loss", "")
            if not raw:
                continue
            try:
                step = int(row["step"])
                loss = float(raw)
            except (TypeError, ValueError):
                raise MalformedMetricsError(f"bad metrics row: {row}") from None
            if loss <= target_loss:
                return step
    return None
