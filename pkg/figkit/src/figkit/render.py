"""Render specshape CSV outputs to figure files.

Pure consumer of the documented CSV schemas: every plotted number comes
straight out of a file, nothing is recomputed here. Inputs are never
modified and identical inputs give identical images.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import EmptyInputError, SchemaMismatchError

PLOT_KINDS = ("loss-curves", "signal-metrics", "sweep-bars", "schedule", "shaping-error")

# fixed geometry so identical inputs produce identical images
_FIGSIZE_SINGLE = (6.4, 4.2)
_FIGSIZE_TRIPLE = (12.0, 3.6)
_DPI = 120


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    inputs: tuple
    out: str
    ycap: float | None = None

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise SchemaMismatchError(f"unknown plot kind {self.kind!r}")
        if not self.inputs:
            raise EmptyInputError("no input files given")


def _read_rows(path: str, required: tuple) -> list[dict]:
    if not os.path.exists(path):
        raise EmptyInputError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in required if c not in fields]
        if missing:
            raise SchemaMismatchError(
                f"{path}: missing column(s) {', '.join(repr(c) for c in missing)}"
            )
        rows = list(reader)
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    return rows


def _run_label(path: str) -> str:
    parent = os.path.basename(os.path.dirname(os.path.abspath(path)))
    name = os.path.splitext(os.path.basename(path))[0]
    return parent if name in ("metrics", "probes", "sweep") and parent else name


def _apply_ycap(axes, ycap) -> None:
    if ycap is None:
        return
    for ax in axes:
        ax.set_ylim(top=ycap)


def _save(fig, out: str) -> None:
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)


def _render_loss_curves(spec: PlotSpec):
    fig, ax = plt.subplots(figsize=_FIGSIZE_SINGLE)
    for path in spec.inputs:
        rows = _read_rows(path, ("step", "eval_loss"))
        pts = [(int(r["step"]), float(r["eval_loss"])) for r in rows if r["eval_loss"]]
        if not pts:
            raise EmptyInputError(f"{path}: no evaluation rows")
        steps, losses = zip(*pts)
        ax.plot(steps, losses, label=_run_label(path))
    ax.set_xlabel("step")
    ax.set_ylabel("eval loss")
    ax.legend()
    _apply_ycap([ax], spec.ycap)
    _save(fig, spec.out)


def _render_signal_metrics(spec: PlotSpec):
    path = spec.inputs[0]
    rows = _read_rows(path, ("step", "mode_rank", "pi_t", "u_flat_med", "omega_t"))
    summary = [r for r in rows if r["mode_rank"] == "-1" and r["pi_t"]]
    if not summary:
        raise EmptyInputError(f"{path}: no summary rows")
    steps = [int(r["step"]) for r in summary]
    panels = [
        ("pi_t", "residual shift"),
        ("u_flat_med", "flat-mode noise-adjusted signal"),
        ("omega_t", "flat-mode advantage"),
    ]
    fig, axes = plt.subplots(1, 3, figsize=_FIGSIZE_TRIPLE)
    for ax, (col, title) in zip(axes, panels):
        values = [float(r[col]) if r[col] else float("nan") for r in summary]
        ax.plot(steps, values, marker="o", markersize=3)
        ax.axhline(0.0, lw=0.6, color="gray")
        ax.set_xlabel("step")
        ax.set_title(title)
    _apply_ycap(axes, spec.ycap)
    fig.tight_layout()
    _save(fig, spec.out)


def _render_sweep_bars(spec: PlotSpec):
    path = spec.inputs[0]
    rows = _read_rows(path, ("axis", "value", "status", "best_eval_loss"))
    ok = [r for r in rows if r["status"] == "ok" and r["best_eval_loss"]]
    if not ok:
        raise EmptyInputError(f"{path}: no completed sweep rows")
    labels = [r["value"] for r in ok]
    losses = [float(r["best_eval_loss"]) for r in ok]
    fig, ax = plt.subplots(figsize=_FIGSIZE_SINGLE)
    ax.bar(range(len(ok)), losses)
    ax.set_xticks(range(len(ok)))
    ax.set_xticklabels(labels)
    ax.set_xlabel(ok[0]["axis"])
    ax.set_ylabel("best eval loss")
    diverged = [r["value"] for r in rows if r["status"] == "diverged"]
    if diverged:
        ax.set_title(f"diverged: {', '.join(diverged)}")
    _apply_ycap([ax], spec.ycap)
    _save(fig, spec.out)


def _render_schedule(spec: PlotSpec):
    path = spec.inputs[0]
    rows = _read_rows(path, ("t", "p_t", "kind"))
    steps = [int(r["t"]) for r in rows]
    values = [float(r["p_t"]) for r in rows]
    kinds = [r["kind"] for r in rows]
    fig, ax = plt.subplots(figsize=_FIGSIZE_SINGLE)
    ax.plot(steps, values, color="lightgray", lw=1.0)
    for kind in dict.fromkeys(kinds):  # preserve first-seen order
        pts = [(s, v) for s, v, k in zip(steps, values, kinds) if k == kind]
        ax.scatter(*zip(*pts), s=6, label=kind)
    ax.axhline(0.25, lw=0.6, ls=":", color="gray")
    ax.axhline(0.0, lw=0.6, ls=":", color="gray")
    ax.set_xlabel("step")
    ax.set_ylabel("spectral exponent")
    ax.legend()
    _apply_ycap([ax], spec.ycap)
    _save(fig, spec.out)


def _render_shaping_error(spec: PlotSpec):
    path = spec.inputs[0]
    rows = _read_rows(path, ("p", "frobenius_error_vs_exact", "max_singular_value_error"))
    ps = [float(r["p"]) for r in rows]
    fig, ax = plt.subplots(figsize=_FIGSIZE_SINGLE)
    ax.plot(ps, [float(r["frobenius_error_vs_exact"]) for r in rows],
            marker="o", label="relative Frobenius error")
    ax.plot(ps, [float(r["max_singular_value_error"]) for r in rows],
            marker="s", label="max singular-value gap")
    ax.set_xlabel("spectral exponent")
    ax.set_ylabel("fast-vs-exact error")
    ax.legend()
    _apply_ycap([ax], spec.ycap)
    _save(fig, spec.out)


_RENDERERS = {
    "loss-curves": _render_loss_curves,
    "signal-metrics": _render_signal_metrics,
    "sweep-bars": _render_sweep_bars,
    "schedule": _render_schedule,
    "shaping-error": _render_shaping_error,
}


def render(spec: PlotSpec) -> str:
    """Render the spec to its output path and return that path."""
    _RENDERERS[spec.kind](spec)
    return spec.out
