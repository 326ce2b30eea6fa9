"""Command-line surface: spectral shaping on matrix files, schedule tables,
training runs, mode-model simulation, probes, sweeps.

Exit codes: 0 success, 1 validation or parse error, 2 divergence.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .config import parse_config
from .errors import DivergedError, SpecshapeError, ValidationError
from .harness import run_sweep, run_train, steps_to_target
from .linalg import read_matrix_text, write_matrix_text
from .modemodel import (
    CLOSED_FORM,
    MONTE_CARLO,
    ModeModelConfig,
    signal_metrics,
    simulate_trajectory,
)
from .schedule import select_shaper
from .spectral import exact_spectral_shape, fast_spectral, shaping_error


def _fmt(x: float) -> str:
    return repr(float(x))


def _cmd_shape(args) -> int:
    m = read_matrix_text(args.infile)
    if args.mode == "exact":
        out = exact_spectral_shape(m, args.p)
    else:
        out = fast_spectral(m, args.p)
    write_matrix_text(out, args.out)
    return 0


def _cmd_schedule(args) -> int:
    cfg = parse_config(args.config)
    sched = cfg.spectral_schedule()
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "p_t", "kind"])
        for t in range(sched.total_steps + 1):
            choice = select_shaper(sched, t)
            writer.writerow([str(t), _fmt(choice.exponent), choice.kind.value])
    return 0


def _cmd_train(args) -> int:
    cfg = parse_config(args.config)
    out_dir = args.out or cfg.values["run.out_dir"]
    if not out_dir:
        raise ValidationError("no output directory: pass --out or set run.out_dir")
    run_train(cfg, out_dir)
    return 0


def _cmd_probe(args) -> int:
    cfg = parse_config(args.config)
    out_dir = args.out or cfg.values["run.out_dir"]
    if not out_dir:
        raise ValidationError("no output directory: pass --out or set run.out_dir")
    stride = args.stride if args.stride is not None else cfg.values["probe.stride"]
    run_train(cfg, out_dir, probe_stride=stride)
    return 0


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    v = cfg.values
    if v["sim.curvatures"] is None:
        raise ValidationError("simulate requires sim.curvatures")
    curv = v["sim.curvatures"]
    n = len(curv)
    noise = v["sim.noise"] if v["sim.noise"] is not None else (0.0,) * n
    if len(noise) == 1:
        noise = noise * n
    initial = v["sim.initial"] if v["sim.initial"] is not None else (1.0,) * n
    if len(initial) == 1:
        initial = initial * n
    mm_cfg = ModeModelConfig(
        curvatures=curv, kappa=v["sim.kappa"], eta=v["sim.eta"],
        exponent=v["sim.exponent"], noise_levels=noise,
        initial_residuals=initial, steps=v["sim.steps"],
    )
    kind = CLOSED_FORM if v["sim.mode"] == "closed_form" else MONTE_CARLO
    traj = simulate_trajectory(mm_cfg, kind, seed=v["run.seed"])
    value_col = "second_moment" if kind == CLOSED_FORM else "residual"
    with_metrics = v["sim.metrics"]
    bucket = v["sim.bucket_size"]
    omega_ok = all(c > 0 for c in noise)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["step", "mode", value_col]
        if with_metrics:
            header += ["pi_t", "omega_t"]
        writer.writerow(header)
        for step in range(traj.values.shape[0]):
            for mode in range(n):
                row = [str(step), str(mode), _fmt(traj.values[step, mode])]
                if with_metrics:
                    row += ["", ""]
                writer.writerow(row)
            if with_metrics and n >= 2 * bucket:
                energy = traj.second_moments[step]
                if np.all(energy > 0):
                    dummy = np.asarray(noise) if omega_ok else np.ones(n)
                    m = signal_metrics(energy, dummy, np.asarray(curv), bucket_size=bucket)
                    omega = _fmt(m.flat_advantage) if omega_ok else ""
                    writer.writerow([str(step), "-1", "", _fmt(m.residual_shift), omega])
    if traj.diverged:
        raise DivergedError(traj.diverged_step or -1, "simulated second moment diverged")
    return 0


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    out_dir = args.out or cfg.values["run.out_dir"]
    if not out_dir:
        raise ValidationError("no output directory: pass --out or set run.out_dir")
    values = [tok.strip() for tok in args.values.split(",") if tok.strip()]
    if args.axis != "schedule_shape":
        values = [float(tok) for tok in values]
    run_sweep(cfg, args.axis, values, out_dir)
    return 0


def _cmd_compare_exact(args) -> int:
    cfg = parse_config(args.config)
    ns = cfg.ns_config()
    if args.infile:
        m = read_matrix_text(args.infile)
    else:
        rng = np.random.default_rng(cfg.seed)
        m = rng.standard_normal((cfg.values["task.dim"], cfg.values["task.cols"]))
    if args.p:
        grid = [float(tok) for tok in args.p.split(",") if tok.strip()]
    else:
        p_min = cfg.spectral_schedule().p_min
        grid = [p_min * frac for frac in (0.2, 0.4, 0.6, 0.8, 1.0)]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "frobenius_error_vs_exact", "max_singular_value_error"])
        for p in grid:
            report = shaping_error(m, p, ns)
            writer.writerow([
                _fmt(p),
                _fmt(report.frobenius_error_vs_exact),
                _fmt(report.max_singular_value_error),
            ])
    return 0


def _cmd_steps_to_target(args) -> int:
    reached = steps_to_target(args.metrics, args.target)
    print(reached if reached is not None else "not_reached")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specshape",
        description="Power-law spectral shaping toolkit: shaped optimizers, "
        "mode-wise dynamics simulation, and training probes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shape", help="apply spectral shaping to a matrix file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--mode", choices=("exact", "fast"), default="exact")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_shape)

    p = sub.add_parser("schedule", help="write the (t, p_t, kind) table as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_schedule)

    p = sub.add_parser("train", help="run training per the config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("simulate", help="simulate the mode-wise dynamics model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("probe", help="train with probes attached at a stride")
    p.add_argument("--config", required=True)
    p.add_argument("--stride", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_probe)

    p = sub.add_parser("sweep", help="run one training run per axis value")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True,
                   choices=("p_min", "lr", "tau", "w", "schedule_shape"))
    p.add_argument("--values", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("compare-exact", help="fast-vs-exact shaping error table")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile")
    p.add_argument("--p", help="comma-separated exponents")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_compare_exact)

    p = sub.add_parser("steps-to-target", help="first step reaching a target eval loss")
    p.add_argument("--metrics", required=True)
    p.add_argument("--target", type=float, required=True)
    p.set_defaults(fn=_cmd_steps_to_target)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SpecshapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
