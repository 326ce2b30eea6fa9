"""specshape: power-law spectral shaping for matrix-valued optimization.

Shapes update matrices by raising their singular values to a scheduled
exponent, simulates the induced mode-wise signal/noise dynamics, and probes
live training runs for per-mode curvature, noise, and residual energy.
"""

from .errors import SpecshapeError
from .linalg import (
    SvdResult,
    SymEigResult,
    frobenius_norm,
    read_matrix_text,
    svd,
    sym_eig,
    write_matrix_text,
)
from .modemodel import (
    ModeModelConfig,
    ModeTrajectory,
    SignalMetrics,
    mode_step,
    optimal_exponent_sweep,
    second_moment_step,
    signal_metrics,
    simulate_trajectory,
)
from .models import (
    MlpModel,
    QuadraticProblem,
    gen_synthetic,
    mlp_forward_backward,
    quadratic_loss_grad,
)
from .optim import (
    LrSchedule,
    OptimizerHyper,
    OptimizerState,
    adamw_step,
    dynmuon_step,
    lr_at,
    muon_step,
    sgd_step,
)
from .probes import (
    EmpiricalMode,
    ProbeReport,
    extract_modes,
    fit_power_law,
    hvp_curvature,
    noise_variance,
    residual_energy,
)
from .schedule import (
    ShaperChoice,
    ShaperKind,
    SpectralSchedule,
    exponent_at,
    select_shaper,
)
from .spectral import (
    NewtonSchulzConfig,
    ShapingReport,
    exact_spectral_shape,
    fast_spectral,
    newton_schulz,
    shaping_error,
)

__version__ = "0.1.0"

__all__ = [
    "EmpiricalMode",
    "LrSchedule",
    "MlpModel",
    "ModeModelConfig",
    "ModeTrajectory",
    "NewtonSchulzConfig",
    "OptimizerHyper",
    "OptimizerState",
    "ProbeReport",
    "QuadraticProblem",
    "ShaperChoice",
    "ShaperKind",
    "ShapingReport",
    "SignalMetrics",
    "SpecshapeError",
    "SpectralSchedule",
    "SvdResult",
    "SymEigResult",
    "adamw_step",
    "dynmuon_step",
    "exact_spectral_shape",
    "exponent_at",
    "extract_modes",
    "fast_spectral",
    "fit_power_law",
    "frobenius_norm",
    "gen_synthetic",
    "hvp_curvature",
    "lr_at",
    "mlp_forward_backward",
    "mode_step",
    "muon_step",
    "newton_schulz",
    "noise_variance",
    "optimal_exponent_sweep",
    "quadratic_loss_grad",
    "read_matrix_text",
    "residual_energy",
    "second_moment_step",
    "select_shaper",
    "sgd_step",
    "shaping_error",
    "signal_metrics",
    "simulate_trajectory",
    "svd",
    "sym_eig",
    "write_matrix_text",
]
