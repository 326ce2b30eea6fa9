"""Mode-wise estimators attached to live training runs.

Empirical modes are the top singular direction pairs of the current update
matrix. Along each mode the probes estimate local curvature (finite-difference
Hessian-vector product), mini-batch noise variance, and residual-signal energy,
and fit a power law between noise level and curvature across modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CurvatureBelowFloorError,
    DegenerateFitError,
    EpsilonTooSmallError,
    KTooLargeError,
    NonFiniteError,
    NonPositiveInputError,
    TooFewBatchesError,
    ValidationError,
)
from .linalg import as_matrix, svd
from .modemodel import SignalMetrics

# Curvature estimates below this floor cannot be divided by.
CURVATURE_FLOOR = 1e-8

# Two-epsilon agreement threshold for the round-off guard.
_EPS_CONSISTENCY = 0.5


@dataclass(frozen=True)
class EmpiricalMode:
    """Unit singular direction pair (left, right) at a given spectral rank."""

    left: np.ndarray
    right: np.ndarray
    rank_index: int

    def __post_init__(self):
        for name, v in (("left", self.left), ("right", self.right)):
            a = np.asarray(v, dtype=np.float64)
            if a.ndim != 1:
                raise ValidationError(f"{name} vector must be 1-D")
            if abs(float(np.linalg.norm(a)) - 1.0) > 1e-8:
                raise ValidationError(f"{name} vector must have unit norm")

    def basis_matrix(self) -> np.ndarray:
        return np.outer(self.left, self.right)


def extract_modes(update, k: int) -> list[EmpiricalMode]:
    """Top-``k`` singular direction pairs of the update, descending by singular value."""
    a = as_matrix(update, "update")
    if k < 1 or k > min(a.shape):
        raise KTooLargeError(f"k must lie in [1, {min(a.shape)}], got {k}")
    res = svd(a)
    return [
        EmpiricalMode(left=res.u[:, i].copy(), right=res.vt[i, :].copy(), rank_index=i)
        for i in range(k)
    ]


def mode_projection(matrix: np.ndarray, mode: EmpiricalMode) -> float:
    """Inner product of ``matrix`` with the mode's rank-one basis."""
    return float(mode.left @ matrix @ mode.right)


def default_probe_epsilon(w: np.ndarray) -> float:
    m, n = w.shape
    return 1e-3 * (1.0 + float(np.linalg.norm(w)) / math.sqrt(m * n))


def hvp_curvature(grad_fn, w, mode: EmpiricalMode, epsilon: float | None = None) -> float:
    """Directional curvature along the mode via central gradient differences.

    ``grad_fn`` must return the gradient matrix at an arbitrary parameter
    point. A second estimate at twice the offset guards against round-off
    dominated results.
    """
    a = as_matrix(w, "w")
    b = mode.basis_matrix()
    if b.shape != a.shape:
        raise ValidationError(f"mode basis {b.shape} does not match parameters {a.shape}")
    eps = default_probe_epsilon(a) if epsilon is None else float(epsilon)
    if eps <= 0:
        raise ValidationError("epsilon must be positive")

    def estimate(e: float) -> float:
        g_plus = np.asarray(grad_fn(a + e * b), dtype=np.float64)
        g_minus = np.asarray(grad_fn(a - e * b), dtype=np.float64)
        if not (np.isfinite(g_plus).all() and np.isfinite(g_minus).all()):
            raise NonFiniteError("gradient evaluator returned non-finite values")
        hvp = (g_plus - g_minus) / (2.0 * e)
        return float(np.sum(hvp * b))

    h1 = estimate(eps)
    h2 = estimate(2.0 * eps)
    denom = max(abs(h1), abs(h2))
    if denom > CURVATURE_FLOOR and abs(h1 - h2) > _EPS_CONSISTENCY * denom:
        raise EpsilonTooSmallError(
            f"curvature estimates at eps and 2*eps disagree ({h1:.3e} vs {h2:.3e})"
        )
    return h1


def noise_variance(batch_grads, mode: EmpiricalMode, n_b: int | None = None) -> float:
    """Unbiased sample variance of per-batch gradient projections onto the mode."""
    grads = list(batch_grads)
    if n_b is not None:
        grads = grads[:n_b]
    if len(grads) < 2:
        raise TooFewBatchesError(f"need at least 2 batches, got {len(grads)}")
    proj = np.asarray([mode_projection(np.asarray(g, dtype=np.float64), mode) for g in grads])
    return float(np.var(proj, ddof=1))


def residual_energy(probe_grad, mode: EmpiricalMode, curvature_estimate: float) -> float:
    """Squared probe-gradient projection divided by the squared curvature estimate."""
    if abs(curvature_estimate) < CURVATURE_FLOOR:
        raise CurvatureBelowFloorError(
            f"curvature estimate {curvature_estimate:.3e} below floor {CURVATURE_FLOOR}"
        )
    g = mode_projection(np.asarray(probe_grad, dtype=np.float64), mode)
    return g * g / (curvature_estimate * curvature_estimate)


@dataclass(frozen=True)
class PowerLawFit:
    """OLS fit of log(noise) on log(curvature): noise ~ n_scale * curvature**beta."""

    beta: float
    n_scale: float
    r_squared: float
    beta_stderr: float


def fit_power_law(curvatures, noises) -> PowerLawFit:
    """Least-squares power-law fit between per-mode curvature and noise level.

    Requires strictly positive inputs and at least 3 points; a regressor with
    zero variance cannot be fit. When the response has zero variance the fit
    is exact with slope 0 and r_squared reported as 0 by convention.
    """
    h = np.asarray(curvatures, dtype=np.float64)
    c = np.asarray(noises, dtype=np.float64)
    if h.size != c.size:
        raise ValidationError("curvatures and noises must have equal lengths")
    if h.size < 3:
        raise ValidationError(f"need at least 3 points, got {h.size}")
    if np.any(h <= 0) or np.any(c <= 0):
        raise NonPositiveInputError("power-law fit requires strictly positive inputs")
    x = np.log(h)
    y = np.log(c)
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise DegenerateFitError("log-curvatures have zero variance")
    sxy = float(np.sum((x - x.mean()) * (y - y.mean())))
    beta = sxy / sxx
    intercept = float(y.mean()) - beta * float(x.mean())
    resid = y - (intercept + beta * x)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    dof = h.size - 2
    stderr = math.sqrt(ss_res / dof / sxx) if dof > 0 else 0.0
    return PowerLawFit(
        beta=beta,
        n_scale=float(math.exp(intercept)),
        r_squared=float(min(max(r_squared, 0.0), 1.0)),
        beta_stderr=stderr,
    )


@dataclass
class ProbeReport:
    """Per-mode estimates and summary metrics at one training step."""

    step: int
    h_hat: np.ndarray
    c_hat: np.ndarray
    delta2_hat: np.ndarray
    g_probe: np.ndarray
    metrics: SignalMetrics | None = None
    power_law: PowerLawFit | None = None
