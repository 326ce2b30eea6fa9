"""Power-law spectral shaping of matrix updates.

Three realizations of the map ``x = u @ diag(s) @ vt  ->  u @ diag(s**p) @ vt``:

* ``exact_spectral_shape`` goes through a full SVD;
* ``newton_schulz`` approximates the p=0 polar factor with a quintic
  fixed-point iteration and no factorization at all;
* ``fast_spectral`` handles mildly negative ``p`` by multiplying the
  Newton-Schulz output with a quadratic Taylor polynomial of the Gram
  matrix, at the cost of one Gram product and two square products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NonFiniteError,
    RankDeficientError,
    ValidationError,
    ZeroMatrixError,
)
from .linalg import RANK_TOLERANCE, as_matrix, svd

# Frobenius norms below this count as the zero matrix.
ZERO_NORM_FLOOR = 1e-30

# Configuration-time sanity bound for the scalar quintic orbit.
_SCALAR_BOUND = 10.0
_SCALAR_GRID = 10_000


@dataclass(frozen=True)
class NewtonSchulzConfig:
    """Quintic coefficients (a, b, c) for x -> a*x + b*x**3 + c*x**5, and step count.

    Construction scans a 10^4-point grid over (0, 1] and rejects coefficient
    sets whose scalar orbit leaves a bounded interval within ``steps`` steps.
    """

    coefficients: tuple[float, float, float] = (3.4445, -4.7750, 2.0315)
    steps: int = 5

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError("newton-schulz steps must be >= 1")
        a, b, c = self.coefficients
        if not all(math.isfinite(v) for v in (a, b, c)):
            raise NonFiniteError("newton-schulz coefficients must be finite")
        x = np.linspace(1.0 / _SCALAR_GRID, 1.0, _SCALAR_GRID)
        for _ in range(self.steps):
            x = a * x + b * x**3 + c * x**5
            if float(np.max(np.abs(x))) > _SCALAR_BOUND:
                raise ValidationError(
                    "newton-schulz scalar map leaves the bounded interval "
                    f"[-{_SCALAR_BOUND}, {_SCALAR_BOUND}] on (0, 1]"
                )


DEFAULT_NS = NewtonSchulzConfig()


@dataclass(frozen=True)
class ShapingReport:
    """Error of the fast fractional path against exact SVD shaping."""

    exponent: float
    frobenius_error_vs_exact: float
    max_singular_value_error: float


def exact_spectral_shape(m, p: float) -> np.ndarray:
    """Raise the singular values of ``m`` to the power ``p``, keeping directions.

    p=1 reproduces the input, p=0 gives the polar factor, and negative ``p``
    requires full rank (singular values below the rank tolerance raise).
    """
    a = as_matrix(m, "m")
    res = svd(a)
    s = res.singular_values
    if p < 0 and np.any(s == 0.0):
        raise RankDeficientError("negative spectral power on a rank-deficient matrix")
    if p == 0:
        powered = np.ones_like(s)
    else:
        powered = s**p
    out = (res.u * powered) @ res.vt
    if not np.isfinite(out).all():
        raise NonFiniteError("spectral shaping produced non-finite entries")
    return out


def newton_schulz(x, cfg: NewtonSchulzConfig = DEFAULT_NS) -> np.ndarray:
    """Approximate the polar factor of ``x`` via the quintic iteration.

    The input is Frobenius-normalized internally; the iteration runs with the
    Gram product on the smaller side. Output singular values land near 1
    (the quintic oscillates in a band around 1 instead of converging).
    """
    a = as_matrix(x, "x")
    fn = float(np.linalg.norm(a))
    if fn < ZERO_NORM_FLOOR:
        raise ZeroMatrixError("newton-schulz is undefined for the zero matrix")
    y = a / fn
    transposed = y.shape[0] > y.shape[1]
    if transposed:
        y = y.T
    ca, cb, cc = cfg.coefficients
    for _ in range(cfg.steps):
        g = y @ y.T
        y = ca * y + (cb * g + cc * (g @ g)) @ y
    if transposed:
        y = y.T
    if not np.isfinite(y).all():
        raise NonFiniteError("newton-schulz iteration produced non-finite entries")
    return y


def fast_spectral(x, p: float, cfg: NewtonSchulzConfig = DEFAULT_NS) -> np.ndarray:
    """Fast fractional shaping: Taylor-corrected Newton-Schulz output.

    Computes, for ``xn = x / ||x||_F`` with the Gram product on the smaller
    side::

        y   = newton_schulz(xn)
        a   = xn @ xn.T
        c   = I + d*(a - I) + 0.5*d*(d - 1)*(a - I)**2,   d = p/2
        out = ||x||_F**p * c @ y

    Intended for mildly negative ``p``; unlike the exact path it accepts
    rank-deficient input (the Taylor polynomial is finite at 0).
    """
    a = as_matrix(x, "x")
    fn = float(np.linalg.norm(a))
    if fn < ZERO_NORM_FLOOR:
        raise ZeroMatrixError("fast spectral shaping is undefined for the zero matrix")
    if a.shape[0] > a.shape[1]:
        return fast_spectral(a.T, p, cfg).T
    xn = a / fn
    y = newton_schulz(xn, cfg)
    gram = xn @ xn.T
    eye = np.eye(gram.shape[0])
    e = gram - eye
    d = p / 2.0
    corr = eye + d * e + 0.5 * d * (d - 1.0) * (e @ e)
    out = (fn**p) * (corr @ y)
    if not np.isfinite(out).all():
        raise NonFiniteError("fast spectral shaping produced non-finite entries")
    return out


def shaping_error(x, p: float, cfg: NewtonSchulzConfig = DEFAULT_NS) -> ShapingReport:
    """Compare fast fractional shaping against the exact SVD route.

    Both paths target ``||x||_F**p * shape(x / ||x||_F, p)``. The comparison
    first matches overall Frobenius scale (factor ``s``) so the report
    measures direction and relative-spectrum error, then reports the relative
    Frobenius gap and the largest gap between the two output spectra.
    """
    a = as_matrix(x, "x")
    fn = float(np.linalg.norm(a))
    if fn < ZERO_NORM_FLOOR:
        raise ZeroMatrixError("shaping error is undefined for the zero matrix")
    target = (fn**p) * exact_spectral_shape(a / fn, p)
    approx = fast_spectral(a, p, cfg)
    tn = float(np.linalg.norm(target))
    s = float(np.linalg.norm(approx)) / tn
    frob = float(np.linalg.norm(approx - s * target)) / tn
    sig_fast = svd(approx).singular_values
    sig_exact = s * svd(target).singular_values
    max_sigma = float(np.max(np.abs(sig_fast - sig_exact)))
    return ShapingReport(
        exponent=float(p),
        frobenius_error_vs_exact=frob,
        max_singular_value_error=max_sigma,
    )


def rank_deficient(x) -> bool:
    """True when some singular value of ``x`` falls below the rank tolerance."""
    s = svd(x).singular_values
    return bool(s.size == 0 or s[0] == 0.0 or np.any(s < RANK_TOLERANCE * s[0]))
