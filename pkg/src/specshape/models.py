"""Desk-scale differentiable problems with manual gradients, plus data generators.

The quadratic matrix problem realizes a one-sided curvature model
``grad = kappa * H @ (W - W*) + noise`` exactly; the two-layer squared-ReLU
MLP covers the nonconvex case. The classifier loss interpolates between
cross-entropy and the Brier score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidParamsError,
    LabelOutOfRangeError,
    NonFiniteError,
    ShapeMismatchError,
    ValidationError,
)
from .linalg import as_matrix, sym_eig

_SPECTRUM_TOL = 1e-8


@dataclass(frozen=True)
class QuadraticProblem:
    """Left-sided quadratic matrix problem with optional per-entry gradient noise.

    ``h`` is symmetric with spectrum in (0, 1] and top eigenvalue 1; ``kappa``
    scales the overall curvature.
    """

    h: np.ndarray
    kappa: float
    w_star: np.ndarray
    noise_std: float = 0.0

    def __post_init__(self):
        h = as_matrix(self.h, "h")
        w = as_matrix(self.w_star, "w_star")
        if h.shape[0] != h.shape[1]:
            raise ValidationError("h must be square")
        if h.shape[0] != w.shape[0]:
            raise ShapeMismatchError("h and w_star row counts must agree")
        evals = sym_eig(h).eigenvalues
        if abs(float(evals[0]) - 1.0) > _SPECTRUM_TOL:
            raise ValidationError("h spectrum must be normalized: max eigenvalue 1")
        if float(evals[-1]) <= 0:
            raise ValidationError("h must be positive definite")
        if not self.kappa > 0:
            raise ValidationError("kappa must be positive")
        if self.noise_std < 0:
            raise ValidationError("noise_std must be non-negative")


def quadratic_loss_grad(problem: QuadraticProblem, w, rng: np.random.Generator | None = None):
    """Loss ``0.5*kappa*<H(W-W*), W-W*>`` and its (optionally noisy) gradient.

    Noise is i.i.d. Gaussian per entry with std ``problem.noise_std``, drawn
    only when ``rng`` is provided; pass ``rng=None`` for the population
    gradient.
    """
    a = as_matrix(w, "w")
    if a.shape != problem.w_star.shape:
        raise ShapeMismatchError(
            f"w has shape {a.shape}, expected {problem.w_star.shape}"
        )
    e = a - problem.w_star
    he = problem.h @ e
    loss = 0.5 * problem.kappa * float(np.sum(he * e))
    grad = problem.kappa * he
    if rng is not None and problem.noise_std > 0:
        grad = grad + rng.normal(0.0, problem.noise_std, size=a.shape)
    return loss, grad


@dataclass
class MlpModel:
    """Bias-free two-layer classifier with squared-ReLU activation."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        self.w1 = as_matrix(self.w1, "w1")
        self.w2 = as_matrix(self.w2, "w2")
        if self.w1.shape[1] != self.w2.shape[0]:
            raise ShapeMismatchError("w1 columns must match w2 rows")

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]


def init_mlp(input_dim: int, hidden_dim: int, n_classes: int, rng: np.random.Generator) -> MlpModel:
    w1 = rng.standard_normal((input_dim, hidden_dim)) / math.sqrt(input_dim)
    w2 = rng.standard_normal((hidden_dim, n_classes)) / math.sqrt(hidden_dim)
    return MlpModel(w1=w1, w2=w2)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_from_probs(probs: np.ndarray, labels: np.ndarray, lam: float) -> float:
    """Mean interpolated loss ``(1-lam)*CE + lam*Brier`` over the batch."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError("lambda must lie in [0, 1]")
    n, k = probs.shape
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    ce = -np.log(np.clip(probs[np.arange(n), labels], 1e-300, None))
    brier = np.sum((onehot - probs) ** 2, axis=1)
    return float(np.mean((1.0 - lam) * ce + lam * brier))


def mlp_forward_backward(model: MlpModel, x, labels, lam: float = 0.0):
    """Mean interpolated loss and exact gradients for both layer matrices."""
    xb = as_matrix(x, "x")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != xb.shape[0]:
        raise ShapeMismatchError("labels must be 1-D and match the batch size")
    if y.size and (y.min() < 0 or y.max() >= model.n_classes):
        raise LabelOutOfRangeError(
            f"labels must lie in [0, {model.n_classes}), got [{y.min()}, {y.max()}]"
        )
    if not 0.0 <= lam <= 1.0:
        raise ValidationError("lambda must lie in [0, 1]")
    n = xb.shape[0]
    z1 = xb @ model.w1
    relu = np.maximum(z1, 0.0)
    a1 = relu * relu
    logits = a1 @ model.w2
    probs = _softmax(logits)
    loss = loss_from_probs(probs, y, lam)

    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    r = probs - onehot
    # d(Brier)/d(logits) via the softmax Jacobian.
    s = np.sum(probs * r, axis=1, keepdims=True)
    d_brier = 2.0 * probs * (r - s)
    d_logits = ((1.0 - lam) * r + lam * d_brier) / n
    g2 = a1.T @ d_logits
    d_a1 = d_logits @ model.w2.T
    d_z1 = d_a1 * 2.0 * relu
    g1 = xb.T @ d_z1
    if not (np.isfinite(g1).all() and np.isfinite(g2).all()):
        raise NonFiniteError("mlp backward produced non-finite gradients")
    return loss, {"w1": g1, "w2": g2}


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish orthogonal matrix via sign-fixed QR of a Gaussian draw."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def gen_quadratic_problem(
    dim: int,
    cols: int = 1,
    h_min: float = 0.01,
    spectrum=None,
    kappa: float = 1.0,
    noise_std: float = 0.0,
    seed: int = 0,
) -> QuadraticProblem:
    """Quadratic problem with a log-uniform (or explicitly given) curvature spectrum."""
    if dim < 1 or cols < 1:
        raise InvalidParamsError("dim and cols must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(101,)))
    if spectrum is not None:
        evals = np.asarray(sorted(spectrum, reverse=True), dtype=np.float64)
        if evals.size != dim:
            raise InvalidParamsError(f"spectrum must have {dim} entries")
        if abs(float(evals[0]) - 1.0) > _SPECTRUM_TOL or float(evals[-1]) <= 0:
            raise InvalidParamsError("spectrum must lie in (0, 1] with max 1")
    else:
        if not 0.0 < h_min <= 1.0:
            raise InvalidParamsError("h_min must lie in (0, 1]")
        evals = np.exp(rng.uniform(math.log(h_min), 0.0, size=dim))
        evals[::-1].sort()
        evals[0] = 1.0  # pin the top of the spectrum exactly
    q = random_orthogonal(dim, rng)
    h = (q * evals) @ q.T
    h = 0.5 * (h + h.T)
    w_star = rng.standard_normal((dim, cols))
    return QuadraticProblem(h=h, kappa=kappa, w_star=w_star, noise_std=noise_std)


@dataclass(frozen=True)
class ClusterData:
    """Labeled Gaussian blobs: unit-covariance clusters at separated means."""

    x: np.ndarray
    labels: np.ndarray
    means: np.ndarray


def gen_gaussian_clusters(
    classes: int,
    input_dim: int,
    samples: int,
    margin: float = 3.0,
    seed: int = 0,
) -> ClusterData:
    """Balanced Gaussian clusters; the margin scales the distance between means."""
    if classes < 2 or input_dim < 1 or samples < classes:
        raise InvalidParamsError("need classes >= 2, input_dim >= 1, samples >= classes")
    if margin < 0:
        raise InvalidParamsError("margin must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(102,)))
    means = rng.standard_normal((classes, input_dim))
    means *= margin / np.maximum(np.linalg.norm(means, axis=1, keepdims=True), 1e-12)
    labels = rng.integers(0, classes, size=samples)
    x = means[labels] + rng.standard_normal((samples, input_dim))
    return ClusterData(x=x, labels=labels, means=means)


def gen_synthetic(kind: str, params: dict, seed: int = 0):
    """Dispatch to the named generator; unknown kinds or parameters raise."""
    if kind == "quadratic-spectrum":
        allowed = {"dim", "cols", "h_min", "spectrum", "kappa", "noise_std"}
        extra = set(params) - allowed
        if extra:
            raise InvalidParamsError(f"unknown quadratic params: {sorted(extra)}")
        if "dim" not in params:
            raise InvalidParamsError("quadratic-spectrum requires 'dim'")
        return gen_quadratic_problem(seed=seed, **params)
    if kind == "gaussian-clusters":
        allowed = {"classes", "input_dim", "samples", "margin"}
        extra = set(params) - allowed
        if extra:
            raise InvalidParamsError(f"unknown cluster params: {sorted(extra)}")
        for req in ("classes", "input_dim", "samples"):
            if req not in params:
                raise InvalidParamsError(f"gaussian-clusters requires {req!r}")
        return gen_gaussian_clusters(seed=seed, **params)
    raise InvalidParamsError(f"unknown synthetic kind {kind!r}")
