"""Dense linear algebra core: SVD, symmetric eigendecomposition, matrix text I/O.

All operations are pure functions over 2-D float64 arrays. Non-finite input
raises instead of propagating NaNs, and factor signs are fixed so repeated
calls on identical bytes give identical results.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    NonFiniteError,
    NoConvergenceError,
    NotSymmetricError,
    ParseError,
    ShapeMismatchError,
)

# Singular values below RANK_TOLERANCE * sigma_max are reported as exactly 0
# so that downstream negative powers can detect rank deficiency.
RANK_TOLERANCE = 1e-12

# Relative asymmetry admitted by sym_eig.
SYMMETRY_TOLERANCE = 1e-10


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate ``x`` as a non-empty 2-D array of finite float64 entries."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size == 0:
        raise ShapeMismatchError(f"{name} must be non-empty")
    if not np.isfinite(a).all():
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return a


def _fix_signs(u: np.ndarray, vt: np.ndarray | None = None):
    """Flip factor signs so each column of ``u`` has a positive largest-magnitude entry.

    Paired rows of ``vt`` are flipped alongside so the reconstructed product
    is unchanged.
    """
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            if vt is not None:
                vt[j, :] = -vt[j, :]
    return u, vt


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``x = u @ diag(singular_values) @ vt`` with descending spectrum."""

    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.vt


@dataclass(frozen=True)
class SymEigResult:
    """Eigendecomposition ``s = q @ diag(eigenvalues) @ q.T``, eigenvalues descending."""

    q: np.ndarray
    eigenvalues: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.q * self.eigenvalues) @ self.q.T


def svd(x) -> SvdResult:
    """Thin SVD with deterministic signs and hard-zeroed trailing spectrum."""
    a = as_matrix(x, "x")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(f"svd did not converge: {exc}") from exc
    s = np.asarray(s, dtype=np.float64)
    if s.size and s[0] > 0.0:
        s[s < RANK_TOLERANCE * s[0]] = 0.0
    u = np.ascontiguousarray(u)
    vt = np.ascontiguousarray(vt)
    _fix_signs(u, vt)
    return SvdResult(u=u, singular_values=s, vt=vt)


def sym_eig(s) -> SymEigResult:
    """Symmetric eigendecomposition, descending eigenvalues, deterministic signs."""
    a = as_matrix(s, "s")
    if a.shape[0] != a.shape[1]:
        raise NotSymmetricError(f"matrix is not square: {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if float(np.max(np.abs(a - a.T))) > SYMMETRY_TOLERANCE * scale:
        raise NotSymmetricError("matrix is not symmetric within tolerance")
    sym = 0.5 * (a + a.T)
    try:
        evals, q = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(f"eigendecomposition did not converge: {exc}") from exc
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.ascontiguousarray(evals[order])
    q = np.ascontiguousarray(q[:, order])
    _fix_signs(q)
    return SymEigResult(q=q, eigenvalues=evals)


def frobenius_norm(x) -> float:
    """sqrt of the sum of squared entries; exactly 0 only for the zero matrix."""
    a = as_matrix(x, "x")
    return float(np.sqrt(np.sum(a * a)))


def write_matrix_text(x, path) -> None:
    """Write the matrix text format: a "<rows> <cols>" header, then one row per line."""
    a = as_matrix(x, "x")
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    for row in a:
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_text(path) -> np.ndarray:
    """Parse the matrix text format, rejecting wrong counts and non-finite tokens."""
    if not os.path.exists(path):
        raise ParseError(0, f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(1, "empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError(1, "header must be '<rows> <cols>'")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(1, "header must contain two integers") from None
    if rows < 1 or cols < 1:
        raise ParseError(1, "rows and cols must be positive")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != rows:
        raise ParseError(len(lines), f"expected {rows} data rows, found {len(body)}")
    out = np.empty((rows, cols), dtype=np.float64)
    for r, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != cols:
            raise ParseError(r + 2, f"expected {cols} entries, found {len(tokens)}")
        for c, tok in enumerate(tokens):
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(r + 2, f"invalid number {tok!r}") from None
            if not np.isfinite(v):
                raise ParseError(r + 2, f"non-finite entry {tok!r}")
            out[r, c] = v
    return out
