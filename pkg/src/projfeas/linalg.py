"""Dense linear-algebra and sampling kernels shared by the rest of the package.

Everything here is a thin, contract-checked layer over LAPACK (through
numpy).  The surface exists so the projection sets and the regularity
analyzer can state their requirements -- orthonormal factors, Penrose
residuals, deterministic direction sampling -- in one place.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "DecompositionError",
    "SvdResult",
    "svd",
    "pseudo_inverse",
    "orthonormal_basis",
    "gram_min_eig",
    "gaussian_matrix",
    "fd_gradient",
    "sphere_lattice",
]


class DecompositionError(RuntimeError):
    """A matrix factorization failed to converge."""


class SvdResult(NamedTuple):
    """Full singular value decomposition ``mat == left @ sigma @ right.T``.

    ``left`` and ``right`` are square orthogonal matrices; ``singulars``
    holds the ``min(rows, cols)`` singular values in nonincreasing order.
    """

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray


def _as_matrix(mat) -> np.ndarray:
    out = np.asarray(mat, dtype=float)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix entries must be finite")
    return out


def svd(mat) -> SvdResult:
    """Full SVD with orthogonal factors on both sides."""
    m = _as_matrix(mat)
    try:
        left, sing, right_t = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD did not converge for shape {m.shape}") from exc
    return SvdResult(left, sing, right_t.T)


def pseudo_inverse(mat, rank_tol: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse.

    Singular values at or below ``rank_tol * sigma_max`` are treated as
    zero, which makes the result stable on rank-deficient input.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    m = _as_matrix(mat)
    try:
        left, sing, right_t = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD did not converge for shape {m.shape}") from exc
    if sing.size == 0 or sing[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    inv = np.zeros_like(sing)
    keep = sing > rank_tol * sing[0]
    inv[keep] = 1.0 / sing[keep]
    return (right_t.T * inv) @ left.T


def orthonormal_basis(vectors, rank_tol: float = 1e-12) -> np.ndarray:
    """Orthonormal row basis of the span of the given vectors.

    Parameters
    ----------
    vectors : array_like, shape (k, dim) or (dim,)
        Spanning vectors, one per row.  They may be linearly dependent;
        near-dependence below ``rank_tol * sigma_max`` is discarded.

    Returns
    -------
    ndarray, shape (rank, dim)
        Rows form an orthonormal basis.  Empty input gives an empty basis.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    vecs = np.asarray(vectors, dtype=float)
    if vecs.size == 0:
        dim = vecs.shape[-1] if vecs.ndim >= 1 and vecs.ndim == 2 else 0
        return np.zeros((0, dim))
    if vecs.ndim == 1:
        vecs = vecs[None, :]
    if vecs.ndim != 2:
        raise ValueError(f"expected vectors of shape (k, dim), got {vecs.shape}")
    if not np.all(np.isfinite(vecs)):
        raise ValueError("vector entries must be finite")
    _, sing, right_t = np.linalg.svd(vecs, full_matrices=False)
    if sing.size == 0 or sing[0] == 0.0:
        return np.zeros((0, vecs.shape[1]))
    rank = int(np.count_nonzero(sing > rank_tol * sing[0]))
    return right_t[:rank].copy()


def gram_min_eig(columns) -> float:
    """Smallest eigenvalue of ``G.T @ G`` where ``G`` column-stacks the vectors.

    Returns exactly ``0.0`` when there are more columns than ambient
    dimensions, since the Gram matrix is then structurally singular.
    """
    cols = [np.asarray(c, dtype=float) for c in columns]
    if not cols:
        raise ValueError("need at least one column")
    g = np.column_stack(cols)
    if not np.all(np.isfinite(g)):
        raise ValueError("column entries must be finite")
    if g.shape[1] > g.shape[0]:
        return 0.0
    sing = np.linalg.svd(g, compute_uv=False)
    return float(sing[-1] ** 2)


def gaussian_matrix(rows: int, cols: int, seed: int) -> np.ndarray:
    """I.i.d. standard normal matrix drawn from a PCG64 stream."""
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be positive")
    gen = np.random.Generator(np.random.PCG64(int(seed)))
    return gen.standard_normal((rows, cols))


def fd_gradient(fun: Callable[[np.ndarray], float], x, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar field at ``x``."""
    if step <= 0:
        raise ValueError("step must be positive")
    point = np.asarray(x, dtype=float)
    if point.ndim != 1:
        raise ValueError("x must be a 1-d point")
    grad = np.empty_like(point)
    offset = np.zeros_like(point)
    for i in range(point.size):
        offset[i] = step
        grad[i] = (fun(point + offset) - fun(point - offset)) / (2.0 * step)
        offset[i] = 0.0
    return grad


def sphere_lattice(count: int, dim: int) -> np.ndarray:
    """Deterministic well-spread unit directions in ``R^dim``.

    A golden-ratio Kronecker lattice in the unit cube is pushed through the
    Box-Muller map and normalized, giving a reproducible low-discrepancy
    covering of the sphere in any dimension (no RNG state involved).
    """
    if count < 1 or dim < 1:
        raise ValueError("count and dim must be positive")
    if dim == 1:
        pts = np.ones((count, 1))
        pts[1::2, 0] = -1.0
        return pts
    width = 2 * ((dim + 1) // 2)
    # Unique positive root of x**(width + 1) == x + 1, by fixed-point iteration.
    phi = 1.5
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (width + 1))
    alpha = phi ** -np.arange(1.0, width + 1.0)
    k = np.arange(1, count + 1, dtype=float)[:, None]
    u = np.mod(0.5 + k * alpha, 1.0)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    radius = np.sqrt(-2.0 * np.log(u[:, 0::2]))
    angle = 2.0 * np.pi * u[:, 1::2]
    z = np.empty((count, width))
    z[:, 0::2] = radius * np.cos(angle)
    z[:, 1::2] = radius * np.sin(angle)
    z = z[:, :dim]
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return z / norms
