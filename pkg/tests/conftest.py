"""Shared closed-form oracles for the test suite.

Everything here is derived from elementary trigonometry and linear algebra
only, with no imports from the package under test, so expected values are
computed along an independent path.
"""

import math

import numpy as np


def line_direction(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def line_normal(theta: float) -> np.ndarray:
    return np.array([-math.sin(theta), math.cos(theta)])


def project_line(x, theta: float) -> np.ndarray:
    """Orthogonal projection of a 2-d point onto the line at angle theta."""
    u = line_direction(theta)
    return (np.asarray(x, dtype=float) @ u) * u


def alternating_iterates(theta: float, x0, steps: int) -> np.ndarray:
    """Exact alternating sequence: theta-line first, then the x-axis."""
    pts = [np.asarray(x0, dtype=float)]
    for k in range(steps):
        pts.append(project_line(pts[-1], theta if k % 2 == 0 else 0.0))
    return np.array(pts)

def averaged_iterates(theta: float, x0, steps: int) -> np.ndarray:
    """Exact mean-of-projections sequence for the same two lines."""
    pts = [np.asarray(x0, dtype=float)]
    for _ in range(steps):
        x = pts[-1]
        pts.append(0.5 * (project_line(x, theta) + project_line(x, 0.0)))
    return np.array(pts)


def averaged_map_eigs(theta: float):
    """Eigenvalues of the two-line mean-projection map.

    The map is (P_theta + P_0)/2; its eigenvectors are the bisector
    directions, with eigenvalues cos^2(theta/2) and sin^2(theta/2).
    """
    c = math.cos(theta)
    return (1.0 + c) / 2.0, (1.0 - c) / 2.0


def two_line_msd(x, theta: float) -> float:
    """Merit value (1/4)(d_1^2 + d_2^2) for the theta-line and the x-axis."""
    x = np.asarray(x, dtype=float)
    d_theta = float(x @ line_normal(theta))
    d_zero = float(x @ line_normal(0.0))
    return (d_theta ** 2 + d_zero ** 2) / 4.0


def two_line_msd_gradient(x, theta: float) -> np.ndarray:
    """Gradient of the two-line merit: mean of the normal components."""
    x = np.asarray(x, dtype=float)
    n_theta = line_normal(theta)
    n_zero = line_normal(0.0)
    return 0.5 * ((x @ n_theta) * n_theta + (x @ n_zero) * n_zero)


def gram_eigs_two_lines(theta: float):
    """Eigenvalues of the Gram matrix of the two unit normals: 1 -+ cos."""
    c = math.cos(theta)
    return 1.0 - c, 1.0 + c


def inexact_rate_bound(c: float, eps: float) -> float:
    """Predicted relaxed-alternating rate sqrt(c sqrt(1-eps^2) + eps sqrt(1-c^2))."""
    return math.sqrt(c * math.sqrt(1.0 - eps * eps) + eps * math.sqrt(1.0 - c * c))


def random_subspace_system(rng, m_sets: int, dim: int):
    """Random subspaces through the origin with generic normals.

    Returns spanning-direction matrices (one per set, rows are directions)
    chosen so total codimension stays below ``dim``, keeping the system
    strongly regular with probability one.
    """
    budget = dim - 1
    codims = []
    for i in range(m_sets):
        remaining = m_sets - i
        top = max(1, min(2, budget - (remaining - 1)))
        c = int(rng.integers(1, top + 1))
        codims.append(c)
        budget -= c
    return [rng.standard_normal((dim - c, dim)) for c in codims]
