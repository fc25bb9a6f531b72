"""Regularity analysis of set systems at a common point.

Quantities computed from normal-cone descriptions:

* ``cbar_pair`` -- the two-set angle constant
  ``max{<u, v> : u in N_F, v in -N_C, |u|, |v| <= 1}``;
* ``cond_modulus`` -- the m-set condition modulus ``k``, the smallest
  constant with ``sqrt(sum |y_i|^2) <= k * |sum y_i|`` over normals
  ``y_i``, one per cone;
* ``cbar_avg`` -- the averaged-projections constant
  ``sqrt(1 - 1/(m k^2))``;
* ``reg_modulus_pair`` -- the stability modulus ``1/sqrt(1 - cbar)``;
* ``predicted_rates`` -- the linear rates these constants guarantee for
  each projection method, bundled into a :class:`RegularityReport`.

Subspace cones are handled exactly through singular values; cones with
one-sided generators fall back to a deterministic sampled lower bound and
carry a ``"sampled"`` method tag so callers never compare those values
against exact tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .linalg import gram_min_eig

__all__ = [
    "CbarEstimate",
    "CondEstimate",
    "RegularityReport",
    "cbar_pair",
    "cond_modulus",
    "cbar_avg",
    "reg_modulus_pair",
    "predicted_rates",
]

DEFAULT_SAMPLES = 512

_STRIDES = (1, 3, 5, 7, 11, 13, 17, 19, 23, 29)


class CbarEstimate(NamedTuple):
    """Two-set angle constant with its provenance tag."""

    value: float
    method: str  # "exact-subspace" or "sampled" (a certified lower bound)


class CondEstimate(NamedTuple):
    """Condition modulus with provenance; ``math.inf`` means the system is
    not strongly regular, ``0`` that every cone is trivial."""

    value: float
    method: str
    all_interior: bool

    @property
    def strongly_regular(self) -> bool:
        return math.isfinite(self.value)


def _check_common_base(cones):
    base = np.asarray(cones[0].base_point, dtype=float)
    scale = 1.0 + float(np.linalg.norm(base))
    for cone in cones[1:]:
        other = np.asarray(cone.base_point, dtype=float)
        if other.shape != base.shape or np.linalg.norm(other - base) > 1e-8 * scale:
            raise ValueError("normal cones must be anchored at a common base point")


def cbar_pair(first_cone, second_cone, samples: int = DEFAULT_SAMPLES) -> CbarEstimate:
    """Angle constant between two normal cones at the same point.

    Exact (largest singular value of the basis product) when both cones
    are subspaces; otherwise the maximum over deterministic unit samples,
    which is a lower bound.  The value is clamped to [0, 1].
    """
    _check_common_base((first_cone, second_cone))
    first_basis = first_cone.as_subspace_basis()
    second_basis = second_cone.as_subspace_basis()
    if first_basis is not None and second_basis is not None:
        if first_basis.shape[1] == 0 or second_basis.shape[1] == 0:
            return CbarEstimate(0.0, "exact-subspace")
        sing = np.linalg.svd(first_basis.T @ second_basis, compute_uv=False)
        return CbarEstimate(float(min(sing[0], 1.0)), "exact-subspace")
    first_samples = first_cone.unit_samples(samples)
    second_samples = second_cone.unit_samples(samples)
    if first_samples.shape[0] == 0 or second_samples.shape[0] == 0:
        return CbarEstimate(0.0, "sampled")
    # <u, v> with v in -N_C is -<u, w> over w in N_C.
    best = float(np.max(-(first_samples @ second_samples.T)))
    return CbarEstimate(min(max(best, 0.0), 1.0), "sampled")


def cond_modulus(cones, samples: int = DEFAULT_SAMPLES) -> CondEstimate:
    """Condition modulus of a family of normal cones at a common point.

    For subspace cones the value is exact: ``1/sqrt(lambda_min(G^T G))``
    with ``G`` column-stacking all basis columns; a structurally singular
    Gram matrix gives ``math.inf`` (strong regularity fails).  Families
    with one-sided cones get a deterministic sampled lower bound.
    """
    cones = tuple(cones)
    if len(cones) < 2:
        raise ValueError("need at least two cones")
    _check_common_base(cones)
    dim = cones[0].dim
    bases = [cone.as_subspace_basis() for cone in cones]
    if all(b is not None for b in bases):
        blocks = [b for b in bases if b.shape[1] > 0]
        if not blocks:
            return CondEstimate(0.0, "exact-subspace", True)
        total_cols = sum(b.shape[1] for b in blocks)
        if total_cols > dim:
            return CondEstimate(math.inf, "exact-subspace", False)
        g = np.hstack(blocks)
        lam = gram_min_eig(g.T)
        # Unit columns keep |G|_2^2 <= total_cols, so this floor is a
        # relative zero test for lambda_min.
        if lam <= 1e-28 * total_cols:
            return CondEstimate(math.inf, "exact-subspace", False)
        return CondEstimate(1.0 / math.sqrt(lam), "exact-subspace", False)
    return _sampled_cond(cones, samples)


def _sampled_cond(cones, samples: int) -> CondEstimate:
    pools = [(cone, cone.unit_samples(samples)) for cone in cones]
    active = [(cone, pool) for cone, pool in pools if pool.shape[0] > 0]
    if not active:
        return CondEstimate(0.0, "sampled", True)
    best = 1.0  # a single unit normal alone always achieves ratio one
    counter = np.arange(samples)
    indices = [
        (counter * _STRIDES[i % len(_STRIDES)]) % pool.shape[0]
        for i, (_, pool) in enumerate(active)
    ]
    for t in range(samples):
        units = [pool[idx[t]] for (_, pool), idx in zip(active, indices)]
        g = np.column_stack(units)
        eigvals, eigvecs = np.linalg.eigh(g.T @ g)
        candidate = eigvecs[:, 0]
        # eigh fixes the eigenvector only up to sign, and feasibility of
        # the flipped generators is one-sided, so try both orientations
        for coeff in (candidate.copy(), -candidate):
            coeff = coeff.copy()
            for i, (cone, _) in enumerate(active):
                if coeff[i] < 0.0 and cone.distance(-units[i]) > 1e-9:
                    coeff[i] = 0.0  # the flipped generator leaves the cone
            norm_coeff = float(np.linalg.norm(coeff))
            if norm_coeff == 0.0:
                continue
            residual = float(np.linalg.norm(g @ coeff))
            if residual <= 1e-12 * norm_coeff:
                return CondEstimate(math.inf, "sampled", False)
            best = max(best, norm_coeff / residual)
    return CondEstimate(best, "sampled", False)


def cbar_avg(m_sets: int, k) -> float:
    """Averaged-projections angle constant ``sqrt(1 - 1/(m k^2))``.

    ``k`` may be a :class:`CondEstimate` or a plain number; ``k = 0``
    (all cones trivial) gives 0, a non-finite ``k`` gives 1.
    """
    if m_sets < 1:
        raise ValueError("m_sets must be positive")
    value = k.value if isinstance(k, CondEstimate) else float(k)
    if value == 0.0:
        return 0.0
    if not math.isfinite(value):
        return 1.0
    if value < 1.0 / math.sqrt(m_sets) - 1e-12:
        raise ValueError(
            f"condition modulus {value} is below the floor 1/sqrt({m_sets})"
        )
    inner = 1.0 - 1.0 / (m_sets * value * value)
    return math.sqrt(max(inner, 0.0))


def reg_modulus_pair(cbar: float) -> float:
    """Stability modulus ``1/sqrt(1 - cbar)`` of a two-set intersection."""
    if not (0.0 <= cbar <= 1.0):
        raise ValueError("cbar must lie in [0, 1]")
    if cbar >= 1.0:
        return math.inf
    return 1.0 / math.sqrt(1.0 - cbar)


@dataclass(frozen=True)
class RegularityReport:
    """Regularity constants and every predicted rate for one set system.

    When ``strongly_regular`` is false the rate fields are ``None`` and
    ``cond_k`` is ``math.inf`` purely as a representation; no arithmetic
    is ever done on it.
    """

    m_sets: int
    cond_k: float
    method: str
    strongly_regular: bool
    cbar_pairwise: float
    cbar_avg: float
    reg_modulus: float
    c_alternating: Optional[float] = None
    c_averaged: Optional[float] = None
    rate_alternating: Optional[float] = None
    rate_alternating_both_super: Optional[float] = None
    rate_averaged: Optional[float] = None
    rate_averaged_super: Optional[float] = None
    qlinear_factor: Optional[float] = None
    r_alt_bound: Optional[float] = None
    r_av_bound: Optional[float] = None

    def rate_inexact(self, eps: float) -> float:
        """Predicted rate ``sqrt(c sqrt(1-eps^2) + eps sqrt(1-c^2))`` of the
        relaxed alternating method, using the report's alternating ``c``."""
        if not self.strongly_regular:
            raise ValueError("no finite rate: the system is not strongly regular")
        if not (0.0 <= eps < 1.0):
            raise ValueError("eps must lie in [0, 1)")
        c = self.c_alternating
        return math.sqrt(c * math.sqrt(1.0 - eps * eps) + eps * math.sqrt(1.0 - c * c))


def predicted_rates(
    m_sets: int,
    cond,
    cbar_pairwise: Optional[float] = None,
    c_alternating: Optional[float] = None,
    c_averaged: Optional[float] = None,
) -> RegularityReport:
    """Bundle every predicted rate for a system with ``m_sets`` sets.

    ``cond`` is the condition modulus (a :class:`CondEstimate` or a plain
    number).  ``cbar_pairwise`` is the two-set angle constant when one is
    available; by default it is taken as the product-space pair constant,
    which equals ``cbar_avg``.  The rate constants ``c_alternating`` and
    ``c_averaged`` must exceed their respective angle constants and lie
    below one; each defaults to its constant plus ``1e-6``.
    """
    if m_sets < 2:
        raise ValueError("m_sets must be at least 2")
    if isinstance(cond, CondEstimate):
        k, method = cond.value, cond.method
    else:
        k, method = float(cond), "exact-subspace"
    if k < 0.0:
        raise ValueError("the condition modulus cannot be negative")

    if not math.isfinite(k):
        return RegularityReport(
            m_sets=m_sets,
            cond_k=math.inf,
            method=method,
            strongly_regular=False,
            cbar_pairwise=1.0 if cbar_pairwise is None else float(cbar_pairwise),
            cbar_avg=1.0,
            reg_modulus=math.inf,
        )

    c_avg_bar = cbar_avg(m_sets, k)
    c_pair_bar = c_avg_bar if cbar_pairwise is None else float(cbar_pairwise)
    if not (0.0 <= c_pair_bar <= 1.0):
        raise ValueError("cbar_pairwise must lie in [0, 1]")

    c_alt = _resolve_rate_constant(c_alternating, c_pair_bar, "c_alternating")
    c_av = _resolve_rate_constant(c_averaged, c_avg_bar, "c_averaged")

    qlinear = 1.0 - 1.0 / (k * k * m_sets) if k > 0.0 else 0.0
    r_alt = max(0.0, 1.0 - 1.0 / (k * k)) if k > 0.0 else 0.0
    r_av = max(0.0, 1.0 - 1.0 / (2.0 * k * k)) if k > 0.0 else 0.0
    return RegularityReport(
        m_sets=m_sets,
        cond_k=k,
        method=method,
        strongly_regular=True,
        cbar_pairwise=c_pair_bar,
        cbar_avg=c_avg_bar,
        reg_modulus=reg_modulus_pair(c_pair_bar),
        c_alternating=c_alt,
        c_averaged=c_av,
        rate_alternating=math.sqrt(c_alt),
        rate_alternating_both_super=c_alt,
        rate_averaged=c_av,
        rate_averaged_super=c_av * c_av,
        qlinear_factor=qlinear,
        r_alt_bound=r_alt,
        r_av_bound=r_av,
    )


def _resolve_rate_constant(c: Optional[float], floor: float, name: str) -> float:
    if c is None:
        c = floor + 1e-6
        if c >= 1.0:
            raise ValueError(
                f"{name} cannot be defaulted: the angle constant {floor} is too "
                "close to one; supply a value explicitly"
            )
        return c
    c = float(c)
    if not (floor < c < 1.0):
        raise ValueError(f"{name} must lie in ({floor}, 1), got {c}")
    return c
