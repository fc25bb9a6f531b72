"""Observables for projection runs: the mean-squared-distance merit
function, its gradient, decrease ratios, and rate fitting.

For sets ``S_1, ..., S_m`` the merit function is

    f(x) = (1/(2m)) * sum_i dist(x, S_i)^2,

whose gradient wherever the projections are single-valued is
``x - mean_i P_{S_i}(x)``.  An averaged-projection step is therefore an
exact gradient step of length one on ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "EstimationError",
    "MsdTerms",
    "RateFit",
    "msd_terms",
    "msd",
    "msd_gradient",
    "check_sandwich",
    "qlinear_ratios",
    "fit_rlinear_rate",
]

#: Iterate distances at or below this floor are excluded from rate fits.
DIST_FLOOR = 1e-13
#: Merit values at or below this floor are excluded from ratio statistics.
F_FLOOR = 1e-26


class EstimationError(RuntimeError):
    """Too little usable data to fit a rate."""


class MsdTerms(NamedTuple):
    """Everything the merit function knows at one point."""

    projections: np.ndarray  # (m, dim), row i is the projection onto set i
    distances: np.ndarray    # (m,)
    value: float
    gradient: np.ndarray     # (dim,)


def msd_terms(sets, x) -> MsdTerms:
    """Projections, distances, merit value, and merit gradient at ``x``."""
    sets = tuple(sets)
    if not sets:
        raise ValueError("need at least one set")
    point = np.asarray(x, dtype=float)
    projections = np.stack([s.project(point) for s in sets])
    distances = np.linalg.norm(point[None, :] - projections, axis=1)
    value = float(distances @ distances) / (2.0 * len(sets))
    gradient = point - projections.mean(axis=0)
    return MsdTerms(projections, distances, value, gradient)


def msd(sets, x) -> float:
    """Mean-squared-distance merit value at ``x``."""
    return msd_terms(sets, x).value


def msd_gradient(sets, x) -> np.ndarray:
    """Gradient of the merit function: ``x - mean_i P_{S_i}(x)``."""
    return msd_terms(sets, x).gradient


def check_sandwich(sets, x, cond_k: float):
    """Two-sided bound tying the merit value to its gradient norm.

    Returns ``(lower, value, upper, ok)`` where ``lower = |grad|^2 / 2``
    and ``upper = (cond_k^2 * m / 2) * |grad|^2``.  Near a point where the
    set system has condition modulus ``cond_k``, the merit value must sit
    between the two.
    """
    if not np.isfinite(cond_k) or cond_k < 0:
        raise ValueError("cond_k must be a finite nonnegative number")
    terms = msd_terms(sets, x)
    gnorm2 = float(terms.gradient @ terms.gradient)
    lower = 0.5 * gnorm2
    upper = 0.5 * cond_k ** 2 * len(tuple(sets)) * gnorm2
    ok = lower <= terms.value <= upper
    return lower, terms.value, upper, ok


def qlinear_ratios(trace, floor: float = F_FLOOR) -> np.ndarray:
    """Successive merit ratios ``f_{k+1} / f_k`` along a run.

    Ratios whose denominator or numerator is at or below ``floor`` are
    dropped: once a run hits roundoff level the quotients are noise.
    """
    f = np.asarray(trace.f_values, dtype=float)
    if f.shape[0] < 2:
        return np.zeros(0)
    keep = (f[:-1] > floor) & (f[1:] > floor)
    return f[1:][keep] / f[:-1][keep]


@dataclass(frozen=True)
class RateFit:
    """Least-squares R-linear rate fit on the tail of a positive series."""

    rate: float
    window: tuple
    residual: float
    floor_excluded: int


def fit_rlinear_rate(series, floor: float = DIST_FLOOR, min_points: int = 8) -> RateFit:
    """Fit ``series[k] ~ C * rate**k`` on the second half of the usable data.

    The usable prefix stops at the first entry at or below ``floor``
    (roundoff plateau).  The fit is an ordinary least-squares line through
    ``log10`` of the tail half, so early transient behavior is ignored.
    Raises :class:`EstimationError` when fewer than ``min_points`` usable
    entries remain.
    """
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ValueError("series must be 1-d")
    below = np.flatnonzero(values <= floor)
    usable = int(below[0]) if below.size else values.shape[0]
    if usable < min_points:
        raise EstimationError(
            f"only {usable} usable entries above the floor, need {min_points}"
        )
    start = usable // 2
    idx = np.arange(start, usable)
    logs = np.log10(values[start:usable])
    slope, intercept = np.polyfit(idx, logs, 1)
    fitted = slope * idx + intercept
    residual = float(np.sqrt(np.mean((fitted - logs) ** 2)))
    return RateFit(
        rate=float(10.0 ** slope),
        window=(int(start), int(usable)),
        residual=residual,
        floor_excluded=int(values.shape[0] - usable),
    )
