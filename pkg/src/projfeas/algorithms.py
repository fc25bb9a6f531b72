"""Feasibility runners: alternating, averaged, product-space, inexact, and
perturbed projection iterations, all recording a common :class:`Trace`.

Stopping is uniform across runners: a run halts once the merit value
``f`` drops to ``stop_tol**2`` or the step budget is exhausted.  The
``converged`` flag is stricter -- every per-set distance at the final
iterate must be at most ``stop_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import msd_terms
from .sets import (
    DiagonalLift,
    MembershipError,
    ProductSet,
    Translate,
    normal_cone_distance,
)

__all__ = [
    "RunConfig",
    "Trace",
    "InexactnessError",
    "PerturbedResult",
    "run_alternating",
    "run_cyclic",
    "run_averaged",
    "run_averaged_via_product",
    "inexact_candidate",
    "run_inexact_alternating",
    "run_perturbed",
]


@dataclass(frozen=True)
class RunConfig:
    """Shared run parameters.

    ``max_iter`` counts individual projection (or averaging) steps;
    ``stop_tol`` is a distance scale, so the merit stop test is
    ``f <= stop_tol**2``; ``inexact_eps`` is the angular slack available
    to :func:`run_inexact_alternating`.
    """

    max_iter: int = 500
    stop_tol: float = 1e-10
    seed: int = 0
    inexact_eps: float = 0.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not (self.stop_tol > 0.0 and math.isfinite(self.stop_tol)):
            raise ValueError("stop_tol must be a positive finite number")
        if not (0.0 <= self.inexact_eps < 1.0):
            raise ValueError("inexact_eps must lie in [0, 1)")


@dataclass
class Trace:
    """Record of one run.

    With ``n`` steps taken there are ``n + 1`` iterates; ``step_norms``
    and ``ratios`` have length ``n`` (``ratios[k] = f[k+1] / f[k]``).
    """

    algorithm: str
    seed: int
    converged: bool
    iterates: np.ndarray
    per_set_distances: np.ndarray
    f_values: np.ndarray
    grad_norms: np.ndarray
    step_norms: np.ndarray
    ratios: np.ndarray

    def __post_init__(self):
        n_pts = self.iterates.shape[0]
        n_steps = max(n_pts - 1, 0)
        if not (
            self.per_set_distances.shape[0]
            == self.f_values.shape[0]
            == self.grad_norms.shape[0]
            == n_pts
            and self.step_norms.shape[0] == self.ratios.shape[0] == n_steps
        ):
            raise ValueError("trace arrays have inconsistent lengths")

    @property
    def n_steps(self) -> int:
        return self.iterates.shape[0] - 1

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def errors_to(self, point) -> np.ndarray:
        """Euclidean distance from every iterate to a reference point."""
        ref = np.asarray(point, dtype=float)
        return np.linalg.norm(self.iterates - ref[None, :], axis=1)


class InexactnessError(RuntimeError):
    """A relaxed projection candidate violated the admissibility conditions."""


class _Recorder:
    def __init__(self, algorithm: str, seed: int):
        self.algorithm = algorithm
        self.seed = seed
        self.xs = []
        self.dists = []
        self.fs = []
        self.grads = []
        self.steps = []
        self.ratios = []

    @property
    def n_steps(self) -> int:
        return len(self.xs) - 1

    def first(self, x, terms):
        self.xs.append(np.array(x, dtype=float))
        self.dists.append(terms.distances)
        self.fs.append(terms.value)
        self.grads.append(float(np.linalg.norm(terms.gradient)))

    def step(self, x, terms, prev_f: float):
        self.steps.append(float(np.linalg.norm(x - self.xs[-1])))
        self.ratios.append(terms.value / prev_f)
        self.first(x, terms)

    def finish(self, config: RunConfig) -> Trace:
        return Trace(
            algorithm=self.algorithm,
            seed=self.seed,
            converged=bool(np.all(self.dists[-1] <= config.stop_tol)),
            iterates=np.vstack(self.xs),
            per_set_distances=np.vstack(self.dists),
            f_values=np.asarray(self.fs),
            grad_norms=np.asarray(self.grads),
            step_norms=np.asarray(self.steps),
            ratios=np.asarray(self.ratios),
        )


def _check_system(sets):
    sets = tuple(sets)
    if not sets:
        raise ValueError("need at least one set")
    dim = sets[0].ambient_dim
    if any(s.ambient_dim != dim for s in sets):
        raise ValueError("all sets must share one ambient dimension")
    return sets


def _check_start(dim: int, x0) -> np.ndarray:
    x = np.asarray(x0, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"starting point must have shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("starting point must be finite")
    return x.copy()


def _run_sequential(sets, x0, config: RunConfig, tag: str) -> Trace:
    sets = _check_system(sets)
    x = _check_start(sets[0].ambient_dim, x0)
    tol2 = config.stop_tol ** 2
    rec = _Recorder(tag, config.seed)
    terms = msd_terms(sets, x)
    rec.first(x, terms)
    while terms.value > tol2 and rec.n_steps < config.max_iter:
        new_x = terms.projections[rec.n_steps % len(sets)]
        new_terms = msd_terms(sets, new_x)
        rec.step(new_x, new_terms, prev_f=terms.value)
        terms = new_terms
    return rec.finish(config)


def run_alternating(first_set, second_set, x0, config: RunConfig = RunConfig()) -> Trace:
    """Alternate exact projections between two sets, first set first.

    The starting point must belong to the second set, so odd iterates lie
    in the first set and even iterates in the second.
    """
    if not second_set.contains(np.asarray(x0, dtype=float)):
        raise MembershipError("alternating runs must start from a point of the second set")
    return _run_sequential((first_set, second_set), x0, config, "alternating")


def run_cyclic(sets, x0, config: RunConfig = RunConfig()) -> Trace:
    """Project cyclically through ``sets`` in order (experimental mode).

    No membership is required of the starting point; the run begins by
    projecting onto the first set.
    """
    return _run_sequential(sets, x0, config, "cyclic")


def run_averaged(sets, x0, config: RunConfig = RunConfig()) -> Trace:
    """Iterate the mean-of-projections map over ``sets``.

    Each step moves to the average of all projections, which is exactly a
    unit gradient step on the merit function ``f``.
    """
    sets = _check_system(sets)
    x = _check_start(sets[0].ambient_dim, x0)
    tol2 = config.stop_tol ** 2
    rec = _Recorder("averaged", config.seed)
    terms = msd_terms(sets, x)
    rec.first(x, terms)
    while terms.value > tol2 and rec.n_steps < config.max_iter:
        new_x = terms.projections.mean(axis=0)
        new_terms = msd_terms(sets, new_x)
        rec.step(new_x, new_terms, prev_f=terms.value)
        terms = new_terms
    return rec.finish(config)


def run_averaged_via_product(sets, x0, config: RunConfig = RunConfig()) -> Trace:
    """Averaged projections realized as alternating projections upstairs.

    The iteration alternates between the product set ``S_1 x ... x S_m``
    and the diagonal subspace in the product space, then reads base-space
    iterates off the diagonal.  The result must match :func:`run_averaged`
    point for point; the product run gets a doubled step budget and a
    rescaled merit threshold so its stop rule cannot fire first.
    """
    sets = _check_system(sets)
    m = len(sets)
    if m < 2:
        raise ValueError("the product-space form needs at least two sets")
    dim = sets[0].ambient_dim
    x = _check_start(dim, x0)
    product = ProductSet(sets)
    lift = DiagonalLift(dim, m)
    prod_config = replace(
        config,
        max_iter=2 * config.max_iter + 2,
        stop_tol=config.stop_tol * math.sqrt(m / 2.0) * (1.0 - 1e-9),
    )
    inner = run_alternating(product, lift, np.tile(x, m), prod_config)

    base_points = [z[:dim] for z in inner.iterates[0::2]]
    if inner.iterates.shape[0] % 2 == 0:
        # The product run stopped on a product-set iterate; its block mean
        # is the next averaged point, so the cycle can still be completed.
        base_points.append(inner.iterates[-1].reshape(m, dim).mean(axis=0))

    tol2 = config.stop_tol ** 2
    rec = _Recorder("averaged-product", config.seed)
    terms = msd_terms(sets, base_points[0])
    rec.first(base_points[0], terms)
    for x_next in base_points[1:]:
        if terms.value <= tol2 or rec.n_steps >= config.max_iter:
            break
        new_terms = msd_terms(sets, x_next)
        rec.step(x_next, new_terms, prev_f=terms.value)
        terms = new_terms
    else:
        if terms.value > tol2 and rec.n_steps < config.max_iter:
            raise RuntimeError("product-space run ended before the averaged stop rule")
    return rec.finish(config)


def inexact_candidate(target_set, x_prev, x_cur, eps: float, rng) -> np.ndarray:
    """Default relaxed-projection oracle.

    Perturbs the exact projection of ``x_cur`` tangentially by a fraction
    of the gap, re-projects onto the set, and halves the perturbation until
    both admissibility conditions hold: the step is no longer than the
    previous one (``|x_cur - x_prev|``, unbounded when ``x_prev`` is
    ``None``) and the unit offset ``(x_cur - y) / |x_cur - y|`` lies within
    distance ``eps`` of the normal cone at the candidate ``y``.  Falls back
    to the exact projection, which always qualifies.
    """
    x_cur = np.asarray(x_cur, dtype=float)
    exact = target_set.project(x_cur)
    gap = float(np.linalg.norm(x_cur - exact))
    if eps <= 0.0 or gap <= 1e-14 * (1.0 + float(np.linalg.norm(x_cur))):
        return exact
    budget = (
        float(np.linalg.norm(x_cur - np.asarray(x_prev, dtype=float)))
        if x_prev is not None
        else math.inf
    )
    normal_dir = (x_cur - exact) / gap
    noise = rng.standard_normal(x_cur.shape[0])
    tangent = noise - (noise @ normal_dir) * normal_dir
    tnorm = float(np.linalg.norm(tangent))
    if tnorm <= 1e-12:
        return exact
    tangent /= tnorm
    scale = 0.5 * eps
    for _ in range(60):
        cand = target_set.project(exact + (scale * gap) * tangent)
        if _inexact_ok(target_set, x_cur, cand, eps, budget):
            return cand
        scale *= 0.5
    return exact


def _inexact_ok(target_set, x_cur, cand, eps: float, budget: float) -> bool:
    step = float(np.linalg.norm(cand - x_cur))
    if step > budget:
        return False
    if step <= 1e-14 * (1.0 + float(np.linalg.norm(x_cur))):
        return True
    direction = (x_cur - cand) / step
    return normal_cone_distance(target_set.normal_cone(cand), direction) <= eps


def run_inexact_alternating(
    first_set, second_set, x0, config: RunConfig = RunConfig(), candidate=None
) -> Trace:
    """Alternating projections with a relaxed first-set step.

    Steps onto the first set come from ``candidate`` (default
    :func:`inexact_candidate`) and are re-verified here: the step must not
    exceed the previous step length (with slack ``1e-12``) and the unit
    offset must be within ``config.inexact_eps + 1e-12`` of the normal
    cone at the candidate.  Violations raise :class:`InexactnessError`.
    Steps onto the second set are exact.  With ``inexact_eps = 0`` the
    iterates coincide with :func:`run_alternating`.
    """
    sets = _check_system((first_set, second_set))
    x = _check_start(sets[0].ambient_dim, x0)
    if not second_set.contains(x):
        raise MembershipError("inexact runs must start from a point of the second set")
    eps = config.inexact_eps
    oracle = candidate if candidate is not None else inexact_candidate
    rng = np.random.default_rng(config.seed)
    tol2 = config.stop_tol ** 2
    rec = _Recorder("inexact-alternating", config.seed)
    terms = msd_terms(sets, x)
    rec.first(x, terms)
    prev_step = math.inf
    while terms.value > tol2 and rec.n_steps < config.max_iter:
        if rec.n_steps % 2 == 0:
            x_prev = rec.xs[-2] if len(rec.xs) >= 2 else None
            new_x = np.asarray(oracle(first_set, x_prev, rec.xs[-1], eps, rng), dtype=float)
            _verify_relaxed_step(first_set, rec.xs[-1], new_x, eps, prev_step)
        else:
            new_x = terms.projections[1]
        new_terms = msd_terms(sets, new_x)
        prev_step = float(np.linalg.norm(new_x - rec.xs[-1]))
        rec.step(new_x, new_terms, prev_f=terms.value)
        terms = new_terms
    return rec.finish(config)


def _verify_relaxed_step(target_set, x_cur, cand, eps: float, budget: float):
    if cand.shape != x_cur.shape or not np.all(np.isfinite(cand)):
        raise InexactnessError("candidate has wrong shape or non-finite entries")
    if not target_set.contains(cand):
        raise InexactnessError("candidate does not belong to the target set")
    step = float(np.linalg.norm(cand - x_cur))
    if step > budget + 1e-12:
        raise InexactnessError(
            f"relaxed step {step:.6e} exceeds the previous step {budget:.6e}"
        )
    if step > 1e-14 * (1.0 + float(np.linalg.norm(x_cur))):
        direction = (x_cur - cand) / step
        residual = normal_cone_distance(target_set.normal_cone(cand), direction)
        if residual > eps + 1e-12:
            raise InexactnessError(
                f"normal-cone residual {residual:.6e} exceeds eps {eps:.6e}"
            )


@dataclass(frozen=True)
class PerturbedResult:
    """Outcome of alternating projections after translating the first set."""

    trace: Trace
    shift_norm: float
    contraction: float
    bound: float
    displacement: float
    within_bound: bool
    final_residuals: tuple

    def summary(self) -> str:
        status = "holds" if self.within_bound else "VIOLATED"
        return (
            f"|shift| = {self.shift_norm:.3e}, displacement = {self.displacement:.3e}, "
            f"bound (1+c)/(1-c)*|shift| = {self.bound:.3e} ({status})"
        )


def run_perturbed(
    first_set, second_set, shift, anchor, config: RunConfig = RunConfig(),
    contraction: float = 0.6,
) -> PerturbedResult:
    """Translate the first set by ``shift`` and re-solve from ``anchor``.

    ``anchor`` must be a common point of the two original sets, and
    ``contraction`` an a-priori linear rate ``c`` valid near it.  The
    final iterate then has to stay within ``(1+c)/(1-c) * |shift|`` of the
    anchor, which the result records.
    """
    if not (0.0 < contraction < 1.0):
        raise ValueError("contraction must lie in (0, 1)")
    sets = _check_system((first_set, second_set))
    point = _check_start(sets[0].ambient_dim, anchor)
    offset = np.asarray(shift, dtype=float)
    if offset.shape != point.shape:
        raise ValueError("shift dimension must match the sets")
    if not (first_set.contains(point) and second_set.contains(point)):
        raise MembershipError("anchor must belong to both sets")
    shifted = Translate(first_set, offset)
    trace = run_alternating(shifted, second_set, point, config)
    shift_norm = float(np.linalg.norm(offset))
    displacement = float(np.linalg.norm(trace.final - point))
    bound = (1.0 + contraction) / (1.0 - contraction) * shift_norm
    return PerturbedResult(
        trace=trace,
        shift_norm=shift_norm,
        contraction=contraction,
        bound=bound,
        displacement=displacement,
        within_bound=displacement <= bound,
        final_residuals=(shifted.distance(trace.final), second_set.distance(trace.final)),
    )
