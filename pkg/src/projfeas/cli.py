"""Experiment driver and I/O.

One experiment per invocation: a matrix-design feasibility instance
(``cs``) built from a random dictionary, or one of the desk-scale
synthetic instances (``two-lines``, ``subspaces``, ``circle-line``,
``perturbed``, ``inexact``).  Synthetic runs print a table of predicted
regularity constants and rates next to fitted observations; every run can
be emitted as CSV or JSON.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .algorithms import (
    PerturbedResult,
    RunConfig,
    Trace,
    run_alternating,
    run_averaged,
    run_averaged_via_product,
    run_cyclic,
    run_inexact_alternating,
    run_perturbed,
)
from .diagnostics import (
    DIST_FLOOR,
    F_FLOOR,
    EstimationError,
    fit_rlinear_rate,
    qlinear_ratios,
)
from .linalg import gaussian_matrix
from .regularity import cbar_pair, cond_modulus, predicted_rates
from .sets import (
    AffineSubspace,
    DiagonalLift,
    LinfBall,
    OrthonormalRows,
    ProductSet,
    RowSpace,
    Sphere,
    normal_cone_distance,
)

__all__ = [
    "ExperimentConfig",
    "SyntheticResult",
    "CsResult",
    "experiment_cs",
    "experiment_synthetic",
    "emit",
    "build_parser",
    "main",
]

EXPERIMENTS = ("cs", "two-lines", "subspaces", "circle-line", "perturbed", "inexact")
ALGORITHMS = ("averaged", "alternating-product", "cyclic")

#: Reference single-instance max merit ratio, printed next to cs runs for
#: comparison.  It is seed- and instance-specific and never asserted.
REFERENCE_CS_MAX_RATIO = 0.9627


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated bundle of experiment and run parameters.

    ``eps`` is the angular slack for the ``inexact`` experiment and doubles
    as the shift magnitude for the ``perturbed`` experiment; left unset it
    resolves to 0.2 and 0.01 respectively.
    """

    experiment: str
    algorithm: str = "averaged"
    n: int = 128
    m_dict: int = 512
    d_rows: int = 32
    alpha: float = 0.1
    theta: float = math.pi / 3.0
    eps: Optional[float] = None
    seed: int = 0
    max_iter: int = 500
    stop_tol: float = 1e-10
    u0_mode: str = "product"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.u0_mode not in ("product", "project"):
            raise ValueError("u0_mode must be 'product' or 'project'")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if not (0.0 < self.theta <= math.pi / 2.0 + 1e-12):
            raise ValueError("theta must lie in (0, pi/2] radians")
        if self.experiment == "cs" and not (1 <= self.d_rows <= self.n < self.m_dict):
            raise ValueError("cs requires 1 <= d_rows <= n < m_dict")
        if self.eps is not None:
            if self.experiment == "perturbed" and self.eps <= 0.0:
                raise ValueError("the perturbed experiment needs a positive shift size")
            if self.experiment == "inexact" and not (0.0 <= self.eps < 1.0):
                raise ValueError("inexact slack must lie in [0, 1)")
        self.run_config()  # validates max_iter / stop_tol eagerly

    @property
    def resolved_eps(self) -> float:
        if self.eps is not None:
            return float(self.eps)
        return 0.01 if self.experiment == "perturbed" else 0.2

    def run_config(self) -> RunConfig:
        slack = self.resolved_eps if self.experiment == "inexact" else 0.0
        return RunConfig(
            max_iter=self.max_iter,
            stop_tol=self.stop_tol,
            seed=self.seed,
            inexact_eps=slack,
        )


@dataclass
class SyntheticResult:
    """A synthetic run: trace, regularity report, and a comparison table."""

    config: ExperimentConfig
    trace: Trace
    report: object
    rows: list
    notes: list
    perturbed: Optional[PerturbedResult] = None

    def summary(self) -> str:
        lines = [
            f"experiment={self.config.experiment} algorithm={self.config.algorithm} "
            f"seed={self.config.seed}",
            f"steps={self.trace.n_steps} converged={self.trace.converged} "
            f"final f={self.trace.f_values[-1]:.3e}",
            _format_rows(self.rows),
        ]
        lines.extend(f"note: {note}" for note in self.notes)
        return "\n".join(lines)


@dataclass
class CsResult:
    """A matrix-design run and its headline statistics."""

    config: ExperimentConfig
    trace: Trace
    log10_f: np.ndarray
    max_ratio: Optional[float]
    fitted_rate: Optional[float]
    fit_residual: Optional[float]
    stalled: bool
    notes: list

    def summary(self) -> str:
        ratio = "n/a" if self.max_ratio is None else f"{self.max_ratio:.6f}"
        rate = "n/a" if self.fitted_rate is None else f"{self.fitted_rate:.6f}"
        resid = "n/a" if self.fit_residual is None else f"{self.fit_residual:.3e}"
        lines = [
            f"experiment=cs algorithm={self.config.algorithm} seed={self.config.seed} "
            f"n={self.config.n} m_dict={self.config.m_dict} d_rows={self.config.d_rows} "
            f"alpha={self.config.alpha}",
            f"steps={self.trace.n_steps} converged={self.trace.converged} "
            f"final log10 f={self.log10_f[-1]:.3f}",
            f"max merit ratio={ratio} (reference instance: {REFERENCE_CS_MAX_RATIO})",
            f"fitted merit rate={rate} (log-linear fit residual {resid})",
        ]
        if self.stalled:
            lines.append("note: run stalled (merit plateau above the stop threshold)")
        lines.extend(f"note: {note}" for note in self.notes)
        return "\n".join(lines)


def _format_rows(rows) -> str:
    out = [f"  {'quantity':<44s} {'predicted':>12s} {'observed':>12s}"]
    for label, predicted, observed in rows:
        pred = "-" if predicted is None else f"{predicted:.6g}"
        obs = "-" if observed is None else f"{observed:.6g}"
        out.append(f"  {label:<44s} {pred:>12s} {obs:>12s}")
    return "\n".join(out)


def _line_through_origin(angle: float) -> AffineSubspace:
    return AffineSubspace(np.zeros(2), [[math.cos(angle), math.sin(angle)]])


def _fit_or_none(series, floor: float = DIST_FLOOR):
    try:
        return fit_rlinear_rate(series, floor=floor)
    except EstimationError:
        return None


def _tail_ratio(trace) -> Optional[float]:
    ratios = qlinear_ratios(trace)
    if ratios.size == 0:
        return None
    return float(np.mean(ratios[-min(5, ratios.size):]))


def _run_two_set(cfg: ExperimentConfig, first, second, x0_on_second, x0_free) -> Trace:
    run_cfg = cfg.run_config()
    if cfg.algorithm == "averaged":
        return run_averaged((first, second), x0_free, run_cfg)
    if cfg.algorithm == "alternating-product":
        return run_averaged_via_product((first, second), x0_free, run_cfg)
    return run_alternating(first, second, x0_on_second, run_cfg)


def _two_set_report(first, second, at_point):
    cone_a = first.normal_cone(at_point)
    cone_b = second.normal_cone(at_point)
    pair = cbar_pair(cone_a, cone_b)
    cond = cond_modulus((cone_a, cone_b))
    return predicted_rates(2, cond, cbar_pairwise=pair.value), pair, cond


def _rate_rows(cfg, report, fitted, tail) -> list:
    rows = [
        ("pairwise angle constant", report.cbar_pairwise, None),
        ("condition modulus", report.cond_k, None),
        ("averaged angle constant", report.cbar_avg, None),
    ]
    fitted_rate = None if fitted is None else fitted.rate
    if cfg.algorithm == "cyclic":
        rows.append(("iterate rate bound sqrt(c)", report.rate_alternating, fitted_rate))
        rows.append(
            ("iterate rate bound c (super-regular sets)",
             report.rate_alternating_both_super, fitted_rate)
        )
    else:
        rows.append(("iterate rate bound c", report.rate_averaged, fitted_rate))
        rows.append(
            ("iterate rate bound c^2 (super-regular sets)",
             report.rate_averaged_super, fitted_rate)
        )
    rows.append(("merit ratio bound 1 - 1/(k^2 m)", report.qlinear_factor, tail))
    rows.append(("alternating ratio bound 1 - 1/k^2", report.r_alt_bound, None))
    rows.append(("averaged ratio bound 1 - 1/(2 k^2)", report.r_av_bound, None))
    return rows


def _experiment_two_lines(cfg: ExperimentConfig) -> SyntheticResult:
    first = _line_through_origin(cfg.theta)
    second = _line_through_origin(0.0)
    origin = np.zeros(2)
    report, _, _ = _two_set_report(first, second, origin)
    x0 = np.array([1.0, 0.0])
    trace = _run_two_set(cfg, first, second, x0, x0)
    fitted = _fit_or_none(trace.errors_to(origin))
    rows = _rate_rows(cfg, report, fitted, _tail_ratio(trace))
    notes = []
    if fitted is None:
        notes.append("too few iterates above the floor to fit a rate")
    return SyntheticResult(cfg, trace, report, rows, notes)


def _experiment_subspaces(cfg: ExperimentConfig) -> SyntheticResult:
    rng = np.random.default_rng(cfg.seed)
    dim = max(4, cfg.n)
    codim = max(1, dim // 8)
    m_sets = 3
    anchor = np.zeros(dim)
    sets = tuple(
        AffineSubspace(anchor, rng.standard_normal((dim - codim, dim)))
        for _ in range(m_sets)
    )
    cones = [s.normal_cone(anchor) for s in sets]
    cond = cond_modulus(cones)
    product_pair = cbar_pair(
        ProductSet(sets).normal_cone(np.tile(anchor, m_sets)),
        DiagonalLift(dim, m_sets).normal_cone(np.tile(anchor, m_sets)),
    )
    report = predicted_rates(m_sets, cond, cbar_pairwise=product_pair.value)
    x0 = rng.standard_normal(dim)
    run_cfg = cfg.run_config()
    if cfg.algorithm == "averaged":
        trace = run_averaged(sets, x0, run_cfg)
    elif cfg.algorithm == "alternating-product":
        trace = run_averaged_via_product(sets, x0, run_cfg)
    else:
        trace = run_cyclic(sets, x0, run_cfg)
    fitted = _fit_or_none(trace.errors_to(trace.final))
    rows = _rate_rows(cfg, report, fitted, _tail_ratio(trace))
    notes = [f"random subspace system: dim={dim}, {m_sets} sets of codimension {codim}"]
    if fitted is None:
        notes.append("too few iterates above the floor to fit a rate")
    return SyntheticResult(cfg, trace, report, rows, notes)


def _experiment_circle_line(cfg: ExperimentConfig) -> SyntheticResult:
    sphere = Sphere(np.zeros(2), 1.0)
    line = _line_through_origin(0.0)
    crossing = np.array([1.0, 0.0])
    report, _, _ = _two_set_report(sphere, line, crossing)
    trace = _run_two_set(
        cfg, sphere, line, np.array([1.3, 0.0]), np.array([1.2, 0.2])
    )
    fitted = _fit_or_none(trace.errors_to(trace.final))
    rows = _rate_rows(cfg, report, fitted, _tail_ratio(trace))
    notes = ["nonconvex instance: constants are local to the crossing point"]
    if fitted is None:
        notes.append("too few iterates above the floor to fit a rate")
    return SyntheticResult(cfg, trace, report, rows, notes)


def _experiment_perturbed(cfg: ExperimentConfig) -> SyntheticResult:
    first = _line_through_origin(cfg.theta)
    second = _line_through_origin(0.0)
    anchor = np.zeros(2)
    report, pair, _ = _two_set_report(first, second, anchor)
    magnitude = cfg.resolved_eps
    shift = np.array([0.0, magnitude])
    contraction = 0.6 if pair.value < 0.6 else (1.0 + pair.value) / 2.0
    result = run_perturbed(
        first, second, shift, anchor, cfg.run_config(), contraction
    )
    rows = [
        ("pairwise angle constant", report.cbar_pairwise, None),
        ("shift size", magnitude, None),
        ("displacement bound (1+c)/(1-c)|d|", result.bound, result.displacement),
        ("residual to shifted set", 0.0, result.final_residuals[0]),
        ("residual to fixed set", 0.0, result.final_residuals[1]),
    ]
    notes = [result.summary()]
    return SyntheticResult(cfg, result.trace, report, rows, notes, perturbed=result)


def _experiment_inexact(cfg: ExperimentConfig) -> SyntheticResult:
    first = _line_through_origin(cfg.theta)
    second = _line_through_origin(0.0)
    origin = np.zeros(2)
    report, _, _ = _two_set_report(first, second, origin)
    eps = cfg.resolved_eps
    trace = run_inexact_alternating(
        first, second, np.array([1.0, 0.0]), cfg.run_config()
    )
    fitted = _fit_or_none(trace.errors_to(origin))
    fitted_rate = None if fitted is None else fitted.rate
    worst = _worst_cone_residual(first, trace)
    rows = [
        ("pairwise angle constant", report.cbar_pairwise, None),
        ("relaxed-step rate bound", report.rate_inexact(eps), fitted_rate),
        ("exact-step rate bound sqrt(c)", report.rate_alternating, None),
        ("normal-cone residual allowance", eps, worst),
    ]
    notes = []
    if fitted is None:
        notes.append("too few iterates above the floor to fit a rate")
    return SyntheticResult(cfg, trace, report, rows, notes)


def _worst_cone_residual(first_set, trace) -> Optional[float]:
    worst = None
    for k in range(1, trace.iterates.shape[0], 2):
        prev_pt = trace.iterates[k - 1]
        cur = trace.iterates[k]
        gap = float(np.linalg.norm(prev_pt - cur))
        if gap <= 1e-14 * (1.0 + float(np.linalg.norm(prev_pt))):
            continue
        residual = normal_cone_distance(
            first_set.normal_cone(cur), (prev_pt - cur) / gap
        )
        worst = residual if worst is None else max(worst, residual)
    return worst


def experiment_synthetic(cfg: ExperimentConfig) -> SyntheticResult:
    """Run one of the desk-scale instances and assemble its report table."""
    if cfg.experiment == "two-lines":
        return _experiment_two_lines(cfg)
    if cfg.experiment == "subspaces":
        return _experiment_subspaces(cfg)
    if cfg.experiment == "circle-line":
        return _experiment_circle_line(cfg)
    if cfg.experiment == "perturbed":
        return _experiment_perturbed(cfg)
    if cfg.experiment == "inexact":
        return _experiment_inexact(cfg)
    raise ValueError(f"not a synthetic experiment: {cfg.experiment!r}")


def experiment_cs(cfg: ExperimentConfig) -> CsResult:
    """Matrix-design feasibility: row space of a dictionary, orthonormal
    rows, and an entrywise bound.

    Builds the dictionary ``W`` (n x m_dict Gaussian), starts from
    ``U0 = P0 @ W`` with ``P0`` Gaussian (guaranteed membership in the row
    space; ``u0_mode='project'`` instead projects a raw Gaussian), and runs
    the selected algorithm on the three sets.
    """
    if cfg.experiment != "cs":
        raise ValueError("config does not describe a cs experiment")
    w = gaussian_matrix(cfg.n, cfg.m_dict, cfg.seed)
    row_space = RowSpace(w, cfg.d_rows)
    if cfg.u0_mode == "product":
        p0 = gaussian_matrix(cfg.d_rows, cfg.n, cfg.seed + 1)
        u0 = (p0 @ w).ravel()
    else:
        raw = gaussian_matrix(cfg.d_rows, cfg.m_dict, cfg.seed + 1).ravel()
        u0 = row_space.project(raw)
    sets = (
        row_space,
        OrthonormalRows(cfg.d_rows, cfg.m_dict),
        LinfBall(cfg.alpha, cfg.d_rows * cfg.m_dict),
    )
    run_cfg = cfg.run_config()
    if cfg.algorithm == "averaged":
        trace = run_averaged(sets, u0, run_cfg)
    elif cfg.algorithm == "alternating-product":
        trace = run_averaged_via_product(sets, u0, run_cfg)
    else:
        trace = run_cyclic(sets, u0, run_cfg)

    with np.errstate(divide="ignore"):
        log10_f = np.log10(np.maximum(trace.f_values, 0.0))
    ratios = qlinear_ratios(trace)
    max_ratio = float(ratios.max()) if ratios.size else None
    fit = _fit_or_none(trace.f_values, floor=F_FLOOR)
    stalled = _is_stalled(trace, run_cfg)
    notes = []
    if cfg.algorithm == "cyclic":
        notes.append("cyclic multi-set mode is experimental")
    return CsResult(
        config=cfg,
        trace=trace,
        log10_f=log10_f,
        max_ratio=max_ratio,
        fitted_rate=None if fit is None else fit.rate,
        fit_residual=None if fit is None else fit.residual,
        stalled=stalled,
        notes=notes,
    )


def _is_stalled(trace: Trace, run_cfg: RunConfig, span: int = 50) -> bool:
    if trace.f_values[-1] <= run_cfg.stop_tol ** 2 or trace.ratios.shape[0] < span:
        return False
    return bool(np.all(trace.ratios[-span:] >= 1.0 - 1e-3))


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def emit(trace: Trace, path: str, fmt: str = "csv", report=None, config=None):
    """Write a run to ``path`` as CSV (trace columns) or JSON (trace,
    report, and config echo).  Output is deterministic given the run."""
    if fmt == "csv":
        _emit_csv(trace, path)
    elif fmt == "json":
        _emit_json(trace, path, report, config)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _float_repr(x) -> str:
    return repr(float(x))


def _emit_csv(trace: Trace, path: str):
    m = trace.per_set_distances.shape[1]
    header = (
        ["iter", "f", "log10_f", "grad_norm", "step_norm"]
        + [f"dist_{i + 1}" for i in range(m)]
        + ["ratio"]
    )
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(trace.iterates.shape[0]):
                f_val = float(trace.f_values[k])
                log10_f = math.log10(f_val) if f_val > 0.0 else -math.inf
                row = [
                    str(k),
                    _float_repr(f_val),
                    _float_repr(log10_f),
                    _float_repr(trace.grad_norms[k]),
                    _float_repr(trace.step_norms[k - 1]) if k > 0 else "",
                ]
                row.extend(_float_repr(d) for d in trace.per_set_distances[k])
                row.append(_float_repr(trace.ratios[k - 1]) if k > 0 else "")
                writer.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _emit_json(trace: Trace, path: str, report, config):
    log10_f = [
        math.log10(v) if v > 0.0 else None for v in map(float, trace.f_values)
    ]
    payload = {
        "algorithm": trace.algorithm,
        "seed": trace.seed,
        "converged": trace.converged,
        "config": None if config is None else _config_jsonable(config),
        "report": None if report is None else _report_jsonable(report),
        "f_values": [float(v) for v in trace.f_values],
        "log10_f": log10_f,
        "grad_norms": [float(v) for v in trace.grad_norms],
        "step_norms": [float(v) for v in trace.step_norms],
        "ratios": [float(v) for v in trace.ratios],
        "per_set_distances": [list(map(float, row)) for row in trace.per_set_distances],
        # Full iterate lists are omitted on purpose: matrix-scale traces
        # would dominate the file; the final point suffices downstream.
        "final_iterate": [float(v) for v in trace.final],
    }
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _config_jsonable(config) -> dict:
    if dataclasses.is_dataclass(config):
        return dataclasses.asdict(config)
    return dict(config)


def _report_jsonable(report) -> dict:
    out = dataclasses.asdict(report)
    for key, value in out.items():
        if isinstance(value, float) and not math.isfinite(value):
            out[key] = None
    return out


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="projfeas",
        description="Projection-method feasibility experiments and diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    run.add_argument(
        "--algorithm",
        default="averaged",
        choices=ALGORITHMS,
        help="'cyclic' projects sequentially (plain alternation on two-set "
        "experiments; experimental for three sets)",
    )
    run.add_argument("--n", type=int, default=128, help="ambient rows of the dictionary")
    run.add_argument("--m-dict", type=int, default=512, help="dictionary columns")
    run.add_argument("--d-rows", type=int, default=32, help="rows of the design matrix")
    run.add_argument("--alpha", type=float, default=0.1, help="entrywise bound")
    run.add_argument(
        "--theta", type=float, default=math.pi / 3.0,
        help="angle between the two lines, radians in (0, pi/2]",
    )
    run.add_argument(
        "--eps", type=float, default=None,
        help="inexactness slack (inexact; default 0.2) or shift size "
        "(perturbed; default 0.01)",
    )
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--max-iter", type=int, default=500)
    run.add_argument("--stop-tol", type=float, default=1e-10)
    run.add_argument("--out", default=None, help="write the trace to this path")
    run.add_argument("--format", dest="fmt", default="csv", choices=("csv", "json"))
    run.add_argument(
        "--u0-mode", default="product", choices=("product", "project"),
        help="cs start: multiply a Gaussian through the dictionary, or "
        "project a raw Gaussian onto its row space",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig(
            experiment=args.experiment,
            algorithm=args.algorithm,
            n=args.n,
            m_dict=args.m_dict,
            d_rows=args.d_rows,
            alpha=args.alpha,
            theta=args.theta,
            eps=args.eps,
            seed=args.seed,
            max_iter=args.max_iter,
            stop_tol=args.stop_tol,
            u0_mode=args.u0_mode,
        )
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if cfg.experiment == "cs":
            cs_result = experiment_cs(cfg)
            print(cs_result.summary())
            trace, report = cs_result.trace, None
        else:
            result = experiment_synthetic(cfg)
            print(result.summary())
            trace, report = result.trace, result.report
        if args.out:
            emit(trace, args.out, args.fmt, report=report, config=cfg)
            print(f"wrote {args.out}")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
