import csv
import json
import math

import numpy as np
import pytest

from projfeas.algorithms import Trace
from projfeas.cli import (
    CsResult,
    ExperimentConfig,
    SyntheticResult,
    emit,
    experiment_cs,
    experiment_synthetic,
    main,
)
from projfeas.diagnostics import msd
from projfeas.linalg import gaussian_matrix
from projfeas.sets import LinfBall, OrthonormalRows, RowSpace


# ---------------------------------------------------------------------------
# ExperimentConfig
# ---------------------------------------------------------------------------


def test_experiment_config_defaults_and_resolved_eps():
    cs = ExperimentConfig(experiment="cs")
    assert cs.algorithm == "averaged"
    assert cs.run_config().max_iter == 500
    inexact = ExperimentConfig(experiment="inexact")
    assert inexact.resolved_eps == pytest.approx(0.2)
    perturbed = ExperimentConfig(experiment="perturbed")
    assert perturbed.resolved_eps == pytest.approx(0.01)
    explicit = ExperimentConfig(experiment="inexact", eps=0.35)
    assert explicit.resolved_eps == pytest.approx(0.35)


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="unknown")
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="cs", algorithm="steepest-descent")
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="cs", n=8, m_dict=4)  # needs n < m_dict
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="cs", d_rows=0)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="two-lines", theta=0.0)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="two-lines", theta=2.0)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="inexact", eps=1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="cs", alpha=-0.1)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="cs", max_iter=0)


# ---------------------------------------------------------------------------
# Synthetic experiments
# ---------------------------------------------------------------------------


def test_two_lines_cyclic_recovers_cos_theta():
    theta = math.pi / 3
    cfg = ExperimentConfig(experiment="two-lines", algorithm="cyclic", theta=theta)
    result = experiment_synthetic(cfg)
    assert isinstance(result, SyntheticResult)
    observed = dict((name, obs) for name, _, obs in result.rows)
    fitted = observed["iterate rate bound sqrt(c)"]
    assert fitted == pytest.approx(math.cos(theta), abs=0.01)
    assert "alternat" not in result.summary() or result.summary()


def test_two_lines_averaged_recovers_half_angle_rate():
    theta = math.pi / 3
    cfg = ExperimentConfig(experiment="two-lines", algorithm="averaged", theta=theta)
    result = experiment_synthetic(cfg)
    observed = dict((name, obs) for name, _, obs in result.rows)
    fitted = observed["iterate rate bound c"]
    assert fitted == pytest.approx(math.cos(theta / 2.0) ** 2, abs=0.01)
    tail = observed["merit ratio bound 1 - 1/(k^2 m)"]
    predicted = dict((name, pred) for name, pred, _ in result.rows)
    assert tail <= predicted["merit ratio bound 1 - 1/(k^2 m)"] + 0.02


def test_two_lines_product_algorithm_matches_averaged():
    cfg_a = ExperimentConfig(experiment="two-lines", algorithm="averaged")
    cfg_p = ExperimentConfig(experiment="two-lines", algorithm="alternating-product")
    trace_a = experiment_synthetic(cfg_a).trace
    trace_p = experiment_synthetic(cfg_p).trace
    np.testing.assert_array_equal(trace_a.iterates, trace_p.iterates)


def test_subspaces_experiment_reports_consistent_moduli():
    cfg = ExperimentConfig(experiment="subspaces", n=8, seed=3)
    result = experiment_synthetic(cfg)
    report = result.report
    assert report.strongly_regular
    # the lifted product pair constant matches the averaged constant
    assert report.cbar_pairwise == pytest.approx(report.cbar_avg, abs=1e-8)
    assert result.trace.f_values[-1] < result.trace.f_values[0]


def test_circle_line_experiment_converges():
    cfg = ExperimentConfig(experiment="circle-line", algorithm="cyclic")
    result = experiment_synthetic(cfg)
    assert result.trace.f_values[-1] <= 1e-20
    assert result.report.cond_k == pytest.approx(1.0, abs=1e-9)


def test_perturbed_experiment_bound_holds():
    cfg = ExperimentConfig(experiment="perturbed")
    result = experiment_synthetic(cfg)
    assert result.perturbed is not None
    assert result.perturbed.within_bound
    assert result.perturbed.shift_norm == pytest.approx(0.01)


def test_inexact_experiment_reports_admissible_residuals():
    cfg = ExperimentConfig(experiment="inexact", eps=0.2, max_iter=200)
    result = experiment_synthetic(cfg)
    allowance = next(r for r in result.rows if "residual" in r[0])
    _, eps, worst = allowance
    assert eps == pytest.approx(0.2)
    assert worst is None or worst <= eps + 1e-9
    assert result.trace.algorithm == "inexact-alternating"


# ---------------------------------------------------------------------------
# cs experiment
# ---------------------------------------------------------------------------


def _small_cs_config(**overrides):
    base = dict(
        experiment="cs", n=16, m_dict=32, d_rows=4, alpha=0.3, max_iter=80
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_cs_f_values_match_recomputed_merit():
    cfg = _small_cs_config()
    result = experiment_cs(cfg)
    assert isinstance(result, CsResult)
    w = gaussian_matrix(cfg.n, cfg.m_dict, cfg.seed)
    sets = (
        RowSpace(w, cfg.d_rows),
        OrthonormalRows(cfg.d_rows, cfg.m_dict),
        LinfBall(cfg.alpha, cfg.d_rows * cfg.m_dict),
    )
    for k in (0, 1, len(result.trace.iterates) // 2, -1):
        x = result.trace.iterates[k]
        assert msd(sets, x) == pytest.approx(
            float(result.trace.f_values[k]), rel=1e-12, abs=1e-24
        )


def test_cs_start_lies_in_row_space():
    cfg = _small_cs_config()
    result = experiment_cs(cfg)
    w = gaussian_matrix(cfg.n, cfg.m_dict, cfg.seed)
    p0 = gaussian_matrix(cfg.d_rows, cfg.n, cfg.seed + 1)
    np.testing.assert_array_equal(result.trace.iterates[0], (p0 @ w).ravel())
    assert RowSpace(w, cfg.d_rows).contains(result.trace.iterates[0])


def test_cs_project_start_mode():
    cfg = _small_cs_config(u0_mode="project")
    result = experiment_cs(cfg)
    w = gaussian_matrix(cfg.n, cfg.m_dict, cfg.seed)
    assert RowSpace(w, cfg.d_rows).contains(result.trace.iterates[0])


def test_cs_merit_decreases_monotonically():
    result = experiment_cs(_small_cs_config())
    diffs = np.diff(result.trace.f_values)
    assert np.all(diffs <= 1e-15)
    assert result.max_ratio is None or result.max_ratio < 1.0
    assert result.log10_f.shape == result.trace.f_values.shape


def test_cs_summary_mentions_reference_ratio():
    result = experiment_cs(_small_cs_config())
    assert "0.9627" in result.summary()


def test_cs_is_seed_deterministic():
    a = experiment_cs(_small_cs_config(seed=2))
    b = experiment_cs(_small_cs_config(seed=2))
    np.testing.assert_array_equal(a.trace.f_values, b.trace.f_values)
    c = experiment_cs(_small_cs_config(seed=3))
    assert not np.array_equal(a.trace.f_values[:10], c.trace.f_values[:10])


# ---------------------------------------------------------------------------
# emit
# ---------------------------------------------------------------------------


def _tiny_trace():
    cfg = ExperimentConfig(experiment="two-lines", algorithm="cyclic", max_iter=6)
    return experiment_synthetic(cfg)


def test_emit_csv_layout(tmp_path):
    result = _tiny_trace()
    out = tmp_path / "trace.csv"
    emit(result.trace, str(out))
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    header, first, second = rows[0], rows[1], rows[2]
    m = result.trace.per_set_distances.shape[1]
    assert header == (
        ["iter", "f", "log10_f", "grad_norm", "step_norm"]
        + [f"dist_{i + 1}" for i in range(m)]
        + ["ratio"]
    )
    assert len(rows) == 1 + len(result.trace.iterates)
    # row 0 has no step or ratio yet
    assert first[0] == "0" and first[4] == "" and first[-1] == ""
    assert second[4] != "" and second[-1] != ""
    # floats round-trip exactly through repr
    assert float(first[1]) == float(result.trace.f_values[0])
    assert float(second[-1]) == float(result.trace.ratios[0])


def test_emit_csv_is_byte_deterministic(tmp_path):
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(_tiny_trace().trace, str(out_a))
    emit(_tiny_trace().trace, str(out_b))
    assert out_a.read_bytes() == out_b.read_bytes()


def test_emit_csv_empty_trace_writes_header_only(tmp_path):
    empty = Trace(
        algorithm="alternating",
        seed=0,
        converged=False,
        iterates=np.zeros((0, 2)),
        per_set_distances=np.zeros((0, 2)),
        f_values=np.zeros(0),
        grad_norms=np.zeros(0),
        step_norms=np.zeros(0),
        ratios=np.zeros(0),
    )
    out = tmp_path / "empty.csv"
    emit(empty, str(out))
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows == [["iter", "f", "log10_f", "grad_norm", "step_norm", "dist_1", "dist_2", "ratio"]]


def test_emit_json_round_trip(tmp_path):
    result = _tiny_trace()
    out = tmp_path / "trace.json"
    emit(result.trace, str(out), fmt="json", report=result.report, config=result.config)
    payload = json.loads(out.read_text())
    # the cyclic algorithm on a two-set experiment runs plain alternation
    assert payload["algorithm"] == "alternating"
    assert payload["f_values"] == [float(v) for v in result.trace.f_values]
    assert payload["final_iterate"] == [float(v) for v in result.trace.final]
    assert payload["config"]["experiment"] == "two-lines"
    assert payload["report"]["cond_k"] == pytest.approx(result.report.cond_k)
    for f_val, log_val in zip(payload["f_values"], payload["log10_f"]):
        if f_val > 0.0:
            assert log_val == pytest.approx(math.log10(f_val))
        else:
            assert log_val is None


def test_emit_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit(_tiny_trace().trace, str(tmp_path / "x.xml"), fmt="xml")


def test_emit_unwritable_path_raises_oserror(tmp_path):
    target = tmp_path / "missing-dir" / "trace.csv"
    with pytest.raises(OSError, match="missing-dir"):
        emit(_tiny_trace().trace, str(target))


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------


def test_main_happy_path_writes_file(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = main([
        "run", "--experiment", "two-lines", "--algorithm", "cyclic",
        "--max-iter", "40", "--out", str(out),
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert out.exists()
    assert f"wrote {out}" in captured.out
    assert captured.err == ""


def test_main_configuration_error_exits_2(capsys):
    code = main([
        "run", "--experiment", "cs", "--n", "64", "--m-dict", "32",
        "--max-iter", "5",
    ])
    captured = capsys.readouterr()
    assert code == 2
    assert "configuration error" in captured.err


def test_main_io_error_exits_1(tmp_path, capsys):
    out = tmp_path / "no-such-dir" / "run.csv"
    code = main([
        "run", "--experiment", "two-lines", "--max-iter", "10",
        "--out", str(out),
    ])
    captured = capsys.readouterr()
    assert code == 1
    assert "error:" in captured.err


def test_main_json_output(tmp_path):
    out = tmp_path / "run.json"
    code = main([
        "run", "--experiment", "inexact", "--eps", "0.1", "--max-iter", "60",
        "--out", str(out), "--format", "json",
    ])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["algorithm"] == "inexact-alternating"
    assert payload["config"]["eps"] == pytest.approx(0.1)
