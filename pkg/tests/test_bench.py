"""Benchmark rows, sweeps, CSV round-trips, and the complexity-slope fit."""

import numpy as np
import pytest

from arpbench.bench import (
    CSV_HEADER,
    FitResult,
    RunRow,
    SweepSpec,
    fit_complexity_slope,
    rows_from_csv,
    rows_to_csv,
    run_single,
    run_sweep,
    sweep_start_points,
)
from arpbench.driver import SolverConfig
from arpbench.problems import get_problem


def test_csv_header():
    assert CSV_HEADER == (
        "problem,p,eps1,eps2,criticality_order,k_total,k_succ,k_unsucc,"
        "f_evals,deriv_evals,final_f,final_chi1,final_chi2,sigma_final,"
        "theoretical_succ_bound,status"
    )
    assert rows_to_csv([]) == CSV_HEADER + "\n"


def test_run_single_row_matches_trace():
    cfg = SolverConfig(p=2, eps1=1e-7, eps2=1e-7)
    trace, row = run_single("quadratic", cfg)
    assert row.problem == "quadratic" and row.p == 2
    assert row.status == "converged"
    assert row.k_total == len(trace.records)
    assert row.k_succ == trace.successful_count
    assert row.k_unsucc == trace.unsuccessful_count
    assert row.f_evals == trace.f_evaluations == 1 + row.k_total
    assert row.deriv_evals == trace.derivative_evaluations
    assert row.final_f == trace.final_f
    assert row.final_chi1 == trace.final_criticality.chi1
    assert row.final_chi2 == trace.final_criticality.chi2
    assert row.theoretical_succ_bound is not None
    assert row.k_succ <= row.theoretical_succ_bound


def test_run_single_accepts_problem_object():
    cfg = SolverConfig(p=2, eps1=1e-4, eps2=1e-4)
    _, row = run_single(get_problem("saddle"), cfg, x0=np.zeros(2))
    assert row.problem == "saddle"
    assert row.final_f == pytest.approx(-1.0, abs=1e-6)


def test_csv_round_trip_exact():
    cfg = SolverConfig(p=2, eps1=1e-6, eps2=1e-6)
    rows = [run_single(name, cfg)[1] for name in ("quadratic", "trigpoly")]
    # a row with no known bound must round-trip through the empty field
    rows.append(
        RunRow(
            problem="mystery",
            p=3,
            eps1=1e-5,
            eps2=1e-3,
            criticality_order=1,
            k_total=12,
            k_succ=10,
            k_unsucc=2,
            f_evals=13,
            deriv_evals=11,
            final_f=-0.125,
            final_chi1=3.0517578125e-05,
            final_chi2=0.0,
            sigma_final=6.25e-2,
            theoretical_succ_bound=None,
            status="max-iterations",
        )
    )
    text = rows_to_csv(rows)
    back = rows_from_csv(text)
    assert back == rows


def test_csv_rejects_foreign_header():
    with pytest.raises(ValueError):
        rows_from_csv("a,b,c\n1,2,3\n")


def test_sweep_spec_validation():
    good = dict(problems=["quadratic"], p_values=[2], eps1_values=[1e-2, 1e-4])
    SweepSpec(**good)
    with pytest.raises(ValueError):
        SweepSpec(**{**good, "eps1_values": [1e-4, 1e-2]})  # must descend
    with pytest.raises(ValueError):
        SweepSpec(**{**good, "eps2_values": [0.0]})
    with pytest.raises(ValueError):
        SweepSpec(**{**good, "reps": 0})
    with pytest.raises(ValueError):
        SweepSpec(**{**good, "p_values": [1]})
    with pytest.raises(ValueError):
        SweepSpec(**{**good, "problems": []})


def test_sweep_shape_and_order():
    spec = SweepSpec(
        problems=["quadratic", "saddle"],
        p_values=[2],
        eps1_values=[1e-2, 1e-4],
        eps2_values=[1e-2],
        reps=2,
        seed=11,
    )
    rows = run_sweep(spec)
    assert len(rows) == 2 * 1 * 2 * 1 * 2
    assert [r.problem for r in rows[:4]] == ["quadratic"] * 4
    assert rows[0].eps1 == 1e-2 and rows[2].eps1 == 1e-4
    assert all(r.status == "converged" for r in rows)


def test_sweep_start_points_stable_per_rep():
    spec = SweepSpec(
        problems=["rosenbrock"],
        p_values=[2],
        eps1_values=[1e-2, 1e-3, 1e-4],
        reps=3,
        seed=5,
    )
    starts = sweep_start_points(spec, "rosenbrock", 2)
    assert len(starts) == 3
    np.testing.assert_array_equal(starts[0], get_problem("rosenbrock").default_x0)
    assert not np.array_equal(starts[1], starts[0])
    again = sweep_start_points(spec, "rosenbrock", 2)
    for a, b in zip(starts, again):
        np.testing.assert_array_equal(a, b)


def test_sweep_is_deterministic():
    spec = SweepSpec(
        problems=["trigpoly"],
        p_values=[2],
        eps1_values=[1e-2, 1e-3],
        eps2_values=[1e-2],
        reps=2,
        seed=7,
    )
    first = rows_to_csv(run_sweep(spec))
    second = rows_to_csv(run_sweep(spec))
    assert first == second


def test_sweep_unknown_problem():
    spec = SweepSpec(problems=["nope"], p_values=[2], eps1_values=[1e-2])
    with pytest.raises(ValueError):
        run_sweep(spec)


def test_fit_recovers_synthetic_exponent():
    eps = np.logspace(-2, -6, 9)
    k = np.round(7.0 * eps ** (-4.0 / 3.0))
    fit = fit_complexity_slope(eps, k)
    assert isinstance(fit, FitResult)
    assert not fit.degenerate
    assert fit.slope == pytest.approx(4.0 / 3.0, abs=0.02)
    assert fit.r_squared > 0.999
    assert fit.n_points == 9


def test_fit_flags_constant_counts():
    fit = fit_complexity_slope([1e-2, 1e-3, 1e-4], [5, 5, 5])
    assert fit.degenerate
    assert fit.slope == 0.0


def test_fit_needs_two_usable_points():
    fit = fit_complexity_slope([1e-2, 1e-3], [0, 0])
    assert fit.degenerate
    fit = fit_complexity_slope([1e-2, 1e-3, 1e-4], [0, 0, 7])
    assert fit.degenerate


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_complexity_slope([1e-2, 1e-3], [5])
    with pytest.raises(ValueError):
        fit_complexity_slope([1e-2, -1e-3], [5, 6])
