"""Benchmark harness: single runs, tolerance sweeps, and slope fits.

A sweep runs the solver over a grid of tolerances and collects one `RunRow`
per run.  Rows serialize to CSV with full float precision (17 significant
digits), so a file written on one machine parses back to bit-identical rows
on another; determinism of the whole pipeline is part of the contract and
is tested, not hoped for.

The point of the exercise is the scaling law: counting successful
iterations against 1/eps on a log-log scale should produce a slope no worse
than the theoretical exponent.  `fit_complexity_slope` does that fit.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .diagnostics import success_bound, theory_constants
from .driver import SolverConfig, Trace, accept_and_update, solve
from .problems import ProblemSpec, get_problem

CSV_HEADER = (
    "problem,p,eps1,eps2,criticality_order,k_total,k_succ,k_unsucc,"
    "f_evals,deriv_evals,final_f,final_chi1,final_chi2,sigma_final,"
    "theoretical_succ_bound,status"
)


@dataclass(frozen=True)
class RunRow:
    problem: str
    p: int
    eps1: float
    eps2: float
    criticality_order: int
    k_total: int
    k_succ: int
    k_unsucc: int
    f_evals: int
    deriv_evals: int
    final_f: float
    final_chi1: float
    final_chi2: float
    sigma_final: float
    theoretical_succ_bound: int | None
    status: str


def _final_sigma(trace: Trace) -> float:
    if not trace.records:
        return trace.config.sigma0
    last = trace.records[-1]
    _, _, sigma_next = accept_and_update(
        last.f_value, last.f_trial, last.taylor_decrease, last.sigma, trace.config
    )
    return sigma_next


def _bound_for(trace: Trace, problem: ProblemSpec) -> int | None:
    cfg = trace.config
    L = problem.lipschitz(cfg.p)
    f_low = problem.constants.f_low if problem.constants is not None else None
    if L is None or f_low is None:
        return None
    consts = theory_constants(L, cfg)
    kappa_s = (
        1.0 / consts["kappa1"]
        if cfg.criticality_order == 1
        else consts["kappa_s"]
    )
    f0 = trace.records[0].f_value if trace.records else trace.final_f
    return success_bound(f0, f_low, cfg, kappa_s)


def row_from_trace(trace: Trace, problem: ProblemSpec) -> RunRow:
    return RunRow(
        problem=trace.problem_name,
        p=trace.config.p,
        eps1=trace.config.eps1,
        eps2=trace.config.eps2,
        criticality_order=trace.config.criticality_order,
        k_total=len(trace.records),
        k_succ=trace.successful_count,
        k_unsucc=trace.unsuccessful_count,
        f_evals=trace.f_evaluations,
        deriv_evals=trace.derivative_evaluations,
        final_f=trace.final_f,
        final_chi1=trace.final_criticality.chi1,
        final_chi2=trace.final_criticality.chi2,
        sigma_final=_final_sigma(trace),
        theoretical_succ_bound=_bound_for(trace, problem),
        status=trace.status,
    )


def run_single(
    problem: ProblemSpec | str,
    config: SolverConfig,
    x0: np.ndarray | None = None,
    verified: bool = False,
) -> tuple[Trace, RunRow]:
    if isinstance(problem, str):
        problem = get_problem(problem)
    trace = solve(problem, x0, config, verified=verified)
    return trace, row_from_trace(trace, problem)


def _check_grid(name: str, values) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if not values:
        raise ValueError(f"{name} must not be empty")
    if any(not v > 0.0 for v in values):
        raise ValueError(f"{name} must be strictly positive")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly descending")
    return values


@dataclass(frozen=True)
class SweepSpec:
    """Grid of runs: problems x model orders x tolerances x repetitions.

    Repetition 0 starts every run from the problem's stock starting point;
    later repetitions jitter it.  The jitter for a given (problem, p,
    repetition) does not depend on the tolerance grids, so runs down an
    eps axis share their starting point and the slope fit sees the pure
    tolerance effect.
    """

    problems: tuple[str, ...]
    p_values: tuple[int, ...]
    eps1_values: tuple[float, ...]
    eps2_values: tuple[float, ...] = (1e-3,)
    reps: int = 1
    seed: int = 0
    criticality_order: int = 2

    def __post_init__(self):
        object.__setattr__(self, "problems", tuple(self.problems))
        object.__setattr__(self, "p_values", tuple(int(p) for p in self.p_values))
        object.__setattr__(self, "eps1_values", _check_grid("eps1_values", self.eps1_values))
        object.__setattr__(self, "eps2_values", _check_grid("eps2_values", self.eps2_values))
        if not self.problems:
            raise ValueError("problems must not be empty")
        if not self.p_values or any(p < 2 for p in self.p_values):
            raise ValueError("p_values must all be at least 2")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.criticality_order not in (1, 2):
            raise ValueError("criticality_order must be 1 or 2")


def sweep_start_points(
    spec: SweepSpec, problem_name: str, p: int
) -> list[np.ndarray]:
    """Starting points for every repetition of one (problem, p) cell."""
    problem = get_problem(problem_name)
    starts = [np.array(problem.default_x0, dtype=float)]
    rng = np.random.default_rng(
        [spec.seed, zlib.crc32(problem_name.encode()), p]
    )
    for _ in range(1, spec.reps):
        starts.append(starts[0] + 0.1 * rng.standard_normal(problem.dim))
    return starts


def run_sweep(spec: SweepSpec, verified: bool = False) -> list[RunRow]:
    rows: list[RunRow] = []
    for name in spec.problems:
        problem = get_problem(name)
        for p in spec.p_values:
            starts = sweep_start_points(spec, name, p)
            for eps1 in spec.eps1_values:
                for eps2 in spec.eps2_values:
                    config = SolverConfig(
                        p=p,
                        eps1=eps1,
                        eps2=eps2,
                        criticality_order=spec.criticality_order,
                    )
                    for x0 in starts:
                        _, row = run_single(problem, config, x0, verified=verified)
                        rows.append(row)
    return rows


_FLOAT_FIELDS = ("eps1", "eps2", "final_f", "final_chi1", "final_chi2", "sigma_final")


def rows_to_csv(rows: list[RunRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        bound = "" if r.theoretical_succ_bound is None else str(r.theoretical_succ_bound)
        lines.append(
            ",".join(
                [
                    r.problem,
                    str(r.p),
                    f"{r.eps1:.17e}",
                    f"{r.eps2:.17e}",
                    str(r.criticality_order),
                    str(r.k_total),
                    str(r.k_succ),
                    str(r.k_unsucc),
                    str(r.f_evals),
                    str(r.deriv_evals),
                    f"{r.final_f:.17e}",
                    f"{r.final_chi1:.17e}",
                    f"{r.final_chi2:.17e}",
                    f"{r.sigma_final:.17e}",
                    bound,
                    r.status,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def rows_from_csv(text: str) -> list[RunRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unrecognized CSV header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 16:
            raise ValueError(f"malformed row: {ln!r}")
        rows.append(
            RunRow(
                problem=parts[0],
                p=int(parts[1]),
                eps1=float(parts[2]),
                eps2=float(parts[3]),
                criticality_order=int(parts[4]),
                k_total=int(parts[5]),
                k_succ=int(parts[6]),
                k_unsucc=int(parts[7]),
                f_evals=int(parts[8]),
                deriv_evals=int(parts[9]),
                final_f=float(parts[10]),
                final_chi1=float(parts[11]),
                final_chi2=float(parts[12]),
                sigma_final=float(parts[13]),
                theoretical_succ_bound=None if parts[14] == "" else int(parts[14]),
                status=parts[15],
            )
        )
    return rows


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    degenerate: bool


def fit_complexity_slope(eps_values, k_values) -> FitResult:
    """Least-squares slope of log(count) against log(1/eps).

    Runs that never iterated (count zero) carry no scaling information and
    are dropped; a fit is degenerate when fewer than two usable points
    remain or the counts do not vary at all.
    """
    eps = np.asarray(eps_values, dtype=float)
    k = np.asarray(k_values, dtype=float)
    if eps.shape != k.shape or eps.ndim != 1:
        raise ValueError("eps and count arrays must be 1-d and equally long")
    if np.any(eps <= 0.0):
        raise ValueError("eps values must be strictly positive")
    mask = k >= 1.0
    n = int(mask.sum())
    if n < 2:
        return FitResult(0.0, 0.0, 0.0, n, True)
    t = np.log(1.0 / eps[mask])
    y = np.log(k[mask])
    if np.all(y == y[0]) or np.unique(t).size < 2:
        return FitResult(0.0, float(np.mean(y)), 0.0, n, True)
    slope, intercept = np.polyfit(t, y, 1)
    residual = y - (slope * t + intercept)
    r2 = 1.0 - float(np.sum(residual**2)) / float(np.sum((y - np.mean(y)) ** 2))
    return FitResult(float(slope), float(intercept), r2, n, False)
