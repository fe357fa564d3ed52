"""HTTP front for the solver, the sweep harness, and the verifier.

The CLI talks to these endpoints through an in-process transport by
default, so the service is the single code path for every entry point;
running it under uvicorn just moves the same calls over a socket.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..bench import (
    SweepSpec,
    fit_complexity_slope,
    rows_to_csv,
    run_single,
    run_sweep,
)
from ..diagnostics import (
    InvariantReport,
    check_global_bounds,
    check_iteration_invariants,
    check_taylor_residuals,
)
from ..driver import SolverConfig
from ..problems import ProblemSpec, builtin_suite, get_problem
from .schemas import (
    FitRequest,
    FitResponse,
    HealthModel,
    ProblemInfoModel,
    RunRowModel,
    SolveRequest,
    SolveResponse,
    SweepRequest,
    SweepResponse,
    TraceRecordModel,
    VerificationModel,
    VerifyRequest,
    VerifyResponse,
)


def _problem_or_404(name: str) -> ProblemSpec:
    try:
        return get_problem(name)
    except ValueError as exc:
        raise HTTPException(status_code=404, detail=str(exc))


def _x0_or_400(problem: ProblemSpec, x0: list[float] | None) -> np.ndarray | None:
    if x0 is None:
        return None
    if len(x0) != problem.dim:
        raise HTTPException(
            status_code=400,
            detail=f"x0 has {len(x0)} entries, problem {problem.name!r} needs {problem.dim}",
        )
    return np.asarray(x0, dtype=float)


def _config_or_422(**kwargs) -> SolverConfig:
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


def create_app() -> FastAPI:
    app = FastAPI(title="arpbench", version=__version__)

    @app.get("/health", response_model=HealthModel)
    def health() -> HealthModel:
        return HealthModel(status="ok", version=__version__)

    @app.get("/problems", response_model=list[ProblemInfoModel])
    def problems() -> list[ProblemInfoModel]:
        out = []
        for name in builtin_suite():
            problem = get_problem(name)
            constants = problem.constants
            out.append(
                ProblemInfoModel(
                    name=name,
                    dim=problem.dim,
                    max_order=problem.max_order,
                    default_x0=list(problem.default_x0),
                    box=problem.box,
                    f_low=constants.f_low if constants else None,
                    lipschitz=(
                        dict(constants.lipschitz_L)
                        if constants and constants.lipschitz_L is not None
                        else None
                    ),
                )
            )
        return out

    @app.post("/solve", response_model=SolveResponse)
    def solve_endpoint(req: SolveRequest) -> SolveResponse:
        problem = _problem_or_404(req.problem)
        config = _config_or_422(
            p=req.p,
            eps1=req.eps1,
            eps2=req.eps2,
            criticality_order=req.criticality_order,
            theta=req.theta,
            sigma0=req.sigma0,
            sigma_min=req.sigma_min,
            eta1=req.eta1,
            eta2=req.eta2,
            gamma1=req.gamma1,
            gamma2=req.gamma2,
            gamma3=req.gamma3,
            max_outer_iterations=req.max_outer_iterations,
            max_inner_iterations=req.max_inner_iterations,
            tr_radius_init=req.tr_radius_init,
        )
        x0 = _x0_or_400(problem, req.x0)
        trace, row = run_single(problem, config, x0, verified=req.verify)
        verification = None
        if req.verify:
            report = InvariantReport.merged(
                f"run-verification {problem.name}",
                [
                    check_iteration_invariants(trace, problem),
                    check_global_bounds(trace, problem),
                ],
            )
            verification = VerificationModel.from_report(report)
        trace_model = None
        if req.include_trace:
            trace_model = [TraceRecordModel.from_record(r) for r in trace.records]
        return SolveResponse(
            row=RunRowModel.from_row(row),
            final_x=list(trace.final_x),
            verification=verification,
            trace=trace_model,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep_endpoint(req: SweepRequest) -> SweepResponse:
        try:
            spec = SweepSpec(
                problems=tuple(req.problems),
                p_values=tuple(req.p_values),
                eps1_values=tuple(req.eps1_values),
                eps2_values=tuple(req.eps2_values),
                reps=req.reps,
                seed=req.seed,
                criticality_order=req.criticality_order,
            )
            rows = run_sweep(spec)
        except ValueError as exc:
            code = 404 if "unknown problem" in str(exc) else 422
            raise HTTPException(status_code=code, detail=str(exc))
        return SweepResponse(
            rows=[RunRowModel.from_row(r) for r in rows], csv=rows_to_csv(rows)
        )

    @app.post("/verify", response_model=VerifyResponse)
    def verify_endpoint(req: VerifyRequest) -> VerifyResponse:
        problem = _problem_or_404(req.problem)
        config = _config_or_422(
            p=req.p,
            eps1=req.eps1,
            eps2=req.eps2,
            criticality_order=req.criticality_order,
        )
        x0 = _x0_or_400(problem, req.x0)
        trace, row = run_single(problem, config, x0, verified=True)
        reports = []
        if problem.lipschitz(config.p) is not None:
            reports.append(
                check_taylor_residuals(problem, config.p, req.n_residual_samples)
            )
        reports.append(check_iteration_invariants(trace, problem))
        reports.append(check_global_bounds(trace, problem))
        merged = InvariantReport.merged(f"verification {problem.name}", reports)
        return VerifyResponse(
            row=RunRowModel.from_row(row),
            verification=VerificationModel.from_report(merged),
        )

    @app.post("/fit", response_model=FitResponse)
    def fit_endpoint(req: FitRequest) -> FitResponse:
        try:
            fit = fit_complexity_slope(req.eps_values, req.k_values)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return FitResponse(
            slope=fit.slope,
            intercept=fit.intercept,
            r_squared=fit.r_squared,
            n_points=fit.n_points,
            degenerate=fit.degenerate,
        )

    return app


app = create_app()
