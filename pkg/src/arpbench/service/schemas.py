"""Request and response bodies for the HTTP wrapper.

JSON cannot carry NaN, so every optionally-unknown float crosses the wire
as null; `_none_if_nan` does the conversion on the way out and consumers
treat null as "the run never computed this".
"""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, Field

from ..bench import RunRow


def _none_if_nan(value: float) -> float | None:
    return None if math.isnan(value) else value


class SolveRequest(BaseModel):
    problem: str
    x0: list[float] | None = None
    p: int = Field(default=2, ge=2)
    eps1: float = Field(default=1e-6, gt=0.0)
    eps2: float = Field(default=1e-6, gt=0.0)
    criticality_order: Literal[1, 2] = 2
    theta: float = Field(default=100.0, gt=0.0)
    sigma0: float = Field(default=1.0, gt=0.0)
    sigma_min: float = Field(default=1e-8, gt=0.0)
    eta1: float = 0.1
    eta2: float = 0.9
    gamma1: float = 0.5
    gamma2: float = 2.0
    gamma3: float = 10.0
    max_outer_iterations: int = Field(default=100_000, ge=1)
    max_inner_iterations: int = Field(default=500, ge=1)
    tr_radius_init: float = Field(default=1.0, gt=0.0)
    verify: bool = False
    include_trace: bool = False


class RunRowModel(BaseModel):
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

    @classmethod
    def from_row(cls, row: RunRow) -> "RunRowModel":
        return cls(**row.__dict__)

    def to_run_row(self) -> RunRow:
        return RunRow(**self.model_dump())


class TraceRecordModel(BaseModel):
    k: int
    x: list[float]
    sigma: float
    s: list[float]
    inner_iterations: int
    rho: float
    successful: bool
    f_value: float
    f_trial: float
    taylor_decrease: float
    model_decrease: float
    chi_m1: float
    chi_m2: float | None
    chi_f1_next: float | None
    chi_f2_next: float | None

    @classmethod
    def from_record(cls, record) -> "TraceRecordModel":
        return cls(
            k=record.k,
            x=list(record.x),
            sigma=record.sigma,
            s=list(record.step.s),
            inner_iterations=record.step.inner_iterations,
            rho=record.rho,
            successful=record.successful,
            f_value=record.f_value,
            f_trial=record.f_trial,
            taylor_decrease=record.taylor_decrease,
            model_decrease=record.step.model_decrease,
            chi_m1=record.step.chi_m1,
            chi_m2=_none_if_nan(record.step.chi_m2),
            chi_f1_next=_none_if_nan(record.chi_f1_next),
            chi_f2_next=_none_if_nan(record.chi_f2_next),
        )


class CheckModel(BaseModel):
    name: str
    k: int | None
    lhs: float
    rhs: float
    slack: float
    passed: bool


class VerificationModel(BaseModel):
    all_passed: bool
    n_checks: int
    n_failed: int
    failures: list[CheckModel]
    aggregates: dict[str, float]
    requires_L: bool
    notes: list[str]
    report_text: str
    report_csv: str

    @classmethod
    def from_report(cls, report, max_failures: int = 50) -> "VerificationModel":
        failures = [
            CheckModel(
                name=c.name, k=c.k, lhs=c.lhs, rhs=c.rhs, slack=c.slack, passed=False
            )
            for c in report.failures()[:max_failures]
        ]
        return cls(
            all_passed=report.all_passed,
            n_checks=len(report.checks),
            n_failed=len(report.failures()),
            failures=failures,
            aggregates=report.aggregates,
            requires_L=report.requires_L,
            notes=report.notes,
            report_text=report.to_text(),
            report_csv=report.to_csv(),
        )


class SolveResponse(BaseModel):
    row: RunRowModel
    final_x: list[float]
    verification: VerificationModel | None = None
    trace: list[TraceRecordModel] | None = None


class SweepRequest(BaseModel):
    problems: list[str]
    p_values: list[int] = [2]
    eps1_values: list[float]
    eps2_values: list[float] = [1e-3]
    reps: int = Field(default=1, ge=1)
    seed: int = 0
    criticality_order: Literal[1, 2] = 2


class SweepResponse(BaseModel):
    rows: list[RunRowModel]
    csv: str


class VerifyRequest(BaseModel):
    problem: str
    x0: list[float] | None = None
    p: int = Field(default=2, ge=2)
    eps1: float = Field(default=1e-6, gt=0.0)
    eps2: float = Field(default=1e-6, gt=0.0)
    criticality_order: Literal[1, 2] = 2
    n_residual_samples: int = Field(default=30, ge=1)


class VerifyResponse(BaseModel):
    row: RunRowModel
    verification: VerificationModel


class FitRequest(BaseModel):
    eps_values: list[float]
    k_values: list[float]


class FitResponse(BaseModel):
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    degenerate: bool


class ProblemInfoModel(BaseModel):
    name: str
    dim: int
    max_order: int
    default_x0: list[float]
    box: tuple[float, float]
    f_low: float | None
    lipschitz: dict[int, float] | None


class HealthModel(BaseModel):
    status: str
    version: str
