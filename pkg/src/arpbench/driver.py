"""Outer regularization loop.

One iteration: build the regularized Taylor model at the current point, ask the
subsolver for an approximate minimizer, price the step by the ratio of actual
to Taylor-predicted decrease, then move and re-derive or stay and raise the
regularization weight.  Everything the run did is kept in a `Trace` so that the
invariant checks can replay each step afterwards without rerunning the solver.

Oracle accounting is the whole point of the benchmark, so the rules are strict:
every iteration costs exactly one objective value (at the trial point), and
every *accepted* point costs one derivative bundle.  The extra probes made in
verified mode are bookkeeping only and never touch the counters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    CriticalityPair,
    ModelState,
    leftmost_eigenpair,
    objective_criticality,
    taylor_value,
)
from .problems import DerivativeBundle, ProblemSpec, evaluate_bundle
from .subsolver import InnerLimits, InternalError, Step, SubsolverFailure, minimize_model

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERATIONS = "max-iterations"
STATUS_SUBSOLVER_FAILURE = "subsolver-failure"


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.  Constructed once, treated as immutable everywhere."""

    p: int = 2
    eps1: float = 1e-6
    eps2: float = 1e-6
    criticality_order: int = 2
    theta: float = 100.0
    sigma0: float = 1.0
    sigma_min: float = 1e-8
    eta1: float = 0.1
    eta2: float = 0.9
    gamma1: float = 0.5
    gamma2: float = 2.0
    gamma3: float = 10.0
    max_outer_iterations: int = 100_000
    max_inner_iterations: int = 500
    tr_radius_init: float = 1.0

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("model order p must be at least 2")
        if not (self.eps1 > 0.0 and self.eps2 > 0.0):
            raise ValueError("tolerances must be positive")
        if self.criticality_order not in (1, 2):
            raise ValueError("criticality_order must be 1 or 2")
        if not self.theta > 0.0:
            raise ValueError("theta must be positive")
        if not 0.0 < self.sigma_min <= self.sigma0:
            raise ValueError("need 0 < sigma_min <= sigma0")
        if not 0.0 < self.eta1 <= self.eta2 < 1.0:
            raise ValueError("need 0 < eta1 <= eta2 < 1")
        if not 0.0 < self.gamma1 < 1.0 < self.gamma2 < self.gamma3:
            raise ValueError("need 0 < gamma1 < 1 < gamma2 < gamma3")
        if self.max_outer_iterations < 1 or self.max_inner_iterations < 1:
            raise ValueError("iteration budgets must be at least 1")
        if not self.tr_radius_init > 0.0:
            raise ValueError("tr_radius_init must be positive")

    def inner_limits(self) -> InnerLimits:
        return InnerLimits(
            max_iterations=self.max_inner_iterations,
            tr_radius_init=self.tr_radius_init,
        )


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """Everything iteration k did, sufficient to replay its bookkeeping.

    `chi_f1_next` and `chi_f2_next` measure criticality at the trial point
    x_k + s_k.  They are NaN whenever the run had no derivative information
    there: in a plain run that is every unsuccessful iteration, and the
    second-order value additionally waits for an eigensolve that only runs
    near termination.  Verified runs fill all four in.
    """

    k: int
    x: np.ndarray
    sigma: float
    step: Step
    rho: float
    successful: bool
    f_value: float
    f_trial: float
    taylor_decrease: float
    chi_f1_next: float
    chi_f2_next: float


@dataclass(eq=False)
class Trace:
    records: list[IterationRecord]
    f_evaluations: int
    derivative_evaluations: int
    status: str
    final_x: np.ndarray
    final_f: float
    final_criticality: CriticalityPair
    problem_name: str
    config: SolverConfig
    verified: bool = False

    @property
    def successful_count(self) -> int:
        return sum(1 for r in self.records if r.successful)

    @property
    def unsuccessful_count(self) -> int:
        return len(self.records) - self.successful_count


def accept_and_update(
    f_current: float,
    f_trial: float,
    taylor_decrease: float,
    sigma: float,
    config: SolverConfig,
) -> tuple[float, bool, float]:
    """Price a trial step and return (rho, successful, next sigma).

    The subsolver guarantees a strictly positive Taylor decrease, so a
    non-positive denominator here means the caller fed us a broken step.
    """
    if not taylor_decrease > 0.0:
        raise InternalError("step predicted no Taylor decrease")
    rho = (f_current - f_trial) / taylor_decrease
    if rho >= config.eta2:
        return rho, True, max(config.sigma_min, config.gamma1 * sigma)
    if rho >= config.eta1:
        return rho, True, sigma
    return rho, False, config.gamma2 * sigma


def _chi2_of(bundle: DerivativeBundle) -> float:
    value, _ = leftmost_eigenpair(bundle.hessian())
    return max(0.0, -value)


def termination_check(
    bundle: DerivativeBundle,
    config: SolverConfig,
    compute_chi2: bool = False,
) -> tuple[bool, float, float]:
    """Test the stopping rule at a point, returning (done, chi1, chi2).

    chi1 is compared against eps1 first; the eigensolve behind chi2 only runs
    when that test passes (or when `compute_chi2` forces it, as verified mode
    does).  A skipped chi2 comes back as NaN.
    """
    chi1 = float(np.linalg.norm(bundle.gradient()))
    chi2 = math.nan
    needs_chi2 = config.criticality_order == 2 and chi1 <= config.eps1
    if needs_chi2 or compute_chi2:
        chi2 = _chi2_of(bundle)
    done = chi1 <= config.eps1 and (
        config.criticality_order == 1 or chi2 <= config.eps2
    )
    return done, chi1, chi2


def solve(
    problem: ProblemSpec,
    x0: np.ndarray | None = None,
    config: SolverConfig | None = None,
    verified: bool = False,
) -> Trace:
    """Minimize `problem` from `x0` until the criticality test passes.

    With `verified=True` the trial point of every iteration gets an extra
    (uncounted) low-order probe so the trace carries enough data for a full
    invariant replay; the iterates themselves are bit-identical either way.
    """
    config = config or SolverConfig()
    if config.p > problem.max_order:
        raise ValueError(
            f"problem {problem.name!r} provides derivatives up to order "
            f"{problem.max_order}, model needs {config.p}"
        )
    x = np.array(problem.default_x0 if x0 is None else x0, dtype=float)
    if x.shape != (problem.dim,):
        raise ValueError(f"x0 must have shape ({problem.dim},)")

    limits = config.inner_limits()
    bundle = evaluate_bundle(problem, x, config.p)
    derivative_evaluations = 1
    sigma = config.sigma0
    records: list[IterationRecord] = []
    status = STATUS_MAX_ITERATIONS

    while True:
        done, chi1, _ = termination_check(bundle, config, compute_chi2=verified)
        if done:
            status = STATUS_CONVERGED
            break
        if len(records) >= config.max_outer_iterations:
            break

        state = ModelState(bundle=bundle, sigma=sigma, p=config.p)
        try:
            step = minimize_model(
                state,
                theta=config.theta,
                criticality_order=config.criticality_order,
                limits=limits,
                gradient_first=chi1 > config.eps1,
            )
        except SubsolverFailure:
            status = STATUS_SUBSOLVER_FAILURE
            break

        trial_x = x + step.s
        f_trial = evaluate_bundle(problem, trial_x, 0).f
        # the acceptance ratio prices the step against the bare Taylor
        # decrease, without the regularization term the subsolver minimized
        taylor_decrease = float(bundle.f - taylor_value(state, step.s))
        rho, successful, sigma_next = accept_and_update(
            bundle.f, f_trial, taylor_decrease, sigma, config
        )

        chi_f1_next = math.nan
        chi_f2_next = math.nan
        if successful:
            next_bundle = evaluate_bundle(problem, trial_x, config.p)
            derivative_evaluations += 1
            chi_f1_next = float(np.linalg.norm(next_bundle.gradient()))
            needs_eig = config.criticality_order == 2 and chi_f1_next <= config.eps1
            if verified or needs_eig:
                chi_f2_next = _chi2_of(next_bundle)
        elif verified:
            probe = evaluate_bundle(problem, trial_x, 2)  # not counted
            chi_f1_next = float(np.linalg.norm(probe.gradient()))
            chi_f2_next = _chi2_of(probe)

        records.append(
            IterationRecord(
                k=len(records),
                x=x.copy(),
                sigma=sigma,
                step=step,
                rho=rho,
                successful=successful,
                f_value=bundle.f,
                f_trial=f_trial,
                taylor_decrease=taylor_decrease,
                chi_f1_next=chi_f1_next,
                chi_f2_next=chi_f2_next,
            )
        )
        sigma = sigma_next
        if successful:
            x = trial_x
            bundle = next_bundle

    return Trace(
        records=records,
        f_evaluations=1 + len(records),
        derivative_evaluations=derivative_evaluations,
        status=status,
        final_x=x,
        final_f=bundle.f,
        final_criticality=objective_criticality(bundle),
        problem_name=problem.name,
        config=config,
        verified=verified,
    )
