"""Replayable checks for everything the method promises.

Three layers, all reporting through the same `Check` record:

* `check_taylor_residuals` samples the objective and confirms that value,
  gradient and Hessian errors of the truncated expansion stay under the
  stated smoothness constants.
* `check_iteration_invariants` re-derives every per-iteration guarantee from
  a finished trace: step acceptance arithmetic, the subsolver's termination
  certificates, step-length lower bounds, and the bookkeeping consistency of
  the trace itself.  Tampering with any recorded field trips at least one
  check, which is what makes the trace trustworthy as a benchmark artifact.
* `check_global_bounds` evaluates the run-level ceilings: the regularization
  weight cap, the success-count bound and the total iteration count implied
  by it, and the minimum decrease extracted by each successful step.

A comparison passes when lhs <= rhs + tol * max(1, |lhs|, |rhs|, scale).
The additive form keeps checks with an exactly zero right-hand side honest:
polynomial test problems have zero residual constants, and a multiplicative
tolerance would reject harmless float dust there.  Checks whose inputs come
out of an eigensolve or SVD get the looser 1e-8 tolerance; pure arithmetic
replays use 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .driver import SolverConfig, Trace, accept_and_update
from .model import ModelState, model_criticality, taylor_gradient, taylor_hessian, taylor_value
from .problems import ProblemSpec, evaluate_bundle, sample_box

_TOL_EXACT = 1e-10
_TOL_EIG = 1e-8
_RESIDUAL_SEED = 894721063


@dataclass(frozen=True)
class Check:
    """One verified inequality: passes when lhs <= rhs up to tolerance."""

    name: str
    k: int | None
    lhs: float
    rhs: float
    scale: float = 1.0
    tol: float = _TOL_EXACT

    @property
    def margin(self) -> float:
        return self.tol * max(1.0, abs(self.lhs), abs(self.rhs), self.scale)

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.margin

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass
class InvariantReport:
    title: str
    checks: list[Check]
    aggregates: dict[str, float] = field(default_factory=dict)
    requires_L: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    @classmethod
    def merged(cls, title: str, reports: list["InvariantReport"]) -> "InvariantReport":
        out = cls(title=title, checks=[], aggregates={}, notes=[])
        for rep in reports:
            out.checks.extend(rep.checks)
            out.aggregates.update(rep.aggregates)
            out.notes.extend(rep.notes)
            out.requires_L = out.requires_L or rep.requires_L
        return out

    def to_text(self) -> str:
        lines = [f"== {self.title} =="]
        for key in sorted(self.aggregates):
            lines.append(f"  {key} = {self.aggregates[key]:.10e}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        by_name: dict[str, list[Check]] = {}
        for c in self.checks:
            by_name.setdefault(c.name, []).append(c)
        for name in sorted(by_name):
            group = by_name[name]
            failed = sum(1 for c in group if not c.passed)
            worst = min(group, key=lambda c: c.slack + c.margin)
            status = "ok" if failed == 0 else f"{failed} FAILED"
            lines.append(
                f"  {name}: {len(group)} checks, min slack {worst.slack:.3e}  [{status}]"
            )
        failures = self.failures()
        for c in failures[:20]:
            where = "" if c.k is None else f" at k={c.k}"
            lines.append(
                f"  FAIL {c.name}{where}: lhs={c.lhs!r} rhs={c.rhs!r} margin={c.margin:.3e}"
            )
        if len(failures) > 20:
            lines.append(f"  ... and {len(failures) - 20} more failures")
        if not self.checks:
            lines.append("  no checks ran")
        elif failures:
            lines.append(f"{len(failures)} of {len(self.checks)} checks FAILED")
        else:
            lines.append(f"all checks passed ({len(self.checks)})")
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = ["name,k,lhs,rhs,slack,pass"]
        for c in self.checks:
            k = "" if c.k is None else str(c.k)
            ok = "true" if c.passed else "false"
            rows.append(f"{c.name},{k},{c.lhs!r},{c.rhs!r},{c.slack!r},{ok}")
        return "\n".join(rows) + "\n"


def theory_constants(L: float, config: SolverConfig) -> dict[str, float]:
    """Complexity constants implied by a smoothness level L and a config.

    `kappa1` / `kappa2` convert first- and second-order criticality at an
    accepted trial point into a guaranteed objective decrease; `kappa_s`
    is the worse of their reciprocals and prices a whole run.
    """
    p = config.p
    sigma_max = max(
        config.sigma0,
        config.gamma3 * L * (p + 1) / (p * (1.0 - config.eta2)),
    )
    e1 = (p + 1) / p
    e2 = (p + 1) / (p - 1)
    front = config.eta1 * config.sigma_min / (p + 1)
    kappa1 = front * (L + config.theta + sigma_max) ** (-e1)
    kappa2 = front * ((p - 1) * L + config.theta + p * sigma_max) ** (-e2)
    return {
        "L": L,
        "sigma_max": sigma_max,
        "kappa1": kappa1,
        "kappa2": kappa2,
        "kappa_s": max(1.0 / kappa1, 1.0 / kappa2),
    }


def success_bound(
    f0: float, f_low: float, config: SolverConfig, kappa_s: float
) -> int:
    """Ceiling on successful iterations for a run starting at value f0."""
    p = config.p
    gap = max(0.0, f0 - f_low)
    mx = config.eps1 ** (-(p + 1) / p)
    if config.criticality_order == 2:
        mx = max(mx, config.eps2 ** (-(p + 1) / (p - 1)))
    return math.floor(kappa_s * gap * mx) + 1


def iteration_bound(
    n_successful: float, config: SolverConfig, sigma_max: float
) -> float:
    """Ceiling on total iterations given a number of successful ones.

    Every increase of the regularization weight is eventually paid back by
    the decreases on successful steps, which caps how many rejections can
    happen per success.
    """
    ratio = 1.0 + abs(math.log(config.gamma1)) / math.log(config.gamma2)
    drift = math.log(sigma_max / config.sigma0) / math.log(config.gamma2)
    return n_successful * ratio + drift


def check_taylor_residuals(
    problem: ProblemSpec,
    p: int,
    n_samples: int = 30,
    rng: np.random.Generator | None = None,
) -> InvariantReport:
    """Sampled residual bounds for the order-p expansion of `problem`.

    Points stay well inside the problem's box and displacements are kept
    short so that the stated constants apply along the whole segment.
    """
    L = problem.lipschitz(p)
    if L is None:
        raise ValueError(
            f"problem {problem.name!r} declares no smoothness constant for order {p}"
        )
    rng = rng or np.random.default_rng(_RESIDUAL_SEED)
    xs = sample_box(problem, n_samples, rng) * 0.8
    checks: list[Check] = []
    for i in range(n_samples):
        x = xs[i]
        direction = rng.normal(size=problem.dim)
        direction /= np.linalg.norm(direction)
        radius = 0.5 * 10.0 ** rng.uniform(-2.0, 0.0)
        s = radius * direction

        bundle = evaluate_bundle(problem, x, p)
        state = ModelState(bundle=bundle, sigma=1.0, p=p)
        trial = evaluate_bundle(problem, x + s, 2)

        t_val = taylor_value(state, s)
        checks.append(
            Check(
                "value-residual",
                i,
                float(trial.f - t_val),
                L / p * radius ** (p + 1),
                scale=max(1.0, abs(trial.f), abs(t_val)),
            )
        )
        grad_err = float(np.linalg.norm(trial.gradient() - taylor_gradient(state, s)))
        checks.append(
            Check(
                "gradient-residual",
                i,
                grad_err,
                L * radius**p,
                scale=max(1.0, float(np.linalg.norm(trial.gradient()))),
            )
        )
        hess_err = float(np.linalg.norm(trial.hessian() - taylor_hessian(state, s), 2))
        checks.append(
            Check(
                "hessian-residual",
                i,
                hess_err,
                (p - 1) * L * radius ** (p - 1),
                scale=max(1.0, float(np.linalg.norm(trial.hessian()))),
                tol=_TOL_EIG,
            )
        )
    return InvariantReport(
        title=f"taylor-residuals {problem.name} p={p}",
        checks=checks,
        aggregates={"L": L},
    )


def check_iteration_invariants(
    trace: Trace,
    problem: ProblemSpec,
    config: SolverConfig | None = None,
) -> InvariantReport:
    """Re-derive every per-iteration guarantee recorded in `trace`.

    Each record is replayed from scratch: derivatives are re-evaluated at
    its point, the model is rebuilt, and the recorded numbers must agree.
    Criticality values at trial points are checked where the trace has them
    (always in verified runs) and skipped where it does not.
    """
    cfg = config or trace.config
    p = cfg.p
    L = problem.lipschitz(p)
    checks: list[Check] = []
    notes: list[str] = []
    if L is None and trace.records:
        notes.append("no smoothness constant: step-length lower bounds skipped")

    records = trace.records
    for r in records:
        s = r.step.s
        norm_s = float(np.linalg.norm(s))
        bundle = evaluate_bundle(problem, r.x, p)
        state = ModelState(bundle=bundle, sigma=r.sigma, p=p)

        checks.append(
            Check(
                "f-value-consistency",
                r.k,
                abs(bundle.f - r.f_value),
                0.0,
                scale=max(1.0, abs(bundle.f)),
            )
        )
        f_trial = evaluate_bundle(problem, r.x + s, 0).f
        checks.append(
            Check(
                "f-trial-consistency",
                r.k,
                abs(f_trial - r.f_trial),
                0.0,
                scale=max(1.0, abs(f_trial)),
            )
        )

        taylor_decrease = float(bundle.f - taylor_value(state, s))
        checks.append(
            Check(
                "taylor-decrease-consistency",
                r.k,
                abs(taylor_decrease - r.taylor_decrease),
                0.0,
                scale=max(1.0, abs(taylor_decrease)),
            )
        )
        regularizer = r.sigma / (p + 1) * norm_s ** (p + 1)
        checks.append(
            Check(
                "model-descent",
                r.k,
                regularizer,
                taylor_decrease,
                scale=max(1.0, abs(bundle.f)),
            )
        )

        pair = model_criticality(state, s)
        checks.append(
            Check(
                "model-chi1-consistency",
                r.k,
                abs(pair.chi1 - r.step.chi_m1),
                0.0,
                scale=max(1.0, pair.chi1),
            )
        )
        checks.append(
            Check("model-grad-termination", r.k, pair.chi1, cfg.theta * norm_s**p)
        )
        if cfg.criticality_order == 2 and not math.isnan(r.step.chi_m2):
            checks.append(
                Check(
                    "model-chi2-consistency",
                    r.k,
                    abs(pair.chi2 - r.step.chi_m2),
                    0.0,
                    scale=max(1.0, pair.chi2),
                    tol=_TOL_EIG,
                )
            )
            checks.append(
                Check(
                    "model-hess-termination",
                    r.k,
                    pair.chi2,
                    cfg.theta * norm_s ** (p - 1),
                    tol=_TOL_EIG,
                )
            )

        # The step-length floors are only invoked, and only measurable, while
        # the trailing criticality still exceeds its tolerance; below it the
        # true gradient drowns in evaluation round-off.
        if L is not None and math.isfinite(r.chi_f1_next) and r.chi_f1_next > cfg.eps1:
            checks.append(
                Check(
                    "step-vs-grad",
                    r.k,
                    (r.chi_f1_next / (L + cfg.theta + r.sigma)) ** (1.0 / p),
                    norm_s,
                )
            )
        if (
            L is not None
            and cfg.criticality_order == 2
            and math.isfinite(r.chi_f2_next)
            and r.chi_f2_next > cfg.eps2
        ):
            denom = (p - 1) * L + cfg.theta + p * r.sigma
            checks.append(
                Check(
                    "step-vs-hess",
                    r.k,
                    (r.chi_f2_next / denom) ** (1.0 / (p - 1)),
                    norm_s,
                    tol=_TOL_EIG,
                )
            )

        if r.successful:
            checks.append(
                Check(
                    "success-decrease",
                    r.k,
                    cfg.eta1 * cfg.sigma_min / (p + 1) * norm_s ** (p + 1),
                    r.f_value - r.f_trial,
                    scale=max(1.0, abs(r.f_value)),
                )
            )

        rho_replay = (r.f_value - r.f_trial) / r.taylor_decrease
        checks.append(
            Check(
                "rho-consistency",
                r.k,
                abs(rho_replay - r.rho),
                0.0,
                scale=max(1.0, abs(r.rho)),
            )
        )
        _, successful_replay, sigma_next = accept_and_update(
            r.f_value, r.f_trial, r.taylor_decrease, r.sigma, cfg
        )
        checks.append(
            Check(
                "acceptance-flag",
                r.k,
                0.0 if successful_replay == r.successful else 1.0,
                0.0,
            )
        )
        nxt = records[r.k + 1] if r.k + 1 < len(records) else None
        if nxt is not None:
            checks.append(
                Check(
                    "sigma-update-rule",
                    r.k,
                    abs(nxt.sigma - sigma_next),
                    0.0,
                    scale=max(1.0, sigma_next),
                )
            )
            expected_x = r.x + s if r.successful else r.x
            checks.append(
                Check(
                    "position-update",
                    r.k,
                    float(np.max(np.abs(nxt.x - expected_x))),
                    0.0,
                    scale=max(1.0, float(np.max(np.abs(expected_x)))),
                )
            )

    if records:
        checks.append(
            Check("sigma-init", 0, abs(records[0].sigma - cfg.sigma0), 0.0)
        )

    return InvariantReport(
        title=f"iteration-invariants {trace.problem_name}",
        checks=checks,
        requires_L=L is None,
        notes=notes,
    )


def check_global_bounds(
    trace: Trace,
    problem: ProblemSpec,
    config: SolverConfig | None = None,
) -> InvariantReport:
    """Run-level ceilings: regularization cap, iteration counts, decreases."""
    cfg = config or trace.config
    p = cfg.p
    L = problem.lipschitz(p)
    f_low = problem.constants.f_low if problem.constants is not None else None
    title = f"global-bounds {trace.problem_name}"
    if L is None:
        return InvariantReport(
            title=title,
            checks=[],
            requires_L=True,
            notes=["no smoothness constant for this order: all bounds skipped"],
        )

    consts = theory_constants(L, cfg)
    aggregates = dict(consts)
    checks: list[Check] = []
    notes: list[str] = []
    records = trace.records
    n_succ = trace.successful_count

    if records:
        checks.append(
            Check(
                "sigma-cap",
                None,
                max(r.sigma for r in records),
                consts["sigma_max"],
            )
        )
        checks.append(
            Check(
                "iteration-count",
                None,
                float(len(records)),
                iteration_bound(n_succ, cfg, consts["sigma_max"]),
            )
        )

    if cfg.criticality_order == 1:
        kappa_s = 1.0 / consts["kappa1"]
    else:
        kappa_s = consts["kappa_s"]

    if f_low is None:
        notes.append("no lower bound on f: success-count bound skipped")
        return InvariantReport(
            title=title,
            checks=checks,
            aggregates=aggregates,
            requires_L=True,
            notes=notes,
        )

    f0 = records[0].f_value if records else trace.final_f
    bound = success_bound(f0, f_low, cfg, kappa_s)
    aggregates["success_bound"] = float(bound)
    aggregates["total_bound"] = iteration_bound(bound, cfg, consts["sigma_max"])
    checks.append(Check("success-count", None, float(n_succ), float(bound)))
    if records:
        checks.append(
            Check(
                "total-count", None, float(len(records)), aggregates["total_bound"]
            )
        )

    e1 = (p + 1) / p
    e2 = (p + 1) / (p - 1)
    successes = [r for r in records if r.successful]
    for r in successes[:-1]:
        # every success before the last one moved to a point that still
        # failed the stopping rule, so at least one criticality measure was
        # large there and the step must have extracted the matching decrease
        if math.isfinite(r.chi_f1_next) and r.chi_f1_next > cfg.eps1:
            required = consts["kappa1"] * cfg.eps1**e1
        elif (
            cfg.criticality_order == 2
            and math.isfinite(r.chi_f2_next)
            and r.chi_f2_next > cfg.eps2
        ):
            required = consts["kappa2"] * cfg.eps2**e2
        else:
            continue
        checks.append(
            Check(
                "success-decrease-bound",
                r.k,
                required,
                r.f_value - r.f_trial,
                scale=max(1.0, abs(r.f_value)),
            )
        )

    return InvariantReport(
        title=title, checks=checks, aggregates=aggregates, notes=notes
    )
