"""Inner minimization of the regularized Taylor model.

The inner problem never touches the objective: it works on the model alone
and must return a step s with strict model decrease whose model criticality
satisfies the theta-relative conditions

    chi_m1 <= theta |s|^p        and, at order 2,
    chi_m2 <= theta |s|^(p-1).

Strategy: first move off the origin along a guaranteed descent direction
(normalized steepest descent when the gradient is nonzero, otherwise the
leftmost Hessian eigenvector, sign-matched against the gradient) with a
halving line search on the model value.  From there, a dense trust-region
Newton iteration drives the model toward second-order stationarity, with
the subproblem solved nearly exactly through an eigendecomposition,
negative curvature and the hard case included.  The conditions are checked
after every accepted inner step and the first satisfying point is returned.

All tie-breaking is deterministic, and the trust-region subproblem is
normalized by a power-of-two scale so uniformly rescaled models retrace the
same float arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import ModelState, leftmost_eigenpair, model_eval

__all__ = [
    "InnerLimits",
    "InternalError",
    "Step",
    "SubsolverFailure",
    "escape_origin_step",
    "minimize_model",
]

_ACCEPT_RATIO = 0.1
_EXPAND_RATIO = 0.75
_SHRINK_FACTOR = 0.25


class InternalError(RuntimeError):
    """A precondition the caller was supposed to guarantee does not hold."""


class SubsolverFailure(RuntimeError):
    """Inner iteration budget exhausted before the step conditions held."""

    def __init__(self, message: str, best_s: np.ndarray, iterations: int):
        super().__init__(message)
        self.best_s = best_s
        self.iterations = iterations


@dataclass(frozen=True)
class InnerLimits:
    max_iterations: int = 500
    tr_radius_init: float = 1.0


@dataclass(frozen=True)
class Step:
    """Accepted inner step with the quantities the outer loop certifies."""

    s: np.ndarray
    model_value: float
    model_decrease: float
    chi_m1: float
    chi_m2: float
    inner_iterations: int


def escape_origin_step(
    state: ModelState, gradient_first: bool | None = None, max_backtracks: int = 60
) -> np.ndarray:
    """First strictly decreasing step away from s = 0.

    Tries alpha * d for alpha = 1, 1/2, 1/4, ... until the model value drops
    below m(0) = f.  The caller may force the direction choice; by default a
    nonzero gradient wins, otherwise the leftmost eigenvector is used.
    """
    g = state.grad
    gnorm = float(np.linalg.norm(g))
    if gradient_first is None:
        gradient_first = gnorm > 0.0
    if gradient_first:
        if gnorm == 0.0:
            raise InternalError("gradient direction requested but the gradient is zero")
        d = -g / gnorm
    else:
        _, v = leftmost_eigenpair(state.hess)
        d = -v if g @ v > 0.0 else v

    f0 = state.bundle.f
    alpha = 1.0
    for _ in range(max_backtracks):
        s = alpha * d
        if model_eval(state, s)[0] < f0:
            return s
        alpha *= 0.5
    raise InternalError(
        f"no model decrease along the escape direction after {max_backtracks} halvings"
    )


def _trust_region_step(
    grad: np.ndarray, eigvals: np.ndarray, eigvecs: np.ndarray, radius: float
) -> np.ndarray:
    """Near-exact solution of min g'd + d'Hd/2 subject to |d| <= radius.

    Works in the eigenbasis of H.  The boundary multiplier solves the
    secular equation 1/|d(lam)| = 1/radius by bracketed root finding; when
    the gradient has no mass on the leftmost eigenspace and the limiting
    step is interior (the hard case), the step is completed to the boundary
    along the sign-fixed leftmost eigenvector.
    """
    # Normalize by a power of two so uniformly scaled inputs take the exact
    # same float path (the solution d is invariant under g, H -> c g, c H).
    scale = max(float(np.max(np.abs(eigvals), initial=0.0)), float(np.linalg.norm(grad)))
    c = math.ldexp(1.0, math.frexp(scale)[1]) if scale > 0.0 else 1.0
    w = eigvals / c
    gbar = (eigvecs.T @ grad) / c
    lam0 = float(w[0])

    if lam0 > 0.0:
        d = -gbar / w
        if float(np.linalg.norm(d)) <= radius:
            return eigvecs @ d

    lo = max(0.0, -lam0)
    if lam0 <= 0.0:
        cluster = w <= lam0 + 1e-12 * max(1.0, abs(lam0), float(abs(w[-1])))
        if float(np.linalg.norm(gbar[cluster])) <= 1e-13 * max(1e-300, float(np.linalg.norm(gbar))):
            shifted = np.where(cluster, 1.0, w + lo)
            dhat = np.where(cluster, 0.0, -gbar / shifted)
            nd = float(np.linalg.norm(dhat))
            if nd < radius:
                tau = math.sqrt(radius * radius - nd * nd)
                q1 = eigvecs[:, 0]
                if q1[np.argmax(np.abs(q1))] < 0.0:
                    q1 = -q1
                return eigvecs @ dhat + tau * q1

    def coeffs(lam: float) -> np.ndarray:
        denom = w + lam
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d = np.where(gbar == 0.0, 0.0, -gbar / denom)
        return d

    def phi(lam: float) -> float:
        n = float(np.linalg.norm(coeffs(lam)))
        if n == 0.0:
            return 1.0 / radius  # zero step: strictly interior
        if not np.isfinite(n):
            return -1.0 / radius
        return 1.0 / n - 1.0 / radius

    a = lo
    if phi(a) >= 0.0:
        return eigvecs @ coeffs(a)
    # For lam >= lo + |gbar|/radius every denominator is at least
    # |gbar|/radius, so |d(lam)| <= radius and phi(lam) >= 0: a guaranteed
    # bracket endpoint that stays valid however small the radius has become.
    gn = float(np.linalg.norm(gbar))
    b = min(max(2.0 * lo, lo + 1.0, lo + gn / max(radius, 1e-300)), 1e300)
    for _ in range(60):
        if phi(b) >= 0.0:
            break
        b *= 2.0
    else:
        # Unreachable in exact arithmetic; fall back to the Cauchy point.
        step = -radius * gbar / max(gn, 1e-300)
        return eigvecs @ step
    lam = brentq(phi, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    return eigvecs @ coeffs(lam)


def minimize_model(
    state: ModelState,
    theta: float,
    criticality_order: int,
    limits: InnerLimits | None = None,
    gradient_first: bool | None = None,
) -> Step:
    """Find a step with strict model decrease and theta-relative criticality."""
    if criticality_order not in (1, 2):
        raise ValueError(f"criticality_order must be 1 or 2, got {criticality_order}")
    if not (np.isfinite(theta) and theta > 0.0):
        raise ValueError(f"theta must arrive positive and finite, got {theta}")
    if limits is None:
        limits = InnerLimits()

    p = state.p
    f0 = state.bundle.f
    s = escape_origin_step(state, gradient_first)
    val, grad, hess = model_eval(state, s)
    radius = limits.tr_radius_init
    used = 0
    eig_fresh = False
    w = q = None

    while True:
        if not eig_fresh:
            w, q = np.linalg.eigh(hess)
            eig_fresh = True
        chi1 = float(np.linalg.norm(grad))
        chi2 = max(0.0, -float(w[0]))
        ns = float(np.linalg.norm(s))
        if (
            val < f0
            and chi1 <= theta * ns**p
            and (criticality_order == 1 or chi2 <= theta * ns ** (p - 1))
        ):
            return Step(
                s=s,
                model_value=val,
                model_decrease=f0 - val,
                chi_m1=chi1,
                chi_m2=chi2,
                inner_iterations=used,
            )
        if used >= limits.max_iterations:
            raise SubsolverFailure(
                f"step conditions unmet after {used} inner iterations "
                f"(|grad m| = {chi1:.3e}, chi2 = {chi2:.3e}, |s| = {ns:.3e})",
                best_s=s,
                iterations=used,
            )
        used += 1
        d = _trust_region_step(grad, w, q, radius)
        nd = float(np.linalg.norm(d))
        if nd <= 1e-18 * max(1.0, ns):
            radius *= _SHRINK_FACTOR
            continue
        t_val, t_grad, t_hess = model_eval(state, s + d)
        predicted = -(grad @ d + 0.5 * d @ hess @ d)
        fres = 8.0 * np.finfo(float).eps * max(abs(val), abs(t_val), 1e-300)
        if 0.0 < predicted <= fres:
            # Predicted progress sits below the float resolution of the
            # model value, so the acceptance ratio is rounding noise.  Take
            # the step whenever it cannot raise the value beyond that same
            # noise; the gradient test at the top of the loop still decides
            # when we are done.
            if t_val < f0 and t_val <= val + fres:
                s, val, grad, hess = s + d, t_val, t_grad, t_hess
                eig_fresh = False
            else:
                radius *= _SHRINK_FACTOR
            continue
        ratio = (val - t_val) / predicted if predicted > 0.0 else -np.inf
        if ratio >= _ACCEPT_RATIO and t_val < val:
            s, val, grad, hess = s + d, t_val, t_grad, t_hess
            eig_fresh = False
        if ratio >= _EXPAND_RATIO and nd >= 0.99 * radius:
            radius *= 2.0
        elif ratio < 0.25:
            radius *= _SHRINK_FACTOR
