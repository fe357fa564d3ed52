"""The degree-p Taylor model and its norm-regularized companion.

For a derivative bundle at x the Taylor polynomial is

    T(s) = f + sum_{j=1..p} D_j[s]^j / j!

and the regularized model adds sigma/(p+1) |s|^(p+1).  The regularizer's
gradient is sigma |s|^(p-1) s and its Hessian

    sigma [ (p-1) |s|^(p-3) s s' + |s|^(p-1) I ],

which for p = 2 is undefined at s = 0; we adopt the zero matrix there (the
driver never needs curvature at the origin of an even-degree regularizer).
Criticality is measured by the gradient norm and by the negative part of
the leftmost Hessian eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np

from .problems import DerivativeBundle
from .sym_tensor import contract_power

__all__ = [
    "CriticalityPair",
    "ModelState",
    "leftmost_eigenpair",
    "model_criticality",
    "model_eval",
    "objective_criticality",
    "taylor_gradient",
    "taylor_hessian",
    "taylor_value",
]


@dataclass(eq=False)
class ModelState:
    """Derivative bundle plus regularization weight; frozen in spirit."""

    bundle: DerivativeBundle
    sigma: float
    p: int

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"p must be at least 2, got {self.p}")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if self.bundle.order != self.p:
            raise ValueError(
                f"bundle carries {self.bundle.order} derivative orders, model needs {self.p}"
            )

    @cached_property
    def dim(self) -> int:
        return self.bundle.x.size

    @cached_property
    def grad(self) -> np.ndarray:
        return self.bundle.gradient()

    @cached_property
    def hess(self) -> np.ndarray:
        return self.bundle.hessian()


@dataclass(frozen=True, eq=False)
class CriticalityPair:
    """First- and second-order criticality with the witnessing eigenpair."""

    chi1: float
    chi2: float
    leftmost_value: float
    leftmost_vector: np.ndarray


def _check_step(state: ModelState, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (state.dim,):
        raise ValueError(f"step shape {s.shape} does not match dim {state.dim}")
    if not np.all(np.isfinite(s)):
        raise ValueError("step must be finite")
    return s


def taylor_value(state: ModelState, s) -> float:
    s = _check_step(state, s)
    total = state.bundle.f
    for j, t in enumerate(state.bundle.tensors, start=1):
        total += contract_power(t, s, j) / factorial(j)
    return float(total)


def taylor_gradient(state: ModelState, s) -> np.ndarray:
    s = _check_step(state, s)
    total = state.grad + state.hess @ s
    for j in range(3, state.p + 1):
        t = state.bundle.tensors[j - 1]
        total = total + contract_power(t, s, j - 1) / factorial(j - 1)
    return total


def taylor_hessian(state: ModelState, s) -> np.ndarray:
    s = _check_step(state, s)
    total = state.hess
    for j in range(3, state.p + 1):
        t = state.bundle.tensors[j - 1]
        total = total + contract_power(t, s, j - 2) / factorial(j - 2)
    return total


def model_eval(state: ModelState, s) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient, and Hessian of the regularized model at s."""
    s = _check_step(state, s)
    p, sigma = state.p, state.sigma
    norm_s = float(np.linalg.norm(s))
    value = taylor_value(state, s) + sigma / (p + 1) * norm_s ** (p + 1)
    grad = taylor_gradient(state, s)
    hess = taylor_hessian(state, s)
    if norm_s > 0.0:
        grad = grad + sigma * norm_s ** (p - 1) * s
        hess = hess + sigma * (
            (p - 1) * norm_s ** (p - 3) * np.outer(s, s) + norm_s ** (p - 1) * np.eye(state.dim)
        )
    return value, grad, hess


def leftmost_eigenpair(h: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of a symmetric matrix with a sign-fixed unit vector.

    The returned vector's largest-magnitude component is made positive so
    repeated calls (and scaled inputs) pick the same representative.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"need a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix must be finite")
    if not np.array_equal(h, h.T):
        raise ValueError("matrix must be symmetric")
    values, vectors = np.linalg.eigh(h)
    vec = vectors[:, 0]
    if vec[np.argmax(np.abs(vec))] < 0.0:
        vec = -vec
    return float(values[0]), vec


def objective_criticality(bundle: DerivativeBundle) -> CriticalityPair:
    """chi1 = |grad f|, chi2 = max(0, -leftmost eigenvalue of the Hessian)."""
    chi1 = float(np.linalg.norm(bundle.gradient()))
    leftmost, vec = leftmost_eigenpair(bundle.hessian())
    return CriticalityPair(
        chi1=chi1, chi2=max(0.0, -leftmost), leftmost_value=leftmost, leftmost_vector=vec
    )


def model_criticality(state: ModelState, s) -> CriticalityPair:
    """Criticality of the regularized model at step s."""
    _, grad, hess = model_eval(state, s)
    chi1 = float(np.linalg.norm(grad))
    leftmost, vec = leftmost_eigenpair(hess)
    return CriticalityPair(
        chi1=chi1, chi2=max(0.0, -leftmost), leftmost_value=leftmost, leftmost_vector=vec
    )
