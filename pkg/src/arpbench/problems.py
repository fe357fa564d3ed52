"""Benchmark problems with hand-coded derivative tensors up to order four.

Each problem packages an evaluator returning the objective value together
with packed symmetric derivative tensors, plus whatever analytic constants
are available: a lower bound on f, per-order tensor Lipschitz constants in
the (p-1)! L convention (valid on the problem's sampling box), and known
critical points.  Derivatives are written out explicitly; a central finite
difference validator cross-checks every order against the one below it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Mapping

import numpy as np

from .sym_tensor import SymTensor, _multi_indices

__all__ = [
    "DerivativeBundle",
    "ProblemConstants",
    "ProblemSpec",
    "UnsupportedOrderError",
    "builtin_suite",
    "evaluate_bundle",
    "fd_validate",
    "get_problem",
    "sample_box",
]


class UnsupportedOrderError(ValueError):
    """Requested derivative order exceeds what the problem provides."""


@dataclass(frozen=True)
class DerivativeBundle:
    """Objective value and derivative tensors of orders 1..len(tensors) at x."""

    x: np.ndarray
    f: float
    tensors: tuple[SymTensor, ...]

    @property
    def order(self) -> int:
        return len(self.tensors)

    def gradient(self) -> np.ndarray:
        return self.tensors[0].as_vector()

    def hessian(self) -> np.ndarray:
        return self.tensors[1].as_matrix()


@dataclass(frozen=True)
class ProblemConstants:
    """Analytic facts about a problem; every field is optional."""

    lipschitz_L: Mapping[int, float] | None = None
    f_low: float | None = None
    known_minimizers: tuple = ()
    known_saddles: tuple = ()


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    max_order: int
    evaluator: Callable[[np.ndarray, int], DerivativeBundle]
    default_x0: np.ndarray
    constants: ProblemConstants | None = None
    box: tuple[float, float] = (-5.0, 5.0)

    def lipschitz(self, p: int) -> float | None:
        """Tensor Lipschitz constant for order p on the box, if known."""
        if self.constants is None or self.constants.lipschitz_L is None:
            return None
        return self.constants.lipschitz_L.get(p)


def evaluate_bundle(problem: ProblemSpec, x: np.ndarray, order: int) -> DerivativeBundle:
    """Evaluate f and derivatives 1..order at x (order 0 gives the value only)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise ValueError(f"{problem.name} has dim {problem.dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    if order < 0:
        raise ValueError(f"order must be nonnegative, got {order}")
    if order > problem.max_order:
        raise UnsupportedOrderError(
            f"{problem.name} provides derivatives up to order {problem.max_order}, "
            f"requested {order}"
        )
    return problem.evaluator(x, order)


def sample_box(problem: ProblemSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample points from the problem's box, one per row."""
    lo, hi = problem.box
    return rng.uniform(lo, hi, size=(count, problem.dim))


def fd_validate(problem: ProblemSpec, x: np.ndarray, order: int, h: float = 1e-4) -> float:
    """Central-difference check of each derivative order against the one below.

    Every packed entry of the order-j tensor is compared with the difference
    quotient of the corresponding order-(j-1) entry along the entry's last
    index.  Returns the worst relative discrepancy (floored at magnitude 1),
    so a corrupted derivative shows up as an O(1) value rather than noise.
    """
    if order < 1:
        raise ValueError("fd_validate needs order >= 1")
    x = np.asarray(x, dtype=float)
    base = evaluate_bundle(problem, x, order)
    plus, minus = [], []
    for i in range(problem.dim):
        e = np.zeros(problem.dim)
        e[i] = h
        plus.append(evaluate_bundle(problem, x + e, order - 1))
        minus.append(evaluate_bundle(problem, x - e, order - 1))

    worst = 0.0
    for j in range(1, order + 1):
        target = base.tensors[j - 1]
        indices, _ = _multi_indices(j, problem.dim)
        for m in indices:
            axis, head = m[-1], m[:-1]
            if j == 1:
                fd = (plus[axis].f - minus[axis].f) / (2.0 * h)
            else:
                fd = (plus[axis].tensors[j - 2][head] - minus[axis].tensors[j - 2][head]) / (
                    2.0 * h
                )
            a = target[m]
            worst = max(worst, abs(a - fd) / max(1.0, abs(a)))
    return worst


# ---------------------------------------------------------------------------
# problem construction helpers


def _diag_tensor(order: int, dim: int, diag: np.ndarray) -> SymTensor:
    _, pos = _multi_indices(order, dim)
    entries = np.zeros(comb(dim + order - 1, order))
    for i in range(dim):
        entries[pos[(i,) * order]] = diag[i]
    return SymTensor.from_entries(order, dim, entries)


def _separable_evaluator(derivs_1d: Callable[[np.ndarray], np.ndarray]):
    """Evaluator for f(x) = sum_i phi(x_i) given componentwise phi derivatives.

    `derivs_1d` maps the coordinate vector to a (5, dim) array whose rows are
    phi and its first four derivatives.  All derivative tensors are diagonal.
    """

    def evaluator(x: np.ndarray, order: int) -> DerivativeBundle:
        table = derivs_1d(x)
        dim = x.size
        tensors = []
        if order >= 1:
            tensors.append(SymTensor.from_entries(1, dim, table[1]))
        for j in range(2, order + 1):
            tensors.append(_diag_tensor(j, dim, table[j]))
        return DerivativeBundle(x=x, f=float(np.sum(table[0])), tensors=tuple(tensors))

    return evaluator


def _quadratic_evaluator(a: np.ndarray):
    def evaluator(x: np.ndarray, order: int) -> DerivativeBundle:
        dim = x.size
        tensors = []
        if order >= 1:
            tensors.append(SymTensor.from_entries(1, dim, a @ x))
        if order >= 2:
            _, pos = _multi_indices(2, dim)
            entries = np.empty(comb(dim + 1, 2))
            for m, r in pos.items():
                entries[r] = a[m]
            tensors.append(SymTensor.from_entries(2, dim, entries))
        for j in range(3, order + 1):
            tensors.append(SymTensor.from_entries(j, dim, np.zeros(comb(dim + j - 1, j))))
        return DerivativeBundle(x=x, f=float(0.5 * x @ a @ x), tensors=tuple(tensors))

    return evaluator


def _rosenbrock_evaluator(x: np.ndarray, order: int) -> DerivativeBundle:
    n = x.size
    head, tail = x[:-1], x[1:]
    gap = tail - head**2
    f = float(np.sum(100.0 * gap**2 + (1.0 - head) ** 2))
    tensors = []
    if order >= 1:
        g = np.zeros(n)
        g[:-1] += -400.0 * head * gap - 2.0 * (1.0 - head)
        g[1:] += 200.0 * gap
        tensors.append(SymTensor.from_entries(1, n, g))
    if order >= 2:
        _, pos = _multi_indices(2, n)
        entries = np.zeros(comb(n + 1, 2))
        for i in range(n - 1):
            entries[pos[(i, i)]] += -400.0 * x[i + 1] + 1200.0 * x[i] ** 2 + 2.0
            entries[pos[(i, i + 1)]] = -400.0 * x[i]
            entries[pos[(i + 1, i + 1)]] += 200.0
        tensors.append(SymTensor.from_entries(2, n, entries))
    if order >= 3:
        _, pos = _multi_indices(3, n)
        entries = np.zeros(comb(n + 2, 3))
        for i in range(n - 1):
            entries[pos[(i, i, i)]] = 2400.0 * x[i]
            entries[pos[(i, i, i + 1)]] = -400.0
        tensors.append(SymTensor.from_entries(3, n, entries))
    if order >= 4:
        _, pos = _multi_indices(4, n)
        entries = np.zeros(comb(n + 3, 4))
        for i in range(n - 1):
            entries[pos[(i, i, i, i)]] = 2400.0
        tensors.append(SymTensor.from_entries(4, n, entries))
    return DerivativeBundle(x=x, f=f, tensors=tuple(tensors))


def _quartic_derivs(x: np.ndarray) -> np.ndarray:
    return np.stack([x**4, 4.0 * x**3, 12.0 * x**2, 24.0 * x, np.full_like(x, 24.0)])


def _saddle_derivs(x: np.ndarray) -> np.ndarray:
    table = _quartic_derivs(x)
    # second coordinate gets the well: t^4 - 2 t^2
    table[0, 1] -= 2.0 * x[1] ** 2
    table[1, 1] -= 4.0 * x[1]
    table[2, 1] -= 4.0
    return table


def _trigpoly_derivs(x: np.ndarray) -> np.ndarray:
    s, c = np.sin(3.0 * x), np.cos(3.0 * x)
    return np.stack(
        [
            x**2 + 2.0 * (1.0 - c),
            2.0 * x + 6.0 * s,
            2.0 + 18.0 * c,
            -54.0 * s,
            -162.0 * c,
        ]
    )


def _rosenbrock_spec(name: str, dim: int) -> ProblemSpec:
    x0 = np.ones(dim)
    x0[0] = -1.2
    # Hessian difference on [-B, B]^n: diagonal part 400 + 2400 B per
    # coordinate, plus 800 from the off-diagonal band; B = 2.5 gives 7200.
    return ProblemSpec(
        name=name,
        dim=dim,
        max_order=4,
        evaluator=_rosenbrock_evaluator,
        default_x0=x0,
        constants=ProblemConstants(
            lipschitz_L={2: 7200.0, 3: 1200.0, 4: 0.0},
            f_low=0.0,
            known_minimizers=(np.ones(dim),),
        ),
        box=(-2.5, 2.5),
    )


def builtin_suite() -> dict[str, ProblemSpec]:
    """The six benchmark problems, keyed by CLI name."""
    a = np.array([[3.0, 1.0], [1.0, 2.0]])
    quadratic = ProblemSpec(
        name="quadratic",
        dim=2,
        max_order=4,
        evaluator=_quadratic_evaluator(a),
        default_x0=np.array([1.0, 0.0]),
        constants=ProblemConstants(
            lipschitz_L={2: 0.0, 3: 0.0, 4: 0.0},
            f_low=0.0,
            known_minimizers=(np.zeros(2),),
        ),
    )
    # d^3/dt^3 (t^4) = 24 t, so the order-3 difference tensor is diagonal
    # with entries 24 (x_i - y_i): injective norm 24 max |x_i - y_i|, giving
    # (p-1)! L = 24 globally.  The Hessian constant 120 needs the box.
    quartic = ProblemSpec(
        name="quartic",
        dim=4,
        max_order=4,
        evaluator=_separable_evaluator(_quartic_derivs),
        default_x0=np.array([1.0, -0.8, 1.2, 0.6]),
        constants=ProblemConstants(
            lipschitz_L={2: 120.0, 3: 12.0, 4: 0.0},
            f_low=0.0,
            known_minimizers=(np.zeros(4),),
        ),
    )
    saddle = ProblemSpec(
        name="saddle",
        dim=2,
        max_order=4,
        evaluator=_separable_evaluator(_saddle_derivs),
        default_x0=np.zeros(2),
        constants=ProblemConstants(
            lipschitz_L={2: 120.0, 3: 12.0, 4: 0.0},
            f_low=-1.0,
            known_minimizers=(np.array([0.0, 1.0]), np.array([0.0, -1.0])),
            known_saddles=(np.zeros(2),),
        ),
    )
    trigpoly = ProblemSpec(
        name="trigpoly",
        dim=5,
        max_order=4,
        evaluator=_separable_evaluator(_trigpoly_derivs),
        default_x0=np.array([2.0, -1.5, 1.0, -2.5, 0.5]),
        constants=ProblemConstants(
            lipschitz_L={2: 54.0, 3: 81.0, 4: 81.0},
            f_low=0.0,
            known_minimizers=(np.zeros(5),),
        ),
    )
    suite = {
        "quadratic": quadratic,
        "quartic": quartic,
        "rosenbrock": _rosenbrock_spec("rosenbrock", 2),
        "rosenbrock10": _rosenbrock_spec("rosenbrock10", 10),
        "saddle": saddle,
        "trigpoly": trigpoly,
    }
    return suite


def get_problem(name: str) -> ProblemSpec:
    suite = builtin_suite()
    if name not in suite:
        raise ValueError(f"unknown problem {name!r}; available: {', '.join(suite)}")
    return suite[name]
