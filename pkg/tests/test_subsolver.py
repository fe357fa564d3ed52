"""Escape step and inner trust-region minimization of the regularized model."""

import numpy as np
import pytest

from arpbench.model import ModelState, model_eval
from arpbench.problems import DerivativeBundle, evaluate_bundle, get_problem
from arpbench.subsolver import (
    InnerLimits,
    InternalError,
    Step,
    SubsolverFailure,
    escape_origin_step,
    minimize_model,
)
from arpbench.sym_tensor import SymTensor


def state_from(f, tensors_by_order, sigma, p):
    dim = tensors_by_order[0].dim
    bundle = DerivativeBundle(x=np.zeros(dim), f=f, tensors=tuple(tensors_by_order))
    return ModelState(bundle=bundle, sigma=sigma, p=p)


def one_dim_state(f, g, h, sigma, p=2):
    tensors = [SymTensor.from_entries(1, 1, [g]), SymTensor.from_entries(2, 1, [h])]
    return state_from(f, tensors, sigma, p)


def random_state(rng, dim, p, scale=1.0):
    from math import comb

    tensors = [
        SymTensor.from_entries(j, dim, scale * rng.standard_normal(comb(dim + j - 1, j)))
        for j in range(1, p + 1)
    ]
    return state_from(float(rng.standard_normal()), tensors, float(rng.uniform(1e-3, 10.0)), p)


def test_escape_step_gradient_branch_backtracks_once():
    # f = |x|^2/2 at x=(1,0): unit gradient direction fails at alpha=1
    # (model value 1 vs 0.5) and passes at alpha=1/2 (0.25 < 0.5).
    g = SymTensor.from_entries(1, 2, [1.0, 0.0])
    h = SymTensor.from_entries(2, 2, [1.0, 0.0, 1.0])
    state = state_from(0.5, [g, h], sigma=3.0, p=2)
    s0 = escape_origin_step(state)
    np.testing.assert_array_equal(s0, [-0.5, 0.0])
    assert model_eval(state, s0)[0] < 0.5


def test_escape_step_eigen_branch_at_saddle():
    bundle = evaluate_bundle(get_problem("saddle"), np.zeros(2), 2)
    state = ModelState(bundle=bundle, sigma=1.0, p=2)
    s0 = escape_origin_step(state, gradient_first=False)
    np.testing.assert_array_equal(s0, [0.0, 1.0])
    # zero gradient routes to the eigenvector branch on its own
    np.testing.assert_array_equal(escape_origin_step(state), s0)
    assert model_eval(state, s0)[0] < bundle.f


def test_escape_step_failure_when_model_flat():
    state = one_dim_state(1.0, 1e-300, 0.0, sigma=1.0)
    with pytest.raises(InternalError):
        escape_origin_step(state)


def test_inner_stationary_point_one_dim():
    # minimizer of 1 + 2s + s^2 + 2|s|^3 on s < 0 solves 3s^2 - s - 1 = 0
    root = (1.0 - np.sqrt(13.0)) / 6.0
    state = one_dim_state(1.0, 2.0, 2.0, sigma=6.0)
    step = minimize_model(state, theta=1e-8, criticality_order=2)
    assert abs(step.s[0] - root) <= 1e-6
    assert step.chi_m1 <= 1e-8 * abs(step.s[0]) ** 2
    assert step.model_decrease > 0.0


def test_saddle_subproblem_matches_grid_search():
    # Model at the saddle origin with p=2, sigma=1: -2 t^2 + |s|^3 / 3 along
    # the negative-curvature axis, minimized at t = 4 with value -32/3.
    bundle = evaluate_bundle(get_problem("saddle"), np.zeros(2), 2)
    state = ModelState(bundle=bundle, sigma=1.0, p=2)
    grid = np.linspace(-6.0, 6.0, 241)
    grid_min = min(
        model_eval(state, np.array([u, v]))[0] for u in grid for v in grid
    )
    step = minimize_model(state, theta=1e-8, criticality_order=2)
    assert step.model_value <= grid_min + 1e-2
    assert step.model_value == pytest.approx(-32.0 / 3.0, abs=1e-8)
    np.testing.assert_allclose(step.s, [0.0, 4.0], atol=1e-6)


def test_convex_quadratic_model_needs_few_iterations():
    bundle = evaluate_bundle(get_problem("quadratic"), np.array([1.0, 0.0]), 2)
    state = ModelState(bundle=bundle, sigma=1e-8, p=2)
    step = minimize_model(state, theta=100.0, criticality_order=2)
    assert step.inner_iterations <= 5
    assert step.model_value < bundle.f
    # near the Newton point -A^{-1} g = (-1, 0) once theta stops mattering
    step_tight = minimize_model(state, theta=1e-10, criticality_order=2)
    np.testing.assert_allclose(step_tight.s, [-1.0, 0.0], atol=1e-5)


@pytest.mark.parametrize("theta", [100.0, 1e-3])
def test_step_contract_on_random_states(theta):
    rng = np.random.default_rng(40)
    dims = (1, 2, 5, 10)
    count = 120 if theta == 100.0 else 40
    for i in range(count):
        p = 2 if i % 2 == 0 else 3
        state = random_state(rng, dims[i % len(dims)], p, scale=float(rng.uniform(0.2, 5.0)))
        step = minimize_model(state, theta=theta, criticality_order=2)
        ns = float(np.linalg.norm(step.s))
        assert ns > 0.0
        assert step.model_value < state.bundle.f
        assert step.model_decrease == state.bundle.f - step.model_value
        assert step.chi_m1 <= theta * ns**p * (1.0 + 1e-12)
        assert step.chi_m2 <= theta * ns ** (p - 1) * (1.0 + 1e-12)
        assert step.inner_iterations <= InnerLimits().max_iterations


def test_first_order_mode_ignores_curvature_condition():
    rng = np.random.default_rng(41)
    for _ in range(20):
        state = random_state(rng, 4, 2)
        step = minimize_model(state, theta=1e-2, criticality_order=1)
        ns = float(np.linalg.norm(step.s))
        assert step.chi_m1 <= 1e-2 * ns**2 * (1.0 + 1e-12)


def test_returned_step_is_scale_equivariant():
    # doubling all Taylor coefficients and sigma leaves the minimizing
    # geometry unchanged; with power-of-two scaling even the floats agree
    rng = np.random.default_rng(42)
    for i in range(20):
        p = 2 if i % 2 == 0 else 3
        state = random_state(rng, 3, p)
        doubled = state_from(
            2.0 * state.bundle.f,
            [
                SymTensor.from_entries(t.order, t.dim, 2.0 * t.entries)
                for t in state.bundle.tensors
            ],
            2.0 * state.sigma,
            p,
        )
        s1 = minimize_model(state, theta=100.0, criticality_order=2).s
        s2 = minimize_model(doubled, theta=100.0, criticality_order=2).s
        np.testing.assert_array_equal(s1, s2)


def test_iteration_cap_raises_with_best_step():
    state = one_dim_state(1.0, 2.0, 2.0, sigma=6.0)
    with pytest.raises(SubsolverFailure) as err:
        minimize_model(
            state,
            theta=1e-14,
            criticality_order=2,
            limits=InnerLimits(max_iterations=3),
        )
    assert err.value.best_s.shape == (1,)
    assert model_eval(state, err.value.best_s)[0] < 1.0


def test_step_fields():
    step = Step(
        s=np.array([1.0]),
        model_value=0.5,
        model_decrease=0.5,
        chi_m1=0.0,
        chi_m2=0.0,
        inner_iterations=3,
    )
    assert step.model_decrease == 0.5 and step.inner_iterations == 3
