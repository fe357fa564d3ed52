"""Packed symmetric tensors checked against dense ndarray oracles."""

import itertools
from math import comb

import numpy as np
import pytest

from arpbench.sym_tensor import SymTensor, build_symmetric, contract_power, injective_norm


def dense_from_packed(t):
    """Oracle: expand a packed tensor into a full (dim,)*order ndarray."""
    full = np.empty((t.dim,) * t.order)
    for idx in itertools.product(range(t.dim), repeat=t.order):
        full[idx] = t[tuple(sorted(idx))]
    return full


def dense_contract(full, s, times):
    """Oracle: contract the trailing axis with s, `times` times over."""
    out = full
    for _ in range(times):
        out = np.tensordot(out, s, axes=([out.ndim - 1], [0]))
    return out


def random_packed(order, dim, rng):
    n_entries = comb(dim + order - 1, order)
    return SymTensor.from_entries(order, dim, rng.standard_normal(n_entries))


def test_build_symmetric_small_matrix():
    t = build_symmetric(2, 2, lambda idx: float(sum(idx)))
    assert t.entries.tolist() == [0.0, 1.0, 2.0]
    np.testing.assert_array_equal(t.as_matrix(), [[0.0, 1.0], [1.0, 2.0]])


@pytest.mark.parametrize("order,dim", [(1, 5), (2, 3), (3, 4), (4, 2), (5, 3)])
def test_packed_length(order, dim):
    t = build_symmetric(order, dim, lambda idx: 1.0)
    assert t.entries.size == comb(dim + order - 1, order)


def test_lookup_ignores_index_order():
    rng = np.random.default_rng(0)
    t = random_packed(3, 3, rng)
    for perm in itertools.permutations((2, 0, 1)):
        assert t[perm] == t[(0, 1, 2)]


def test_dense_expansion_is_symmetric():
    rng = np.random.default_rng(1)
    t = random_packed(3, 3, rng)
    full = dense_from_packed(t)
    np.testing.assert_array_equal(full, np.transpose(full, (1, 0, 2)))
    np.testing.assert_array_equal(full, np.transpose(full, (2, 1, 0)))


@pytest.mark.parametrize("order,dim", [(2, 4), (3, 3), (4, 2), (3, 7)])
def test_contract_matches_dense_oracle(order, dim):
    rng = np.random.default_rng(order * 10 + dim)
    t = random_packed(order, dim, rng)
    full = dense_from_packed(t)
    s = rng.standard_normal(dim)
    for times in range(1, order + 1):
        got = contract_power(t, s, times)
        want = dense_contract(full, s, times)
        if order - times >= 3:
            got = dense_from_packed(got)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_contract_zero_times_is_identity():
    rng = np.random.default_rng(2)
    t = random_packed(3, 2, rng)
    same = contract_power(t, rng.standard_normal(2), 0)
    assert same is t


def test_contract_result_shapes():
    rng = np.random.default_rng(3)
    t = random_packed(4, 3, rng)
    s = rng.standard_normal(3)
    assert isinstance(contract_power(t, s, 4), float)
    assert contract_power(t, s, 3).shape == (3,)
    assert contract_power(t, s, 2).shape == (3, 3)
    assert isinstance(contract_power(t, s, 1), SymTensor)


def test_contract_is_multilinear():
    rng = np.random.default_rng(4)
    t = random_packed(3, 4, rng)
    u = rng.standard_normal(4)
    v = rng.standard_normal(4)
    a, b = 0.7, -1.3
    lhs = contract_power(t, a * u + b * v, 1)
    rhs = a * contract_power(t, u, 1) + b * contract_power(t, v, 1)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_full_contraction_scales_like_degree():
    rng = np.random.default_rng(5)
    t = random_packed(3, 3, rng)
    s = rng.standard_normal(3)
    base = contract_power(t, s, 3)
    assert contract_power(t, 2.0 * s, 3) == pytest.approx(8.0 * base, rel=1e-13)


def test_injective_norm_order1_is_euclidean():
    v = np.array([3.0, 4.0])
    t = SymTensor.from_entries(1, 2, v)
    assert injective_norm(t) == pytest.approx(5.0, rel=1e-14)


def test_injective_norm_order2_is_spectral():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((5, 5))
    a = 0.5 * (a + a.T)
    t = build_symmetric(2, 5, lambda idx: a[idx])
    want = np.max(np.abs(np.linalg.eigvalsh(a)))
    assert injective_norm(t) == pytest.approx(want, rel=1e-12)


def test_injective_norm_rank_one_cube():
    # v (x) v (x) v attains its maximum at v/|v|, with value |v|^3.
    v = np.array([0.0, 2.0, 0.0])
    t = build_symmetric(3, 3, lambda idx: v[idx[0]] * v[idx[1]] * v[idx[2]])
    assert injective_norm(t) == pytest.approx(8.0, rel=1e-10)


def test_injective_norm_order3_matches_angle_grid():
    rng = np.random.default_rng(7)
    t = random_packed(3, 2, rng)
    full = dense_from_packed(t)
    theta = np.linspace(0.0, 2.0 * np.pi, 40000, endpoint=False)
    best = 0.0
    for c, s in zip(np.cos(theta), np.sin(theta)):
        v = np.array([c, s])
        best = max(best, abs(dense_contract(full, v, 3)))
    est = injective_norm(t)
    assert abs(est - best) <= 1e-4
    # The multi-start search only ever evaluates feasible unit vectors, so it
    # can undershoot but never overshoot the true maximum.
    assert est <= best + 1e-8


def test_injective_norm_is_deterministic():
    rng = np.random.default_rng(8)
    t = random_packed(3, 5, rng)
    assert injective_norm(t) == injective_norm(t)


def test_zero_tensor_norm():
    t = SymTensor.from_entries(3, 3, np.zeros(comb(5, 3)))
    assert injective_norm(t) == 0.0


def test_diagonal_order3_norm_is_max_abs_diagonal():
    # sum_i d_i v_i^3 over the unit sphere peaks at a coordinate axis.
    d = np.array([1.0, -7.0, 3.0])

    def gen(idx):
        i, j, k = idx
        return d[i] if i == j == k else 0.0

    t = build_symmetric(3, 3, gen)
    assert injective_norm(t) == pytest.approx(7.0, rel=1e-10)


def test_entries_are_read_only():
    t = build_symmetric(2, 2, lambda idx: 1.0)
    with pytest.raises(ValueError):
        t.entries[0] = 5.0


def test_invalid_construction_rejected():
    with pytest.raises(ValueError):
        build_symmetric(0, 3, lambda idx: 1.0)
    with pytest.raises(ValueError):
        build_symmetric(2, 0, lambda idx: 1.0)
    with pytest.raises(ValueError):
        SymTensor.from_entries(2, 2, np.zeros(4))


def test_invalid_contraction_rejected():
    t = build_symmetric(2, 3, lambda idx: 1.0)
    with pytest.raises(ValueError):
        contract_power(t, np.zeros(2), 1)
    with pytest.raises(ValueError):
        contract_power(t, np.zeros(3), 3)
    with pytest.raises(ValueError):
        contract_power(t, np.zeros(3), -1)
