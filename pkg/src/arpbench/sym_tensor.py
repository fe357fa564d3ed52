"""Dense symmetric tensors in packed (sorted multi-index) storage.

An order-j symmetric tensor on R^n is determined by its entries at sorted
multi-indices i_1 <= ... <= i_j, of which there are C(n+j-1, j).  We store
exactly those, ordered lexicographically, and recover everything else by
sorting indices on lookup.  Contraction against a vector and the injective
norm (the maximal absolute value over unit rank-one directions) are the two
operations the Taylor-model machinery needs; both work directly on the
packed layout through small precomputed index tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial

import numpy as np

__all__ = ["SymTensor", "build_symmetric", "contract_power", "injective_norm"]


@lru_cache(maxsize=None)
def _multi_indices(order: int, dim: int) -> tuple[tuple[tuple[int, ...], ...], dict]:
    """All sorted multi-indices of the given order, plus their packed positions."""
    idx = tuple(itertools.combinations_with_replacement(range(dim), order))
    return idx, {m: i for i, m in enumerate(idx)}


@lru_cache(maxsize=None)
def _contract_table(order: int, dim: int) -> np.ndarray:
    """Positions of sort(beta + (i,)) for every order-(j-1) index beta and axis i.

    Row r of the result lists, for each i, where the parent order-j tensor
    stores the entry obtained by appending i to the r-th order-(j-1) index.
    A single contraction is then a gather followed by a matrix-vector product.
    """
    lower, _ = _multi_indices(order - 1, dim)
    _, pos = _multi_indices(order, dim)
    table = np.empty((len(lower), dim), dtype=np.intp)
    for r, beta in enumerate(lower):
        for i in range(dim):
            table[r, i] = pos[tuple(sorted(beta + (i,)))]
    return table


@lru_cache(maxsize=None)
def _full_contraction_weights(order: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Index matrix and multinomial multiplicities for T[s]^order in one pass.

    Summing mult * entry * prod(s[index row]) over packed entries equals the
    sum over all dim^order index tuples, since each sorted index stands in
    for order!/(prod of repeat factorials) permutations.
    """
    idx, _ = _multi_indices(order, dim)
    matrix = np.array(idx, dtype=np.intp).reshape(len(idx), order)
    mult = np.empty(len(idx))
    for r, m in enumerate(idx):
        denom = 1
        for _, group in itertools.groupby(m):
            denom *= factorial(sum(1 for _ in group))
        mult[r] = factorial(order) // denom
    return matrix, mult


@dataclass(frozen=True, eq=False)
class SymTensor:
    """Symmetric order-`order` tensor on R^`dim`, packed entries, immutable."""

    order: int
    dim: int
    entries: np.ndarray = field(repr=False)

    @classmethod
    def from_entries(cls, order: int, dim: int, entries: np.ndarray) -> "SymTensor":
        if order < 1 or dim < 1:
            raise ValueError(f"order and dim must be positive, got {order}, {dim}")
        packed = np.array(entries, dtype=float).ravel()
        expected = comb(dim + order - 1, order)
        if packed.size != expected:
            raise ValueError(
                f"order {order}, dim {dim} needs {expected} packed entries, got {packed.size}"
            )
        packed.setflags(write=False)
        return cls(order, dim, packed)

    def __getitem__(self, idx) -> float:
        key = tuple(sorted(idx))
        if len(key) != self.order:
            raise ValueError(f"index {idx!r} has wrong length for order {self.order}")
        _, pos = _multi_indices(self.order, self.dim)
        return float(self.entries[pos[key]])

    def as_vector(self) -> np.ndarray:
        if self.order != 1:
            raise ValueError(f"as_vector needs order 1, have {self.order}")
        return np.array(self.entries)

    def as_matrix(self) -> np.ndarray:
        if self.order != 2:
            raise ValueError(f"as_matrix needs order 2, have {self.order}")
        out = np.empty((self.dim, self.dim))
        idx, _ = _multi_indices(2, self.dim)
        for r, (i, j) in enumerate(idx):
            out[i, j] = self.entries[r]
            out[j, i] = self.entries[r]
        return out


def build_symmetric(order: int, dim: int, generator) -> SymTensor:
    """Build a tensor by calling `generator` on every sorted multi-index."""
    if order < 1 or dim < 1:
        raise ValueError(f"order and dim must be positive, got {order}, {dim}")
    idx, _ = _multi_indices(order, dim)
    entries = np.fromiter((generator(m) for m in idx), dtype=float, count=len(idx))
    return SymTensor.from_entries(order, dim, entries)


def _contract_once(tensor: SymTensor, s: np.ndarray) -> SymTensor:
    """One contraction step, staying in packed form (also for orders 1, 2)."""
    table = _contract_table(tensor.order, tensor.dim)
    return SymTensor.from_entries(tensor.order - 1, tensor.dim, tensor.entries[table] @ s)


def _finish(tensor: SymTensor):
    if tensor.order == 1:
        return tensor.as_vector()
    if tensor.order == 2:
        return tensor.as_matrix()
    return tensor


def contract_power(tensor: SymTensor, s: np.ndarray, times: int):
    """Contract `times` copies of s into the tensor: T[s]^times.

    Returns a float, a vector, a dense symmetric matrix, or a SymTensor,
    depending on the order left over.  `times == 0` returns the tensor
    unchanged.
    """
    if times < 0:
        raise ValueError(f"times must be nonnegative, got {times}")
    if times > tensor.order:
        raise ValueError(f"cannot contract {times} vectors into order {tensor.order}")
    s = np.asarray(s, dtype=float)
    if s.shape != (tensor.dim,):
        raise ValueError(f"vector shape {s.shape} does not match dim {tensor.dim}")
    if times == 0:
        return tensor
    if times == tensor.order:
        matrix, mult = _full_contraction_weights(tensor.order, tensor.dim)
        return float(np.prod(s[matrix], axis=1) @ (tensor.entries * mult))
    out = tensor
    for _ in range(times):
        out = _contract_once(out, s)
    return _finish(out)


def _norm_starts(dim: int, n_random: int = 24) -> list[np.ndarray]:
    starts = [np.eye(dim)[i] for i in range(dim)]
    rng = np.random.default_rng(180451)
    for _ in range(n_random):
        v = rng.standard_normal(dim)
        starts.append(v / np.linalg.norm(v))
    return starts


def injective_norm(tensor: SymTensor, tol: float = 1e-12) -> float:
    """Estimate max |T[v_1, ..., v_j]| over unit vectors.

    Orders 1 and 2 are exact (Euclidean and spectral norm).  For order >= 3
    we run alternating maximization over the slots -- fixing all vectors but
    one makes the optimum a normalized contraction -- from each canonical
    axis and a fixed battery of pseudorandom unit starts.  Every iterate is
    feasible, so the estimate is a certified lower bound; with multi-start
    it is reliable enough for diagnostics, which is all we use it for.
    """
    if tensor.order == 1:
        return float(np.linalg.norm(tensor.entries))
    if tensor.order == 2:
        eigs = np.linalg.eigvalsh(tensor.as_matrix())
        return float(np.max(np.abs(eigs)))

    scale = float(np.max(np.abs(tensor.entries), initial=0.0))
    if scale == 0.0:
        return 0.0

    best = 0.0
    for start in _norm_starts(tensor.dim):
        vs = [start.copy() for _ in range(tensor.order)]
        value, prev, stalled = 0.0, -np.inf, False
        for _ in range(200):
            for slot in range(tensor.order):
                partial = tensor
                for other in range(tensor.order):
                    if other != slot:
                        partial = _contract_once(partial, vs[other])
                c = partial.as_vector()
                nc = float(np.linalg.norm(c))
                if nc <= tol * scale:
                    value, stalled = nc, True
                    break
                vs[slot] = c / nc
                value = nc
            # Each slot update is a restricted maximum, so `value` ascends.
            if stalled or value - prev <= tol * max(1.0, value):
                break
            prev = value
        best = max(best, value)
    return best
