"""Shared oracle helpers: dense ndarray reference implementations."""

import itertools
from math import factorial

import numpy as np


def dense_from_packed(t):
    """Expand a packed symmetric tensor into a full (dim,)*order ndarray."""
    full = np.empty((t.dim,) * t.order)
    for idx in itertools.product(range(t.dim), repeat=t.order):
        full[idx] = t[tuple(sorted(idx))]
    return full


def dense_contract(full, s, times):
    """Contract the trailing axis with s, `times` times over."""
    out = full
    for _ in range(times):
        out = np.tensordot(out, s, axes=([out.ndim - 1], [0]))
    return out


def dense_taylor_value(bundle, s):
    """Taylor polynomial value via dense contractions: f + sum_j D_j[s]^j / j!."""
    total = bundle.f
    for j, t in enumerate(bundle.tensors, start=1):
        total += dense_contract(dense_from_packed(t), s, j) / factorial(j)
    return total
