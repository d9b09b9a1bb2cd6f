"""One-dimensional and sliced Wasserstein-1 distances."""

from __future__ import annotations

import numpy as np

from ..paths import PathSet
from ..simulate import derived_rng


def _flat(x) -> np.ndarray:
    if isinstance(x, PathSet):
        return x.flat()
    x = np.asarray(x, dtype=float)
    if x.ndim == 3:
        return x.reshape(x.shape[0], -1)
    if x.ndim != 2:
        raise ValueError(f"expected samples [n, dim], got shape {x.shape}")
    return x


def w1_1d(a: np.ndarray, b: np.ndarray) -> float:
    """Exact W1 between two empirical measures on the line.

    Equal sample counts reduce to the mean absolute difference of order
    statistics.  Unequal counts integrate |F_a^{-1} - F_b^{-1}| exactly over
    the union of quantile breakpoints; both quantile functions are constant
    between consecutive breakpoints.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("w1_1d needs nonempty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    na, nb = a.size, b.size
    edges = np.union1d(np.arange(1, na) / na, np.arange(1, nb) / nb)
    edges = np.concatenate([[0.0], edges, [1.0]])
    mid = (edges[:-1] + edges[1:]) / 2.0
    qa = a[np.minimum((mid * na).astype(int), na - 1)]
    qb = b[np.minimum((mid * nb).astype(int), nb - 1)]
    return float(np.sum(np.diff(edges) * np.abs(qa - qb)))


def sliced_w1(x, y, n_proj: int = 100, seed: int = 0) -> float:
    """Average W1 of projections onto uniform random unit directions.

    Each projection direction comes from its own derived RNG stream, indexed
    by slice number, and the average runs in slice order, so the result is
    reproducible independent of any execution schedule.
    """
    xf, yf = _flat(x), _flat(y)
    if xf.shape[1] != yf.shape[1]:
        raise ValueError(f"ambient dims differ: {xf.shape[1]} vs {yf.shape[1]}")
    if n_proj < 1:
        raise ValueError("n_proj must be >= 1")
    dim = xf.shape[1]
    total = 0.0
    for k in range(n_proj):
        u = derived_rng(seed, k).standard_normal(dim)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            continue
        u /= norm
        total += w1_1d(xf @ u, yf @ u)
    return total / n_proj


__all__ = ["w1_1d", "sliced_w1"]
