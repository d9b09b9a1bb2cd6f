"""Adapted empirical measures, nested-distance dynamic program, sliced AW1.

The empirical measure of continuous paths has no useful tree structure, so it
is quantized first: K-means per time step, each path mapped to its sequence
of centers.  The quantized paths form a tree of prefixes, and the bicausal
W1 between two such trees is computed exactly by backward induction, solving
one small optimal transport over children at every node pair.

The inner transports are dispatched by shape: (1,m) and (m,1) are dot
products, problems with a 2-atom side reduce to a continuous knapsack solved
by a vectorized greedy, and everything else goes to the exact LP solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..paths import PathSet
from ..simulate import derived_rng
from .discrete import discrete_ot


def kmeans_1step(points: np.ndarray, k: int, rng: np.random.Generator,
                 max_iter: int = 100, tol: float = 1e-8):
    """Lloyd's algorithm with k-means++ init on [n, d] points.

    If the points have fewer than k distinct values, k is reduced with a
    warning.  Empty clusters are reseeded at the point farthest from its
    center.  Returns (centers [k', d], labels [n]).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    n_distinct = np.unique(points, axis=0).shape[0]
    if n_distinct < k:
        warnings.warn(
            f"only {n_distinct} distinct values for {k} clusters; reducing k",
            stacklevel=2,
        )
        k = n_distinct

    # k-means++ seeding: next center drawn with probability prop. to D^2
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = points[rng.integers(n)]
            continue
        centers[i] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[i]) ** 2, axis=1))

    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dist = cdist(points, centers)
        labels = np.argmin(dist, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = labels == c
            if np.any(members):
                new_centers[c] = points[members].mean(axis=0)
            else:
                far = np.argmax(dist[np.arange(n), labels])
                new_centers[c] = points[far]
        move = np.max(np.abs(new_centers - centers))
        centers = new_centers
        if move <= tol:
            break
    labels = np.argmin(cdist(points, centers), axis=1)
    return centers, labels


@dataclass
class AdaptedTree:
    """Prefix tree of a finitely supported path measure.

    ``levels[t]`` holds, for every distinct length-(t+1) prefix: its time-t
    value, its total probability mass, its parent node index at level t-1,
    and the contiguous index range of its children at level t+1.  Nodes are
    in lexicographic path order, so children of a node are consecutive.
    """

    levels: list

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def n_channels(self) -> int:
        return self.levels[0]["values"].shape[1]

    @classmethod
    def from_quantized(cls, paths: np.ndarray, weights=None) -> "AdaptedTree":
        paths = np.asarray(paths, dtype=float)
        if paths.ndim == 2:
            paths = paths[:, :, None]
        n, n_steps, d = paths.shape
        if weights is None:
            weights = np.full(n, 1.0 / n)
        weights = np.asarray(weights, dtype=float)
        flat = paths.reshape(n, n_steps * d)
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        w = np.zeros(uniq.shape[0])
        np.add.at(w, inv, weights)
        m = uniq.shape[0]
        up = uniq.reshape(m, n_steps, d)

        levels = []
        prev_labels = np.zeros(m, dtype=int)
        for t in range(n_steps):
            pf = uniq[:, : (t + 1) * d]
            change = np.ones(m, dtype=bool)
            change[1:] = np.any(pf[1:] != pf[:-1], axis=1)
            firsts = np.nonzero(change)[0]
            levels.append({
                "values": up[firsts, t, :],
                "weight": np.add.reduceat(w, firsts),
                "parent": prev_labels[firsts],
            })
            prev_labels = np.cumsum(change) - 1
        for t in range(n_steps - 1):
            par = levels[t + 1]["parent"]
            n_t = levels[t]["values"].shape[0]
            levels[t]["child_start"] = np.searchsorted(par, np.arange(n_t), "left")
            levels[t]["child_end"] = np.searchsorted(par, np.arange(n_t), "right")
        return cls(levels)


def adapted_empirical(x, clusters_per_time: int | None = None, seed: int = 0,
                      centers=None) -> AdaptedTree:
    """Quantize a path sample into an adapted tree by per-time K-means.

    Each time step is clustered independently with its own derived RNG
    stream; every path is replaced by its sequence of assigned centers.
    When ``centers`` is given (a list of [k, d] arrays, one per time step)
    the fit is skipped and paths are assigned to those fixed centers, so
    two samples quantized with the same list share one grid.
    """
    vals = x.values if isinstance(x, PathSet) else np.asarray(x, dtype=float)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    n, n_steps, d = vals.shape
    if centers is not None:
        if len(centers) != n_steps:
            raise ValueError("centers must have one array per time step")
        quantized = np.empty_like(vals)
        for t in range(n_steps):
            cen = np.asarray(centers[t], dtype=float)
            labels = np.argmin(cdist(vals[:, t, :], cen), axis=1)
            quantized[:, t, :] = cen[labels]
        return AdaptedTree.from_quantized(quantized)
    if clusters_per_time is None:
        clusters_per_time = int(np.ceil(np.sqrt(n)))
    if clusters_per_time < 1:
        raise ValueError("clusters_per_time must be >= 1")
    quantized = np.empty_like(vals)
    for t in range(n_steps):
        cen, labels = kmeans_1step(
            vals[:, t, :], clusters_per_time, derived_rng(seed, t)
        )
        quantized[:, t, :] = cen[labels]
    return AdaptedTree.from_quantized(quantized)


def _greedy_two_row(a1, cost1, cost2, b):
    """Exact OT with a 2-atom first marginal, vectorized over leading dims.

    ``a1``: [...] mass of the first atom; ``cost1``/``cost2``: [..., m] costs
    from atom 1/atom 2 to the m targets; ``b``: [..., m] target masses.  The
    problem is a continuous knapsack in the first row, so filling cheapest
    cost differences first is optimal.
    """
    delta = cost1 - cost2
    order = np.argsort(delta, axis=-1)
    b_sorted = np.take_along_axis(b, order, axis=-1)
    delta_sorted = np.take_along_axis(delta, order, axis=-1)
    prev = np.cumsum(b_sorted, axis=-1) - b_sorted
    fill = np.clip(a1[..., None] - prev, 0.0, b_sorted)
    return np.sum(cost2 * b, axis=-1) + np.sum(delta_sorted * fill, axis=-1)


def _child_block(level: dict, nodes: np.ndarray, k: int):
    """Child indices [len(nodes), k] and conditional probabilities."""
    starts = level["child_start"][nodes]
    idx = starts[:, None] + np.arange(k)[None, :]
    cond = level["weight_child"][idx]
    cond = cond / cond.sum(axis=1, keepdims=True)
    return idx, cond


def _ot_layer(la: dict, lb: dict, m_next: np.ndarray) -> np.ndarray:
    """Expected-children cost for every node pair of one level."""
    ka = la["child_end"] - la["child_start"]
    kb = lb["child_end"] - lb["child_start"]
    n_a, n_b = ka.shape[0], kb.shape[0]
    out = np.empty((n_a, n_b))
    for ka_val in np.unique(ka):
        ua = np.nonzero(ka == ka_val)[0]
        for kb_val in np.unique(kb):
            vb = np.nonzero(kb == kb_val)[0]
            block = _ot_block(la, lb, m_next, ua, vb, int(ka_val), int(kb_val))
            out[np.ix_(ua, vb)] = block
    return out


def _ot_block(la, lb, m_next, ua, vb, ka, kb):
    ia, ca = _child_block(la, ua, ka)
    ib, cb = _child_block(lb, vb, kb)
    if ka == 1 and kb == 1:
        return m_next[np.ix_(ia[:, 0], ib[:, 0])]
    if ka == 1:
        gathered = m_next[ia[:, 0]][:, ib]          # (|ua|, |vb|, kb)
        return np.einsum("uvj,vj->uv", gathered, cb)
    if kb == 1:
        gathered = m_next[:, ib[:, 0]][ia]          # (|ua|, kb=1 -> (|ua|, ka, |vb|))
        gathered = np.transpose(gathered, (0, 2, 1))
        return np.einsum("uvi,ui->uv", gathered, ca)
    if ka == 2 or kb == 2:
        transposed = kb == 2 and ka != 2
        if transposed:
            la, lb, m_next = lb, la, m_next.T
            ua, vb, ka, kb = vb, ua, kb, ka
            ia, ca, ib, cb = ib, cb, ia, ca
        # costs from the two a-children to each b-child, per (u, v) pair
        c1 = m_next[ia[:, 0]][:, ib]                # (|ua|, |vb|, kb)
        c2 = m_next[ia[:, 1]][:, ib]
        a1 = np.broadcast_to(ca[:, 0][:, None], c1.shape[:2])
        b_w = np.broadcast_to(cb[None, :, :], c1.shape)
        block = _greedy_two_row(a1, c1, c2, b_w)
        return block.T if transposed else block
    # general case: exact LP per node pair
    block = np.empty((ua.shape[0], vb.shape[0]))
    for i in range(ua.shape[0]):
        sub = m_next[ia[i]]
        for j in range(vb.shape[0]):
            cost = sub[:, ib[j]]
            block[i, j], _ = discrete_ot(cost, ca[i], cb[j])
    return block


def aw1_nested(tree_a: AdaptedTree, tree_b: AdaptedTree) -> float:
    """Bicausal W1 between two adapted trees by backward induction.

    Cost between paths is the sum over time of euclidean distances between
    the node values.  Exact for the quantized measures the trees represent.
    """
    if tree_a.depth != tree_b.depth:
        raise ValueError(f"depth mismatch: {tree_a.depth} vs {tree_b.depth}")
    la, lb = tree_a.levels, tree_b.levels
    depth = tree_a.depth
    for side in (la, lb):
        for t in range(depth - 1):
            # cache children masses at the child's own index order
            side[t]["weight_child"] = side[t + 1]["weight"]
    m_cur = cdist(la[-1]["values"], lb[-1]["values"])
    for t in range(depth - 2, -1, -1):
        m_cur = cdist(la[t]["values"], lb[t]["values"]) + _ot_layer(la[t], lb[t], m_cur)
    value, _ = discrete_ot(m_cur, la[0]["weight"], lb[0]["weight"])
    return float(value)


def sliced_aw1(x, y, n_len: int = 5, n_slice: int = 100, n_sample: int = 500,
               clusters_per_time: int | None = None, seed: int = 0):
    """Mean and std over random time-slices of the nested distance.

    Each slice k draws, from its own derived RNG stream: a sorted time subset
    of size n_len, a shared subsampling pattern applied to both path sets
    (identical inputs then give identical subsamples, making the distance of
    a set to itself exactly zero), and the clustering seed.  Subsampling uses
    a shared uniform pattern, so it is with replacement.

    Both subsamples are quantized on one center list fitted to their pooled
    values.  Fitting per sample instead would jitter the cell boundaries
    between the two trees and that jitter reads as conditional-law mismatch,
    inflating the distance of a law to itself by enough to drown real
    differences between nearby laws.
    """
    xv = x.values if isinstance(x, PathSet) else np.asarray(x, dtype=float)
    yv = y.values if isinstance(y, PathSet) else np.asarray(y, dtype=float)
    if xv.ndim == 2:
        xv = xv[:, :, None]
    if yv.ndim == 2:
        yv = yv[:, :, None]
    n_steps = xv.shape[1]
    if yv.shape[1] != n_steps:
        raise ValueError("path sets must share the number of time steps")
    if not (1 <= n_len <= n_steps):
        raise ValueError(f"n_len must lie in [1, {n_steps}]")
    if n_slice < 1 or n_sample < 1:
        raise ValueError("n_slice and n_sample must be >= 1")
    if clusters_per_time is None:
        clusters_per_time = int(np.ceil(np.sqrt(n_sample)))

    values = np.empty(n_slice)
    for k in range(n_slice):
        rng = derived_rng(seed, k)
        tsub = np.sort(rng.choice(n_steps, size=n_len, replace=False))
        u = rng.random(n_sample)
        idx_x = np.minimum((u * xv.shape[0]).astype(int), xv.shape[0] - 1)
        idx_y = np.minimum((u * yv.shape[0]).astype(int), yv.shape[0] - 1)
        km_seed = int(rng.integers(2**31))
        x_sub = xv[idx_x][:, tsub, :]
        y_sub = yv[idx_y][:, tsub, :]
        pool = np.concatenate([x_sub, y_sub], axis=0)
        centers = [
            kmeans_1step(pool[:, t, :], clusters_per_time, derived_rng(km_seed, t))[0]
            for t in range(n_len)
        ]
        tree_x = adapted_empirical(x_sub, centers=centers)
        tree_y = adapted_empirical(y_sub, centers=centers)
        values[k] = aw1_nested(tree_x, tree_y)
    std = float(values.std(ddof=1)) if n_slice > 1 else 0.0
    return float(values.mean()), std


__all__ = [
    "AdaptedTree",
    "kmeans_1step",
    "adapted_empirical",
    "aw1_nested",
    "sliced_aw1",
]
