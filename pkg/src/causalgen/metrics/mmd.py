"""Maximum mean discrepancy estimators: Gaussian kernel and signature kernel."""

from __future__ import annotations

import numpy as np

from .signatures import signatures
from .wasserstein import _flat


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d2 = aa + bb - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def median_bandwidth(x, y) -> float:
    """Median pairwise distance of the pooled sample (zero distances excluded)."""
    pooled = np.vstack([_flat(x), _flat(y)])
    d = np.sqrt(_sq_dists(pooled, pooled))
    iu = np.triu_indices(d.shape[0], k=1)
    vals = d[iu]
    vals = vals[vals > 0]
    if vals.size == 0:
        return 1.0
    return float(np.median(vals))


def gaussian_mmd(x, y, bandwidth="median") -> float:
    """Biased (V-statistic) MMD with the RBF kernel exp(-d^2 / (2 h^2)).

    The V-statistic includes diagonal terms, which keeps the squared estimate
    nonnegative up to rounding; it is floored at zero before the square root.
    """
    xf, yf = _flat(x), _flat(y)
    if xf.shape[1] != yf.shape[1]:
        raise ValueError(f"ambient dims differ: {xf.shape[1]} vs {yf.shape[1]}")
    h = median_bandwidth(xf, yf) if bandwidth == "median" else float(bandwidth)
    if h <= 0:
        raise ValueError(f"bandwidth must be > 0, got {h}")
    gamma = 1.0 / (2.0 * h * h)
    kxx = np.exp(-gamma * _sq_dists(xf, xf)).mean()
    kyy = np.exp(-gamma * _sq_dists(yf, yf)).mean()
    kxy = np.exp(-gamma * _sq_dists(xf, yf)).mean()
    mmd2 = kxx + kyy - 2.0 * kxy
    return float(np.sqrt(max(mmd2, 0.0)))


def signature_mmd(x, y, level: int = 4, time_augment: bool = True) -> float:
    """MMD with the linear kernel on truncated signatures.

    For a linear kernel the V-statistic collapses to the Euclidean distance
    between the mean signatures of the two samples.
    """
    if isinstance(x, np.ndarray) and x.ndim == 2:
        x = x[:, :, None]
    if isinstance(y, np.ndarray) and y.ndim == 2:
        y = y[:, :, None]
    sx = signatures(x, level=level, time_augment=time_augment)
    sy = signatures(y, level=level, time_augment=time_augment)
    if sx.shape[1] != sy.shape[1]:
        raise ValueError("signature dims differ; check channels and level")
    diff = sx.mean(axis=0) - sy.mean(axis=0)
    return float(np.linalg.norm(diff))


__all__ = ["gaussian_mmd", "signature_mmd", "median_bandwidth"]
