"""Truncated path signatures of piecewise-linear interpolations.

The signature of a path is the sequence of its iterated integrals.  For a
piecewise-linear path it factors over segments through Chen's identity: the
signature of a concatenation is the tensor product of the signatures, and a
straight segment with increment v has the tensor exponential
(v, v⊗v/2!, v⊗v⊗v/3!, ...).  Levels are stored flattened, one array of shape
[n, d^k] per level k, and all paths of a batch are processed together.
"""

from __future__ import annotations

import math

import numpy as np

from ..paths import PathSet

MAX_SIG_ENTRIES = 2_000_000


def signature_dim(d: int, level: int) -> int:
    """Dimension of the flattened truncated signature, levels 1..level."""
    return sum(d**k for k in range(1, level + 1))


def _segment_levels(v: np.ndarray, level: int) -> list:
    """Tensor exponential of straight segments: term k is v^{⊗k}/k!, flattened."""
    n = v.shape[0]
    terms = [v]
    for k in range(2, level + 1):
        nxt = np.einsum("na,nb->nab", terms[-1], v).reshape(n, -1)
        terms.append(nxt)
    return [t / math.factorial(k + 1) for k, t in enumerate(terms)]


def _chen(sig: list, seg: list, level: int) -> list:
    """Tensor product of two truncated signatures (grouplike elements)."""
    n = sig[0].shape[0]
    out = []
    for k in range(1, level + 1):
        term = sig[k - 1] + seg[k - 1]
        for i in range(1, k):
            term = term + np.einsum(
                "na,nb->nab", sig[i - 1], seg[k - i - 1]
            ).reshape(n, -1)
        out.append(term)
    return out


def signatures(paths, level: int = 4, time_augment: bool = True) -> np.ndarray:
    """Truncated signatures of a batch of paths, one flat row per path.

    ``paths`` is a PathSet or an [n, T, d] array.  Time augmentation prepends
    a channel running linearly from 0 to 1, which makes the signature a
    faithful summary (it distinguishes paths that differ only in speed).
    """
    if isinstance(paths, PathSet):
        x = paths.values
    else:
        x = np.asarray(paths, dtype=float)
        if x.ndim == 2:
            x = x[:, :, None]
    if x.ndim != 3:
        raise ValueError(f"expected [n, T, d] paths, got shape {x.shape}")
    if level < 1:
        raise ValueError("level must be >= 1")
    n, n_steps, d = x.shape
    d_eff = d + 1 if time_augment else d
    if d_eff**level > MAX_SIG_ENTRIES:
        raise ValueError(
            f"signature level {level} with {d_eff} channels needs {d_eff**level} "
            f"entries per top level, beyond the budget {MAX_SIG_ENTRIES}"
        )
    if time_augment:
        tgrid = np.linspace(0.0, 1.0, n_steps)
        aug = np.broadcast_to(tgrid[None, :, None], (n, n_steps, 1))
        x = np.concatenate([aug, x], axis=2)
    if n_steps == 1:
        return np.zeros((n, signature_dim(d_eff, level)))
    incr = np.diff(x, axis=1)
    sig = _segment_levels(incr[:, 0, :], level)
    for t in range(1, n_steps - 1):
        sig = _chen(sig, _segment_levels(incr[:, t, :], level), level)
    return np.concatenate(sig, axis=1)


def signature(path, level: int = 4, time_augment: bool = True) -> np.ndarray:
    """Signature of a single [T, d] or [T] path."""
    p = np.asarray(path, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2:
        raise ValueError(f"expected a single [T, d] path, got shape {p.shape}")
    return signatures(p[None, :, :], level=level, time_augment=time_augment)[0]


__all__ = ["signature", "signatures", "signature_dim", "MAX_SIG_ENTRIES"]
