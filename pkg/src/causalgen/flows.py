"""Learnable prior: a chain of affine coupling transforms over the flat latent.

Each layer freezes the coordinates selected by its mask, and maps the rest
through z' = z * exp(s(z_masked)) + t(z_masked).  Masks select even or odd
time indices and alternate across layers, so two consecutive layers touch
every coordinate.  The scale net output is squashed by cap * tanh so the
transform stays well conditioned for any parameter values.

Densities are computed in the inverse direction: pull the point back through
every layer, accumulate log|det| of each inverse, and add the standard normal
log-density of the base point.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Var, as_var, exp, tanh
from .nets import MLP
from .simulate import derived_rng

LOG_2PI = float(np.log(2.0 * np.pi))


class CouplingLayer:
    """One affine coupling transform with a fixed binary mask."""

    def __init__(self, mask: np.ndarray, hidden: int, scale_cap: float,
                 rng: np.random.Generator):
        self.mask = np.asarray(mask, dtype=float)
        dim = self.mask.size
        self.scale_cap = float(scale_cap)
        self.net = MLP([dim, hidden, hidden, 2 * dim], rng)
        # start at the identity map: zero final layer means s = t = 0
        last = self.net.layers[-1]
        last.w.value[...] = 0.0
        last.b.value[...] = 0.0

    def _scale_shift(self, z: Var):
        dim = self.mask.size
        st = self.net(z * self.mask)
        s = tanh(st[:, :dim]) * self.scale_cap
        t = st[:, dim:]
        return s, t

    def forward(self, z: Var):
        """Generation direction; returns (z', per-sample log_det of forward)."""
        z = as_var(z)
        s, t = self._scale_shift(z)
        free = 1.0 - self.mask
        z_out = z * self.mask + (z * exp(s) + t) * free
        log_det = (s * free).sum(axis=1)
        return z_out, log_det

    def inverse(self, z: Var):
        """Density direction; returns (z0, per-sample log|det| of the inverse)."""
        z = as_var(z)
        s, t = self._scale_shift(z)
        free = 1.0 - self.mask
        z_out = z * self.mask + (z - t) * exp(-s) * free
        log_det = -(s * free).sum(axis=1)
        return z_out, log_det

    def params(self):
        return self.net.params()


def time_parity_mask(dim: int, d_z: int, parity: int) -> np.ndarray:
    """Mask freezing all coordinates whose time index has the given parity."""
    if dim % d_z != 0:
        raise ValueError(f"dim {dim} not a multiple of d_z {d_z}")
    times = np.arange(dim) // d_z
    return (times % 2 == parity).astype(float)


class FlowPrior:
    """Invertible map stack plus a standard normal base on R^dim."""

    def __init__(self, dim: int, d_z: int = 1, n_layers: int = 6,
                 hidden: int = 64, scale_cap: float = 3.0, seed: int = 0):
        if dim < 1 or n_layers < 0:
            raise ValueError("dim must be >= 1 and n_layers >= 0")
        self.dim = dim
        self.d_z = d_z
        self.n_layers = n_layers
        self.hidden = hidden
        self.scale_cap = scale_cap
        rng = derived_rng(seed, 0)
        self.layers = [
            CouplingLayer(time_parity_mask(dim, d_z, parity=j % 2), hidden, scale_cap, rng)
            for j in range(n_layers)
        ]

    def forward_flow(self, z0: Var):
        """Base point to sample; returns (z, total forward log_det)."""
        z = as_var(z0)
        total = Var(np.zeros(z.shape[0]))
        for layer in self.layers:
            z, ld = layer.forward(z)
            total = total + ld
        return z, total

    def inverse_flow(self, z: Var):
        """Sample to base point; returns (z0, total log|det| of the inverse)."""
        z = as_var(z)
        total = Var(np.zeros(z.shape[0]))
        for layer in reversed(self.layers):
            z, ld = layer.inverse(z)
            total = total + ld
        return z, total

    def log_prob(self, z) -> Var:
        """Per-sample log-density, differentiable in z and in the layer params."""
        z = as_var(z)
        if len(z.shape) != 2 or z.shape[1] != self.dim:
            raise ValueError(f"log_prob expects [n, {self.dim}], got {z.shape}")
        z0, log_det = self.inverse_flow(z)
        base = (z0 * z0).sum(axis=1) * (-0.5) - 0.5 * self.dim * LOG_2PI
        return base + log_det

    def sample(self, n: int, seed: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        z0 = derived_rng(seed, 0).standard_normal((n, self.dim))
        z, _ = self.forward_flow(Var(z0))
        return z.value

    def params(self):
        out = []
        for j, layer in enumerate(self.layers):
            out += [(f"flow{j}.{n}", p) for n, p in layer.params()]
        return out


__all__ = ["CouplingLayer", "FlowPrior", "time_parity_mask", "LOG_2PI"]
