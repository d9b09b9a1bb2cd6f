"""Dense layers, a structurally causal recurrent network, and Adam.

CausalNet realizes a causal sequence map through recurrence: the hidden state
at step t is a function of the state at t-1 and the input at t, so the output
at t cannot depend on later inputs by construction.  Composing two causal maps
is again causal, which the tests verify by perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Var, stack, tanh


def _init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    """Affine map y = x @ w + b, with an optional tanh afterwards."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 activation: bool = False):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.w = Var(_init(rng, (in_dim, out_dim), in_dim))
        self.b = Var(np.zeros(out_dim))

    def __call__(self, x: Var) -> Var:
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"Dense expects last dim {self.in_dim}, got {x.shape}")
        out = x @ self.w + self.b
        return tanh(out) if self.activation else out

    def params(self):
        return [("w", self.w), ("b", self.b)]


class MLP:
    """Dense layers with tanh between them; the final layer is linear."""

    def __init__(self, dims: list, rng: np.random.Generator):
        if len(dims) < 2:
            raise ValueError("MLP needs at least input and output dims")
        self.layers = [
            Dense(dims[i], dims[i + 1], rng, activation=(i < len(dims) - 2))
            for i in range(len(dims) - 1)
        ]

    def __call__(self, x: Var) -> Var:
        for layer in self.layers:
            x = layer(x)
        return x

    def params(self):
        out = []
        for i, layer in enumerate(self.layers):
            out += [(f"layer{i}.{n}", p) for n, p in layer.params()]
        return out


class CausalNet:
    """Recurrent causal sequence map [B, T, d_in] -> [B, T, d_out].

    h_t = tanh(h_{t-1} @ wh + x_t @ wx + b), h_0 = 0, y_t = h_t @ wo + bo.
    Output at index t depends on inputs at indices <= t only.
    """

    def __init__(self, in_dim: int, out_dim: int, hidden_dim: int,
                 rng: np.random.Generator):
        if min(in_dim, out_dim, hidden_dim) < 1:
            raise ValueError("in_dim, out_dim, hidden_dim must be >= 1")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.hidden_dim = hidden_dim
        self.wh = Var(_init(rng, (hidden_dim, hidden_dim), hidden_dim))
        self.wx = Var(_init(rng, (in_dim, hidden_dim), in_dim))
        self.b = Var(np.zeros(hidden_dim))
        self.wo = Var(_init(rng, (hidden_dim, out_dim), hidden_dim))
        self.bo = Var(np.zeros(out_dim))

    def __call__(self, x: Var, h0: Var | None = None) -> Var:
        return self.forward(x, h0)[0]

    def forward(self, x: Var, h0: Var | None = None):
        """Returns (outputs [B, T, d_out], final hidden state [B, hidden])."""
        if len(x.shape) != 3 or x.shape[2] != self.in_dim:
            raise ValueError(
                f"CausalNet expects [B, T, {self.in_dim}], got {x.shape}"
            )
        n, n_steps = x.shape[0], x.shape[1]
        h = h0 if h0 is not None else Var(np.zeros((n, self.hidden_dim)))
        states = []
        for t in range(n_steps):
            pre = h @ self.wh + x[:, t, :] @ self.wx + self.b
            h = tanh(pre)
            states.append(h)
        hs = stack(states, axis=1)
        flat = hs.reshape(n * n_steps, self.hidden_dim)
        y = (flat @ self.wo).reshape(n, n_steps, self.out_dim) + self.bo
        return y, h

    def step(self, x_t: Var, h: Var):
        """One recurrence step for incremental generation: [B, d_in] -> [B, d_out]."""
        h_new = tanh(h @ self.wh + x_t @ self.wx + self.b)
        y_t = h_new @ self.wo + self.bo
        return y_t, h_new

    def params(self):
        return [("wh", self.wh), ("wx", self.wx), ("b", self.b),
                ("wo", self.wo), ("bo", self.bo)]


@dataclass
class AdamState:
    """Bias-corrected Adam moments for a fixed list of parameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def ensure(self, params):
        if not self.m:
            self.m = [np.zeros_like(p.value) for p in params]
            self.v = [np.zeros_like(p.value) for p in params]
        if len(self.m) != len(params):
            raise ValueError("AdamState was initialized for a different parameter list")


def adam_step(state: AdamState, params, grads=None):
    """One in-place Adam update; ``grads`` defaults to each param's .grad."""
    state.ensure(params)
    if grads is None:
        grads = [p.grad for p in params]
    state.step += 1
    t = state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        g = np.asarray(g)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in parameter {i}")
        state.m[i] = state.beta1 * state.m[i] + (1 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1 - state.beta2) * g * g
        m_hat = state.m[i] / (1 - state.beta1**t)
        v_hat = state.v[i] / (1 - state.beta2**t)
        p.value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


__all__ = ["Dense", "MLP", "CausalNet", "AdamState", "adam_step"]
