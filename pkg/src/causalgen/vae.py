"""Time-causal variational autoencoder with a learnable flow prior.

Encoder and decoder are recurrent causal maps, so the pair (input, output)
realizes a causal coupling path by path: reconstruction at time t depends on
the input only through its prefix up to t.  The training loss is the mean
per-path transport cost plus a beta-weighted Monte Carlo divergence between
the encoded latent law and the flow prior, and the two terms combine into a
reported upper bound on the causal transport distance between the data and
generated distributions when the data lives in the unit ball.

The conditional variant concatenates an embedded condition vector to the
latent at every time step, which supports generation of future return blocks
given a summary of the past and, iterated, open-ended path extension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autodiff import Var, as_var, backward, concat, log, softplus, sqrt
from .errors import TrainingDiverged
from .flows import FlowPrior
from .nets import AdamState, CausalNet, Dense, adam_step
from .paths import (
    SCHEME_AFFINE_TO_BALL,
    NormalizationRecord,
    PathSet,
    apply_ball_record,
    simple_returns,
    weighted_hist_vol,
)
from .simulate import derived_rng

SIGMA_FLOOR = 1e-4
SIGMA_RAW_INIT = -3.0
RECON_SMOOTHING = 1e-12


def causal_bound_constant(n_steps: int) -> float:
    """Constant 2 (2^T - 1) linking the latent divergence to transport cost."""
    return 2.0 * (2.0**n_steps - 1.0)


def recon_cost(x, y) -> Var:
    """Mean over the batch of the per-path cost sum_t |x_t - y_t|_2.

    The square root is smoothed by a tiny constant so the gradient exists
    at a perfect reconstruction; the offset is far below any tolerance
    used on reported losses.
    """
    x = as_var(x)
    y = as_var(y)
    if x.shape != y.shape or len(x.shape) != 3:
        raise ValueError(f"recon_cost expects matching [n, T, d], got {x.shape} and {y.shape}")
    diff = x - y
    step = sqrt((diff * diff).sum(axis=2) + RECON_SMOOTHING)
    return step.sum(axis=1).mean()


@dataclass
class TrainConfig:
    """Optimizer and loss settings for the training loop."""

    epochs: int = 200
    batch_size: int = 128
    lr: float = 1e-3
    beta: float = 0.5
    anneal_frac: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not 0.0 <= self.anneal_frac <= 1.0:
            raise ValueError("anneal_frac must lie in [0, 1]")

    def effective_beta(self, epoch: int) -> float:
        """Linear ramp from 0 to beta over the first anneal_frac of epochs."""
        ramp = max(1, int(round(self.anneal_frac * self.epochs)))
        if self.anneal_frac == 0.0:
            return self.beta
        return self.beta * min(1.0, epoch / ramp)


@dataclass
class LossReport:
    """Per-epoch loss summary; total = rec + beta * latent holds exactly."""

    rec: float
    latent: float
    beta: float
    total: float
    cw1_upper_bound: float | None = None

    @classmethod
    def build(cls, rec: float, latent: float, beta: float, n_steps: int,
              ball_normalized: bool) -> "LossReport":
        total = rec + beta * latent
        bound = None
        if ball_normalized:
            c = causal_bound_constant(n_steps)
            bound = rec + c * np.sqrt(max(latent, 0.0) / 2.0)
        return cls(rec=float(rec), latent=float(latent), beta=float(beta),
                   total=float(total), cw1_upper_bound=bound)

    def to_dict(self) -> dict:
        return {"rec": self.rec, "latent": self.latent, "beta": self.beta,
                "total": self.total, "cw1_upper_bound": self.cw1_upper_bound}


class TCVAE:
    """Causal encoder pair (mu, sigma), causal decoder, and flow prior.

    The latent dimension per step is d_z; the prior lives on the flat
    latent of dimension d_z * n_steps with time-major coordinate order
    matching the flow's even/odd time masks.
    """

    def __init__(self, d: int = 1, d_z: int = 1, n_steps: int = 60,
                 hidden: int = 32, flow_layers: int = 6, flow_hidden: int = 64,
                 scale_cap: float = 3.0, beta: float = 0.5, seed: int = 0):
        if min(d, d_z, n_steps) < 1:
            raise ValueError("d, d_z and n_steps must be >= 1")
        self.d = d
        self.d_z = d_z
        self.n_steps = n_steps
        self.hidden = hidden
        self.flow_layers = flow_layers
        self.flow_hidden = flow_hidden
        self.scale_cap = float(scale_cap)
        self.beta = float(beta)
        self.seed = seed
        self.dt = 1.0
        self.norm: Optional[NormalizationRecord] = None
        self.enc_mu = CausalNet(d, d_z, hidden, derived_rng(seed, 1))
        self.enc_sigma = CausalNet(d, d_z, hidden, derived_rng(seed, 2))
        # start the posterior scale small: softplus(0) would put noise far
        # above the encoder-mean spread at initialization and the decoder
        # then settles on ignoring the latent entirely
        self.enc_sigma.bo.value[...] += SIGMA_RAW_INIT
        self.dec = CausalNet(self.dec_in_dim(), d, hidden, derived_rng(seed, 3))
        self.prior = FlowPrior(d_z * n_steps, d_z=d_z, n_layers=flow_layers,
                               hidden=flow_hidden, scale_cap=scale_cap,
                               seed=seed)

    def dec_in_dim(self) -> int:
        return self.d_z

    def sigma(self, x: Var) -> Var:
        """Elementwise posterior scale, floored away from zero."""
        return softplus(self.enc_sigma(x)) + SIGMA_FLOOR

    def decode(self, z: Var, condition=None) -> Var:
        if condition is not None:
            raise ValueError("unconditional model takes no condition")
        return self.dec(z)

    def named_params(self) -> list:
        out = [(f"enc_mu.{n}", p) for n, p in self.enc_mu.params()]
        out += [(f"enc_sigma.{n}", p) for n, p in self.enc_sigma.params()]
        out += [(f"dec.{n}", p) for n, p in self.dec.params()]
        out += [(f"prior.{n}", p) for n, p in self.prior.params()]
        return out

    def params(self) -> list:
        return [p for _, p in self.named_params()]


@dataclass
class ConditionSpec:
    """How to turn a price history into the model's condition vector."""

    kind: str = "hist_vol"
    truncation: int = 50
    alpha: float = 1.5
    delta: float = 1.0

    def __post_init__(self) -> None:
        if self.kind != "hist_vol":
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")

    @property
    def dim(self) -> int:
        return 1

    @property
    def min_history(self) -> int:
        return self.truncation + 1

    def compute(self, prices: np.ndarray) -> np.ndarray:
        prices = np.asarray(prices, dtype=float).ravel()
        if prices.size < self.min_history:
            raise ValueError(
                f"history too short: need at least {self.min_history} prices")
        r = simple_returns(prices)
        vol = weighted_hist_vol(r, alpha=self.alpha, delta=self.delta,
                                truncation=self.truncation)
        return np.array([vol[-1]])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "truncation": self.truncation,
                "alpha": self.alpha, "delta": self.delta}

    @classmethod
    def from_dict(cls, d: dict) -> "ConditionSpec":
        return cls(**d)


class ConditionalTCVAE(TCVAE):
    """TCVAE whose decoder also sees an embedded condition at every step."""

    def __init__(self, d: int = 1, d_z: int = 1, n_steps: int = 60,
                 d_c: int = 1, embed_dim: int = 32, hidden: int = 32,
                 flow_layers: int = 6, flow_hidden: int = 64,
                 scale_cap: float = 3.0, beta: float = 0.5, seed: int = 0,
                 cond_spec: ConditionSpec | None = None):
        if d_c < 1:
            raise ValueError("d_c must be >= 1")
        self.d_c = d_c
        self.embed_dim = embed_dim
        super().__init__(d=d, d_z=d_z, n_steps=n_steps, hidden=hidden,
                         flow_layers=flow_layers, flow_hidden=flow_hidden,
                         scale_cap=scale_cap, beta=beta, seed=seed)
        self.embed = Dense(d_c, embed_dim, derived_rng(seed, 4), activation=True)
        self.cond_spec = cond_spec

    def dec_in_dim(self) -> int:
        return self.d_z + self.embed_dim

    def decode(self, z: Var, condition=None) -> Var:
        if condition is None:
            raise ValueError("conditional model needs a condition")
        c = as_var(condition)
        if len(c.shape) != 2 or c.shape[1] != self.d_c:
            raise ValueError(
                f"condition must be [n, {self.d_c}], got {c.shape}")
        n = z.shape[0]
        e = self.embed(c)
        tiled = e.reshape(n, 1, self.embed_dim) + np.zeros(
            (n, self.n_steps, self.embed_dim))
        return self.dec(concat([z, tiled], axis=2))

    def named_params(self) -> list:
        out = super().named_params()
        out += [(f"embed.{n}", p) for n, p in self.embed.params()]
        return out


def encode(m: TCVAE, x, eps) -> Var:
    """Reparameterized latent z = enc_mu(x) + sigma(x) * eps.

    With eps held fixed the map x -> z is causal, so (X, Z) is a causal
    coupling by construction.
    """
    x = as_var(x)
    if len(x.shape) != 3 or x.shape[1] != m.n_steps or x.shape[2] != m.d:
        raise ValueError(
            f"encode expects [n, {m.n_steps}, {m.d}], got {x.shape}")
    eps_arr = eps.value if isinstance(eps, Var) else np.asarray(eps, dtype=float)
    if eps_arr.shape != (x.shape[0], m.n_steps, m.d_z):
        raise ValueError(
            f"eps must be [n, {m.n_steps}, {m.d_z}], got {eps_arr.shape}")
    return m.enc_mu(x) + m.sigma(x) * eps_arr


def _loss_terms(m: TCVAE, xb: np.ndarray, epsb: np.ndarray,
                condition=None) -> tuple[Var, Var]:
    """Reconstruction and latent Monte Carlo terms as differentiable scalars."""
    x = Var(np.asarray(xb, dtype=float))
    n = x.shape[0]
    mu = m.enc_mu(x)
    sigma = m.sigma(x)
    z = mu + sigma * epsb
    y = m.decode(z, condition)
    rec = recon_cost(x, y)
    dim = m.d_z * m.n_steps
    z_flat = z.reshape(n, dim)
    # log q(z|x) at the sampled z: the quadratic form collapses to |eps|^2
    eps_sq = np.sum(np.asarray(epsb, dtype=float).reshape(n, -1) ** 2, axis=1)
    log_q = (-1.0) * log(sigma).reshape(n, dim).sum(axis=1) \
        - 0.5 * eps_sq - 0.5 * dim * np.log(2.0 * np.pi)
    log_p = m.prior.log_prob(z_flat)
    latent = (log_q - log_p).mean()
    return rec, latent


def reconstruction_loss(m: TCVAE, batch, eps_batch, condition=None) -> float:
    """Mean per-path transport cost between inputs and reconstructions."""
    batch = np.asarray(batch, dtype=float)
    if batch.size == 0:
        raise ValueError("batch must be nonempty")
    cvar = _condition_var(m, condition, batch.shape[0])
    rec, _ = _loss_terms(m, batch, np.asarray(eps_batch, dtype=float), cvar)
    return float(rec.value)


def latent_loss(m: TCVAE, batch, eps_batch, condition=None) -> float:
    """One-sample Monte Carlo estimate of E[log q(Z|X) - log p_prior(Z)]."""
    batch = np.asarray(batch, dtype=float)
    if batch.size == 0:
        raise ValueError("batch must be nonempty")
    cvar = _condition_var(m, condition, batch.shape[0])
    _, latent = _loss_terms(m, batch, np.asarray(eps_batch, dtype=float), cvar)
    return float(latent.value)


def _condition_var(m: TCVAE, condition, n: int):
    if condition is None:
        return None
    c = np.asarray(condition, dtype=float)
    if c.ndim == 1:
        c = np.broadcast_to(c, (n, c.size)).copy()
    return Var(c)


def _run_training(m: TCVAE, x_all: np.ndarray, cond_all: np.ndarray | None,
                  cfg: TrainConfig, ball_normalized: bool):
    n = x_all.shape[0]
    params = m.params()
    adam = AdamState(lr=cfg.lr)
    eps_rng = derived_rng(cfg.seed, 20)
    order_rng = derived_rng(cfg.seed, 21)
    history: list[LossReport] = []
    for epoch in range(cfg.epochs):
        beta_eff = cfg.effective_beta(epoch)
        perm = order_rng.permutation(n)
        rec_sum = 0.0
        lat_sum = 0.0
        for k, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start : start + cfg.batch_size]
            xb = x_all[idx]
            epsb = eps_rng.standard_normal((len(idx), m.n_steps, m.d_z))
            cvar = None if cond_all is None else Var(cond_all[idx])
            rec, latent = _loss_terms(m, xb, epsb, cvar)
            total = rec + beta_eff * latent
            if not np.isfinite(total.value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {k}")
            backward(total, leaves=params)
            try:
                adam_step(adam, params)
            except FloatingPointError as err:
                raise TrainingDiverged(
                    f"non-finite gradient at epoch {epoch}, batch {k}: {err}"
                ) from err
            rec_sum += float(rec.value) * len(idx)
            lat_sum += float(latent.value) * len(idx)
        history.append(LossReport.build(rec_sum / n, lat_sum / n, beta_eff,
                                        m.n_steps, ball_normalized))
    m.beta = cfg.beta
    return m, history


def train(m: TCVAE, data: PathSet, cfg: TrainConfig):
    """Minibatch Adam on the total loss; returns (model, per-epoch reports).

    The model adopts the data's dt and normalization record so that
    generation maps back to data scale.  Deterministic for a fixed seed.
    """
    if data.n_steps != m.n_steps or data.n_channels != m.d:
        raise ValueError(
            f"data is [n, {data.n_steps}, {data.n_channels}] but the model "
            f"expects [n, {m.n_steps}, {m.d}]")
    m.dt = data.dt
    m.norm = data.normalization
    ball = data.normalization.scheme == SCHEME_AFFINE_TO_BALL
    return _run_training(m, data.values, None, cfg, ball)


def train_conditional(m: ConditionalTCVAE, data: PathSet, conditions,
                      cfg: TrainConfig):
    """Conditional variant of ``train``: one condition row per path."""
    if not isinstance(m, ConditionalTCVAE):
        raise TypeError("train_conditional needs a ConditionalTCVAE")
    cond = np.asarray(conditions, dtype=float)
    if cond.ndim == 1:
        cond = cond[:, None]
    if cond.shape != (data.n_paths, m.d_c):
        raise ValueError(
            f"conditions must be [{data.n_paths}, {m.d_c}], got {cond.shape}")
    if data.n_steps != m.n_steps or data.n_channels != m.d:
        raise ValueError(
            f"data is [n, {data.n_steps}, {data.n_channels}] but the model "
            f"expects [n, {m.n_steps}, {m.d}]")
    m.dt = data.dt
    m.norm = data.normalization
    ball = data.normalization.scheme == SCHEME_AFFINE_TO_BALL
    return _run_training(m, data.values, cond, cfg, ball)


def generate(m: TCVAE, n: int, seed: int) -> PathSet:
    """Decode prior samples and map back to data scale."""
    z = m.prior.sample(n, seed)
    y = m.decode(Var(z.reshape(n, m.n_steps, m.d_z))).value
    if m.norm is not None:
        y = apply_ball_record(y, m.norm, inverse=True)
    return PathSet(y, dt=m.dt, label="generated")


def generate_conditional(m: ConditionalTCVAE, condition, n: int,
                         seed: int) -> PathSet:
    """Decode prior samples concatenated with one embedded condition."""
    if not isinstance(m, ConditionalTCVAE):
        raise TypeError("generate_conditional needs a ConditionalTCVAE")
    c = np.asarray(condition, dtype=float).ravel()
    if c.size != m.d_c:
        raise ValueError(f"condition must have {m.d_c} entries, got {c.size}")
    z = m.prior.sample(n, seed)
    cvar = Var(np.broadcast_to(c, (n, m.d_c)).copy())
    y = m.decode(Var(z.reshape(n, m.n_steps, m.d_z)), cvar).value
    if m.norm is not None:
        y = apply_ball_record(y, m.norm, inverse=True)
    return PathSet(y, dt=m.dt, label="generated-conditional")


def extend_path(m: ConditionalTCVAE, history, n_blocks: int,
                seed: int) -> np.ndarray:
    """Iteratively append conditionally generated return blocks to a history.

    Each round computes the condition from the running price path, generates
    one block of n_steps gross returns relative to the last price, and
    appends last_price * block.  Returns the extended 1-D price array.
    """
    if m.cond_spec is None:
        raise ValueError("model has no condition spec for path extension")
    if n_blocks < 0:
        raise ValueError("n_blocks must be >= 0")
    out = np.asarray(history, dtype=float).ravel().copy()
    if out.size < m.cond_spec.min_history:
        raise ValueError(
            f"history too short: need at least {m.cond_spec.min_history} prices")
    for b in range(n_blocks):
        c = m.cond_spec.compute(out)
        block_seed = int(derived_rng(seed, 100 + b).integers(2**31))
        block = generate_conditional(m, c, 1, block_seed).values[0, :, 0]
        out = np.concatenate([out, out[-1] * block])
    return out


def make_conditional_dataset(prices, block_len: int, cond_spec: ConditionSpec,
                             stride: int = 1, dt: float = 1.0):
    """Slice a long price series into (return block, condition) pairs.

    An anchor index a contributes the block S_{a+1:a+block_len} / S_a and
    the condition computed from the history up to a.  Anchors start once
    the condition window is full.
    """
    s = np.asarray(prices, dtype=float).ravel()
    if stride < 1 or block_len < 1:
        raise ValueError("stride and block_len must be >= 1")
    first = cond_spec.truncation
    last = s.size - 1 - block_len
    anchors = np.arange(first, last + 1, stride)
    if anchors.size == 0:
        raise ValueError("series too short for the condition window and block")
    if np.any(s[anchors] == 0.0):
        raise ValueError("anchor price of zero cannot normalize a block")
    r = simple_returns(s)
    vol = weighted_hist_vol(r, alpha=cond_spec.alpha, delta=cond_spec.delta,
                            truncation=cond_spec.truncation)
    blocks = np.stack([s[a + 1 : a + 1 + block_len] / s[a] for a in anchors])
    conditions = vol[anchors - 1][:, None]
    return PathSet(blocks[:, :, None], dt=dt, label="conditional-blocks"), conditions


__all__ = [
    "TCVAE",
    "ConditionalTCVAE",
    "ConditionSpec",
    "TrainConfig",
    "LossReport",
    "causal_bound_constant",
    "recon_cost",
    "encode",
    "reconstruction_loss",
    "latent_loss",
    "train",
    "train_conditional",
    "generate",
    "generate_conditional",
    "extend_path",
    "make_conditional_dataset",
]
