"""Discrete-time market-model samplers: Black-Scholes, Heston, and a
4-factor path-dependent volatility model.

All samplers are deterministic functions of (params, n_paths, seed).  Main
noise is drawn from stream 0 of a counter-based generator keyed on the seed,
auxiliary noise (burn-in) from stream 1, so that degenerate parameter choices
reproduce the simpler models on the identical noise stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paths import PathSet

SIGMA_FLOOR = 1e-6


def derived_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream); independent across streams."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class BSParams:
    mu: float = 0.1
    sigma: float = 0.2
    s0: float = 1.0
    dt: float = 1.0 / 12.0
    n_steps: int = 60

    def validate(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.s0 <= 0:
            raise ValueError(f"s0 must be > 0, got {self.s0}")
        if self.dt <= 0 or self.n_steps < 1:
            raise ValueError("dt must be > 0 and n_steps >= 1")


@dataclass
class HestonParams:
    mu: float = 0.02
    kappa: float = 1.0
    theta: float = 0.2
    xi: float = 0.5
    rho: float = -0.9
    s0: float = 1.0
    v0: float = 0.2
    dt: float = 1.0 / 12.0
    n_steps: int = 60

    def validate(self):
        if abs(self.rho) > 1:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        if min(self.kappa, self.theta, self.xi, self.v0) < 0:
            raise ValueError("kappa, theta, xi, v0 must be >= 0")
        if self.s0 <= 0 or self.dt <= 0 or self.n_steps < 1:
            raise ValueError("s0 > 0, dt > 0, n_steps >= 1 required")


@dataclass
class PDV4Params:
    """Volatility is an affine function of two kernel-weighted factors:
    sigma = beta0 + beta1*R1 + beta2*sqrt(R2), where R1 blends two
    exponentially weighted past-return averages and R2 two past-squared-return
    averages."""

    mu: float = 0.1
    beta0: float = 0.04
    beta1: float = -0.13
    beta2: float = 0.65
    lambda11: float = 55.0
    lambda12: float = 10.0
    theta1: float = 0.25
    lambda21: float = 20.0
    lambda22: float = 3.0
    theta2: float = 0.5
    s0: float = 1.0
    dt: float = 1.0 / 365.0
    n_steps: int = 60
    burn_in: int = 250

    def validate(self):
        if min(self.lambda11, self.lambda12, self.lambda21, self.lambda22) <= 0:
            raise ValueError("lambda coefficients must be > 0")
        if not (0 <= self.theta1 <= 1 and 0 <= self.theta2 <= 1):
            raise ValueError("theta1, theta2 must lie in [0, 1]")
        if self.s0 <= 0 or self.dt <= 0 or self.n_steps < 1 or self.burn_in < 0:
            raise ValueError("s0 > 0, dt > 0, n_steps >= 1, burn_in >= 0 required")


def simulate_bs(p: BSParams, n_paths: int, seed: int) -> PathSet:
    """Exact log-normal scheme: S_{j+1} = S_j exp((mu - sigma^2/2) dt + sigma sqrt(dt) xi)."""
    p.validate()
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    rng = derived_rng(seed, 0)
    z = rng.standard_normal((n_paths, p.n_steps))
    log_incr = (p.mu - 0.5 * p.sigma**2) * p.dt + p.sigma * np.sqrt(p.dt) * z
    log_path = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(log_incr, axis=1)], axis=1
    )
    values = p.s0 * np.exp(log_path)
    return PathSet(values[:, :, None], dt=p.dt, label="bs")


def simulate_heston(p: HestonParams, n_paths: int, seed: int) -> PathSet:
    """Full-truncation Euler for the variance, log-Euler for the price.

    The price noise is drawn first so that xi=0, v0=theta reproduces
    simulate_bs(sigma=sqrt(theta)) exactly on the same seed.
    """
    p.validate()
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    rng = derived_rng(seed, 0)
    z_s = rng.standard_normal((n_paths, p.n_steps))
    z_raw = rng.standard_normal((n_paths, p.n_steps))
    # Cholesky of [[1, rho], [rho, 1]]
    z_v = p.rho * z_s + np.sqrt(1.0 - p.rho**2) * z_raw

    sqdt = np.sqrt(p.dt)
    log_s = np.zeros((n_paths, p.n_steps + 1))
    v = np.full(n_paths, p.v0)
    v_hist = np.empty((n_paths, p.n_steps + 1))
    v_hist[:, 0] = v
    for j in range(p.n_steps):
        v_plus = np.maximum(v, 0.0)
        # routing the drift through sig**2 keeps the xi=0 case bit-equal to BS
        sig = np.sqrt(v_plus)
        dlog = (p.mu - 0.5 * sig**2) * p.dt + sig * sqdt * z_s[:, j]
        log_s[:, j + 1] = log_s[:, j] + dlog
        v = v + p.kappa * (p.theta - v_plus) * p.dt + p.xi * np.sqrt(v_plus) * sqdt * z_v[:, j]
        v_hist[:, j + 1] = v
    values = np.stack([p.s0 * np.exp(log_s), np.maximum(v_hist, 0.0)], axis=2)
    return PathSet(values, dt=p.dt, label="heston")


def simulate_pdv4(p: PDV4Params, n_paths: int, seed: int) -> PathSet:
    """Euler scheme on the four factors with a log-price step.

    Factors start at zero and are warmed up over ``burn_in`` discarded steps
    driven by an auxiliary noise stream, so the main stream stays aligned with
    simulate_bs for the degenerate beta1 = beta2 = 0 case.  Returns prices in
    channel 0 and the instantaneous volatility in channel 1.
    """
    p.validate()
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    z_main = derived_rng(seed, 0).standard_normal((n_paths, p.n_steps))
    z_burn = (
        derived_rng(seed, 1).standard_normal((n_paths, p.burn_in))
        if p.burn_in
        else np.zeros((n_paths, 0))
    )

    lam1 = np.array([p.lambda11, p.lambda12])
    lam2 = np.array([p.lambda21, p.lambda22])
    w1 = np.array([1.0 - p.theta1, p.theta1])
    w2 = np.array([1.0 - p.theta2, p.theta2])
    r1 = np.zeros((n_paths, 2))
    r2 = np.zeros((n_paths, 2))
    sqdt = np.sqrt(p.dt)

    def vol(r1_, r2_):
        sig = p.beta0 + p.beta1 * (r1_ @ w1) + p.beta2 * np.sqrt(np.maximum(r2_ @ w2, 0.0))
        return np.maximum(sig, SIGMA_FLOOR)

    def step(r1_, r2_, z):
        sig = vol(r1_, r2_)
        dlog = (p.mu - 0.5 * sig**2) * p.dt + sig * sqdt * z
        ret = np.expm1(dlog)
        r1_next = r1_ + lam1 * (ret[:, None] - r1_ * p.dt)
        r2_next = r2_ + lam2 * ((ret**2)[:, None] - r2_ * p.dt)
        return sig, dlog, r1_next, r2_next

    for j in range(p.burn_in):
        _, _, r1, r2 = step(r1, r2, z_burn[:, j])

    log_s = np.zeros((n_paths, p.n_steps + 1))
    sig_hist = np.empty((n_paths, p.n_steps + 1))
    for j in range(p.n_steps):
        sig, dlog, r1, r2 = step(r1, r2, z_main[:, j])
        sig_hist[:, j] = sig
        log_s[:, j + 1] = log_s[:, j] + dlog
    sig_hist[:, p.n_steps] = vol(r1, r2)
    values = np.stack([p.s0 * np.exp(log_s), sig_hist], axis=2)
    return PathSet(values, dt=p.dt, label="pdv4")


def realized_vol(paths: PathSet, channel: int = 0) -> np.ndarray:
    """Annualized root-mean-square log-return volatility, one value per path."""
    s = paths.values[:, :, channel]
    if np.any(s <= 0):
        raise ValueError("realized_vol needs strictly positive prices")
    dlog = np.diff(np.log(s), axis=1)
    n_incr = dlog.shape[1]
    return np.sqrt(np.sum(dlog**2, axis=1) / (n_incr * paths.dt))


__all__ = [
    "BSParams",
    "HestonParams",
    "PDV4Params",
    "simulate_bs",
    "simulate_heston",
    "simulate_pdv4",
    "realized_vol",
    "derived_rng",
]
