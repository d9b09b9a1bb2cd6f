"""Stylized facts of return series: tails, clustering, autocorrelations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats


def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Standard sample ACF at lags 1..max_lag (global mean, biased normalizer)."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if max_lag < 1 or n <= max_lag + 1:
        raise ValueError("series too short for the requested lags")
    xc = x - x.mean()
    denom = np.sum(xc * xc)
    if denom == 0:
        raise ValueError("constant series has no autocorrelation")
    return np.array([np.sum(xc[:-k] * xc[k:]) / denom for k in range(1, max_lag + 1)])


def hill_estimator(losses: np.ndarray, tail_fraction: float = 0.05) -> float:
    """Hill tail-index estimate on the largest ``tail_fraction`` of losses.

    Uses the order statistics above the cutoff; requires at least two strictly
    positive losses in the tail.  Larger values mean thinner tails.
    """
    losses = np.asarray(losses, dtype=float).ravel()
    losses = losses[losses > 0]
    if losses.size < 2:
        raise ValueError("need at least two positive losses for a tail estimate")
    k = max(int(np.ceil(tail_fraction * losses.size)), 2)
    k = min(k, losses.size - 1)
    top = np.sort(losses)[::-1]
    cutoff = top[k]
    if cutoff <= 0:
        raise ValueError("tail cutoff is not positive")
    return float(1.0 / np.mean(np.log(top[:k] / cutoff)))


@dataclass
class StylizedReport:
    skewness: float
    excess_kurtosis: float
    acf_returns: np.ndarray
    acf_squared: np.ndarray
    acf_absolute: np.ndarray
    hill_tail_index: float | None
    n_obs: int
    max_lag: int

    def to_dict(self) -> dict:
        return {
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "acf_returns": list(map(float, self.acf_returns)),
            "acf_squared": list(map(float, self.acf_squared)),
            "acf_absolute": list(map(float, self.acf_absolute)),
            "hill_tail_index": self.hill_tail_index,
            "n_obs": self.n_obs,
            "max_lag": self.max_lag,
        }


def stylized_stats(returns: np.ndarray, max_lag: int = 20) -> StylizedReport:
    """Summary of the classic stylized facts for one return series.

    Reports moments, the ACF of returns, squared and absolute returns, and a
    Hill tail-index estimate on the top 5 percent of losses (None when the
    series has too few losses to estimate a tail).
    """
    r = np.asarray(returns, dtype=float).ravel()
    if r.size <= max_lag + 2:
        raise ValueError(f"need more than {max_lag + 2} observations, got {r.size}")
    if np.all(r == r[0]):
        raise ValueError("constant return series")
    try:
        hill = hill_estimator(-r)
    except ValueError:
        hill = None
    return StylizedReport(
        skewness=float(stats.skew(r)),
        excess_kurtosis=float(stats.kurtosis(r, fisher=True)),
        acf_returns=autocorrelation(r, max_lag),
        acf_squared=autocorrelation(r**2, max_lag),
        acf_absolute=autocorrelation(np.abs(r), max_lag),
        hill_tail_index=hill,
        n_obs=int(r.size),
        max_lag=max_lag,
    )


__all__ = ["stylized_stats", "autocorrelation", "hill_estimator", "StylizedReport"]
