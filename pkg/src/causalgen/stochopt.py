"""Downstream stochastic-optimization evaluators on path distributions.

Self-financing wealth dynamics, mean-variance frontiers, log-utility
maximization, least-squares Monte Carlo optimal stopping, and average
value-at-risk, plus a brute-force verifier of the Lipschitz robustness
bounds that tie optimal values under two path laws to the causal and
bicausal transport distances between them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .metrics.discrete import (
    MATCH_TOL,
    DiscreteMeasure,
    cw1_aw1_bruteforce,
    _group_rows,
)
from .paths import PathSet

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _prices(paths, dt: float | None) -> tuple[np.ndarray, float]:
    """Coerce input to a single-channel price array [n, T] plus its dt."""
    if isinstance(paths, PathSet):
        if paths.n_channels != 1:
            raise ValueError("wealth dynamics need single-channel price paths")
        return paths.values[:, :, 0], paths.dt
    arr = np.asarray(paths, dtype=float)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise ValueError("wealth dynamics need single-channel price paths")
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"expected [n, T] price array, got shape {arr.shape}")
    if dt is None:
        raise ValueError("dt is required when paths is a plain array")
    return arr, float(dt)


@dataclass
class Strategy:
    """Trading rule giving the wealth proportion held in the risky asset.

    Kind ``"constant"`` holds the fixed proportion ``pi`` at every rebalance.
    Kind ``"tabular"`` calls ``table(j, prefix)`` with the step index ``j``
    and the price prefix ``[n, j + 1]`` and expects per-path proportions;
    the rule sees only the prefix, which keeps it adapted.  ``bound``, when
    set, caps the absolute proportion and is enforced at evaluation time.
    """

    kind: str
    pi: float = 0.0
    table: Callable[[int, np.ndarray], np.ndarray] | None = None
    bound: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "tabular"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "tabular" and self.table is None:
            raise ValueError("tabular strategy needs a table callable")
        if self.bound is not None and self.bound < 0:
            raise ValueError("strategy bound must be nonnegative")

    @classmethod
    def constant(cls, pi: float, bound: float | None = None) -> "Strategy":
        return cls(kind="constant", pi=float(pi), bound=bound)

    @classmethod
    def tabular(cls, table: Callable[[int, np.ndarray], np.ndarray],
                bound: float | None = None) -> "Strategy":
        return cls(kind="tabular", table=table, bound=bound)

    def proportions(self, j: int, prefix: np.ndarray) -> np.ndarray:
        n = prefix.shape[0]
        if self.kind == "constant":
            out = np.full(n, self.pi)
        else:
            out = np.asarray(self.table(j, prefix), dtype=float)
            if out.ndim == 0:
                out = np.full(n, float(out))
            if out.shape != (n,):
                raise ValueError("strategy table must return one proportion per path")
        if self.bound is not None and np.any(np.abs(out) > self.bound + 1e-12):
            raise ValueError("strategy exceeds its stated bound")
        return out


def _as_strategy(strategy) -> Strategy:
    if isinstance(strategy, Strategy):
        return strategy
    return Strategy.constant(float(strategy))


def wealth_path(paths, strategy, r: float, w0: float = 1.0,
                dt: float | None = None) -> np.ndarray:
    """Self-financing wealth at every rebalance date, shape [n, T].

    One risky asset (the given price paths) plus a bank account growing at
    the continuously compounded rate ``r``.  The proportion held in the
    risky asset is reset to the strategy's value at each step:
    W_{j+1} = W_j (pi_j S_{j+1} / S_j + (1 - pi_j) e^{r dt}).
    """
    s, dt = _prices(paths, dt)
    if not w0 > 0:
        raise ValueError("w0 must be positive")
    strategy = _as_strategy(strategy)
    n, t_len = s.shape
    erdt = np.exp(r * dt)
    w = np.empty((n, t_len))
    w[:, 0] = w0
    for j in range(t_len - 1):
        pi_j = strategy.proportions(j, s[:, : j + 1])
        gross = s[:, j + 1] / s[:, j]
        w[:, j + 1] = w[:, j] * (pi_j * gross + (1.0 - pi_j) * erdt)
    return w


def wealth_terminal(paths, strategy, r: float, w0: float = 1.0,
                    dt: float | None = None, return_min: bool = False):
    """Per-path terminal wealth; optionally also the per-path running minimum.

    The minimum flags paths whose wealth ever drops to zero or below, which
    makes log-utility undefined downstream.
    """
    w = wealth_path(paths, strategy, r, w0=w0, dt=dt)
    if return_min:
        return w[:, -1], w.min(axis=1)
    return w[:, -1]


@dataclass
class Frontier:
    """Mean-variance points per grid entry plus their Pareto envelope."""

    points: np.ndarray
    envelope: np.ndarray
    grid: np.ndarray

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "envelope": self.envelope.tolist(),
            "grid": self.grid.tolist(),
        }


def pareto_envelope(points: np.ndarray) -> np.ndarray:
    """Upper-left Pareto subset of (mean, variance) points, mean ascending.

    A point survives if no other point has both a higher-or-equal mean and
    a lower-or-equal variance.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be [k, 2] (mean, variance) pairs")
    order = np.lexsort((-pts[:, 0], pts[:, 1]))
    keep = []
    best = -np.inf
    for i in order:
        if pts[i, 0] > best:
            keep.append(i)
            best = pts[i, 0]
    return pts[keep]


def frontier_distance(envelope_a: np.ndarray, envelope_b: np.ndarray,
                      n_grid: int = 50) -> float:
    """Max gap between interpolated variance profiles on the shared mean range."""
    a = np.asarray(envelope_a, dtype=float)
    b = np.asarray(envelope_b, dtype=float)
    lo = max(a[:, 0].min(), b[:, 0].min())
    hi = min(a[:, 0].max(), b[:, 0].max())
    if not hi > lo:
        raise ValueError("envelopes share no mean range")
    grid = np.linspace(lo, hi, n_grid)
    va = np.interp(grid, a[:, 0], a[:, 1])
    vb = np.interp(grid, b[:, 0], b[:, 1])
    return float(np.max(np.abs(va - vb)))


def mv_frontier_constant(paths, r: float, pi_grid, w0: float = 1.0,
                         dt: float | None = None) -> Frontier:
    """Terminal-wealth (mean, variance) per constant proportion in the grid."""
    pi_grid = np.atleast_1d(np.asarray(pi_grid, dtype=float))
    if pi_grid.size == 0:
        raise ValueError("pi_grid must be nonempty")
    pts = np.empty((pi_grid.size, 2))
    for i, pi in enumerate(pi_grid):
        wt = wealth_terminal(paths, Strategy.constant(pi), r, w0=w0, dt=dt)
        pts[i, 0] = wt.mean()
        pts[i, 1] = wt.var()
    return Frontier(points=pts, envelope=pareto_envelope(pts), grid=pi_grid)


def bs_excess_moments(mu: float, sigma: float, r: float,
                      dt: float) -> tuple[float, float]:
    """First two moments of the one-step excess return R - e^{r dt}.

    R = exp((mu - sigma^2 / 2) dt + sigma sqrt(dt) Z) is the lognormal
    gross return of one step.
    """
    rho = np.exp(r * dt)
    er = np.exp(mu * dt)
    er2 = np.exp((2.0 * mu + sigma**2) * dt)
    m = er - rho
    q = er2 - 2.0 * rho * er + rho**2
    return float(m), float(q)


def mv_optimal_reference(kappa: float, m: float, q: float, rho: float,
                         n_steps: int, w0: float) -> tuple[float, float, float]:
    """Target and frontier point of the pre-commitment mean-variance optimum.

    Market: iid one-step excess returns with mean ``m`` and second moment
    ``q``, bank factor ``rho`` per step.  The optimal adapted strategy that
    maximizes E[W_T] - kappa Var[W_T] invests the amount
    u_t(W) = (m / q) (gamma rho^{t + 1 - T} - rho W), and its frontier
    point follows in closed form with beta = 1 - m^2 / q:
    E[W_T] = rho^T w0 + (1 - beta^T) / (2 kappa beta^T),
    Var[W_T] = (1 - beta^T) / (4 kappa^2 beta^T).
    Returns (gamma, mean, variance).
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if not q > 0:
        raise ValueError("excess-return second moment must be positive")
    beta = 1.0 - m * m / q
    if not 0.0 < beta <= 1.0:
        raise ValueError("excess-return moments violate m^2 < q")
    bt = beta**n_steps
    rt = rho**n_steps
    gamma = rt * w0 + 1.0 / (2.0 * kappa * bt)
    mean = rt * w0 + (1.0 - bt) / (2.0 * kappa * bt)
    var = (1.0 - bt) / (4.0 * kappa**2 * bt)
    return float(gamma), float(mean), float(var)


def mv_wealth_terminal_optimal(paths, r: float, gamma: float, m: float,
                               q: float, w0: float = 1.0,
                               dt: float | None = None) -> np.ndarray:
    """Terminal wealth of the pre-commitment optimal strategy on given paths."""
    s, dt = _prices(paths, dt)
    n, t_len = s.shape
    n_steps = t_len - 1
    rho = np.exp(r * dt)
    w = np.full(n, float(w0))
    for j in range(n_steps):
        target = gamma * rho ** (j + 1 - n_steps)
        u = (m / q) * (target - rho * w)
        w = rho * w + u * (s[:, j + 1] / s[:, j] - rho)
    return w


def mv_frontier_optimal_bs(paths, r: float, sigma_grid, kappa_grid,
                           mu: float = 0.1, w0: float = 1.0,
                           dt: float | None = None) -> Frontier:
    """Frontier of pre-commitment optimal lognormal-market strategies.

    For each sigma in the grid the strategy is derived under a lognormal
    step model with drift ``mu`` and that sigma, then applied to the given
    paths for each risk-aversion kappa.  The envelope is the Pareto subset
    over all (sigma, kappa) pairs.
    """
    s, dt = _prices(paths, dt)
    n_steps = s.shape[1] - 1
    rho = np.exp(r * dt)
    sigma_grid = np.atleast_1d(np.asarray(sigma_grid, dtype=float))
    kappa_grid = np.atleast_1d(np.asarray(kappa_grid, dtype=float))
    if sigma_grid.size == 0 or kappa_grid.size == 0:
        raise ValueError("sigma_grid and kappa_grid must be nonempty")
    pts = []
    rows = []
    for sigma in sigma_grid:
        m, q = bs_excess_moments(mu, sigma, r, dt)
        if not q > 0:
            warnings.warn(f"degenerate step model at sigma={sigma}, skipping")
            continue
        for kappa in kappa_grid:
            gamma, _, _ = mv_optimal_reference(kappa, m, q, rho, n_steps, w0)
            wt = mv_wealth_terminal_optimal(s, r, gamma, m, q, w0=w0, dt=dt)
            pts.append((wt.mean(), wt.var()))
            rows.append((sigma, kappa))
    pts = np.asarray(pts, dtype=float)
    rows = np.asarray(rows, dtype=float)
    return Frontier(points=pts, envelope=pareto_envelope(pts), grid=rows)


def log_utility_value(paths, r: float, pi: float, w0: float = 1.0,
                      dt: float | None = None) -> float:
    """Sample mean log terminal wealth; -inf if any path's wealth dies."""
    wt, wmin = wealth_terminal(paths, Strategy.constant(pi), r, w0=w0,
                               dt=dt, return_min=True)
    if np.any(wmin <= 0.0):
        return float("-inf")
    return float(np.mean(np.log(wt)))


def log_utility_constant(paths, r: float, bracket, w0: float = 1.0,
                         dt: float | None = None,
                         xtol: float = 1e-6) -> tuple[float, float]:
    """Golden-section maximization of mean log wealth over constant pi."""
    lo, hi = (float(bracket[0]), float(bracket[1]))
    if not hi > lo:
        raise ValueError("bracket must satisfy lo < hi")

    def f(pi: float) -> float:
        return log_utility_value(paths, r, pi, w0=w0, dt=dt)

    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > xtol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
    pi_star = 0.5 * (a + b)
    value = f(pi_star)
    if not np.isfinite(value):
        raise ValueError("no strategy in the bracket keeps wealth positive")
    return pi_star, value


def make_stopping_payoff(r: float, strike: float,
                         kind: str = "call") -> Callable[[float, np.ndarray], np.ndarray]:
    """Discounted intrinsic payoff g(t, S) = e^{-rt} (S - K)^+ or (K - S)^+."""
    if kind not in ("call", "put"):
        raise ValueError(f"unknown payoff kind {kind!r}")

    def g(t: float, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if kind == "call":
            intrinsic = np.maximum(s - strike, 0.0)
        else:
            intrinsic = np.maximum(strike - s, 0.0)
        return np.exp(-r * t) * intrinsic

    return g


def _fit_continuation(x: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    """Polynomial least-squares fit values, reducing degree when singular."""
    if np.ptp(x) == 0.0:
        return np.full(x.size, y.mean())
    deg = min(degree, x.size - 1)
    scale = max(float(np.abs(x).max()), 1.0)
    while True:
        v = np.vander(x / scale, deg + 1, increasing=True)
        coef, _, rank, _ = np.linalg.lstsq(v, y, rcond=None)
        if rank == deg + 1 or deg == 0:
            return v @ coef
        warnings.warn(
            f"continuation regression singular at degree {deg}, reducing")
        deg -= 1


def lsmc_optimal_stopping(paths, payoff, basis_degree: int = 3,
                          dt: float | None = None) -> tuple[float, float]:
    """Least-squares Monte Carlo value of sup over stopping times of g(tau, S_tau).

    Backward induction with polynomial regression of the realized future
    payoff on the current price over in-the-money paths.  The payoff must
    already include any discounting (g takes the calendar time t = j dt).
    Returns the lower-biased value estimate and its standard error.
    """
    s, dt = _prices(paths, dt)
    n, t_len = s.shape
    if n < 1000:
        raise ValueError("least-squares Monte Carlo needs at least 1000 paths")
    if basis_degree < 0:
        raise ValueError("basis_degree must be nonnegative")
    times = np.arange(t_len) * dt
    cash = np.array(payoff(times[-1], s[:, -1]), dtype=float)
    if cash.shape != (n,):
        raise ValueError("payoff must return one value per path")
    for j in range(t_len - 2, -1, -1):
        immediate = np.asarray(payoff(times[j], s[:, j]), dtype=float)
        itm = immediate > 0.0
        if not np.any(itm):
            continue
        cont = _fit_continuation(s[itm, j], cash[itm], basis_degree)
        exercise = np.flatnonzero(itm)[immediate[itm] >= cont]
        cash[exercise] = immediate[exercise]
    value = float(cash.mean())
    stderr = float(cash.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return value, stderr


def avar(samples, alpha: float) -> float:
    """Average value-at-risk of an empirical sample via the dual form.

    AVaR_alpha(U) = min_z { (1/alpha) E[(z - U)^+] - z }; the minimum is
    attained at the empirical alpha-quantile, so the computation is exact.
    """
    u = np.asarray(samples, dtype=float).ravel()
    if u.size == 0:
        raise ValueError("avar needs at least one sample")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    su = np.sort(u)
    k = int(np.ceil(alpha * u.size))
    z = su[min(max(k, 1), u.size) - 1]
    return float(np.mean(np.maximum(z - u, 0.0)) / alpha - z)


@dataclass
class OptProblem:
    """Bounded trading P&L, plain expectation or run through AVaR.

    Payoff Q(x, h) = sum_t h_t . (x_{t+1} - x_t) over controls bounded by
    ``bound`` elementwise.  Q is 2 * bound Lipschitz in the path under the
    cost sum_t |x_t - y_t|_1 and linear, hence convex, in the control.
    For the AVaR variant the effective Lipschitz constant picks up 1/alpha.
    """

    kind: str
    bound: float
    alpha: float | None = None
    convex_in_h: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("expected_pnl", "avar_pnl"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.bound < 0:
            raise ValueError("bound must be nonnegative")
        if self.kind == "avar_pnl":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("avar_pnl needs alpha in (0, 1)")

    @property
    def lipschitz(self) -> float:
        if self.kind == "expected_pnl":
            return 2.0 * self.bound
        return 2.0 * self.bound / self.alpha


def _prefix_labels(x: np.ndarray, t: int) -> np.ndarray:
    """Group atoms sharing the path prefix x_{0:t} (inclusive)."""
    k = x.shape[0]
    return _group_rows(x[:, : t + 1, :].reshape(k, -1), MATCH_TOL)


def pnl_value(measure: DiscreteMeasure, bound: float) -> float:
    """Exact inf over bounded adapted controls of the expected trading P&L.

    The objective is linear in the control, so each (time, prefix cell)
    optimizes independently: the best control is -bound times the sign of
    the cell's weighted increment, giving -bound |drift|_1 per cell.
    """
    x, w = measure.paths, measure.weights
    k, t_len, _ = x.shape
    total = 0.0
    for t in range(t_len - 1):
        labels = _prefix_labels(x, t)
        inc = x[:, t + 1, :] - x[:, t, :]
        for c in np.unique(labels):
            sel = labels == c
            drift = (w[sel, None] * inc[sel]).sum(axis=0)
            total -= bound * np.abs(drift).sum()
    return float(total)


def avar_pnl_value(measure: DiscreteMeasure, bound: float,
                   alpha: float) -> float:
    """Exact inf over bounded adapted controls of AVaR of the trading P&L.

    Joint minimization over the controls and the AVaR level z is a linear
    program: minimize (1/alpha) sum_i w_i s_i - z subject to
    s_i >= z - Q_i(h), s_i >= 0, |h| <= bound.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    x, w = measure.paths, measure.weights
    k, t_len, d = x.shape
    starts = np.empty((k, t_len - 1), dtype=int)
    col: dict[tuple[int, int], int] = {}
    n_h = 0
    for t in range(t_len - 1):
        labels = _prefix_labels(x, t)
        for i in range(k):
            key = (t, int(labels[i]))
            if key not in col:
                col[key] = n_h
                n_h += d
            starts[i, t] = col[key]
    n_var = 1 + n_h + k
    inc = x[:, 1:, :] - x[:, :-1, :]
    a_ub = np.zeros((k, n_var))
    for i in range(k):
        a_ub[i, 0] = 1.0
        for t in range(t_len - 1):
            c0 = 1 + starts[i, t]
            a_ub[i, c0 : c0 + d] -= inc[i, t]
        a_ub[i, 1 + n_h + i] = -1.0
    c = np.zeros(n_var)
    c[0] = -1.0
    c[1 + n_h :] = w / alpha
    bounds = ([(None, None)]
              + [(-bound, bound)] * n_h
              + [(0.0, None)] * k)
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(k), bounds=bounds,
                  method="highs")
    if not res.success:
        raise RuntimeError(f"risk linear program failed: {res.message}")
    return float(res.fun)


def problem_value(measure: DiscreteMeasure, problem: OptProblem) -> float:
    """Exact optimal value of the problem under a discrete path measure."""
    if problem.kind == "expected_pnl":
        return pnl_value(measure, problem.bound)
    return avar_pnl_value(measure, problem.bound, problem.alpha)


@dataclass
class GapReport:
    """Optimal values, transport distances, and robustness-bound slacks."""

    value_mu: float
    value_nu: float
    cw1: float
    aw1: float
    lipschitz: float
    slack_causal: float
    slack_bicausal: float

    def to_dict(self) -> dict:
        return {
            "value_mu": self.value_mu,
            "value_nu": self.value_nu,
            "cw1": self.cw1,
            "aw1": self.aw1,
            "lipschitz": self.lipschitz,
            "slack_causal": self.slack_causal,
            "slack_bicausal": self.slack_bicausal,
        }


def robustness_gap_check(mu: DiscreteMeasure, nu: DiscreteMeasure,
                         problem: OptProblem, tol: float = 1e-7) -> GapReport:
    """Verify the Lipschitz robustness bounds on a tiny instance.

    Checks V(mu) - V(nu) <= L * CW1(mu, nu) and |V(mu) - V(nu)| <=
    L * AW1(mu, nu) with the exact optimal values and brute-force LP
    distances under the cost sum_t |x_t - y_t|_1 that matches the P&L
    Lipschitz constant.  Raises RuntimeError if either bound fails by
    more than ``tol``.
    """
    if mu.paths.shape[1] != nu.paths.shape[1]:
        raise ValueError("measures must share the same number of time steps")
    if mu.paths.shape[2] != nu.paths.shape[2]:
        raise ValueError("measures must share the same number of channels")
    if mu.paths.shape[1] > 3:
        raise ValueError("instance too large: more than 3 time steps")
    if max(mu.paths.shape[0], nu.paths.shape[0]) > 8:
        raise ValueError("instance too large: more than 8 atoms")
    cost = np.abs(mu.paths[:, None, :, :] - nu.paths[None, :, :, :]).sum(axis=(2, 3))
    value_mu = problem_value(mu, problem)
    value_nu = problem_value(nu, problem)
    cw1, _ = cw1_aw1_bruteforce(mu, nu, mode="causal", cost=cost)
    aw1, _ = cw1_aw1_bruteforce(mu, nu, mode="bicausal", cost=cost)
    lip = problem.lipschitz
    slack_causal = lip * cw1 - (value_mu - value_nu)
    slack_bicausal = lip * aw1 - abs(value_mu - value_nu)
    if slack_causal < -tol:
        raise RuntimeError(
            f"causal robustness bound violated by {-slack_causal:.3e}")
    if slack_bicausal < -tol:
        raise RuntimeError(
            f"bicausal robustness bound violated by {-slack_bicausal:.3e}")
    return GapReport(value_mu=value_mu, value_nu=value_nu, cw1=float(cw1),
                     aw1=float(aw1), lipschitz=lip,
                     slack_causal=float(slack_causal),
                     slack_bicausal=float(slack_bicausal))
