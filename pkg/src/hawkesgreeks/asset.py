"""Asset log-price paths driven by a thinned Hawkes configuration.

With S_t = s0 exp(X_t),

    X_t = (mu - sigma^2/2) t + sigma W_t - int_0^t (e^{J_s} - 1) lambda(s) ds
          + sum_{T_i <= t} J_{T_i},

where the compensator integral is evaluated exactly per inter-jump segment
through the tabulated kernel. ``discretize`` implements the left-frozen
Euler-type scheme used for strong-convergence studies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hawkes import BaseConfiguration, HawkesParams, HawkesRealization, StripOverflow, thin
from .kernel import JUMP_FUNCTIONS, JumpKernel, kernel_for

KINDS = ("european", "asian")


@dataclass(frozen=True)
class ModelParams:
    """Asset coefficients; ``jump`` names J (``linear`` is J_s = gamma s)."""

    mu: float = 0.05
    sigma: float = 0.10
    s0: float = 5.0
    gamma: float = 0.20
    horizon: float = 1.0
    jump: str = "linear"

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.s0 > 0:
            raise ValueError(f"s0 must be > 0, got {self.s0}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if self.jump not in JUMP_FUNCTIONS:
            raise ValueError(f"unknown jump function {self.jump!r}; choose from {sorted(JUMP_FUNCTIONS)}")
        if self.jump != "zero":
            # H1: J_0 = 0, J strictly increasing and non-negative
            s = np.linspace(0.0, self.horizon, 257)
            j = self.jump_size(s)
            if j[0] != 0.0 or np.any(np.diff(j) <= 0):
                raise ValueError(
                    f"jump function {self.jump!r} with gamma={self.gamma} violates H1 "
                    "(needs J_0 = 0 and J strictly increasing)"
                )

    def jump_size(self, s) -> np.ndarray:
        return JUMP_FUNCTIONS[self.jump](np.asarray(s, dtype=float), self.gamma)

    @property
    def degenerate(self) -> bool:
        """True when J vanishes, so jumps do not move the price."""
        return self.jump == "zero"


def log_price(
    kern: JumpKernel,
    model: ModelParams,
    params: HawkesParams,
    times: np.ndarray,
    wiener: np.ndarray,
    jump_times: np.ndarray,
) -> np.ndarray:
    """X at ``times`` (right-continuous) for a given accepted jump set."""
    times = np.asarray(times, dtype=float)
    psi, phi = kern.integrals(times)
    phi_jumps = kern.phi(jump_times) if jump_times.size else jump_times
    return _log_price(kern, model, params, times, psi, phi, wiener, jump_times, phi_jumps)


def _log_price(kern, model, params, times, psi, phi, wiener, jump_times, phi_jumps):
    comp = params.lambda0 * psi
    if jump_times.size:
        lag = times[:, None] - jump_times[None, :]
        seg = np.exp(params.beta * jump_times)[None, :] * (phi[:, None] - phi_jumps[None, :])
        comp = comp + params.alpha * np.where(lag > 0, seg, 0.0).sum(axis=1)
        jumps = np.where(lag >= 0, kern.J(jump_times)[None, :], 0.0).sum(axis=1)
    else:
        jumps = 0.0
    drift = (model.mu - 0.5 * model.sigma**2) * times
    return drift + model.sigma * wiener - comp + jumps


def trapezoid_with_jumps(
    node_times: np.ndarray, s_right: np.ndarray, s_left: np.ndarray, horizon: float
) -> float:
    """(1/T) int S dt by trapezoids whose cells are split at every jump.

    ``s_right`` holds S(tau) and ``s_left`` S(tau-) at the sorted nodes.
    """
    h = np.diff(node_times)
    return float(np.sum(0.5 * h * (s_right[:-1] + s_left[1:])) / horizon)


@dataclass(frozen=True, eq=False)
class PathRealization:
    """Exact path on the grid, plus values at every candidate time.

    Nodes are the grid merged with all candidate times; the Asian average is
    taken over these nodes so that each accepted jump is a cell boundary.
    """

    model: ModelParams
    params: HawkesParams
    base: BaseConfiguration
    realization: HawkesRealization
    grid: np.ndarray
    x: np.ndarray
    s: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    node_times: np.ndarray
    node_s: np.ndarray
    node_s_left: np.ndarray
    grid_node: np.ndarray
    candidate_node: np.ndarray
    node_phi: np.ndarray
    asian: float

    @property
    def x_T(self) -> float:
        return float(self.x[-1])

    @property
    def s_T(self) -> float:
        return float(self.s[-1])

    @property
    def w_T(self) -> float:
        return float(self.base.wiener_grid[-1])

    def ito_integral(self) -> float:
        """Left-point sum of S dW on the grid (adapted)."""
        return float(np.dot(self.s[:-1], self.base.dw))

    def to_csv(self, path: str | Path) -> None:
        """Write columns t, lambda, X, S on the grid."""
        lam = self.realization.intensity(self.grid)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "lambda", "X", "S"])
            for row in zip(self.grid, lam, self.x, self.s):
                w.writerow([repr(float(v)) for v in row])


def simulate_path(
    model: ModelParams,
    params: HawkesParams,
    base: BaseConfiguration,
    realization: HawkesRealization | None = None,
) -> PathRealization:
    """Evaluate the explicit solution on a thinned base configuration."""
    real = thin(base, params) if realization is None else realization
    if real.overflow:
        raise StripOverflow("thinning overflowed the strip; resample with a taller strip")
    kern = kernel_for(model, params)
    grid = base.grid
    cand = base.times
    n_grid = grid.size

    times = np.concatenate((grid, cand))
    wiener = np.concatenate((base.wiener_grid, base.wiener_at(cand, base.bridge)))
    psi_g, phi_g = kern.grid_integrals(base.n_steps)
    psi_c, phi_c = kern.integrals(cand)
    x_all = _log_price(
        kern, model, params, times,
        np.concatenate((psi_g, psi_c)), np.concatenate((phi_g, phi_c)),
        wiener, real.jump_times, phi_c[real.accepted],
    )
    s_all = model.s0 * np.exp(x_all)

    order = np.argsort(times, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    # log-jump located exactly at each time, so S(t-) = S(t) e^{-jump}
    j_acc = kern.J(real.jump_times)
    on_grid = (grid[:, None] == real.jump_times[None, :]) @ j_acc
    jump_all = np.concatenate((on_grid, np.where(real.accepted_mask, kern.J(cand), 0.0)))
    node_s = s_all[order]
    node_s_left = (s_all * np.exp(-jump_all))[order]
    node_t = times[order]

    return PathRealization(
        model=model,
        params=params,
        base=base,
        realization=real,
        grid=grid,
        x=x_all[:n_grid],
        s=s_all[:n_grid],
        jump_times=real.jump_times,
        jump_sizes=np.expm1(j_acc),
        node_times=node_t,
        node_s=node_s,
        node_s_left=node_s_left,
        grid_node=rank[:n_grid],
        candidate_node=rank[n_grid:],
        node_phi=np.concatenate((phi_g, phi_c))[order],
        asian=trapezoid_with_jumps(node_t, node_s, node_s_left, base.horizon),
    )


def asian_average(path: PathRealization) -> float:
    """Y_T = (1/T) int_0^T S_t dt on the jump-split node partition."""
    return trapezoid_with_jumps(path.node_times, path.node_s, path.node_s_left, path.base.horizon)


@dataclass(frozen=True, eq=False)
class DiscretizedPath:
    grid: np.ndarray
    lambda_n: np.ndarray
    x_n: np.ndarray
    s_n: np.ndarray
    counts: np.ndarray


def discretize(
    model: ModelParams, params: HawkesParams, base: BaseConfiguration, n: int
) -> DiscretizedPath:
    """Left-frozen scheme on n equal steps, sharing the base configuration.

    lambda^n(t_{i+1}) = lambda^n(t_i) + beta dt (lambda0 - lambda^n(t_i))
                        + alpha #{base points in (t_i, t_{i+1}] below lambda^n(t_i)}

    and J is frozen at left endpoints. The base Brownian grid must refine
    the scheme's grid.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if base.n_steps % n:
        raise ValueError(f"base grid ({base.n_steps} steps) does not refine n={n}")
    lam0, alpha, beta = params.lambda0, params.alpha, params.beta
    T = base.horizon
    dt = T / n
    grid = np.linspace(0.0, T, n + 1)
    rho = 1.0 - beta * dt

    # cell i holds candidates with t in (t_i, t_{i+1}]
    cell = np.clip(np.ceil(base.times / dt).astype(int) - 1, 0, n - 1)
    counts = np.zeros(n)
    in_cell_tail = np.zeros(n)  # sum over accepted of (t_{i+1} - tau)
    excess_at = 0.0  # lambda^n(t_i) - lambda0 at the last visited cell
    last_cell = 0
    current = -1
    threshold = lam0
    for j in range(base.times.size):
        i = cell[j]
        if i != current:
            excess_at *= rho ** (i - last_cell)
            # fold in the counts of the previous cell
            if current >= 0 and counts[current]:
                excess_at += alpha * counts[current] * rho ** (i - current - 1)
            last_cell = i
            current = i
            threshold = lam0 + excess_at
            if threshold > base.strip_height:
                raise StripOverflow("discretized intensity exceeded the strip height")
        if base.marks[j] <= threshold:
            counts[i] += 1
            in_cell_tail[i] += grid[i + 1] - base.times[j]

    excess = np.zeros(n + 1)
    for i in range(n):
        excess[i + 1] = rho * excess[i] + alpha * counts[i]
    lam_n = lam0 + excess

    j_left = model.jump_size(grid[:-1])
    cell_int = lam_n[:-1] * dt + 0.5 * beta * dt * dt * (lam0 - lam_n[:-1]) + alpha * in_cell_tail
    increments = -np.expm1(j_left) * cell_int + j_left * counts
    w = base.wiener_grid[:: base.n_steps // n]
    x_n = (model.mu - 0.5 * model.sigma**2) * grid + model.sigma * w
    x_n = x_n + np.concatenate(([0.0], np.cumsum(increments)))
    return DiscretizedPath(grid, lam_n, x_n, model.s0 * np.exp(x_n), counts)


def payoff(kind: str, terminal, strike) -> np.ndarray:
    """Call payoff (x - K)^+ on S_T (european) or Y_T (asian)."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if np.any(np.asarray(strike) < 0):
        raise ValueError("strike must be >= 0")
    return np.maximum(np.asarray(terminal, dtype=float) - strike, 0.0)


def black_scholes_delta(model: ModelParams, strike: float, discount: bool = False) -> float:
    """Delta of the undiscounted (or discounted) call under pure GBM."""
    s0, mu, sig, T = model.s0, model.mu, model.sigma, model.horizon
    if strike == 0:
        d1_cdf = 1.0
    else:
        d1 = (math.log(s0 / strike) + (mu + 0.5 * sig * sig) * T) / (sig * math.sqrt(T))
        d1_cdf = 0.5 * math.erfc(-d1 / math.sqrt(2.0))
    return d1_cdf if discount else math.exp(mu * T) * d1_cdf
