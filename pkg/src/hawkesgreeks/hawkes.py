"""Hawkes intensity by thinning a dominating Poisson measure.

The base configuration holds every point of a Poisson measure with unit
density on the strip ``(0, T) x (0, strip_height]``. The Hawkes counting
process keeps the points that fall under the current intensity,

    lambda(t) = lambda0 + alpha * sum_{T_i < t} exp(-beta (t - T_i)),

so adding or removing a single base point and thinning again yields the
exact Picard perturbation of the whole path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng

MAX_DOUBLINGS = 8


class StabilityError(ValueError):
    """Raised when alpha >= beta."""


class StripOverflow(RuntimeError):
    """The intensity left the sampled strip; resample with a taller strip."""


@dataclass(frozen=True)
class HawkesParams:
    lambda0: float = 1.0
    alpha: float = 0.30
    beta: float = 0.80

    def __post_init__(self) -> None:
        if not self.lambda0 > 0:
            raise ValueError(f"lambda0 must be > 0, got {self.lambda0}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.alpha < self.beta:
            raise StabilityError(
                f"stability violated: alpha={self.alpha} must be < beta={self.beta}"
            )

    def strip_height(self) -> float:
        """Initial strip height, with headroom for add-one-point cascades."""
        return max(4.0 * self.lambda0, self.lambda0 + 10.0 * self.alpha)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BaseConfiguration:
    """One sample point of the dominating Poisson measure plus Brownian noise.

    ``times``/``marks`` are the candidate points sorted by time, ``bridge``
    holds one standard normal per candidate (used to place W between grid
    nodes) and ``dw`` the Brownian increments on the uniform grid.
    """

    horizon: float
    strip_height: float
    times: np.ndarray
    marks: np.ndarray
    bridge: np.ndarray
    dw: np.ndarray
    seed_id: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "marks", _frozen(self.marks))
        object.__setattr__(self, "bridge", _frozen(self.bridge))
        object.__setattr__(self, "dw", _frozen(self.dw))
        if not (self.times.shape == self.marks.shape == self.bridge.shape):
            raise ValueError("times, marks and bridge must have equal length")
        if self.dw.ndim != 1 or self.dw.size < 1:
            raise ValueError("dw must hold at least one increment")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("candidate times must be strictly increasing")
        if self.times.size and (self.times[0] < 0 or self.times[-1] >= self.horizon):
            raise ValueError("candidate times must lie in [0, horizon)")

    @property
    def n_steps(self) -> int:
        return self.dw.size

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    @property
    def wiener_grid(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.dw)))

    def wiener_at(self, t: np.ndarray, xi: np.ndarray | None = None) -> np.ndarray:
        """Brownian values at arbitrary times.

        Between grid nodes the value is a Brownian-bridge draw driven by
        ``xi``; ``xi=None`` gives the bridge mean (linear interpolation).
        """
        t = np.asarray(t, dtype=float)
        w = self.wiener_grid
        dt = self.dt
        k = np.clip(np.floor(t / dt).astype(int), 0, self.n_steps - 1)
        frac = np.clip(t / dt - k, 0.0, 1.0)
        out = w[k] + frac * self.dw[k]
        if xi is not None:
            out = out + np.sqrt(dt * frac * (1.0 - frac)) * xi
        return out

    def with_point(self, t: float, z: float, xi: float = 0.0) -> BaseConfiguration:
        """Configuration with one extra candidate (the add-one-point map)."""
        if not 0 <= t < self.horizon:
            raise ValueError(f"t={t} outside [0, horizon)")
        i = int(np.searchsorted(self.times, t))
        if i < self.times.size and self.times[i] == t:
            raise ValueError(f"duplicate candidate time {t}")
        return BaseConfiguration(
            self.horizon,
            self.strip_height,
            np.insert(self.times, i, t),
            np.insert(self.marks, i, z),
            np.insert(self.bridge, i, xi),
            self.dw,
            self.seed_id,
        )

    def without_point(self, index: int) -> BaseConfiguration:
        """Configuration with candidate ``index`` removed."""
        return BaseConfiguration(
            self.horizon,
            self.strip_height,
            np.delete(self.times, index),
            np.delete(self.marks, index),
            np.delete(self.bridge, index),
            self.dw,
            self.seed_id,
        )


def sample_base(
    params: HawkesParams,
    horizon: float,
    *,
    seed: int = 0,
    path: int = 0,
    n_steps: int = 100,
    strip_height: float | None = None,
    doublings: int = 0,
) -> BaseConfiguration:
    """Draw the base configuration for one path.

    The strip is built from nested layers: layer 0 is ``(0, h]`` and layer
    ``k`` is ``(h 2^(k-1), h 2^k]``, each from its own stream. Doubling the
    strip therefore keeps every point already drawn.
    """
    h = params.strip_height() if strip_height is None else float(strip_height)
    if not h > params.lambda0:
        raise ValueError(f"strip height {h} must exceed lambda0={params.lambda0}")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")

    ts, zs, xs = [], [], []
    for k in range(doublings + 1):
        lo, hi = (0.0, h) if k == 0 else (h * 2 ** (k - 1), h * 2**k)
        g = rng.stream(seed, path, rng.CANDIDATES + k)
        count = g.poisson((hi - lo) * horizon) if horizon > 0 else 0
        ts.append(g.uniform(0.0, horizon, count))
        zs.append(hi - (hi - lo) * g.random(count))  # uniform on (lo, hi]
        xs.append(g.standard_normal(count))
    t = np.concatenate(ts)
    order = np.argsort(t, kind="stable")

    dt = horizon / n_steps
    dw = rng.stream(seed, path, rng.BROWNIAN).standard_normal(n_steps) * math.sqrt(dt)
    return BaseConfiguration(
        float(horizon),
        h * 2**doublings,
        t[order],
        np.concatenate(zs)[order],
        np.concatenate(xs)[order],
        dw,
        (seed, path),
    )


@dataclass(frozen=True, eq=False)
class HawkesRealization:
    """Result of thinning a base configuration.

    ``pre_intensity[j]`` is lambda(t_j-) at every candidate, accepted or not;
    the accepted times plus ``params`` determine lambda everywhere.
    """

    params: HawkesParams
    horizon: float
    strip_height: float
    accepted: np.ndarray
    accepted_mask: np.ndarray
    jump_times: np.ndarray
    pre_intensity: np.ndarray
    overflow: bool
    # post-jump values lambda(T_k+) at the accepted times
    intensity_knots: np.ndarray = field(repr=False)

    def intensity(self, t) -> np.ndarray:
        """Left-continuous intensity lambda(t-) (jumps at t itself excluded)."""
        p = self.params
        t = np.asarray(t, dtype=float)
        lag = t[..., None] - self.jump_times
        kern = np.where(lag > 0, np.exp(-p.beta * np.maximum(lag, 0.0)), 0.0)
        return p.lambda0 + p.alpha * kern.sum(axis=-1)

    def cumulative_intensity(self, t) -> np.ndarray:
        """Integral of lambda over [0, t], exact."""
        p = self.params
        t = np.asarray(t, dtype=float)
        lag = np.maximum(t[..., None] - self.jump_times, 0.0)
        tail = (1.0 - np.exp(-p.beta * lag)).sum(axis=-1)
        return p.lambda0 * t + (p.alpha / p.beta) * tail

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size


def thin(base: BaseConfiguration, params: HawkesParams) -> HawkesRealization:
    """Sweep candidates in time order, keeping z <= lambda(t-)."""
    lam0, alpha, beta = params.lambda0, params.alpha, params.beta
    times, marks = base.times, base.marks
    m = times.size
    pre = np.empty(m)
    mask = np.zeros(m, dtype=bool)
    knots = []
    excess = 0.0
    last = 0.0
    overflow = False
    for j in range(m):
        s = times[j]
        excess *= math.exp(-beta * (s - last))
        last = s
        lam = lam0 + excess
        pre[j] = lam
        if marks[j] <= lam:
            mask[j] = True
            excess += alpha
            knots.append(lam + alpha)
            if lam + alpha > base.strip_height:
                overflow = True
    accepted = np.flatnonzero(mask)
    return HawkesRealization(
        params=params,
        horizon=base.horizon,
        strip_height=base.strip_height,
        accepted=accepted,
        accepted_mask=mask,
        jump_times=times[accepted],
        pre_intensity=pre,
        overflow=overflow,
        intensity_knots=np.asarray(knots, dtype=float),
    )


def intensity_at(real: HawkesRealization, t) -> np.ndarray:
    """Exact lambda(t-) for 0 <= t <= horizon."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > real.horizon):
        raise ValueError(f"t outside [0, {real.horizon}]")
    return real.intensity(t_arr)


def sample_hawkes(
    params: HawkesParams,
    horizon: float,
    *,
    seed: int = 0,
    path: int = 0,
    n_steps: int = 100,
    doublings: int = 0,
) -> tuple[BaseConfiguration, HawkesRealization]:
    """Sample and thin, doubling the strip until no overflow occurs."""
    for k in range(doublings, MAX_DOUBLINGS + 1):
        base = sample_base(params, horizon, seed=seed, path=path, n_steps=n_steps, doublings=k)
        real = thin(base, params)
        if not real.overflow:
            return base, real
    raise StripOverflow(
        f"intensity exceeded the strip after {MAX_DOUBLINGS} doublings "
        f"(seed={seed}, path={path})"
    )


def mean_intensity_oracle(params: HawkesParams, t) -> np.ndarray:
    """E[lambda(t)], the solution of m' = beta lambda0 + (alpha - beta) m, m(0) = lambda0."""
    lam0, a, b = params.lambda0, params.alpha, params.beta
    t = np.asarray(t, dtype=float)
    return lam0 * (b - a * np.exp((a - b) * t)) / (b - a)


def mean_compensator_oracle(params: HawkesParams, t) -> np.ndarray:
    """E[int_0^t lambda(s) ds] = E[N(t)], integrating the ODE solution."""
    lam0, a, b = params.lambda0, params.alpha, params.beta
    t = np.asarray(t, dtype=float)
    return lam0 * (b * t - a * (1.0 - np.exp((a - b) * t)) / (b - a)) / (b - a)
