"""Monte Carlo prices and delta estimators.

Every method reads the same path set, so per-path samples can be combined
(WP is the per-path mean of WM and PM) and compared across strikes.

EXACT  H(x) x / s0, pathwise, using that x / s0 does not depend on s0.
WM     Brownian Malliavin weight.
PM     Poisson Malliavin weight: f(x) delta(u) with the leave-one-out
       Skorokhod integral of the add-one-point weight field.
WP     (WM + PM) / 2 per path.
FD     symmetric finite difference with common random numbers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .asset import KINDS, ModelParams, PathRealization, simulate_path
from .hawkes import MAX_DOUBLINGS, HawkesParams, StripOverflow, sample_hawkes
from .malliavin import EMPTY_BRANCH_POLICIES, DegenerateModelError, find_v1, pm_contributions

METHODS = ("exact", "wm", "pm", "wp", "fd")
CHUNK = 250


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 10_000
    grid_n: int = 100
    seed: int = 0
    strike: float = 5.0
    kind: str = "european"
    fd_bump: float = 0.01
    discount: bool = False
    workers: int = 1
    # how PM treats a weight branch of zero mass; "zero" drops it
    pm_empty_branch: str = "redistribute"
    # restrict WM to paths without accepted jumps
    wm_jump_free_only: bool = False

    def __post_init__(self) -> None:
        if self.n_paths < 2:
            raise ValueError(f"n_paths must be >= 2, got {self.n_paths}")
        if self.grid_n < 1:
            raise ValueError(f"grid_n must be >= 1, got {self.grid_n}")
        if self.strike < 0:
            raise ValueError(f"strike must be >= 0, got {self.strike}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 < self.fd_bump < 1:
            raise ValueError(f"fd_bump must lie in (0, 1), got {self.fd_bump}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.pm_empty_branch not in EMPTY_BRANCH_POLICIES:
            raise ValueError(f"pm_empty_branch must be one of {EMPTY_BRANCH_POLICIES}")


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_paths: int


@dataclass(frozen=True)
class DeltaEstimate:
    method: str
    value: float
    stderr: float
    n_paths: int
    wallclock: float = 0.0
    strike: float = math.nan
    kind: str = "european"


def table_strikes(s0: float) -> np.ndarray:
    """K = s0 u for u = 0.05, 0.10, ..., 1.30."""
    return s0 * np.round(0.05 * np.arange(1, 27), 10)


def summarize(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors of a (paths, ...) sample array."""
    n = samples.shape[0]
    return samples.mean(axis=0), samples.std(axis=0, ddof=1) / math.sqrt(n)


def fd_difference(f, x, s0: float, bump: float):
    """[f((1+b) x) - f((1-b) x)] / (2 s0 b) with common random numbers.

    The log-price does not depend on s0, so the bumped terminal values are
    exact rescalings of the unbumped one.
    """
    return (f((1.0 + bump) * x) - f((1.0 - bump) * x)) / (2.0 * s0 * bump)


# --------------------------------------------------------------------------- path engine


def sample_path(model: ModelParams, params: HawkesParams, seed: int, index: int,
                grid_n: int, doublings: int = 0) -> PathRealization:
    base, real = sample_hawkes(params, model.horizon, seed=seed, path=index,
                               n_steps=grid_n, doublings=doublings)
    return simulate_path(model, params, base, real)


def wm_weight(path: PathRealization, kind: str, jump_free_only: bool = False) -> float:
    """Brownian Malliavin weight pi with delta = E[f(x) pi].

    european: W_T / (s0 sigma T)
    asian:    (2 int S dW / (sigma T Y) + 1) / s0, Ito sum on the grid
    """
    model = path.model
    s0, T, sig = model.s0, model.horizon, model.sigma
    if jump_free_only and path.realization.n_jumps:
        return 0.0
    if kind == "european":
        return path.w_T / (s0 * T * sig)
    return (2.0 * path.ito_integral() / (T * sig * path.asian) + 1.0) / s0


def _strip_doublings(path: PathRealization, params: HawkesParams) -> int:
    return int(round(math.log2(path.base.strip_height / params.strip_height())))


def _path_samples(model, params, cfg: McConfig, methods, strikes, v1, index):
    """Per-method samples for one path, each of shape (len(strikes),)."""
    path = sample_path(model, params, cfg.seed, index, cfg.grid_n)
    kind = cfg.kind
    x = path.s_T if kind == "european" else path.asian
    s0 = model.s0
    f = np.maximum(x - strikes, 0.0)
    out = {}
    if "price" in methods:
        out["price"] = f
    if "exact" in methods:
        out["exact"] = (x > strikes) * x / s0
    if "fd" in methods:
        out["fd"] = fd_difference(lambda y: np.maximum(y - strikes, 0.0), x, s0, cfg.fd_bump)
    if {"wm", "wp"} & set(methods):
        out["wm"] = f * wm_weight(path, kind, cfg.wm_jump_free_only)
    if {"pm", "wp"} & set(methods):
        doublings = _strip_doublings(path, params)
        while True:
            try:
                out["pm"] = pm_contributions(path, kind, strikes, v1, cfg.pm_empty_branch)
                break
            except StripOverflow:
                doublings += 1
                if doublings > MAX_DOUBLINGS:
                    raise StripOverflow(f"cascade overflow after {MAX_DOUBLINGS} doublings "
                                        f"(seed={cfg.seed}, path={index})") from None
                # nested strip layers: the realized path is unchanged
                path = sample_path(model, params, cfg.seed, index, cfg.grid_n, doublings)
    if "wp" in methods:
        out["wp"] = 0.5 * (out["wm"] + out["pm"])
    return out


def _chunk(args):
    model, params, cfg, methods, strikes, v1, lo, hi = args
    rows = [_path_samples(model, params, cfg, methods, strikes, v1, i) for i in range(lo, hi)]
    return {m: np.stack([r[m] for r in rows]) for m in methods}


def run_samples(model: ModelParams, params: HawkesParams, cfg: McConfig,
                methods: Iterable[str], strikes) -> dict[str, np.ndarray]:
    """Per-path samples, shape (n_paths, len(strikes)), for each method.

    Paths are split into fixed chunks and concatenated in order, so the
    output does not depend on ``cfg.workers``.
    """
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS) - {"price"}
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(strikes < 0):
        raise ValueError("strikes must be >= 0")
    v1 = None
    if {"pm", "wp"} & set(methods):
        if model.degenerate:
            raise DegenerateModelError("jump function is identically zero: PM weight undefined")
        v1 = find_v1(model, params)
    jobs = [(model, params, cfg, methods, strikes, v1, lo, min(lo + CHUNK, cfg.n_paths))
            for lo in range(0, cfg.n_paths, CHUNK)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_chunk, jobs))
    else:
        parts = [_chunk(j) for j in jobs]
    out = {m: np.concatenate([p[m] for p in parts]) for m in methods}
    if cfg.discount:
        disc = math.exp(-model.mu * model.horizon)
        out = {m: v * disc for m, v in out.items()}
    return out


# --------------------------------------------------------------------------- public estimators


def price(model: ModelParams, params: HawkesParams, cfg: McConfig) -> Estimate:
    """Monte Carlo mean of the call payoff (undiscounted unless cfg.discount)."""
    s = run_samples(model, params, cfg, ("price",), [cfg.strike])["price"][:, 0]
    m, e = summarize(s)
    return Estimate(float(m), float(e), cfg.n_paths)


def deltas(model: ModelParams, params: HawkesParams, cfg: McConfig,
           methods: Iterable[str] = METHODS, strikes=None) -> list[DeltaEstimate]:
    """Several methods over several strikes on one shared path set."""
    methods = tuple(methods)
    strikes = np.atleast_1d(np.asarray([cfg.strike] if strikes is None else strikes, dtype=float))
    t0 = time.perf_counter()
    samples = run_samples(model, params, cfg, methods, strikes)
    wall = time.perf_counter() - t0
    out = []
    for m in methods:
        mean, err = summarize(samples[m])
        for k, K in enumerate(strikes):
            out.append(DeltaEstimate(m.upper(), float(mean[k]), float(err[k]), cfg.n_paths,
                                     wall, float(K), cfg.kind))
    return out


def _single(method, model, params, cfg) -> DeltaEstimate:
    return deltas(model, params, cfg, (method,))[0]


def delta_exact(model, params, cfg) -> DeltaEstimate:
    return _single("exact", model, params, cfg)


def delta_wm(model, params, cfg) -> DeltaEstimate:
    return _single("wm", model, params, cfg)


def delta_pm(model, params, cfg) -> DeltaEstimate:
    return _single("pm", model, params, cfg)


def delta_wp(model, params, cfg) -> DeltaEstimate:
    return _single("wp", model, params, cfg)


def delta_fd(model, params, cfg, common_random_numbers: bool = True) -> DeltaEstimate:
    """Symmetric difference; without CRN the down branch uses seed + 1."""
    if common_random_numbers:
        return _single("fd", model, params, cfg)
    t0 = time.perf_counter()
    b, s0 = cfg.fd_bump, model.s0
    up = run_samples(replace(model, s0=s0 * (1 + b)), params, cfg, ("price",), [cfg.strike])
    down = run_samples(replace(model, s0=s0 * (1 - b)), params, replace(cfg, seed=cfg.seed + 1),
                       ("price",), [cfg.strike])
    samples = (up["price"][:, 0] - down["price"][:, 0]) / (2 * s0 * b)
    m, e = summarize(samples)
    return DeltaEstimate("FD", float(m), float(e), cfg.n_paths, time.perf_counter() - t0,
                         cfg.strike, cfg.kind)


@dataclass(frozen=True)
class MseTable:
    kind: str
    strikes: np.ndarray
    reference: np.ndarray
    reference_stderr: np.ndarray
    mse: dict[str, float]
    curves: list[DeltaEstimate] = field(repr=False)


def mse_table(model: ModelParams, params: HawkesParams, strikes, methods: Iterable[str],
              cfg: McConfig, reference_factor: int = 10) -> MseTable:
    """Mean over strikes of (estimate - reference)^2 per method.

    The reference is the EXACT estimator on seed + 1 with
    ``reference_factor`` times the paths.
    """
    methods = tuple(methods)
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if strikes.size == 0:
        return MseTable(cfg.kind, strikes, strikes, strikes, {}, [])
    ref_cfg = replace(cfg, seed=cfg.seed + 1, n_paths=cfg.n_paths * reference_factor)
    ref, ref_err = summarize(run_samples(model, params, ref_cfg, ("exact",), strikes)["exact"])
    curves = deltas(model, params, cfg, methods, strikes)
    mse = {}
    for m in methods:
        vals = np.array([d.value for d in curves if d.method == m.upper()])
        mse[m] = float(np.mean((vals - ref) ** 2))
    return MseTable(cfg.kind, strikes, ref, ref_err, mse, curves)
