"""Add/remove-one-point differences, the kernel F, and the Skorokhod integral.

On the shared-base coupling the Malliavin derivative in the jump direction
is the difference D_{t,z}G = G(omega + (t, z)) - G(omega). For any
z <= lambda(t-) the added point is accepted, and the points that flip are
the rejected candidates after t whose marks fall in the band the extra
intensity opens. Since the extra intensity is non-negative, no accepted
point is ever lost. Hence

    D_t X_T = F(t) + sum_{l in cascade} F(l),
    F(v)    = J_v - alpha e^{beta v} (phi(T) - phi(v)).

The weights are piecewise constant on the simulation grid. The value on
cell k comes from a probe added at the cell's left endpoint. For such
weights the Skorokhod integral is exact:

    delta(u) = sum_{accepted i} u(T_i; omega minus i) - sum_k u_k int_{cell k} lambda.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .asset import ModelParams, PathRealization, simulate_path
from .hawkes import HawkesParams, StripOverflow, thin
from .kernel import JumpKernel, kernel_for

V1_XTOL = 1e-12
EMPTY_BRANCH_POLICIES = ("redistribute", "zero")


class DegenerateModelError(ValueError):
    """The jump channel carries no sensitivity, so Poisson weights are undefined."""


# --------------------------------------------------------------------------- F, v1


def eval_F(model: ModelParams, params: HawkesParams, v, horizon: float | None = None):
    """F(v) = J_v - alpha int_v^u e^{-beta(s-v)} (e^{J_s} - 1) ds, u = horizon (default T)."""
    kern = kernel_for(model, params)
    u = model.horizon if horizon is None else float(horizon)
    if not 0 < u <= model.horizon:
        raise ValueError(f"horizon {u} outside (0, {model.horizon}]")
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(v > u):
        raise ValueError(f"v outside [0, {u}]")
    phi_u = kern.phi(u)
    return kern.J(v) - params.alpha * np.exp(params.beta * v) * (phi_u - kern.phi(v))


def _eval_G(kern: JumpKernel, params: HawkesParams, v):
    return np.expm1(kern.J(v)) - params.beta * (kern.psi(kern.horizon) - kern.psi(v))


def find_v1(model: ModelParams, params: HawkesParams) -> float:
    """Smallest v with F > 0 on (v, T]; 0 when F >= 0 everywhere.

    G(v) = e^{J_v} - 1 - beta int_v^T (e^{J_s} - 1) ds is increasing, and F
    is increasing to the right of its root v0. When F(v0) < 0 the answer
    is the unique root of F in [v0, T]. Otherwise [0, v0] is scanned.
    """
    kern = kernel_for(model, params)
    T = model.horizon
    if kern.degenerate:
        return 0.0
    F = lambda v: float(eval_F(model, params, v))  # noqa: E731
    if not F(T) > 0:
        raise DegenerateModelError("F is never positive; Poisson weights are undefined")
    g0 = float(_eval_G(kern, params, 0.0))
    v0 = 0.0 if g0 >= 0 else brentq(lambda v: float(_eval_G(kern, params, v)), 0.0, T, xtol=V1_XTOL)
    if F(v0) < 0:
        return float(brentq(F, v0, T, xtol=V1_XTOL))
    if v0 == 0.0:
        return 0.0
    # F >= 0 at v0: look left of it for the last non-positive value
    scan = np.linspace(0.0, v0, 2049)
    vals = eval_F(model, params, scan)
    bad = np.flatnonzero(vals <= 0)
    if bad.size == 0:
        return 0.0
    k = bad[-1]
    if k == scan.size - 1 or vals[k] == 0:
        return float(scan[k])
    return float(brentq(F, scan[k], scan[k + 1], xtol=V1_XTOL))


# --------------------------------------------------------------------------- cascades


def cascades(path: PathRealization, probe_times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Candidates newly accepted when one point is added at each probe time.

    Returns ``(flip, overflow)`` where ``flip[k, j]`` marks candidate j as
    part of the cascade of probe k.
    """
    base, real, p = path.base, path.realization, path.params
    probe_times = np.asarray(probe_times, dtype=float)
    order = np.argsort(probe_times, kind="stable")
    probes = probe_times[order]
    alpha, beta = p.alpha, p.beta
    height = base.strip_height
    P = probes.size
    flip = np.zeros((P, base.times.size), dtype=bool)
    extra = np.full(P, alpha)  # D lambda right after the latest update
    last = probes.copy()
    overflow = real.intensity(probes) + alpha > height
    pre = real.pre_intensity
    acc = real.accepted_mask
    for j, t in enumerate(base.times):
        n = int(np.searchsorted(probes, t, side="left"))  # probes strictly before t
        if n == 0:
            continue
        e = extra[:n] * np.exp(-beta * (t - last[:n]))
        extra[:n] = e
        last[:n] = t
        if acc[j]:
            overflow[:n] |= pre[j] + e + alpha > height
            continue
        new = base.marks[j] <= pre[j] + e
        if new.any():
            flip[:n, j] = new
            overflow[:n] |= new & (pre[j] + e + alpha > height)
            extra[:n] = e + alpha * new
    inv = np.empty_like(order)
    inv[order] = np.arange(P)
    return flip[inv], overflow[inv]


def _jump_response(kern, params, jump_times, at_times, phi_at, left: bool = False):
    """Matrix of X increments at ``at_times`` caused by single extra jumps.

    Entry [c, i] is 1{p_c <= tau_i} (J(p_c) - alpha e^{beta p_c} (phi(tau_i) - phi(p_c)))
    for p_c = jump_times[c]; ``left`` drops jumps located at tau_i itself.
    """
    c = params.alpha * np.exp(params.beta * jump_times)
    a = kern.J(jump_times) + c * kern.phi(jump_times)
    lag = at_times[None, :] - jump_times[:, None]
    mask = lag > 0 if left else lag >= 0
    return np.where(mask, a[:, None] - c[:, None] * phi_at[None, :], 0.0)


@dataclass(frozen=True, eq=False)
class ProbeField:
    """Add-one-point responses at the left endpoint of every grid cell.

    Strike-independent, so one field serves every strike of a sweep.
    """

    probe_times: np.ndarray
    cell_mass: np.ndarray
    dx_T: np.ndarray
    d_asian: np.ndarray
    cascade_size: np.ndarray
    s_T: float
    asian: float
    s0: float

    def terminal(self, kind: str) -> float:
        return self.s_T if kind == "european" else self.asian

    def increment(self, kind: str) -> np.ndarray:
        """D_t of the terminal quantity per cell (DS_T or DY_T)."""
        if kind == "european":
            return self.s_T * np.expm1(self.dx_T)
        return self.d_asian


def probe_field(path: PathRealization, *, with_asian: bool = True) -> ProbeField:
    """Cascade every cell probe and collect DX_T, DY_T and cell masses.

    Raises StripOverflow when any cascade leaves the strip.
    """
    model, params, base = path.model, path.params, path.base
    kern = kernel_for(model, params)
    grid = path.grid
    probes = grid[:-1]
    flip, overflow = cascades(path, probes)
    if overflow.any():
        raise StripOverflow("a probe cascade exceeded the strip height")
    P = probes.size
    mass = np.diff(path.realization.cumulative_intensity(grid))
    T = model.horizon
    casc = flip.astype(float)

    if with_asian:
        nodes = path.node_times
        right = _jump_response(kern, params, probes, nodes, path.node_phi)
        if base.times.size:
            right += casc @ _jump_response(kern, params, base.times, nodes, path.node_phi)
        # left limits differ only at the nodes carrying one of the new jumps
        left = right.copy()
        left[np.arange(P), path.grid_node[:-1]] -= kern.J(probes)
        k_idx, j_idx = np.nonzero(flip)
        left[k_idx, path.candidate_node[j_idx]] -= kern.J(base.times[j_idx])
        h = np.diff(nodes)
        ds_r = path.node_s * np.expm1(right)
        ds_l = path.node_s_left * np.expm1(left)
        d_asian = (0.5 * (ds_r[:, :-1] + ds_l[:, 1:]) @ h) / T
        dx_T = right[:, -1]
    else:
        dx_T = eval_F(model, params, probes)
        if base.times.size:
            dx_T = dx_T + casc @ eval_F(model, params, base.times)
        d_asian = np.full(P, np.nan)
    return ProbeField(
        probe_times=probes,
        cell_mass=mass,
        dx_T=dx_T,
        d_asian=d_asian,
        cascade_size=flip.sum(axis=1),
        s_T=path.s_T,
        asian=path.asian,
        s0=model.s0,
    )


# --------------------------------------------------------------------------- single-point diffs


@dataclass(frozen=True, eq=False)
class PerturbationDiff:
    """Differences on the grid between a perturbed configuration and omega."""

    kind: str  # "add" or "remove"
    time: float
    grid: np.ndarray
    d_lambda: np.ndarray
    d_x: np.ndarray
    d_s: np.ndarray
    d_asian: float
    cascade: np.ndarray  # candidate indices whose acceptance flipped

    @property
    def dx_T(self) -> float:
        return float(self.d_x[-1])


def add_point_diff(path: PathRealization, t: float) -> PerturbationDiff:
    """Closed-form differences for a point added at t with z below lambda(t-)."""
    model, params, base = path.model, path.params, path.base
    if not 0 <= t < model.horizon:
        raise ValueError(f"t={t} outside [0, {model.horizon})")
    kern = kernel_for(model, params)
    flip, overflow = cascades(path, np.array([t]))
    if overflow[0]:
        raise StripOverflow("cascade exceeded the strip height")
    casc = np.flatnonzero(flip[0])
    new_times = np.concatenate(([t], base.times[casc]))
    grid = path.grid
    psi_g, phi_g = kern.grid_integrals(base.n_steps)
    d_x = _jump_response(kern, params, new_times, grid, phi_g).sum(axis=0)
    lag = grid[None, :] - new_times[:, None]
    d_lam = params.alpha * np.where(lag > 0, np.exp(-params.beta * np.maximum(lag, 0.0)), 0.0).sum(axis=0)

    nodes = path.node_times
    right = _jump_response(kern, params, new_times, nodes, path.node_phi).sum(axis=0)
    left = _jump_response(kern, params, new_times, nodes, path.node_phi, left=True).sum(axis=0)
    if not np.any(nodes == t):
        # t splits a node cell, so the perturbed path has one more node
        pert = simulate_path(model, params, base.with_point(t, 0.5 * float(path.realization.intensity(t))))
        d_asian = pert.asian - path.asian
    else:
        h = np.diff(nodes)
        ds_r = path.node_s * np.expm1(right)
        ds_l = path.node_s_left * np.expm1(left)
        d_asian = float(0.5 * (ds_r[:-1] + ds_l[1:]) @ h) / model.horizon
    return PerturbationDiff(
        kind="add",
        time=float(t),
        grid=grid,
        d_lambda=d_lam,
        d_x=d_x,
        d_s=path.s * np.expm1(d_x),
        d_asian=float(d_asian),
        cascade=casc,
    )


def remove_point_diff(path: PathRealization, jump_index: int) -> PerturbationDiff:
    """Differences after deleting accepted candidate ``jump_index`` and re-thinning."""
    real = path.realization
    if not real.accepted_mask[jump_index]:
        raise ValueError(f"candidate {jump_index} is not an accepted jump")
    other = leave_one_out(path, jump_index)
    keep = np.delete(np.arange(path.base.times.size), jump_index)
    lost = keep[real.accepted_mask[keep] & ~other.realization.accepted_mask]
    return PerturbationDiff(
        kind="remove",
        time=float(path.base.times[jump_index]),
        grid=path.grid,
        d_lambda=other.realization.intensity(path.grid) - real.intensity(path.grid),
        d_x=other.x - path.x,
        d_s=other.s - path.s,
        d_asian=other.asian - path.asian,
        cascade=lost,
    )


def leave_one_out(path: PathRealization, index: int) -> PathRealization:
    """Path on omega with candidate ``index`` removed."""
    base = path.base.without_point(index)
    return simulate_path(path.model, path.params, base, thin(base, path.params))


# --------------------------------------------------------------------------- weights


@dataclass(frozen=True, eq=False)
class WeightField:
    """Per-cell weight for one strike.

    ``region`` is 1 on the branch after v1 where the perturbed terminal ends
    above the strike, 2 on the branch before v1 where it ends at or below,
    and 0 elsewhere. ``b1``/``b2`` are the lambda-masses of the two branches.
    """

    kind: str
    strike: float
    v1: float
    b1: float
    b2: float
    excluded: float
    probe_times: np.ndarray
    region: np.ndarray
    u_values: np.ndarray
    increment: np.ndarray
    dx_T: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        """Columns t, region, u, DX_T."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "region", "u", "DX_T"])
            for t, r, u, d in zip(self.probe_times, self.region, self.u_values, self.dx_T):
                w.writerow([repr(float(t)), int(r), repr(float(u)), repr(float(d))])


def weight_values(
    field: ProbeField,
    kind: str,
    strikes: np.ndarray,
    v1: float,
    empty_branch: str = "redistribute",
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized weights for many strikes on one probe field.

    Returns ``(u, region, b1, b2)`` with u and region of shape (strikes, cells).
    With ``empty_branch="zero"`` a branch of zero mass carries weight 0. With
    ``"redistribute"`` the surviving branch is rescaled so that the weight
    still integrates D f to the pathwise delta H x / s0.
    """
    if empty_branch not in EMPTY_BRANCH_POLICIES:
        raise ValueError(f"empty_branch must be one of {EMPTY_BRANCH_POLICIES}")
    K = np.atleast_1d(np.asarray(strikes, dtype=float))[:, None]
    x = field.terminal(kind)
    dx = field.increment(kind)[None, :]
    s0 = field.s0
    after = (field.probe_times >= v1)[None, :]
    up = x + dx > K
    r1 = up & after & (dx > 0)
    r2 = ~up & ~after
    mass = field.cell_mass
    b1 = r1 @ mass
    b2 = r2 @ mass
    H = (x > K[:, 0]).astype(float)
    B1, B2 = b1[:, None], b2[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        u1 = np.where(r1, (x + K) / (2.0 * s0 * B1 * dx), 0.0)
        u2 = np.where(r2, -1.0 / (2.0 * s0 * B2), 0.0)
        if empty_branch == "redistribute":
            only1 = (B2 == 0) & (B1 > 0)
            only2 = (B1 == 0) & (B2 > 0)
            u1 = np.where(only1 & r1, x / (s0 * B1 * dx), u1)
            u2 = np.where(only2 & r2, -x / (s0 * B2 * (x - K)), u2)
    u = H[:, None] * (u1 + u2)
    region = np.where(r1, 1, np.where(r2, 2, 0))
    return u, region, b1, b2


def build_weight(path: PathRealization, kind: str, strike: float, v1: float | None = None,
                 empty_branch: str = "redistribute", field: ProbeField | None = None) -> WeightField:
    """WeightField for one strike (european uses S_T, asian uses Y_T)."""
    model, params = path.model, path.params
    if model.degenerate or kernel_for(model, params).degenerate:
        raise DegenerateModelError("jump function is identically zero: no jump channel to differentiate")
    if v1 is None:
        v1 = find_v1(model, params)
    if field is None:
        field = probe_field(path, with_asian=(kind == "asian"))
    u, region, b1, b2 = weight_values(field, kind, np.array([strike]), v1, empty_branch)
    total = float(field.cell_mass.sum())
    return WeightField(
        kind=kind,
        strike=float(strike),
        v1=float(v1),
        b1=float(b1[0]),
        b2=float(b2[0]),
        excluded=total - float(b1[0]) - float(b2[0]),
        probe_times=field.probe_times,
        region=region[0],
        u_values=u[0],
        increment=field.increment(kind),
        dx_T=field.dx_T,
    )


def build_weight_european(path, strike, v1=None, **kw) -> WeightField:
    return build_weight(path, "european", strike, v1, **kw)


def build_weight_asian(path, strike, v1=None, **kw) -> WeightField:
    return build_weight(path, "asian", strike, v1, **kw)


# --------------------------------------------------------------------------- Skorokhod integral


def cell_index(grid: np.ndarray, t) -> np.ndarray:
    """Grid cell [t_k, t_{k+1}) holding t."""
    return np.minimum(np.searchsorted(grid, t, side="right") - 1, grid.size - 2)


def skorokhod_N(path: PathRealization, weight: Callable[[PathRealization], np.ndarray] | np.ndarray):
    """delta(1_{(0, lambda]} u) for a weight piecewise constant on grid cells.

    ``weight`` is either an array of per-cell values (deterministic u) or a
    callable mapping a path to such an array; the callable is re-evaluated
    on every leave-one-out configuration. Trailing axes of the returned
    array (for example strikes) are carried through.
    """
    grid = path.grid
    mass = np.diff(path.realization.cumulative_intensity(grid))
    if callable(weight):
        u = np.asarray(weight(path), dtype=float)
    else:
        u = np.asarray(weight, dtype=float)
    compensator = np.tensordot(mass, u, axes=(0, -1)) if u.ndim > 1 else float(mass @ u)
    cells = cell_index(grid, path.jump_times)
    total = 0.0
    for idx, c in zip(path.realization.accepted, cells):
        if callable(weight):
            u_i = np.asarray(weight(leave_one_out(path, int(idx))), dtype=float)
        else:
            u_i = u
        total = total + u_i[..., c]
    return total - compensator


def pm_contributions(
    path: PathRealization,
    kind: str,
    strikes: np.ndarray,
    v1: float,
    empty_branch: str = "redistribute",
) -> np.ndarray:
    """Per-strike f(terminal) delta(u) for one path (the PM sample)."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    x = path.s_T if kind == "european" else path.asian
    f = np.maximum(x - strikes, 0.0)
    live = f > 0
    out = np.zeros(strikes.size)
    if not live.any():
        return out
    ks = strikes[live]
    with_asian = kind == "asian"

    def weight(p: PathRealization) -> np.ndarray:
        return weight_values(probe_field(p, with_asian=with_asian), kind, ks, v1, empty_branch)[0]

    out[live] = f[live] * skorokhod_N(path, weight)
    return out


def duality_sides(path: PathRealization, u: np.ndarray, offsets: np.ndarray) -> tuple[float, float]:
    """Both sides of E[N(T) delta(u)] = E[int D_t N(T) u(t) lambda(t) dt] for one path.

    The right side integrates each cell by one uniformly placed probe
    (``offsets`` in [0, 1)), which is unbiased for the cell integral.
    """
    grid = path.grid
    dt = path.base.dt
    probes = grid[:-1] + offsets * dt
    flip, overflow = cascades(path, probes)
    if overflow.any():
        raise StripOverflow("a probe cascade exceeded the strip height")
    lam = path.realization.intensity(probes)
    rhs = float(np.sum(u * (1.0 + flip.sum(axis=1)) * lam) * dt)
    lhs = path.realization.n_jumps * float(skorokhod_N(path, u))
    return lhs, rhs


def closed_form_dx_T(path: PathRealization, t: float) -> float:
    """F(t) + sum of F over the cascade of a point added at t."""
    flip, _ = cascades(path, np.array([t]))
    pts = np.concatenate(([t], path.base.times[flip[0]]))
    return float(np.sum(eval_F(path.model, path.params, pts)))


__all__ = [
    "DegenerateModelError",
    "PerturbationDiff",
    "ProbeField",
    "WeightField",
    "add_point_diff",
    "build_weight",
    "build_weight_asian",
    "build_weight_european",
    "cascades",
    "cell_index",
    "closed_form_dx_T",
    "duality_sides",
    "eval_F",
    "find_v1",
    "leave_one_out",
    "pm_contributions",
    "probe_field",
    "remove_point_diff",
    "skorokhod_N",
    "weight_values",
]
