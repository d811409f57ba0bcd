"""Deterministic jump function J and the integrals built from it.

Everything the compensator and the Malliavin kernel need reduces to two
cumulative integrals of the jump function,

    psi(s) = int_0^s (e^{J_u} - 1) du,
    phi(s) = int_0^s e^{-beta u} (e^{J_u} - 1) du,

because on an inter-jump segment lambda is lambda0 plus a sum of decaying
exponentials. Both are tabulated once on adaptively refined Gauss-Legendre
panels; evaluation at arbitrary points adds one partial-panel rule.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

JUMP_FUNCTIONS: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "linear": lambda s, g: g * s,
    "quadratic": lambda s, g: g * s * s,
    "zero": lambda s, g: np.zeros_like(s),
}

_ORDER = 20
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(_ORDER)
_PANEL_TOL = 1e-13
_MAX_DEPTH = 40


class JumpKernel:
    """Tabulated psi/phi for one (J, beta, horizon) triple."""

    def __init__(self, jump: Callable[[np.ndarray], np.ndarray], beta: float, horizon: float):
        self.jump = jump
        self.beta = float(beta)
        self.horizon = float(horizon)
        edges = self._refine(0.0, horizon, 8)
        self.edges = np.asarray(edges)
        a, b = self.edges[:-1], self.edges[1:]
        psi, phi = self._rule(a, b)
        self.cum_psi = np.concatenate(([0.0], np.cumsum(psi)))
        self.cum_phi = np.concatenate(([0.0], np.cumsum(phi)))
        self.degenerate = bool(np.all(self.cum_psi == 0.0))
        self._grid_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _rule(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        x = a[..., None] + half[..., None] * (_NODES + 1.0)
        g = np.expm1(self.jump(x))
        psi = (g @ _WEIGHTS) * half
        phi = ((g * np.exp(-self.beta * x)) @ _WEIGHTS) * half
        return psi, phi

    def _refine(self, lo: float, hi: float, start: int) -> list[float]:
        edges = [lo]
        coarse = np.linspace(lo, hi, start + 1)
        # left-most panel on top so edges come out sorted
        stack = [(coarse[i], coarse[i + 1], 0) for i in reversed(range(start))]
        while stack:
            a, b, depth = stack.pop()
            m = 0.5 * (a + b)
            whole = np.array(self._rule(np.array([a]), np.array([b]))).ravel()
            halves = np.array(self._rule(np.array([a, m]), np.array([m, b]))).sum(axis=1)
            if depth >= _MAX_DEPTH or np.all(np.abs(whole - halves) <= _PANEL_TOL):
                edges.append(b)
            else:
                stack.append((m, b, depth + 1))
                stack.append((a, m, depth + 1))
        return edges

    def J(self, s) -> np.ndarray:
        return self.jump(np.asarray(s, dtype=float))

    def integrals(self, s) -> tuple[np.ndarray, np.ndarray]:
        """(psi(s), phi(s)) for s in [0, horizon]."""
        s = np.minimum(np.maximum(np.asarray(s, dtype=float), 0.0), self.horizon)
        idx = np.minimum(np.searchsorted(self.edges, s, side="right") - 1, self.edges.size - 2)
        a = self.edges[idx]
        psi, phi = self._rule(a, s)
        return self.cum_psi[idx] + psi, self.cum_phi[idx] + phi

    def grid_integrals(self, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
        """(psi, phi) on the uniform n-step grid, computed once."""
        if n_steps not in self._grid_cache:
            grid = np.linspace(0.0, self.horizon, n_steps + 1)
            psi, phi = self.integrals(grid)
            psi.setflags(write=False)
            phi.setflags(write=False)
            self._grid_cache[n_steps] = (psi, phi)
        return self._grid_cache[n_steps]

    def psi(self, s) -> np.ndarray:
        return self.integrals(s)[0]

    def phi(self, s) -> np.ndarray:
        return self.integrals(s)[1]


@lru_cache(maxsize=64)
def _cached(name: str, gamma: float, beta: float, horizon: float) -> JumpKernel:
    fn = JUMP_FUNCTIONS[name]
    return JumpKernel(lambda s: fn(s, gamma), beta, horizon)


def kernel_for(model, params) -> JumpKernel:
    """Shared kernel for a (ModelParams, HawkesParams) pair."""
    return _cached(model.jump, float(model.gamma), float(params.beta), float(model.horizon))
