"""Reference computations that share no code with the package."""

import math

import numpy as np
from scipy.integrate import quad


def rk4(f, y0, t_end, steps=4000):
    """Classical fourth-order Runge-Kutta for y' = f(t, y), y a numpy vector."""
    h = t_end / steps
    t, y = 0.0, np.asarray(y0, dtype=float)
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h * k1 / 2)
        k3 = f(t + h / 2, y + h * k2 / 2)
        k4 = f(t + h, y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        t += h
    return y


def intensity_moments_rk4(lam0, alpha, beta, t):
    """(E lambda(t), E int_0^t lambda) from m' = beta lam0 + (alpha - beta) m, c' = m."""
    f = lambda s, y: np.array([beta * lam0 + (alpha - beta) * y[0], y[0]])  # noqa: E731
    m, c = rk4(f, [lam0, 0.0], t)
    return float(m), float(c)


def psi_linear(g, s):
    """int_0^s (e^{g u} - 1) du."""
    return math.expm1(g * s) / g - s


def phi_linear(g, b, s):
    """int_0^s e^{-b u} (e^{g u} - 1) du."""
    if abs(g - b) < 1e-15:
        first = s
    else:
        first = math.expm1((g - b) * s) / (g - b)
    return first + math.expm1(-b * s) / b


def log_price_oracle(mu, sigma, g, lam0, alpha, beta, t, w_t, jumps):
    """X_t for linear J by adaptive quadrature of the compensator."""
    def lam(s):
        return lam0 + sum(alpha * math.exp(-beta * (s - tj)) for tj in jumps if tj < s)

    breaks = sorted(j for j in jumps if 0 < j < t)
    comp = quad(lambda s: math.expm1(g * s) * lam(s), 0.0, t, points=breaks or None,
                epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    return (mu - 0.5 * sigma**2) * t + sigma * w_t - comp + sum(g * tj for tj in jumps if tj <= t)


def F_trapezoid(g, alpha, beta, T, v, n=10_000):
    s = np.linspace(v, T, n + 1)
    y = np.exp(-beta * (s - v)) * np.expm1(g * s)
    return g * v - alpha * np.trapezoid(y, s)


def bs_call_delta_undiscounted(s0, k, mu, sigma, T):
    d1 = (math.log(s0 / k) + (mu + 0.5 * sigma**2) * T) / (sigma * math.sqrt(T))
    return math.exp(mu * T) * 0.5 * (1 + math.erf(d1 / math.sqrt(2)))
