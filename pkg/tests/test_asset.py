import csv
import math

import numpy as np
import pytest

from hawkesgreeks.asset import (
    ModelParams,
    asian_average,
    discretize,
    payoff,
    simulate_path,
    trapezoid_with_jumps,
)
from hawkesgreeks.hawkes import BaseConfiguration, HawkesParams, sample_base, sample_hawkes, thin

from conftest import within
from oracles import log_price_oracle


def base_from(times, marks, dw, horizon=1.0, height=4.0, bridge=None):
    times = np.asarray(times, dtype=float)
    bridge = np.zeros(times.size) if bridge is None else np.asarray(bridge, dtype=float)
    return BaseConfiguration(horizon, height, times, np.asarray(marks, dtype=float), bridge,
                             np.asarray(dw, dtype=float))


def test_model_validation():
    with pytest.raises(ValueError, match="H1"):
        ModelParams(gamma=0.0)
    with pytest.raises(ValueError, match="H1"):
        ModelParams(gamma=-0.2)
    with pytest.raises(ValueError):
        ModelParams(sigma=0.0)
    with pytest.raises(ValueError):
        ModelParams(s0=-1.0)
    with pytest.raises(ValueError, match="unknown jump"):
        ModelParams(jump="cubic")
    assert ModelParams(jump="zero", gamma=0.0).degenerate


def test_deterministic_growth():
    m = ModelParams(sigma=1e-9, jump="zero")
    p = HawkesParams()
    path = simulate_path(m, p, base_from([], [], np.zeros(100)))
    assert np.allclose(path.s, 5.0 * np.exp(0.05 * path.grid), rtol=1e-12)


def test_jump_free_path_matches_quadrature():
    m, p = ModelParams(), HawkesParams()
    rng = np.random.default_rng(0)
    dw = rng.standard_normal(100) * 0.1
    path = simulate_path(m, p, base_from([], [], dw))
    w = np.concatenate(([0.0], np.cumsum(dw)))
    for k in (0, 13, 50, 100):
        t = path.grid[k]
        ref = log_price_oracle(0.05, 0.1, 0.2, 1.0, 0.3, 0.8, t, w[k], [])
        assert path.x[k] == pytest.approx(ref, abs=1e-12)


def test_jump_path_matches_quadrature():
    m, p = ModelParams(), HawkesParams()
    rng = np.random.default_rng(1)
    dw = rng.standard_normal(100) * 0.1
    base = base_from([0.237, 0.612, 0.8], [0.4, 1.1, 3.9], dw)
    path = simulate_path(m, p, base)
    jumps = list(path.jump_times)
    assert jumps == [0.237, 0.612]
    w = np.concatenate(([0.0], np.cumsum(dw)))
    for k in (10, 30, 61, 62, 100):
        ref = log_price_oracle(0.05, 0.1, 0.2, 1.0, 0.3, 0.8, path.grid[k], w[k], jumps)
        assert path.x[k] == pytest.approx(ref, abs=1e-12)


def test_log_jump_additivity():
    m, p = ModelParams(), HawkesParams()
    base, real = sample_hawkes(p, 1.0, seed=3, path=11)
    path = simulate_path(m, p, base, real)
    assert real.n_jumps > 0
    nodes = path.candidate_node[real.accepted]
    ratio = path.node_s[nodes] / path.node_s_left[nodes]
    assert np.allclose(np.log(ratio), m.jump_size(real.jump_times))
    assert np.all(path.s > 0)


def test_grid_value_at_jump_time_has_left_limit():
    m, p = ModelParams(), HawkesParams()
    base = base_from([0.25], [0.5], np.zeros(4))
    path = simulate_path(m, p, base)
    node = path.grid_node[1]
    assert path.node_s[node] / path.node_s_left[node] == pytest.approx(math.exp(0.2 * 0.25))


def test_martingale_growth():
    m, p = ModelParams(), HawkesParams()
    s = np.array([simulate_path(m, p, *sample_hawkes(p, 1.0, seed=21, path=i)).s[[50, 100]]
                  for i in range(8000)])
    assert within(s[:, 0] / (5 * math.exp(0.025)), 1.0)
    assert within(s[:, 1] / (5 * math.exp(0.05)), 1.0)


def test_asian_constant_path():
    t = np.array([0.0, 0.3, 0.3, 1.0])
    c = np.full(4, 2.5)
    assert trapezoid_with_jumps(t, c, c, 1.0) == pytest.approx(2.5)


def test_asian_deterministic_exponential():
    m = ModelParams(sigma=1e-9, jump="zero")
    base = base_from([], [], np.zeros(10_000))
    y = asian_average(simulate_path(m, HawkesParams(), base))
    exact = 5.0 / 0.05 * math.expm1(0.05)
    assert abs(y / exact - 1) < 1e-6


def test_asian_single_jump_toy():
    from scipy.integrate import quad

    m, p = ModelParams(sigma=1e-9), HawkesParams()
    base = base_from([0.4], [0.5], np.zeros(2000))
    path = simulate_path(m, p, base)

    def s(t):
        return 5.0 * math.exp(log_price_oracle(0.05, 1e-9, 0.2, 1.0, 0.3, 0.8, t, 0.0, [0.4]))

    ref = quad(s, 0, 0.4, epsabs=1e-12)[0] + quad(s, 0.4, 1.0, epsabs=1e-12)[0]
    assert path.asian == pytest.approx(ref, rel=1e-6)


def test_asian_refines_with_grid():
    m, p = ModelParams(sigma=1e-9), HawkesParams()
    ys = [simulate_path(m, p, base_from([0.4], [0.5], np.zeros(n))).asian for n in (50, 100, 200)]
    e1, e2 = abs(ys[0] - ys[2]), abs(ys[1] - ys[2])
    assert e2 < e1 and e1 < 1e-3


def test_discretize_recursion():
    m, p = ModelParams(), HawkesParams()
    base = sample_base(p, 1.0, seed=4, path=9, n_steps=400)
    for n in (25, 100, 400):
        d = discretize(m, p, base, n)
        dt = 1.0 / n
        # recount base points in each cell below the frozen threshold
        counts = np.zeros(n)
        for t, z in zip(base.times, base.marks):
            i = min(int(math.ceil(t / dt)) - 1, n - 1)
            counts[i] += z <= d.lambda_n[i]
        assert np.array_equal(counts, d.counts)
        lhs = d.lambda_n[1:] - d.lambda_n[:-1] - p.beta * dt * (p.lambda0 - d.lambda_n[:-1])
        assert np.allclose(lhs, p.alpha * counts)


def test_discretize_poisson_case_is_euler_relaxation():
    m, p = ModelParams(), HawkesParams(alpha=0.0)
    base = sample_base(p, 1.0, seed=4, path=1, n_steps=100)
    d = discretize(m, p, base, 100)
    assert np.all(d.lambda_n == p.lambda0)


def test_discretize_without_points_is_first_order():
    m, p = ModelParams(), HawkesParams()
    rng = np.random.default_rng(2)
    base = base_from([], [], rng.standard_normal(400) * 0.05)
    exact = simulate_path(m, p, base).x_T
    errs = [abs(discretize(m, p, base, n).x_n[-1] - exact) for n in (50, 100, 200)]
    assert 1.7 < errs[0] / errs[1] < 2.3 and 1.7 < errs[1] / errs[2] < 2.3


def test_discretize_requires_refining_grid():
    base = sample_base(HawkesParams(), 1.0, seed=0, path=0, n_steps=100)
    with pytest.raises(ValueError, match="refine"):
        discretize(ModelParams(), HawkesParams(), base, 30)
    with pytest.raises(ValueError):
        discretize(ModelParams(), HawkesParams(), base, 0)


def test_payoff_examples():
    assert payoff("european", 6.0, 5.0) == 1.0
    assert payoff("asian", 4.0, 5.0) == 0.0
    assert payoff("european", 5.0, 5.0) == 0.0
    with pytest.raises(ValueError):
        payoff("american", 1.0, 1.0)
    with pytest.raises(ValueError):
        payoff("european", 1.0, -1.0)


def test_path_csv(tmp_path):
    m, p = ModelParams(), HawkesParams()
    path = simulate_path(m, p, *sample_hawkes(p, 1.0, seed=1, path=0))
    out = tmp_path / "p.csv"
    path.to_csv(out)
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["t", "lambda", "X", "S"]
    assert len(rows) == 102
    assert float(rows[-1][3]) == path.s_T
