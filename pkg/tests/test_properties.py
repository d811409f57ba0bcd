import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkesgreeks.asset import ModelParams, payoff, simulate_path, trapezoid_with_jumps
from hawkesgreeks.hawkes import HawkesParams, sample_hawkes, thin
from hawkesgreeks.malliavin import add_point_diff, build_weight, find_v1, probe_field, weight_values

hawkes_params = st.builds(
    HawkesParams,
    lambda0=st.floats(0.2, 3.0),
    alpha=st.floats(0.0, 0.7),
    beta=st.floats(0.8, 2.0),
)
seeds = st.integers(0, 2**31 - 1)
fast = settings(max_examples=40, deadline=None)


@fast
@given(hawkes_params, seeds)
def test_intensity_bounded_below_and_jumps_by_alpha(p, seed):
    base, real = sample_hawkes(p, 1.0, seed=seed, path=0)
    t = np.linspace(0, 1, 301)
    assert np.all(real.intensity(t) >= p.lambda0 - 1e-12)
    if real.n_jumps:
        tau = real.jump_times
        after = real.intensity(np.minimum(tau + 1e-12, 1.0))
        assert np.allclose(after - real.intensity(tau), p.alpha, atol=1e-9)
    assert np.array_equal(thin(base, p).accepted, real.accepted)


@fast
@given(seeds, st.floats(0.0, 1.0, exclude_max=True))
def test_add_point_is_monotone(seed, t):
    m, p = ModelParams(), HawkesParams()
    path = simulate_path(m, p, *sample_hawkes(p, 1.0, seed=seed, path=1))
    d = add_point_diff(path, t)
    assert np.all(d.d_lambda >= 0)
    assert np.all(d.d_s[path.grid < t] == 0)


@fast
@given(seeds, st.sampled_from(["european", "asian"]), st.floats(0.0, 8.0))
def test_weight_masses_and_vectorization(seed, kind, K):
    m, p = ModelParams(), HawkesParams()
    path = simulate_path(m, p, *sample_hawkes(p, 1.0, seed=seed, path=2))
    field = probe_field(path)
    v1 = find_v1(m, p)
    w = build_weight(path, kind, K, v1, field=field)
    assert np.isclose(w.b1 + w.b2 + w.excluded, field.cell_mass.sum(), rtol=1e-12)
    assert np.all(np.isfinite(w.u_values))
    u, region, _, _ = weight_values(field, kind, np.array([K, K + 1.0]), v1)
    assert np.allclose(u[0], w.u_values, rtol=1e-12, atol=1e-12)


@fast
@given(st.lists(st.floats(0.001, 0.999), min_size=0, max_size=8, unique=True), st.floats(0.1, 10.0))
def test_trapezoid_of_constant(jumps, c):
    t = np.sort(np.concatenate(([0.0, 1.0], jumps)))
    s = np.full(t.size, c)
    assert np.isclose(trapezoid_with_jumps(t, s, s, 1.0), c, rtol=1e-13)


@fast
@given(st.floats(0.0, 100.0), st.floats(0.0, 100.0), st.sampled_from(["european", "asian"]))
def test_payoff_nonnegative_and_lipschitz(x, k, kind):
    v = float(payoff(kind, x, k))
    assert v >= 0 and v >= x - k and abs(v - max(x - k, 0.0)) == 0
