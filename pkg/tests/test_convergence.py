import math

import numpy as np
import pytest

from hawkesgreeks.asset import ModelParams
from hawkesgreeks.convergence import coupled_errors, loglog_slope, run_convergence
from hawkesgreeks.hawkes import HawkesParams


def test_slope_of_power_law():
    n = np.array([25, 50, 100, 200])
    assert loglog_slope(n, 3.0 / n) == pytest.approx(-1.0, abs=1e-12)
    assert math.isnan(loglog_slope(n, np.array([1.0, 0.5, 0.0, 0.1])))


def test_poisson_intensity_has_no_error():
    d_lam, d_x = coupled_errors(ModelParams(), HawkesParams(alpha=0.0), 0, 3, (25, 100))
    assert np.all(d_lam == 0)
    assert np.all(np.isfinite(d_x))


def test_poisson_case_gives_undefined_lambda_slope():
    r = run_convergence(ModelParams(), HawkesParams(alpha=0.0), 20, grids=(25, 50, 100))
    assert math.isnan(r.lambda_slope) and not r.passed


def test_needs_two_grids():
    with pytest.raises(ValueError):
        run_convergence(ModelParams(), HawkesParams(), 5, grids=(100,))


def test_gates_at_small_sample():
    r = run_convergence(ModelParams(), HawkesParams(), 400, seed=2)
    assert r.lambda_slope <= -0.8 and r.x_slope <= -0.4 and r.passed
    assert np.all(np.diff(r.x_mse) < 0)
