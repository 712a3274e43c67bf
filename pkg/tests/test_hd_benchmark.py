import math

import numpy as np
import pytest

from fdsecrecy.hd_benchmark import (TGridConfig, hd_power, hd_power_residual, hd_rate_at,
                                    hd_secrecy_rate)
from fdsecrecy.model import SystemParams
from fdsecrecy.power_policy import InfeasibleEnergyError


def test_closed_form_without_eve(params, small_grid):
    f = small_grid.without_eve().f
    v2 = params.omega_v
    lam = 0.1 * v2 / params.sigma1_sq
    assert hd_power(v2, lam, params, f) == pytest.approx(1 / lam - params.sigma1_sq / v2,
                                                         rel=1e-12)


def test_zero_above_switch_off(params, small_grid):
    v2 = params.omega_v
    s0 = float(small_grid.f.probs @ small_grid.f.gains) / params.sigma3_sq
    lam = v2 / params.sigma1_sq - s0
    assert hd_power(v2, lam * 1.0001, params, small_grid.f) == 0.0


def test_residual_random(params, small_grid, rng):
    for _ in range(100):
        v2 = rng.exponential(params.omega_v)
        lam = v2 / params.sigma1_sq * 10 ** rng.uniform(-6, -0.05)
        p = hd_power(v2, lam, params, small_grid.f)
        if p > 0:
            r, s = hd_power_residual(p, v2, lam, params, small_grid.f)
            assert abs(r) <= 1e-9 * s


def test_array_input(params, small_grid):
    v2 = small_grid.v.gains
    out = hd_power(v2, 1e4, params, small_grid.f)
    assert out.shape == v2.shape and np.all(np.diff(out) >= 0)


def test_boundaries_give_zero(params, small_grid):
    assert hd_rate_at(0.0, params, small_grid).rate == 0.0
    assert hd_rate_at(1.0, params, small_grid).rate == 0.0


def test_budget_equation(params, small_grid):
    t = 0.05
    pt = hd_rate_at(t, params, small_grid)
    spend = float(small_grid.v.probs @ pt.powers)
    harvest = params.eta * params.p_et * small_grid.v.mean
    assert t * (spend + params.p_p) == pytest.approx((1 - t) * harvest, rel=1e-9)


def test_rate_nonnegative_and_monotone(small_grid):
    rates = [hd_secrecy_rate(SystemParams(p_et=p), small_grid)[0] for p in (1e-5, 1e-4, 1e-3)]
    assert rates[0] >= 0 and np.all(np.diff(rates) >= 0)
    eta = [hd_secrecy_rate(SystemParams(eta=e), small_grid)[0] for e in (0.4, 0.6, 0.8)]
    assert np.all(np.diff(eta) >= 0)


def test_positive_without_eve(params, small_grid):
    assert hd_secrecy_rate(params, small_grid.without_eve())[0] > 0


def test_printed_form_is_smaller(params, small_grid):
    assert hd_secrecy_rate(params, small_grid, printed=True)[0] < \
        hd_secrecy_rate(params, small_grid)[0]


def test_infeasible(small_grid):
    p = SystemParams(p_et=0.0)
    with pytest.raises(InfeasibleEnergyError):
        hd_secrecy_rate(p, small_grid)
    rate, t, _ = hd_secrecy_rate(p, small_grid, strict=False)
    assert rate == 0.0 and math.isnan(t)


def test_t_grid():
    ts = TGridConfig().grid()
    assert ts.size == 64 and np.all(np.diff(ts) > 0) and ts[0] > 0 and ts[-1] < 1
