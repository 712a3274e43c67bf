import math

import numpy as np
import pytest

from fdsecrecy.inputs import EtInputDistribution
from fdsecrecy.model import SystemParams
from fdsecrecy.power_policy import (InfeasibleEnergyError, MonotonicityError, PowerPolicy,
                                    _check_monotone, calibrate_lambda2, ehu_power_residual,
                                    energy_balance_residual, harvest_from_et, legit_gain,
                                    policy_powers, solve_ehu_power)


def _draw(rng, params):
    v2 = rng.exponential(params.omega_v)
    x2 = rng.uniform(0, 3) * params.p_et
    c = float(legit_gain(x2, v2, params))
    lam = c * 10 ** rng.uniform(-6, -0.05) / (1 - params.recycle)
    return v2, x2, lam


def test_root_residual_random(params, small_grid, rng):
    for _ in range(100):
        v2, x2, lam = _draw(rng, params)
        p = solve_ehu_power(x2, v2, lam, params, small_grid.f)
        assert p > 0
        r, s = ehu_power_residual(p, x2, v2, lam, params, small_grid.f)
        assert abs(r) <= 1e-9 * s


def test_root_zero_above_switch_off(params, small_grid):
    v2 = params.omega_v
    c = float(legit_gain(0.0, v2, params))
    s0 = float(small_grid.f.probs @ small_grid.f.gains) / params.sigma3_sq
    lam = 1.01 * (c + s0) / (1 - params.recycle)
    assert solve_ehu_power(0.0, v2, lam, params, small_grid.f) == 0.0
    with pytest.raises(ValueError):
        solve_ehu_power(0.0, v2, 0.0, params, small_grid.f)


def test_power_decreasing_in_lambda(params, small_grid):
    v2 = params.omega_v
    lams = np.geomspace(1e3, 1e5, 12)
    p = [solve_ehu_power(params.p_et, v2, l, params, small_grid.f) for l in lams]
    assert np.all(np.diff(p) <= 0)


def test_policy_powers_padding_zero(params, small_grid):
    d = EtInputDistribution.symmetric_pairs([1e-2], [0.5], len(small_grid.v))
    p = policy_powers(d, 1e5, params, small_grid)
    assert p.shape == d.points.shape
    # powers depend on x2 only through x2^2
    np.testing.assert_array_equal(p[:, 0], p[:, 1])


def test_calibration_meets_c2(params, small_grid):
    d = EtInputDistribution.binary(math.sqrt(params.p_et), len(small_grid.v))
    pol = calibrate_lambda2(d, params, small_grid)
    h = harvest_from_et(d, params, small_grid)
    r = energy_balance_residual(pol, d, params, small_grid)
    assert abs(r) <= 1e-9 * h
    assert pol.c2_residual == pytest.approx(r, abs=1e-12 * h)


def test_calibration_infeasible_and_degenerate(small_grid):
    d = EtInputDistribution.binary(0.0, len(small_grid.v))
    with pytest.raises(InfeasibleEnergyError):
        calibrate_lambda2(d, SystemParams(p_et=0.0), small_grid)
    pol = calibrate_lambda2(d, SystemParams(p_et=0.0, p_p=0.0), small_grid)
    assert math.isinf(pol.lambda2) and np.all(pol.p_ehu == 0)


def test_more_recycling_means_more_power(small_grid):
    lo = SystemParams(qbar1=0.5)
    hi = SystemParams(qbar1=1.0)
    d = EtInputDistribution.binary(math.sqrt(lo.p_et), len(small_grid.v))
    e_lo = float(small_grid.v.probs @ calibrate_lambda2(d, lo, small_grid).p_ehu[:, 0])
    e_hi = float(small_grid.v.probs @ calibrate_lambda2(d, hi, small_grid).p_ehu[:, 0])
    assert e_hi > e_lo


def test_policy_validation():
    with pytest.raises(ValueError):
        PowerPolicy(np.array([[-1.0]]), 0.0, 1.0)


def test_monotonicity_guard():
    _check_monotone([(1.0, 3.0), (2.0, 1.0), (3.0, -1.0)], 1.0)
    with pytest.raises(MonotonicityError):
        _check_monotone([(1.0, 3.0), (2.0, 4.0)], 1.0)
