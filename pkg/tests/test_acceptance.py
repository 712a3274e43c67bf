"""Acceptance criteria 1-8, one PASS/FAIL line per criterion.

Run under pytest (lines are echoed in the terminal summary) or directly with
``python tests/test_acceptance.py``.  Sweeps use 16 fading points per channel
and are cached, so criterion 7 inspects the very solutions of criteria 4-6.
"""

import math
import sys
from functools import lru_cache

import numpy as np
import pytest

from fdsecrecy.bounds import (CASE3, SearchConfig, lower_bound, mac_decodability_check,
                              upper_bound)
from fdsecrecy.hd_benchmark import hd_power, hd_power_residual, hd_secrecy_rate
from fdsecrecy.model import FadingGrid, SystemParams, dbm_to_watts
from fdsecrecy.numerics import (LN2, MixtureSpec, binary_deficit, cal_I, cal_I_lncosh,
                                mixture_entropy)
from fdsecrecy.power_policy import (energy_balance_residual, ehu_power_residual, harvest_from_et,
                                    legit_gain, solve_ehu_power)
from fdsecrecy.protocol_sim import SimConfig, expected_harvest, simulate, slack_policy

N_FADING = 16
SWEEP_DBM = np.linspace(-30.0, 5.0, 8)
RECYCLE_DB = np.linspace(-10.0, 0.0, 6)  # qbar1^2 in dB, alpha1 fixed
ETAS = (0.4, 0.6, 0.8)
SEARCH = SearchConfig()

LINES = []


def report(num, title, passed, detail):
    line = f"criterion {num} {'PASS' if passed else 'FAIL'}: {title} | {detail}"
    LINES.append(line)
    print(line)
    return passed


@lru_cache(maxsize=None)
def grid_for(params):
    return FadingGrid.from_params(params, N_FADING)


@lru_cache(maxsize=None)
def lower_at(params):
    return lower_bound(params, grid_for(params))


@lru_cache(maxsize=None)
def upper_at(params):
    return upper_bound(params, grid_for(params), SEARCH, lower=lower_at(params))


@lru_cache(maxsize=None)
def hd_at(params):
    return hd_secrecy_rate(params, grid_for(params), strict=False)[0]


def fig1a_points():
    return [SystemParams(p_et=dbm_to_watts(x)) for x in SWEEP_DBM]


def fig1b_points():
    return [SystemParams(p_et=dbm_to_watts(x), d_ehu_eve=9.0) for x in SWEEP_DBM]


def recycle_points():
    return [SystemParams(qbar1=math.sqrt(10 ** (x / 10))) for x in RECYCLE_DB]


def eta_points():
    return [SystemParams(eta=e) for e in ETAS]


# ---------------------------------------------------------------- criterion 1

def check_oracle_equivalence(n_draws=200, seed=2024):
    rng = np.random.default_rng(seed)
    worst_x1 = worst_x2 = 0.0
    for _ in range(n_draws):
        s3 = 10 ** rng.uniform(-13, -11)
        x2 = 10 ** rng.uniform(-3.5, -0.5)
        g = math.sqrt(rng.exponential(1e-7))
        f2 = rng.exponential(1e-7)
        p = 10 ** rng.uniform(-9, -4)
        s1 = f2 * p + s3
        means = np.array([g * x2, -g * x2])
        half = np.array([0.5, 0.5])
        h1 = mixture_entropy(MixtureSpec(means, half, s1))
        h0 = mixture_entropy(MixtureSpec(means, half, s3))
        a0, a1 = g * x2 / math.sqrt(s3), g * x2 / math.sqrt(s1)
        # integral (entropy) forms
        i_x1 = h1 - h0
        i_x2 = h1 - 0.5 * math.log(2 * math.pi * math.e * s1)
        # deficit-function forms, with the function from an independent quadrature
        d0 = a0 * a0 - cal_I_lncosh(a0)
        d1 = a1 * a1 - cal_I_lncosh(a1)
        worst_x1 = max(worst_x1, abs(i_x1 - (0.5 * math.log(s1 / s3) - d0 + d1)))
        worst_x2 = max(worst_x2, abs(i_x2 - d1))
    ok = max(worst_x1, worst_x2) <= 1e-6
    return report(1, "oracle equivalence of integral and closed forms", ok,
                  f"{n_draws} draws, max |diff| I(X1;Y3) {worst_x1:.2e}, "
                  f"I(X2;Y3) {worst_x2:.2e} nats (tol 1e-6)")


# ---------------------------------------------------------------- criterion 2

def check_deficit_properties():
    a = np.linspace(0.0, 10.0, 50)
    d = binary_deficit(a)
    i0 = cal_I(0.0)
    i6 = abs(cal_I(6.0) - (36.0 - LN2))
    ok = i0 == 0.0 and d.min() >= 0.0 and d.max() <= LN2 and i6 <= 1e-5
    return report(2, "deficit function properties", ok,
                  f"I(0)={i0!r}, alpha^2-I in [{d.min():.3g}, {d.max():.6f}] vs ln2={LN2:.6f}, "
                  f"|I(6)-(36-ln2)|={i6:.2e}")


# ---------------------------------------------------------------- criterion 3

def check_fixed_points(n_draws=100, seed=7):
    rng = np.random.default_rng(seed)
    worst_fd = worst_hd = 0.0
    for _ in range(n_draws):
        params = SystemParams(p_et=dbm_to_watts(rng.uniform(-30, 5)),
                              d_ehu_eve=rng.uniform(8, 16), eta=rng.uniform(0.3, 0.9),
                              alpha2=10 ** rng.uniform(-12, -8))
        fch = FadingGrid.from_params(params, 8).f
        v2 = rng.exponential(params.omega_v)
        x2 = rng.uniform(0, 3) * params.p_et
        c = float(legit_gain(x2, v2, params))
        lam = c * 10 ** rng.uniform(-6, -0.05) / (1 - params.recycle)
        p = solve_ehu_power(x2, v2, lam, params, fch)
        r, s = ehu_power_residual(p, x2, v2, lam, params, fch)
        worst_fd = max(worst_fd, abs(r) / s)
        lam = v2 / params.sigma1_sq * 10 ** rng.uniform(-6, -0.05)
        p = hd_power(v2, lam, params, fch)
        if p > 0:
            r, s = hd_power_residual(p, v2, lam, params, fch)
            worst_hd = max(worst_hd, abs(r) / s)
    # C2 and the Case-2 budget on every lower-bound solution of the figure sweeps
    worst_c2 = worst_budget = 0.0
    n_sol = 0
    for params in fig1a_points() + fig1b_points() + recycle_points() + eta_points():
        res, dist, pol = lower_at(params)
        if res.case_label == CASE3:
            continue
        g = grid_for(params)
        h = harvest_from_et(dist, params, g)
        worst_c2 = max(worst_c2, abs(energy_balance_residual(pol, dist, params, g)) / h)
        if "case2_budget_rel_error" in res.diagnostics:
            worst_budget = max(worst_budget, res.diagnostics["case2_budget_rel_error"])
        n_sol += 1
    ok = worst_fd <= 1e-9 and worst_hd <= 1e-9 and worst_c2 <= 1e-9 and worst_budget <= 1e-6
    return report(3, "fixed-point, energy-balance and budget residuals", ok,
                  f"EHU power root {worst_fd:.1e}, HD power root {worst_hd:.1e} (relative, "
                  f"{n_draws} draws); C2 {worst_c2:.1e} relative and budget {worst_budget:.1e} "
                  f"over {n_sol} solutions")


# ---------------------------------------------------------------- criterion 4

def horizontal_gap_db(dbm, lower, upper, idx):
    """dB shift between where the lower bound reaches upper[idx] and dbm[idx]."""
    target = upper[idx]
    ll = np.log(np.maximum(lower, 1e-300))
    if target > lower.max():
        return math.inf
    x = float(np.interp(math.log(target), ll, dbm))
    return x - dbm[idx]


def check_fig1a():
    pts = fig1a_points()
    lo = np.array([lower_at(p)[0].c_s_lower for p in pts])
    up = np.array([upper_at(p)[0].c_s_upper for p in pts])
    hd = np.array([hd_at(p) for p in pts])
    order = bool(np.all(up >= lo - 1e-6) and np.all(lo >= hd) and np.all(hd >= 0))
    strict = bool(lo[-1] > hd[-1])
    mid = len(pts) // 2
    gap = horizontal_gap_db(SWEEP_DBM, lo, up, mid)
    gaps = [horizontal_gap_db(SWEEP_DBM, lo, up, i) for i in range(len(pts))]
    ok = order and strict and abs(gap) <= 1.5
    gtxt = ", ".join("n/a" if not math.isfinite(g) else f"{g:.2f}" for g in gaps)
    return report(4, "bound ordering and Fig. 1a gap", ok,
                  f"ordering {'ok' if order else 'violated'}, FD>HD at top {strict}, "
                  f"gap at {SWEEP_DBM[mid]:.0f} dBm = {gap:.2f} dB (tol 1.5); "
                  f"gap per point [{gtxt}] dB")


# ---------------------------------------------------------------- criterion 5

def check_fig1b():
    p = fig1b_points()[-1]
    lo = lower_at(p)[0].c_s_lower
    hd = hd_at(p)
    ok = hd == 0.0 and lo > 0.0
    return report(5, "Fig. 1b: HD zero while FD positive", ok,
                  f"at {SWEEP_DBM[-1]:.0f} dBm, EVE at 9 m: HD {hd / LN2:.3e} bits, "
                  f"FD lower {lo / LN2:.3e} bits")


# ---------------------------------------------------------------- criterion 6

def check_monotonicity():
    rec = np.array([lower_at(p)[0].c_s_lower for p in recycle_points()])
    pts = eta_points()
    lo = np.array([lower_at(p)[0].c_s_lower for p in pts])
    up = np.array([upper_at(p)[0].c_s_upper for p in pts])
    hd = np.array([hd_at(p) for p in pts])
    mono = {name: bool(np.all(np.diff(v) >= 0)) for name, v in
            (("lower vs recycling", rec), ("lower vs eta", lo), ("upper vs eta", up),
             ("hd vs eta", hd))}
    ok = all(mono.values())
    bad = [k for k, v in mono.items() if not v]
    return report(6, "monotonicity in recycling and eta", ok,
                  f"recycling sweep {RECYCLE_DB[0]:.0f}..{RECYCLE_DB[-1]:.0f} dB: "
                  f"{rec[0] / LN2:.3e}->{rec[-1] / LN2:.3e} bits; eta {ETAS}: lower "
                  f"{lo[0] / LN2:.3e}->{lo[-1] / LN2:.3e}, hd {hd[0] / LN2:.3e}->"
                  f"{hd[-1] / LN2:.3e}; violations: {bad or 'none'}")


# ---------------------------------------------------------------- criterion 7

def check_mac():
    n = 0
    worst_x2 = 0.0
    failures = []
    for params in fig1a_points() + fig1b_points() + recycle_points() + eta_points():
        res, dist, pol = lower_at(params)
        if res.case_label == CASE3 or not dist.is_binary():
            continue
        m = mac_decodability_check(dist, pol, params, grid_for(params))
        n += 1
        worst_x2 = max(worst_x2, m.i_x2_y3_bits)
        if not (m.r_et_bits == 1.0 and m.i_x2_y3_bits < 1.0 and m.ehu_secure):
            failures.append(params)
    ok = n > 0 and not failures
    return report(7, "MAC decodability diagnostics", ok,
                  f"{n} lower-bound solutions, R_ET = 1 bit, max I(X2;Y3) {worst_x2:.3f} bits, "
                  f"R_EHU > I(X1;Y3) failures: {len(failures)}")


# ---------------------------------------------------------------- criterion 8

def check_simulator():
    params = SystemParams()
    grid = grid_for(params)
    res, dist, _ = lower_at(params)
    pol = slack_policy(dist, params, grid, 0.1)
    spend = float(grid.v.probs @ (pol.p_ehu * dist.probs).sum(axis=1)) + params.p_p
    slack = 1.0 - spend / expected_harvest(dist, pol, params, grid)
    k = 10
    tr = simulate(SimConfig(100_000, k, 0.0, pol, dist, seed=0, burn_in=1000,
                            secrecy_rate=res.c_s_lower), params, grid)
    frac = tr.fraction_active
    # battery non-negativity and causality over 20 seeds, using the unslackened policy too
    min_batt = math.inf
    causal = True
    for seed in range(20):
        for policy in (pol, lower_at(params)[2]):
            t = simulate(SimConfig(5000, k, 0.0, policy, dist, seed=seed), params, grid)
            min_batt = min(min_batt, float(t.battery_before.min()))
            causal &= bool(np.all(np.cumsum(t.e_out) <= np.cumsum(t.e_in) * (1 + 1e-12)))
    per = tr.e_in[tr.burn_in:] / k
    act = tr.active[tr.burn_in:]
    m = expected_harvest(dist, pol, params, grid)
    se = per[act].std() / math.sqrt(act.sum())
    z = abs(per[act].mean() - m) / se
    ok = slack >= 0.1 - 1e-12 and frac >= 0.99 and min_batt >= 0 and causal and z <= 3
    return report(8, "simulator: activity, causality, harvest mean", ok,
                  f"C2 slack {slack:.3f}, fraction_active {frac:.5f} over 1e5 slots, "
                  f"min battery {min_batt:.3g} J over 20 seeds, causal {causal}, "
                  f"harvest mean z-score {z:.2f}")


CHECKS = [check_oracle_equivalence, check_deficit_properties, check_fixed_points, check_fig1a,
          check_fig1b, check_monotonicity, check_mac, check_simulator]


@pytest.mark.slow
@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i + 1}" for i in range(8)])
def test_criterion(check):
    assert check()


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    sys.exit(0 if all(results) else 1)
