"""EHU power allocation P_EHU(x2, v) and the energy-causality multiplier lambda2.

For an ET symbol x2 and fading state v, write c = v^2 / (sigma2^2 + x2^2 alpha2)
and S(P) = sum_f p(f) f^2 / (f^2 P + sigma3^2).  The optimal power is the
non-negative root of

    g(P) = c + (1 + cP) S(P) - (1 + cP) lambda2 (1 - eta (qbar1^2 + alpha1)).

Dividing by (1 + cP) gives h(P) = c/(1+cP) + S(P) - lambda2 (1 - recycle),
which is strictly decreasing, so the root is unique and lies in
[0, 2 / (lambda2 (1 - recycle))].  lambda2 is then tuned so the average
energy balance (constraint C2) holds with equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._backend import kernels
from .inputs import EtInputDistribution
from .model import Channel, FadingGrid, SystemParams


class InfeasibleEnergyError(ValueError):
    """The EHU cannot harvest enough to cover the processing cost."""


class MonotonicityError(ArithmeticError):
    """The energy-balance residual was not monotone in lambda2."""


@dataclass(frozen=True)
class PowerPolicy:
    """P_EHU on the grid of ``EtInputDistribution.points`` (shape [n_v, m])."""

    p_ehu: np.ndarray
    lambda1: float
    lambda2: float
    c2_residual: float = 0.0  # achieved spend - harvest, watts

    def __post_init__(self):
        p = np.asarray(self.p_ehu, dtype=float)
        if np.any(p < 0) or np.any(~np.isfinite(p)):
            raise ValueError("powers must be finite and non-negative")
        p.setflags(write=False)
        object.__setattr__(self, "p_ehu", p)


def legit_gain(x2_sq, v_sq, params: SystemParams):
    """c = v^2 / (sigma2^2 + x2^2 alpha2)."""
    return np.asarray(v_sq) / (params.sigma2_sq + np.asarray(x2_sq) * params.alpha2)


def solve_ehu_power(x2_sq, v_sq, lambda2, params: SystemParams, fading_f: Channel):
    """Non-negative root of g(P) for one (x2^2, v^2); 0 when g(0) <= 0."""
    if not lambda2 > 0:
        raise ValueError("lambda2 must be positive")
    c = float(legit_gain(x2_sq, v_sq, params))
    lam = lambda2 * (1.0 - params.recycle)
    return float(kernels.power_roots(np.array([c]), lam, fading_f.gains, fading_f.probs,
                                     params.sigma3_sq, 1)[0])


def ehu_power_residual(p, x2_sq, v_sq, lambda2, params: SystemParams, fading_f: Channel):
    """``(g(P), scale)``; scale is the sum of the magnitudes of g's terms."""
    c = float(legit_gain(x2_sq, v_sq, params))
    f2, pf = fading_f.gains, fading_f.probs
    s = float(np.sum(pf * f2 / (f2 * p + params.sigma3_sq)))
    q = 1.0 + c * p
    lam = lambda2 * (1.0 - params.recycle)
    return c + q * s - q * lam, c + q * s + q * lam


def policy_powers(dist: EtInputDistribution, lambda2, params: SystemParams, grid: FadingGrid):
    """P_EHU for every mass point of ``dist``; padding entries get 0."""
    if math.isinf(lambda2):
        return np.zeros_like(dist.points)
    c = legit_gain(dist.points**2, grid.v.gains[:, None], params)
    live = dist.probs > 0
    out = np.zeros_like(c)
    # the root depends on (x2, v) only through c
    cu, inv = np.unique(c[live], return_inverse=True)
    roots = kernels.power_roots(cu, lambda2 * (1.0 - params.recycle), grid.f.gains,
                                grid.f.probs, params.sigma3_sq, 1)
    out[live] = roots[inv]
    return out


def harvest_from_et(dist: EtInputDistribution, params: SystemParams, grid: FadingGrid):
    """eta sum v^2 x2^2 p(x2|v) p(v), harvest from the ET signal alone."""
    per_v = (dist.points**2 * dist.probs).sum(axis=1)
    return params.eta * float(grid.v.probs @ (grid.v.gains * per_v))


def energy_balance_residual(policy: PowerPolicy, dist: EtInputDistribution,
                            params: SystemParams, grid: FadingGrid):
    """C2 as spend minus harvest, in watts (positive means infeasible)."""
    pv = grid.v.probs
    spend = float(pv @ (policy.p_ehu * dist.probs).sum(axis=1))
    return spend + params.p_p - harvest_from_et(dist, params, grid) - params.recycle * spend


def calibrate_lambda2(dist: EtInputDistribution, params: SystemParams, grid: FadingGrid,
                      lambda1=0.0, rtol=1e-9):
    """PowerPolicy whose lambda2 makes C2 hold with equality.

    Geometric bracketing from the smallest lambda2 that switches every power
    off, then Brent's method on lambda2.  The residual is checked to be
    non-increasing in lambda2 over every evaluated point.
    """
    harvest = harvest_from_et(dist, params, grid)
    if not harvest > params.p_p:
        if harvest == 0.0 and params.p_p == 0.0:
            return PowerPolicy(np.zeros_like(dist.points), lambda1, math.inf)
        raise InfeasibleEnergyError(
            f"harvest {harvest:.6g} W does not exceed processing cost {params.p_p:.6g} W")
    pv = grid.v.probs
    net = 1.0 - params.recycle
    scale = harvest
    seen = []

    def resid(lam):
        p = policy_powers(dist, lam, params, grid)
        r = net * float(pv @ (p * dist.probs).sum(axis=1)) + params.p_p - harvest
        seen.append((lam, r))
        return r

    # at or above lam_hi every power is zero and the residual is p_p - harvest < 0
    c_max = float(legit_gain(dist.points**2, grid.v.gains[:, None], params)[dist.probs > 0].max())
    s0 = float(grid.f.probs @ grid.f.gains) / params.sigma3_sq
    lam_hi = (c_max + s0) / net * (1.0 + 1e-9)
    lam_lo = 0.5 * lam_hi
    n = 0
    while resid(lam_lo) <= 0.0:
        lam_lo *= 0.5 ** (1 + n)
        n += 1
        if n > 60:
            raise ArithmeticError("could not bracket lambda2 from below")
    lam = optimize.brentq(resid, lam_lo, lam_hi, xtol=1e-300,
                          rtol=4 * np.finfo(float).eps, maxiter=400)
    _check_monotone(seen, scale)
    p = policy_powers(dist, lam, params, grid)
    r = net * float(pv @ (p * dist.probs).sum(axis=1)) + params.p_p - harvest
    if abs(r) > rtol * scale:
        # acceptable only when the sign change sits within a few ulps of lam,
        # i.e. the residual is at the resolution of the power roots
        ulps = 16 * np.finfo(float).eps
        r_dn = resid(lam * (1.0 - ulps))
        r_up = resid(lam * (1.0 + ulps))
        if not (min(r_dn, r, r_up) <= 0.0 <= max(r_dn, r, r_up)):
            raise ArithmeticError(f"lambda2 calibration residual {r:.3g} W exceeds tolerance")
    return PowerPolicy(p, lambda1, lam, r)


def _check_monotone(seen, scale):
    pts = sorted(seen)
    lam = np.array([s[0] for s in pts])
    r = np.array([s[1] for s in pts])
    # allow for the rounding floor of the power roots
    rises = np.diff(r) > 1e-8 * scale
    if np.any(rises):
        i = int(np.argmax(rises))
        raise MonotonicityError(
            f"C2 residual increases in lambda2 between {lam[i]:.6g} and {lam[i + 1]:.6g} "
            f"({r[i]:.6g} -> {r[i + 1]:.6g} W)")
