"""Half-duplex harvest-then-transmit benchmark.

A slot of unit length is split into an energy phase of length 1 - t, in
which the ET beams power and the EHU harvests, and an information phase of
length t, in which the ET is silent and the EHU transmits.  With the ET
silent there is no jamming at EVE, so the secrecy rate is

    t * ( 1/2 E_v ln(1 + v^2 P(v)/sigma1^2) - w E_{v,f} ln(1 + f^2 P(v)/sigma3^2) )

with w = 1/2 (default) or w = 1 (``printed=True``).  P(v) solves the
per-state stationarity condition (see :func:`hd_power`) and its
multiplier is set so the information phase spends exactly what the
energy phase harvested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._backend import kernels
from .model import Channel, FadingGrid, SystemParams
from .power_policy import InfeasibleEnergyError


def hd_power(v_sq, lambda2, params: SystemParams, fading_f: Channel):
    """Non-negative root P of

        v^2/s1 - (1 + v^2 P/s1) sum_f p(f) f^2/(f^2 P + sigma3^2) = (1 + v^2 P/s1) lambda2

    with s1 = sigma1^2; 0 when the left side is not above the right at P = 0.
    ``v_sq`` may be an array.
    """
    if not lambda2 > 0:
        raise ValueError("lambda2 must be positive")
    c = np.atleast_1d(np.asarray(v_sq, dtype=float)) / params.sigma1_sq
    p = kernels.power_roots(np.ascontiguousarray(c), float(lambda2), fading_f.gains,
                            fading_f.probs, params.sigma3_sq, -1)
    return float(p[0]) if np.ndim(v_sq) == 0 else np.asarray(p)


def hd_power_residual(p, v_sq, lambda2, params: SystemParams, fading_f: Channel):
    """``(lhs - rhs, scale)`` of the stationarity condition at power ``p``."""
    c = v_sq / params.sigma1_sq
    f2, pf = fading_f.gains, fading_f.probs
    q = 1.0 + c * p
    s = float(np.sum(pf * f2 / (f2 * p + params.sigma3_sq)))
    return c - q * s - q * lambda2, c + q * s + q * lambda2


@dataclass(frozen=True)
class TGridConfig:
    """Search over the information-phase fraction t.

    The best t is typically small, so half the grid is geometric on
    ``[t_min, t_split]`` and half uniform on ``(t_split, 1)``; bounded
    Brent refinement then runs between the neighbours of the best point.
    """

    n_points: int = 64
    t_min: float = 1e-4
    t_split: float = 0.5
    refine: bool = True
    refine_tol: float = 1e-7

    def grid(self):
        n_geo = self.n_points // 2
        geo = np.geomspace(self.t_min, self.t_split, n_geo)
        uni = np.linspace(self.t_split, 1.0, self.n_points - n_geo + 2)[1:-1]
        return np.concatenate([geo, uni])


@dataclass
class HdPoint:
    t: float
    rate: float
    lambda2: float
    powers: np.ndarray


def _calibrate(budget, params, grid):
    """lambda2 with sum_v P(v) p(v) = budget, and the powers."""
    v2, pv = grid.v.gains, grid.v.probs
    s0 = float(grid.f.probs @ grid.f.gains) / params.sigma3_sq
    c = v2 / params.sigma1_sq
    lam_hi = float(c.max()) - s0
    if lam_hi <= 0:
        # EVE's channel beats every EHU-ET state: no state transmits
        return math.inf, np.zeros_like(v2)

    def spend(log_lam):
        return float(pv @ hd_power(v2, math.exp(log_lam), params, grid.f)) - budget

    hi = math.log(lam_hi)
    lo = hi - 1.0
    n = 0
    while spend(lo) <= 0:
        lo -= 2.0**n
        n += 1
        if n > 12:
            raise ArithmeticError("could not bracket the HD multiplier")
    log_lam = optimize.brentq(spend, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                              maxiter=300)
    lam = math.exp(log_lam)
    return lam, hd_power(v2, lam, params, grid.f)


def hd_rate_at(t, params: SystemParams, grid: FadingGrid, printed=False):
    """Unclamped secrecy rate for information fraction ``t``; an :class:`HdPoint`."""
    v2, pv = grid.v.gains, grid.v.probs
    harvest = params.eta * params.p_et * grid.v.mean
    if not 0 < t < 1:
        return HdPoint(t, 0.0, math.inf, np.zeros_like(v2))
    budget = (1.0 - t) / t * harvest - params.p_p
    if budget <= 0:
        return HdPoint(t, 0.0, math.inf, np.zeros_like(v2))
    lam, p = _calibrate(budget, params, grid)
    legit = 0.5 * float(pv @ np.log1p(v2 * p / params.sigma1_sq))
    snr_e = np.outer(p, grid.f.gains) / params.sigma3_sq
    leak = float(pv @ (np.log1p(snr_e) @ grid.f.probs))
    w = 1.0 if printed else 0.5
    return HdPoint(t, t * (legit - w * leak), lam, p)


def hd_secrecy_rate(params: SystemParams, grid: FadingGrid, t_grid_cfg: TGridConfig = TGridConfig(),
                    printed=False, strict=True):
    """Best HD secrecy rate over t, clamped at 0; returns ``(rate, t_star, point)``.

    ``strict`` raises :class:`InfeasibleEnergyError` when nothing can be
    harvested; otherwise that case returns a zero rate.
    """
    if not params.eta * params.p_et * grid.v.mean > 0:
        if strict:
            raise InfeasibleEnergyError("HD benchmark needs eta * P_ET * Omega_V > 0")
        return 0.0, math.nan, None
    ts = t_grid_cfg.grid()
    pts = [hd_rate_at(t, params, grid, printed) for t in ts]
    rates = np.array([p.rate for p in pts])
    i = int(np.argmax(rates))
    best = pts[i]
    if t_grid_cfg.refine and rates[i] > 0:
        lo = ts[i - 1] if i > 0 else 0.5 * ts[0]
        hi = ts[i + 1] if i + 1 < ts.size else 0.5 * (ts[-1] + 1.0)
        res = optimize.minimize_scalar(lambda t: -hd_rate_at(t, params, grid, printed).rate,
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": t_grid_cfg.refine_tol * hi})
        cand = hd_rate_at(float(res.x), params, grid, printed)
        if cand.rate > best.rate:
            best = cand
    return max(best.rate, 0.0), best.t, best
