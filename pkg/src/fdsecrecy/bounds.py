"""Upper and lower bounds on the secrecy capacity, and the decodability check.

All rates are in nats per channel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import kernels
from .inputs import EtInputDistribution
from .model import Channel, FadingGrid, SystemParams
from .numerics import ENTROPY_TOL, LN2, QuadratureError, binary_deficit
from .power_policy import (InfeasibleEnergyError, PowerPolicy, calibrate_lambda2,
                           harvest_from_et, legit_gain)

CASE1, CASE2, CASE3 = "Case1", "Case2", "Case3"


@dataclass
class SecrecyResult:
    c_s_upper: float | None = None
    c_s_lower: float | None = None
    case_label: str | None = None
    hd_rate: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def check(self, atol=1e-6):
        """Raise if the stored rates violate ordering or sign."""
        for name in ("c_s_upper", "c_s_lower", "hd_rate"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise AssertionError(f"{name} is negative: {val}")
        if self.c_s_upper is not None and self.c_s_lower is not None:
            if self.c_s_upper < self.c_s_lower - atol:
                raise AssertionError(
                    f"upper bound {self.c_s_upper:.6g} below lower bound {self.c_s_lower:.6g}")


# ---------------------------------------------------------------- rate pieces

def legit_rate(dist: EtInputDistribution, policy: PowerPolicy, params: SystemParams,
               grid: FadingGrid):
    """1/2 sum ln(1 + v^2 P / (sigma2^2 + x2^2 alpha2)) p(x2|v) p(v)."""
    c = legit_gain(dist.points**2, grid.v.gains[:, None], params)
    per_v = (np.log1p(c * policy.p_ehu) * dist.probs).sum(axis=1)
    return 0.5 * float(grid.v.probs @ per_v)


def eve_leakage(dist: EtInputDistribution, policy: PowerPolicy, params: SystemParams,
                grid: FadingGrid, tol=ENTROPY_TOL):
    """I(X1; Y3 | V, G, F): mixture entropy with and without the EHU signal.

    EVE sees means g*x2_j; the EHU's Gaussian symbol adds f^2 P_EHU(x2_j, v)
    to the variance of component j.  States where the ET sends a single
    point reduce to 1/2 ln(1 + f^2 P / sigma3^2).
    """
    live = dist.probs > 0
    single = live.sum(axis=1) == 1
    pv = np.array(grid.v.probs, dtype=float)
    total = 0.0
    if single.any():
        p1 = policy.p_ehu[single][live[single]]  # one power per single-point row
        snr = 0.5 * np.log1p(np.outer(p1, grid.f.gains) / params.sigma3_sq) @ grid.f.probs
        total += float(pv[single] @ snr)
        pv[single] = 0.0
    if pv.any():
        val, err, ok = kernels.leakage_sum(
            np.ascontiguousarray(dist.points), np.ascontiguousarray(dist.probs),
            np.ascontiguousarray(policy.p_ehu, dtype=float), pv,
            np.sqrt(grid.g.gains), np.ascontiguousarray(grid.g.probs),
            np.ascontiguousarray(grid.f.gains), np.ascontiguousarray(grid.f.probs),
            params.sigma3_sq, tol)
        if not ok:
            raise QuadratureError("leakage quadrature did not converge", err)
        total += float(val)
    return total


def _binary_terms(dist, policy, params, grid):
    """Per-(v, g, f) normalised means a0 = g x0/sigma3 and a1 = g x0/sqrt(f^2 P + sigma3^2)."""
    x0 = dist.binary_amplitudes()
    p = policy.p_ehu.max(axis=1)  # both signs share one power
    g = np.sqrt(grid.g.gains)
    s1 = grid.f.gains[None, :] * p[:, None] + params.sigma3_sq  # [v, f]
    a0 = g[None, :] * x0[:, None] / math.sqrt(params.sigma3_sq)  # [v, g]
    a1 = g[None, :, None] * x0[:, None, None] / np.sqrt(s1)[:, None, :]  # [v, g, f]
    return a0, a1, s1


def eve_leakage_binary(dist, policy, params, grid):
    """Closed form for +/- x0(v): 1/2 ln(1 + f^2 P / sigma3^2) - Psi, averaged."""
    a0, a1, s1 = _binary_terms(dist, policy, params, grid)
    d0 = binary_deficit(a0.ravel()).reshape(a0.shape)
    d1 = binary_deficit(a1.ravel()).reshape(a1.shape)
    snr = 0.5 * np.log(s1 / params.sigma3_sq)  # [v, f]
    term = snr[:, None, :] - d0[:, :, None] + d1
    w = grid.v.probs[:, None, None] * grid.g.probs[None, :, None] * grid.f.probs[None, None, :]
    return float((term * w).sum())


def secrecy_rate(dist: EtInputDistribution, params: SystemParams, grid: FadingGrid,
                 policy: PowerPolicy | None = None):
    """``(rate, legit, leak, policy)`` for a given ET distribution (rate unclamped)."""
    if policy is None:
        policy = calibrate_lambda2(dist, params, grid)
    legit = legit_rate(dist, policy, params, grid)
    leak = eve_leakage(dist, policy, params, grid)
    return legit - leak, legit, leak, policy


def energy_feasible(dist, params, grid):
    return harvest_from_et(dist, params, grid) > params.p_p


# ---------------------------------------------------------------- lower bound

@dataclass(frozen=True)
class Case2Config:
    scan_points: int = 160
    scan_floor: float = 1e-6  # smallest scanned x as a fraction of the cap
    root_iters: int = 60
    lambda1_iters: int = 100
    budget_rtol: float = 1e-10
    outer_iters: int = 30
    outer_rtol: float = 1e-9


def _stationarity(x, v_sq, lam1, lam2, params, grid):
    """Residual of the per-v stationarity condition for mass point +/- x."""
    x_sq = x * x
    c = legit_gain(x_sq, v_sq, params)
    shape = c.shape
    cu, inv = np.unique(c.ravel(), return_inverse=True)
    p = kernels.power_roots(cu, lam2 * (1.0 - params.recycle), grid.f.gains, grid.f.probs,
                            params.sigma3_sq, 1)[inv].reshape(shape)
    return (0.5 * np.log1p(c * p) - lam1 * x_sq
            - lam2 * ((1.0 - params.recycle) * p - params.eta * v_sq * x_sq))


def _x0_profile(lam1, lam2, cap, params, grid, cfg: Case2Config):
    """Largest x in [0, cap(v)] where the stationarity residual is >= 0, per v."""
    v = grid.v.gains
    frac = np.concatenate([[0.0], np.geomspace(cfg.scan_floor, 1.0, cfg.scan_points)])
    xs = cap[:, None] * frac[None, :]
    r = _stationarity(xs, v[:, None], lam1, lam2, params, grid)
    ok = r >= 0
    # last scanned point with r >= 0; -1 when none
    last = np.where(ok.any(axis=1), ok.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1), -1)
    x0 = np.zeros(v.size)
    full = last == ok.shape[1] - 1
    x0[full] = cap[full]
    mid = (last >= 0) & ~full
    if mid.any():
        idx = np.nonzero(mid)[0]
        lo = xs[idx, last[idx]]
        hi = xs[idx, last[idx] + 1]
        vv = v[idx]
        for _ in range(cfg.root_iters):
            m = 0.5 * (lo + hi)
            good = _stationarity(m, vv, lam1, lam2, params, grid) >= 0
            lo = np.where(good, m, lo)
            hi = np.where(good, hi, m)
            if np.all(hi - lo <= 1e-15 * hi):
                break
        x0[idx] = lo
    return x0


def _solve_lambda1(lam2, cap, params, grid, cfg):
    """lambda1 and an x0 profile with sum x0^2 p(v) = P_ET exactly.

    x0 is non-increasing in lambda1 but may jump, so the returned profile is
    the convex combination (in x0^2) of the profiles at the final bracket ends.
    """
    pv = grid.v.probs
    p_et = params.p_et

    def budget(lam1):
        x0 = _x0_profile(lam1, lam2, cap, params, grid, cfg)
        return float(pv @ x0**2), x0

    # natural scale of lambda1: a rate divided by a power
    step = max(lam2 * params.eta * grid.omega_v, 1.0 / p_et)
    lo, hi = -step, step
    b_lo, x_lo = budget(lo)
    b_hi, x_hi = budget(hi)
    n = 0
    while b_lo < p_et:
        lo -= step * 2.0**n
        b_lo, x_lo = budget(lo)
        n += 1
        if n > 200:
            raise ArithmeticError("cannot bracket lambda1 from below")
    n = 0
    while b_hi > p_et:
        hi += step * 2.0**n
        b_hi, x_hi = budget(hi)
        n += 1
        if n > 200:
            raise ArithmeticError("cannot bracket lambda1 from above")
    for _ in range(cfg.lambda1_iters):
        if (b_lo - b_hi <= cfg.budget_rtol * p_et
                or hi - lo <= 1e-15 * max(abs(lo), abs(hi))):
            break
        mid = 0.5 * (lo + hi)
        b, x = budget(mid)
        if b >= p_et:
            lo, b_lo, x_lo = mid, b, x
        else:
            hi, b_hi, x_hi = mid, b, x
    if b_lo == b_hi:
        theta = 1.0
    else:
        theta = (p_et - b_hi) / (b_lo - b_hi)
    x0_sq = theta * x_lo**2 + (1.0 - theta) * x_hi**2
    x0 = np.sqrt(x0_sq)
    lam1 = lo if theta >= 0.5 else hi
    return lam1, x0


def solve_case2(params: SystemParams, grid: FadingGrid, lambda2_init,
                cfg: Case2Config = Case2Config()):
    """Per-v binary amplitudes x0(v) and the matching calibrated policy.

    Alternates between the budget-matched x0 profile for a given lambda2 and
    recalibrating lambda2 for that profile.  The profile can jump between
    fading states, so the alternation may cycle instead of settling; every
    visited profile meets both constraints, and the best-rate one is kept.
    """
    cap = np.sqrt(params.p_et / grid.v.probs)
    lam2 = lambda2_init
    visited = {}
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.outer_iters + 1):
        lam1, x0 = _solve_lambda1(lam2, cap, params, grid, cfg)
        key = tuple(np.round(x0**2 / params.p_et, 12))
        if key in visited:
            break
        dist = EtInputDistribution.binary(x0, len(grid.v))
        policy = calibrate_lambda2(dist, params, grid, lambda1=lam1)
        rate = secrecy_rate(dist, params, grid, policy)[0]
        visited[key] = (rate, dist, policy, lam1)
        if abs(policy.lambda2 - lam2) <= cfg.outer_rtol * lam2:
            converged = True
            break
        lam2 = policy.lambda2
    rate, dist, policy, lam1 = max(visited.values(), key=lambda t: t[0])
    used = dist.power(grid.v.probs)
    info = {
        "lambda1": lam1,
        "lambda2": policy.lambda2,
        "budget_used": used,
        "budget_rel_error": abs(used - params.p_et) / params.p_et,
        "outer_converged": converged,
        "outer_iterations": n_iter,
        "profiles_visited": len(visited),
    }
    return dist, policy, info


def case1_lambda1(legit, policy, params, grid):
    """Multiplier of the ET power budget implied by the Case-1 stationarity condition."""
    pv = grid.v.probs
    spend = float(pv @ policy.p_ehu[:, 0])
    bal = (1.0 - params.recycle) * spend - params.eta * params.p_et * grid.omega_v
    return (policy.lambda2 * bal - legit) / params.p_et


def lower_bound(params: SystemParams, grid: FadingGrid, case2_cfg: Case2Config = Case2Config()):
    """Achievable rate with a binary ET input; returns ``(result, dist, policy)``.

    Case 1 uses +/- sqrt(P_ET) in every state.  When its implied budget
    multiplier is negative, Case 2 adapts x0(v).  The reported rate is the
    best of the evaluated cases clamped at 0; Case 3 labels a zero rate.
    """
    n_v = len(grid.v)
    dist1 = EtInputDistribution.binary(math.sqrt(params.p_et), n_v)
    res = SecrecyResult(diagnostics={"feasible": True})
    if not energy_feasible(dist1, params, grid):
        res.c_s_lower = 0.0
        res.case_label = CASE3
        res.diagnostics["feasible"] = False
        return res, dist1, PowerPolicy(np.zeros_like(dist1.points), 0.0, math.inf)

    r1, legit1, leak1, pol1 = secrecy_rate(dist1, params, grid)
    lam1 = case1_lambda1(legit1, pol1, params, grid)
    d = res.diagnostics
    d.update(case1_rate=r1, case1_legit=legit1, case1_leak=leak1, case1_lambda1=lam1,
             lambda2=pol1.lambda2)
    best = (r1, CASE1, dist1, pol1)
    if lam1 < 0:
        try:
            dist2, pol2, info = solve_case2(params, grid, pol1.lambda2, case2_cfg)
        except (ArithmeticError, InfeasibleEnergyError) as exc:
            d["case2_error"] = str(exc)
        else:
            r2, legit2, leak2, _ = secrecy_rate(dist2, params, grid, pol2)
            d.update(case2_rate=r2, case2_legit=legit2, case2_leak=leak2,
                     **{f"case2_{k}": v for k, v in info.items()})
            if r2 > best[0]:
                best = (r2, CASE2, dist2, pol2)
    rate, label, dist, pol = best
    if rate > 0:
        res.c_s_lower = rate
        res.case_label = label
    else:
        res.c_s_lower = 0.0
        res.case_label = CASE3
    return res, dist, pol


# ---------------------------------------------------------------- upper bound

@dataclass(frozen=True)
class SearchConfig:
    """Finite relaxation of the search over symmetric discrete ET inputs.

    A candidate is ``(k, amplitudes, masses)``: the ET transmits only in the
    strongest ``rho_k`` fraction of V states (``rho_k = 2^-k``, silent
    elsewhere) and there uses +/- pairs at amplitudes from a geometric ladder
    ``lo_mult * r^i * sqrt(P_ET / rho_k)``, ``r = (hi_mult/lo_mult)^(1/(n_levels-1))``,
    plus the exact level sqrt(P_ET / rho_k).  ``extra_levels`` extends the
    ladder upward with the same ratio.  Pair masses are multiples of
    ``1/prob_den`` and the rest of the mass sits at 0.

    Budget-saturating J = 1 candidates are enumerated on a screening grid
    (full V grid, F and G coarsened to ``screen_points``); J >= 2 and
    non-saturating masses are reached by hill climbing from the best of them.
    The ``top_k`` screened candidates are re-scored on the full grid.
    """

    j_max: int = 3
    n_levels: int = 24
    lo_mult: float = 0.05
    hi_mult: float = 4.0
    extra_levels: int = 0
    prob_den: int = 16
    max_select: int = 4
    screen_points: int = 8
    top_k: int = 6
    climb_starts: int = 2
    climb_iters: int = 20
    max_evals: int = 600
    seed_with_lower: bool = True

    def ladder(self):
        """Amplitude levels in units of sqrt(P_ET / rho)."""
        r = (self.hi_mult / self.lo_mult) ** (1.0 / (self.n_levels - 1))
        k = np.arange(self.n_levels + self.extra_levels)
        return np.unique(np.concatenate([self.lo_mult * r**k, [1.0]]))


def selective_distribution(ladder, key, den, p_et, channel_v):
    """ET input for a search key on the given V channel, or None if not representable."""
    k, amp_idx, mass = key
    n_v = len(channel_v)
    n_on = n_v / 2**k
    if n_on < 1 or n_on != int(n_on) or not np.allclose(channel_v.probs, 1.0 / n_v):
        if k:
            return None
        n_on = n_v
    n_on = int(n_on)
    rho = n_on / n_v
    amps = ladder[list(amp_idx)] * np.sqrt(p_et / rho)
    q = np.asarray(mass, dtype=float) / den
    on = EtInputDistribution.symmetric_pairs(amps, q, 1)
    pts = np.zeros((n_v, on.points.shape[1]))
    prs = np.zeros_like(pts)
    prs[:, -1] = 1.0  # silent rows: all mass at x2 = 0
    top = np.argsort(channel_v.gains, kind="stable")[n_v - n_on:]
    pts[top] = on.points[0]
    prs[top] = on.probs[0]
    return EtInputDistribution(pts, prs, True)


def _budget_ok(ladder, amp_idx, mass, den):
    # per active state the normalised budget is 1
    return float(np.dot(ladder[list(amp_idx)] ** 2, np.asarray(mass) / den)) <= 1.0 + 1e-12


def _canon(k, amp_idx, mass):
    """Merge equal amplitudes, drop empty pairs, sort; hashable key."""
    acc = {}
    for a, m in zip(amp_idx, mass):
        if m > 0:
            acc[a] = acc.get(a, 0) + m
    items = sorted(acc.items())
    return k, tuple(a for a, _ in items), tuple(m for _, m in items)


def _neighbours(key, n_levels, den, j_max, max_select):
    k, amp_idx, mass = key
    amp_idx, mass = list(amp_idx), list(mass)
    total = sum(mass)
    out = []
    for dk in (-1, 1):
        if 0 <= k + dk <= max_select:
            out.append(_canon(k + dk, amp_idx, mass))
    for i in range(len(amp_idx)):
        for d in (-1, 1):
            a = amp_idx[i] + d
            if 0 <= a < n_levels:
                out.append(_canon(k, amp_idx[:i] + [a] + amp_idx[i + 1:], mass))
            m = mass[i] + d
            if m >= 0 and total + d <= den:
                out.append(_canon(k, amp_idx, mass[:i] + [m] + mass[i + 1:]))
        for j in range(len(amp_idx)):
            if j != i and mass[i] > 0:
                mm = list(mass)
                mm[i] -= 1
                mm[j] += 1
                out.append(_canon(k, amp_idx, mm))
    if len(amp_idx) < j_max:
        # move one unit of mass to a new amplitude
        for i in range(len(amp_idx)):
            if mass[i] < 2:
                continue
            for d in (-6, -3, 3, 6):
                a = amp_idx[i] + d
                if 0 <= a < n_levels and a not in amp_idx:
                    mm = list(mass)
                    mm[i] -= 1
                    out.append(_canon(k, amp_idx + [a], mm + [1]))
    return out


def upper_bound(params: SystemParams, grid: FadingGrid, search_cfg: SearchConfig = SearchConfig(),
                lower=None):
    """Best symmetric discrete ET input found by the documented search.

    ``lower`` may carry a ``(result, dist, policy)`` triple from
    :func:`lower_bound`; its distribution is then a candidate too, which
    makes the returned bound never smaller than the lower bound.
    Returns ``(result, dist, policy)``.
    """
    cfg = search_cfg
    n_v = len(grid.v)
    res = SecrecyResult(diagnostics={"feasible": True})
    if params.p_et <= 0 or params.harvest_ceiling() <= params.p_p:
        d0 = EtInputDistribution.binary(math.sqrt(params.p_et), n_v)
        res.c_s_upper = 0.0
        res.diagnostics["feasible"] = False
        return res, d0, PowerPolicy(np.zeros_like(d0.points), 0.0, math.inf)

    ladder = cfg.ladder()
    n_lv = ladder.size
    den = cfg.prob_den
    i_unit = int(np.argmin(np.abs(ladder - 1.0)))
    coarse = _coarsen(grid, cfg.screen_points)
    cache = {}

    def score(key):
        if key in cache:
            return cache[key]
        k, amp_idx, mass = key
        val = -math.inf
        if amp_idx and _budget_ok(ladder, amp_idx, mass, den) and len(cache) < cfg.max_evals:
            dist = selective_distribution(ladder, key, den, params.p_et, coarse.v)
            if dist is not None:
                try:
                    val = secrecy_rate(dist, params, coarse)[0]
                except InfeasibleEnergyError:
                    pass
        cache[key] = val
        return val

    # budget-saturating single pairs
    for k in range(cfg.max_select + 1):
        for a in range(n_lv):
            m = min(den, int(math.floor(den / ladder[a] ** 2 + 1e-9)))
            if m >= 1:
                score((k, (a,), (m,)))

    def ranked():
        return sorted((kv for kv in cache.items() if math.isfinite(kv[1])),
                      key=lambda kv: kv[1], reverse=True)

    for key, val in ranked()[:cfg.climb_starts]:
        cur, cur_val = key, val
        for _ in range(cfg.climb_iters):
            best_nb, best_val = None, cur_val
            for nb in _neighbours(cur, n_lv, den, cfg.j_max, cfg.max_select):
                v = score(nb)
                if v > best_val:
                    best_nb, best_val = nb, v
            if best_nb is None:
                break
            cur, cur_val = best_nb, best_val

    finalists = [key for key, _ in ranked()[:cfg.top_k]]
    finalists.append((0, (i_unit,), (den,)))  # +/- sqrt(P_ET) in every state
    best = (-math.inf, None, None, None)
    for key in finalists:
        dist = selective_distribution(ladder, key, den, params.p_et, grid.v)
        if dist is None:
            continue
        try:
            rate, _, _, pol = secrecy_rate(dist, params, grid)
        except InfeasibleEnergyError:
            continue
        if rate > best[0]:
            best = (rate, key, dist, pol)
    if lower is not None and cfg.seed_with_lower:
        dist = lower[1]
        try:
            rate, _, _, pol = secrecy_rate(dist, params, grid)
        except InfeasibleEnergyError:
            pass
        else:
            if rate > best[0]:
                best = (rate, "lower", dist, pol)
    if cfg.extra_levels > 0:
        # the narrower search is nested in this one; keep its optimum so that
        # widening the ladder can never lower the bound through the climb path
        base_res, base_dist, base_pol = upper_bound(params, grid, replace(cfg, extra_levels=0),
                                                    lower)
        if base_res.diagnostics["best_raw_rate"] > best[0]:
            best = (base_res.diagnostics["best_raw_rate"], base_res.diagnostics["best_key"],
                    base_dist, base_pol)
    rate, key, dist, pol = best
    res.c_s_upper = max(rate, 0.0)
    res.diagnostics.update(screened=len(cache), best_key=key, best_raw_rate=rate)
    return res, dist, pol


def _coarsen(grid, n_points):
    """F and G on ``n_points`` quantile bins; V and single-point channels kept."""
    def co(ch):
        if len(ch) == 1 or not n_points or n_points >= len(ch):
            return ch
        return Channel.rayleigh(ch.omega, n_points)

    return FadingGrid(grid.v, co(grid.f), co(grid.g))


# ---------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class MacDiagnostics:
    r_et_bits: float
    i_x2_y3_bits: float
    i_x1_y3_bits: float
    r_ehu_bits: float

    @property
    def et_secure(self):
        return self.r_et_bits > self.i_x2_y3_bits

    @property
    def ehu_secure(self):
        return self.r_ehu_bits > self.i_x1_y3_bits

    def as_dict(self):
        return {"r_et_bits": self.r_et_bits, "i_x2_y3_bits": self.i_x2_y3_bits,
                "i_x1_y3_bits": self.i_x1_y3_bits, "r_ehu_bits": self.r_ehu_bits,
                "et_secure": self.et_secure, "ehu_secure": self.ehu_secure}


def mac_decodability_check(dist: EtInputDistribution, policy: PowerPolicy,
                           params: SystemParams, grid: FadingGrid):
    """Rates of the random-binning argument for a binary ET input."""
    if not dist.is_binary():
        raise ValueError("decodability check needs a binary symmetric ET input")
    p = dist.probs[0][dist.probs[0] > 0]
    r_et = float(-(p * np.log2(p)).sum())
    _, a1, _ = _binary_terms(dist, policy, params, grid)
    d1 = binary_deficit(a1.ravel()).reshape(a1.shape)
    w = grid.v.probs[:, None, None] * grid.g.probs[None, :, None] * grid.f.probs[None, None, :]
    i_x2 = float((d1 * w).sum())
    i_x1 = eve_leakage_binary(dist, policy, params, grid)
    r_ehu = legit_rate(dist, policy, params, grid)
    return MacDiagnostics(r_et, i_x2 / LN2, i_x1 / LN2, r_ehu / LN2)
