"""Slot-level simulation of the EHU battery and the transmit-when-charged protocol.

Each slot holds ``k`` channel uses with one fading draw.  At the start of a
slot the EHU checks whether its battery covers the whole slot cost
``sum_i P_EHU(x2_i, v) + k P_p``; if so it transmits, otherwise it stays
silent and only harvests from the ET.  Energy is in joules with a unit
symbol duration, so one channel use at power P costs P joules.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .inputs import EtInputDistribution
from .model import FadingGrid, SystemParams
from .power_policy import PowerPolicy, calibrate_lambda2, harvest_from_et


def harvest_energy(v_sq, x2, x1, q1_draw, params: SystemParams):
    """eta (v x2 + qbar1 x1 + q1 x1)^2 per channel use; broadcasts."""
    v = np.sqrt(np.asarray(v_sq, dtype=float))
    x1 = np.asarray(x1, dtype=float)
    out = params.eta * (v * np.asarray(x2) + (params.qbar1 + np.asarray(q1_draw)) * x1) ** 2
    return float(out) if np.ndim(out) == 0 else out


def expected_harvest(dist: EtInputDistribution, policy: PowerPolicy, params: SystemParams,
                     grid: FadingGrid, active=True):
    """E[harvest] per channel use: eta(v^2 x2^2 + (qbar1^2 + alpha1) P_EHU)."""
    h = harvest_from_et(dist, params, grid)
    if active:
        h += params.recycle * float(grid.v.probs @ (policy.p_ehu * dist.probs).sum(axis=1))
    return h


def slack_policy(dist: EtInputDistribution, params: SystemParams, grid: FadingGrid, slack=0.1):
    """lambda2-calibrated policy whose average spend is ``(1 - slack)`` of its income.

    lambda2 is calibrated against an inflated processing cost P_cal, chosen
    so that with the true P_p the spend E[P] + P_p equals ``1 - slack``
    times the income eta E[v^2 x2^2] + eta (qbar1^2 + alpha1) E[P].
    """
    if not 0 <= slack < 1:
        raise ValueError("slack must lie in [0, 1)")
    h = harvest_from_et(dist, params, grid)
    keep = 1.0 - slack
    net = 1.0 - params.recycle
    room = keep * h - params.p_p
    if room <= 0:
        raise ValueError("processing cost leaves no room for the requested slack")
    p_cal = h - net * room / (1.0 - keep * params.recycle)
    return calibrate_lambda2(dist, params.with_(p_p=p_cal), grid)


@dataclass(frozen=True)
class SimConfig:
    """Run settings; ``cap`` is the battery capacity (unbounded by default)."""

    n_slots: int
    k: int
    initial_battery: float
    policy: PowerPolicy
    et_dist: EtInputDistribution
    seed: int | None = 0
    burn_in: int = 0
    cap: float = math.inf
    secrecy_rate: float = 0.0  # analytic achievable rate, nats per channel use

    def __post_init__(self):
        if self.n_slots < 1 or self.k < 1:
            raise ValueError("n_slots and k must be at least 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if not self.initial_battery >= 0:
            raise ValueError("initial_battery must be non-negative")
        if self.policy.p_ehu.shape != self.et_dist.points.shape:
            raise ValueError("policy and ET distribution shapes differ")


@dataclass(frozen=True)
class SimTrace:
    """Per-slot records (burn-in included); summaries cover the slots after burn-in."""

    v_sq: np.ndarray
    battery_before: np.ndarray
    e_in: np.ndarray
    e_out: np.ndarray
    active: np.ndarray
    burn_in: int = 0
    analytic_rate: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("v_sq", "battery_before", "e_in", "e_out", "active"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return self.active.size

    @property
    def n_active(self):
        return int(self.active[self.burn_in:].sum())

    @property
    def b_silent(self):
        return int(self.active.size - self.burn_in - self.n_active)

    @property
    def fraction_active(self):
        n = self.active.size - self.burn_in
        return self.n_active / n

    @property
    def empirical_secrecy_rate(self):
        return self.fraction_active * self.analytic_rate

    def summary(self):
        return {"N_active": self.n_active, "B_silent": self.b_silent,
                "fraction_active": self.fraction_active,
                "empirical_secrecy_rate": self.empirical_secrecy_rate}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slot", "v_sq", "battery_J", "e_in_J", "e_out_J", "active"])
            for i in range(len(self)):
                w.writerow([i, repr(float(self.v_sq[i])), repr(float(self.battery_before[i])),
                            repr(float(self.e_in[i])), repr(float(self.e_out[i])),
                            int(self.active[i])])


def _slot_energies(cfg: SimConfig, params: SystemParams, grid: FadingGrid, rng, n):
    """Fading, both harvest branches and the active cost for ``n`` slots."""
    dist, k = cfg.et_dist, cfg.k
    iv = rng.choice(len(grid.v), size=n, p=grid.v.probs)
    v_sq = grid.v.gains[iv]
    # ET symbol index per channel use, drawn from p(x2 | v) by inverse CDF
    cdf = np.cumsum(dist.probs, axis=1)
    u = rng.random((n, k))
    j = np.minimum((u[:, :, None] > cdf[iv][:, None, :]).sum(axis=2), dist.probs.shape[1] - 1)
    x2 = dist.points[iv[:, None], j]
    p = cfg.policy.p_ehu[iv[:, None], j]
    x1 = rng.standard_normal((n, k)) * np.sqrt(p)
    q1 = rng.standard_normal((n, k)) * math.sqrt(params.alpha1)
    e_act = harvest_energy(v_sq[:, None], x2, x1, q1, params).sum(axis=1)
    e_sil = harvest_energy(v_sq[:, None], x2, 0.0, 0.0, params).sum(axis=1)
    cost = p.sum(axis=1) + k * params.p_p
    return v_sq, e_act, e_sil, cost


def simulate(cfg: SimConfig, params: SystemParams, grid: FadingGrid, chunk=8192):
    """Run ``burn_in + n_slots`` slots; deterministic for a given seed."""
    rng = np.random.default_rng(cfg.seed)
    total = cfg.burn_in + cfg.n_slots
    parts = [_slot_energies(cfg, params, grid, rng, min(chunk, total - s))
             for s in range(0, total, chunk)]
    v_sq, e_act, e_sil, cost = (np.concatenate(x) for x in zip(*parts))
    before, e_in, e_out, active = kernels.battery_run(
        np.ascontiguousarray(e_act), np.ascontiguousarray(e_sil),
        np.ascontiguousarray(cost), float(cfg.initial_battery), float(cfg.cap))
    return SimTrace(v_sq, np.asarray(before), np.asarray(e_in), np.asarray(e_out),
                    np.asarray(active, dtype=bool), cfg.burn_in, cfg.secrecy_rate,
                    {"k": cfg.k, "seed": cfg.seed, "e_in_silent": e_sil})
