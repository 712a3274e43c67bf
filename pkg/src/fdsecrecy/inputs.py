"""Discrete ET input distributions p(x2 | v)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EtInputDistribution:
    """Mass points ``points[iv, j]`` (signed amplitudes, sqrt(W)) with ``probs[iv, j]``.

    Rows are fading states of V.  Zero-probability entries are padding.
    ``symmetric`` marks distributions made of +/- pairs (plus an optional
    zero point) with equal mass on both signs.
    """

    points: np.ndarray
    probs: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.points, dtype=float))
        p = np.atleast_2d(np.asarray(self.probs, dtype=float))
        if x.shape != p.shape:
            raise ValueError("points and probs must have the same shape")
        if np.any(p < 0) or np.any(~np.isfinite(x)):
            raise ValueError("probabilities must be non-negative and points finite")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("probabilities must sum to 1 for every v")
        if self.symmetric and not _is_symmetric(x, p):
            raise ValueError("distribution flagged symmetric but p(x) != p(-x)")
        x.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "probs", p)

    # -- constructors
    @classmethod
    def binary(cls, x0, n_v):
        """Equiprobable +/- x0(v); ``x0`` scalar or one value per v."""
        x0 = np.broadcast_to(np.abs(np.asarray(x0, dtype=float)), (n_v,))
        pts = np.stack([x0, -x0], axis=1)
        return cls(pts, np.full((n_v, 2), 0.5), True)

    @classmethod
    def symmetric_pairs(cls, amplitudes, pair_probs, n_v):
        """+/- a_j with total mass ``pair_probs[j]`` per pair; the rest sits at 0."""
        a = np.abs(np.asarray(amplitudes, dtype=float)).ravel()
        q = np.asarray(pair_probs, dtype=float).ravel()
        if a.shape != q.shape:
            raise ValueError("one probability per amplitude")
        p0 = 1.0 - q.sum()
        if p0 < -1e-12:
            raise ValueError("pair probabilities exceed 1")
        p0 = max(p0, 0.0)
        pts = np.concatenate([a, -a, [0.0]])
        pr = np.concatenate([q / 2, q / 2, [p0]])
        return cls(np.tile(pts, (n_v, 1)), np.tile(pr, (n_v, 1)), True)

    # -- queries
    @property
    def n_v(self):
        return self.points.shape[0]

    def is_binary(self):
        """True when every row is an equiprobable +/- x0 pair."""
        live = self.probs > 0
        if np.any(live.sum(axis=1) != 2):
            return False
        x = np.where(live, self.points, np.nan)
        pr = np.where(live, self.probs, np.nan)
        return bool(np.allclose(np.nansum(x, axis=1), 0.0, atol=0.0, rtol=0.0)
                    and np.allclose(pr[live], 0.5))

    def binary_amplitudes(self):
        """x0(v) of a binary distribution."""
        if not self.is_binary():
            raise ValueError("distribution is not binary symmetric")
        return np.max(np.where(self.probs > 0, np.abs(self.points), 0.0), axis=1)

    def power(self, pv):
        """Average ET power sum_v sum_j x_j^2 p(x_j|v) p(v)."""
        return float(np.asarray(pv) @ (self.points**2 * self.probs).sum(axis=1))

    def check_power_budget(self, pv, p_et, rtol=1e-9):
        """C1 with a relative tolerance; returns the used power."""
        used = self.power(pv)
        if used > p_et * (1.0 + rtol):
            raise ValueError(f"ET power {used:.6g} W exceeds budget {p_et:.6g} W")
        return used

    def negated(self):
        return EtInputDistribution(-self.points, self.probs, self.symmetric)


def _is_symmetric(x, p):
    for xr, pr in zip(x, p):
        live = pr > 0
        xs, ps = xr[live], pr[live]
        order = np.argsort(xs)
        rev = np.argsort(-xs)
        if not (np.allclose(xs[order], -xs[rev], rtol=1e-12, atol=0.0)
                and np.allclose(ps[order], ps[rev], rtol=1e-12, atol=0.0)):
            return False
    return True
