"""Gaussian-mixture entropies, the binary-mixture deficit function and root finders.

Everything is in nats.  The quadrature kernels live in the compiled
extension (or its numpy twin, see :mod:`fdsecrecy._backend`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from ._backend import kernels

HALF_LOG_2PIE = 0.5 * math.log(2.0 * math.pi * math.e)
LN2 = math.log(2.0)
ENTROPY_TOL = 1e-13


class QuadratureError(ArithmeticError):
    """Adaptive quadrature stopped before reaching its error target."""

    def __init__(self, message, error_estimate):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


class NoSignChangeError(ValueError):
    """Root bracketing failed."""


@dataclass(frozen=True)
class MixtureSpec:
    """Density sum_j p_j N(mu_j, sigma_sq_j); ``sigma_sq`` may be one shared value."""

    means: np.ndarray
    probs: np.ndarray
    sigma_sq: float | np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.means, dtype=float))
        p = np.atleast_1d(np.asarray(self.probs, dtype=float))
        s = np.asarray(self.sigma_sq, dtype=float)
        if mu.shape != p.shape or mu.ndim != 1:
            raise ValueError("means and probs must be 1-D arrays of equal length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be non-negative and sum to 1")
        if s.ndim and s.shape != mu.shape:
            raise ValueError("sigma_sq must be scalar or match means")
        if np.any(s <= 0):
            raise ValueError("sigma_sq must be positive")
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "sigma_sq", float(s) if s.ndim == 0 else s)


def mixture_entropy(spec: MixtureSpec, tol=ENTROPY_TOL):
    """Differential entropy -int p ln p of a Gaussian mixture, in nats."""
    val, err, ok = kernels.mixture_entropy(spec.means, spec.probs, spec.sigma_sq, tol)
    if not ok:
        raise QuadratureError("mixture entropy did not converge", err)
    return float(val)


def binary_entropy_unit(alpha, tol=ENTROPY_TOL):
    """Entropy of the equal mixture of N(-alpha, 1) and N(alpha, 1)."""
    a = np.abs(np.atleast_1d(np.asarray(alpha, dtype=float)))
    out, err, ok = kernels.binary_unit_entropy(a, tol)
    if not ok:
        raise QuadratureError("binary mixture entropy did not converge", err)
    return out


def cal_I(alpha, tol=ENTROPY_TOL):
    """I(alpha) = 1/2 ln(2 pi e) + alpha^2 - h(1/2 N(-alpha,1) + 1/2 N(alpha,1)).

    Equivalently E[ln cosh(alpha^2 + alpha Z)] with Z standard normal (see
    :func:`cal_I_lncosh`).  Scalar in, float out; arrays are mapped.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0) or np.any(~np.isfinite(a)):
        raise ValueError("cal_I needs finite alpha >= 0")
    flat = a.ravel()
    out = np.zeros(flat.size)
    nz = flat > 0
    if nz.any():
        out[nz] = HALF_LOG_2PIE + flat[nz] ** 2 - binary_entropy_unit(flat[nz], tol)
    out = out.reshape(a.shape)
    return float(out) if out.ndim == 0 else out


def binary_deficit(alpha, tol=ENTROPY_TOL):
    """alpha^2 - I(alpha) = h(binary unit mixture) - 1/2 ln(2 pi e), in [0, ln 2]."""
    a = np.atleast_1d(np.abs(np.asarray(alpha, dtype=float)))
    out = np.zeros(a.size)
    nz = a > 0
    if nz.any():
        out[nz] = binary_entropy_unit(a[nz], tol) - HALF_LOG_2PIE
    # the exact value lies in [0, ln 2]; keep quadrature round-off inside it
    np.clip(out, 0.0, LN2, out=out)
    return out if np.ndim(alpha) else float(out[0])


def cal_I_lncosh(alpha):
    """Independent oracle: E[ln cosh(alpha^2 + alpha Z)] by scipy quadrature."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0:
        return 0.0
    a2 = alpha * alpha

    def integrand(z):
        u = a2 + alpha * z
        # ln cosh u = |u| + log1p(e^{-2|u|}) - ln 2
        au = abs(u)
        return math.exp(-0.5 * z * z) * (au + math.log1p(math.exp(-2.0 * au)) - LN2)

    zc = -alpha  # ln cosh kink sits at u = 0
    val, _ = integrate.quad(integrand, -40.0, 40.0, points=[zc], limit=400,
                            epsabs=1e-13, epsrel=1e-13)
    return val / math.sqrt(2.0 * math.pi)


def cal_I_printed(x, variant="corrected"):
    """Integral form 2/sqrt(2 pi s) e^{-x^2/2} int_0^inf e^{-y^2/(2 s)} cosh y ln cosh y dy.

    ``variant="corrected"`` uses s = x^2, which equals :func:`cal_I` at
    alpha = x.  ``variant="printed"`` uses s = x as typeset in the source;
    the two agree only at x = 1.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    if x == 0:
        return 0.0
    if variant == "corrected":
        s = x * x
    elif variant == "printed":
        s = x
    else:
        raise ValueError(f"unknown variant {variant!r}")
    lead = math.log(2.0) - 0.5 * math.log(2.0 * math.pi * s) - 0.5 * x * x

    def integrand(y):
        # cosh y = e^y (1 + e^{-2y}) / 2, folded into the exponent to avoid overflow
        lc = y + math.log1p(math.exp(-2.0 * y)) - LN2
        return math.exp(lead - y * y / (2.0 * s) + lc) * lc

    peak = max(s, 1e-3)  # the Gaussian-times-e^y bump is centred at y = s
    hi = peak + 40.0 * math.sqrt(s) + 40.0
    val, _ = integrate.quad(integrand, 0.0, hi, points=[peak] if peak < hi else None,
                            limit=400, epsabs=1e-13, epsrel=1e-12)
    return val


def bisect_root(f, lo, hi, tol=1e-12, expand=False, max_expand=60, factor=2.0):
    """Root of a continuous ``f`` on ``[lo, hi]`` (Brent's method after bracketing).

    With ``expand=True`` and no sign change, ``hi`` is pushed upward
    geometrically (``hi <- lo + factor*(hi - lo)``) up to ``max_expand`` times.
    """
    flo = f(lo)
    if flo == 0:
        return lo
    fhi = f(hi)
    n = 0
    while flo * fhi > 0:
        if not expand or n >= max_expand:
            raise NoSignChangeError(
                f"no sign change on [{lo!r}, {hi!r}]: f(lo)={flo!r}, f(hi)={fhi!r}")
        hi = lo + factor * (hi - lo)
        fhi = f(hi)
        n += 1
    if fhi == 0:
        return hi
    x = optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return x


def golden_max(f, lo, hi, tol=1e-6):
    """Maximiser of a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    res = optimize.minimize_scalar(lambda t: -f(t), bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol})
    return float(res.x), float(-res.fun)
