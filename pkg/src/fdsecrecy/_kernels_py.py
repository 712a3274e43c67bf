"""Pure-Python (numpy) implementations of the hot kernels.

Same algorithms and signatures as the compiled ``_kernels`` extension.  This
module is the reference implementation and the import-time fallback.
"""

import math

import numpy as np

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
# 15 Kronrod abscissae on [-1, 1] and the matching weights
_NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
_WK = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[9, 11, 13]] = _WG[2::-1]

_TBREAK = np.array([-10.0, -6.0, -3.5, -1.75, 0.0, 1.75, 3.5, 6.0, 10.0])
# breakpoints closer than this (in units of the narrowest component) are merged
_MERGE_GAP = 0.5
_LOG_2PI = math.log(2.0 * math.pi)
_MAX_PANELS = 4096


def _panels(brk):
    """Initial panels from sorted breakpoints, short gaps merged as in the compiled kernel."""
    brk = brk.copy()
    nb = brk.size
    pa, pb = [], []
    for k in range(nb - 1, 0, -1):
        a, b = brk[k - 1], brk[k]
        if b - a <= _MERGE_GAP and 1 < k < nb - 1:
            # fold a short gap into the next panel to the left
            brk[k - 1] = b
            continue
        if b - a <= 1e-12 * (1.0 + abs(b)):
            continue
        pa.append(a)
        pb.append(b)
    return np.array(pa[::-1]), np.array(pb[::-1])


def _neg_plogp(y, mu, lw, inv2v):
    t = lw[:, None] - (y[None, :] - mu[:, None]) ** 2 * inv2v[:, None]
    m = t.max(axis=0)
    lp = m + np.log(np.exp(t - m).sum(axis=0))
    return -np.exp(lp) * lp


def mixture_entropy(means, weights, variances, tol=1e-13):
    """Entropy in nats; returns ``(value, error_estimate, converged)``."""
    mu = np.asarray(means, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    var = np.broadcast_to(np.asarray(variances, dtype=np.float64), mu.shape)
    keep = w > 0.0
    mu, w, var = mu[keep], w[keep], var[keep]
    vmin = var.min()
    s0 = math.sqrt(vmin)
    mu = mu / s0
    sd = np.sqrt(var / vmin)
    inv2v = 0.5 / sd**2
    lw = np.log(w) - 0.5 * _LOG_2PI - np.log(sd)
    lo = (mu - 10.0 * sd).min()
    hi = (mu + 10.0 * sd).max()
    span = hi - lo

    a, b = _panels(np.sort((mu[:, None] + _TBREAK[None, :] * sd[:, None]).ravel()))

    total = 0.0
    etot = 0.0
    converged = True
    while a.size:
        c = 0.5 * (a + b)
        h = 0.5 * (b - a)
        y = (c[:, None] + h[:, None] * _NODES[None, :]).ravel()
        fy = _neg_plogp(y, mu, lw, inv2v).reshape(a.size, 15)
        kres = (fy @ _WK) * h
        err = np.abs((fy @ (_WK - _WG15)) * h)
        # QUADPACK qk15 error heuristic
        asc = (np.abs(fy - 0.5 * (fy @ _WK)[:, None]) @ _WK) * np.abs(h)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = asc * np.minimum(1.0, (200.0 * err / asc) ** 1.5)
        err = np.where((asc != 0.0) & (err != 0.0), scaled, err)
        done = (err <= tol * (b - a) / span) | (b - a < 1e-9)
        if a.size >= _MAX_PANELS:
            converged = converged and bool(done.all())
            done[:] = True
        total += kres[done].sum()
        etot += err[done].sum()
        a, b, c = a[~done], b[~done], c[~done]
        a, b = np.concatenate([a, c]), np.concatenate([c, b])
    return total + math.log(s0), etot, converged


def binary_unit_entropy(alphas, tol=1e-13):
    """Entropy of ½N(-a,1)+½N(a,1) for each ``a`` in ``alphas``."""
    a = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    out = np.empty(a.size)
    emax = 0.0
    ok = True
    for i, ai in enumerate(a):
        val, err, conv = mixture_entropy([-ai, ai], [0.5, 0.5], 1.0, tol)
        out[i] = val
        emax = max(emax, err)
        ok = ok and conv
    return out, emax, ok


def leakage_sum(points, probs, powers, pv, g_amp, pg, f_sq, pf, sigma3_sq,
                tol=1e-13):
    """Average of h(Y3) - h(Y3 | X1) over the (v, g, f) grid."""
    points = np.asarray(points, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    powers = np.asarray(powers, dtype=np.float64)
    total = 0.0
    emax = 0.0
    ok = True
    for iv in range(points.shape[0]):
        if pv[iv] == 0.0:
            continue
        keep = probs[iv] > 0.0
        pts, w, pw = points[iv, keep], probs[iv, keep], powers[iv, keep]
        for ig in range(len(g_amp)):
            mu = g_amp[ig] * pts
            h0, e0, c0 = mixture_entropy(mu, w, sigma3_sq, tol)
            emax += e0 * pv[iv] * pg[ig]
            ok = ok and c0
            acc = 0.0
            for iff in range(len(f_sq)):
                h1, e1, c1 = mixture_entropy(mu, w, f_sq[iff] * pw + sigma3_sq, tol)
                emax += e1 * pv[iv] * pg[ig] * pf[iff]
                ok = ok and c1
                acc += pf[iff] * (h1 - h0)
            total += pv[iv] * pg[ig] * acc
    return total, emax, ok


def power_roots(c, lam, f_sq, f_prob, sigma3_sq, sign=1):
    """Nonnegative roots of ``c/(1+cP) + sign*S(P) - lam`` for each ``c``.

    ``S(P) = sum_f p(f) f^2/(f^2 P + sigma3_sq)``; see the compiled twin.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    f_sq = np.asarray(f_sq, dtype=np.float64)
    f_prob = np.asarray(f_prob, dtype=np.float64)
    nz = f_sq > 0.0
    f_sq, f_prob = f_sq[nz], f_prob[nz]

    def s_terms(x):
        den = f_sq[None, :] * x[:, None] + sigma3_sq
        s = (f_prob * f_sq / den).sum(axis=1)
        ds = -(f_prob * f_sq**2 / den**2).sum(axis=1)
        return s, ds

    out = np.zeros(c.size)
    s0 = float((f_prob * f_sq).sum() / sigma3_sq)
    live = c + sign * s0 - lam > 0.0
    if not live.any():
        return out
    ci = c[live]
    lo = np.zeros(ci.size)
    hi = np.full(ci.size, (2.0 if sign > 0 else 1.0) / lam)
    x = 0.5 * hi
    active = np.ones(ci.size, dtype=bool)
    for _ in range(300):
        q = 1.0 + ci * x
        s, ds = s_terms(x)
        h = ci / q + sign * s - lam
        scale = ci / q + s + lam
        active &= ~(np.abs(h) <= 2e-16 * scale)
        lo = np.where(active & (h > 0.0), x, lo)
        hi = np.where(active & (h <= 0.0), x, hi)
        active &= ~(hi - lo <= 1e-16 * hi)
        if not active.any():
            break
        dh = -ci**2 / q**2 + sign * ds
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.where(dh != 0.0, x - h / dh, 0.5 * (lo + hi))
        bad = ~((xn > lo) & (xn < hi))
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        x = np.where(active, xn, x)
    out[live] = x
    return out


def battery_run(e_in_active, e_in_silent, cost, b0, cap=math.inf):
    """Slot-by-slot battery recursion with start-of-slot availability test."""
    n = len(cost)
    before = np.empty(n)
    e_in = np.empty(n)
    e_out = np.empty(n)
    active = np.zeros(n, dtype=bool)
    b = float(b0)
    for i in range(n):
        before[i] = b
        if b >= cost[i]:
            active[i] = True
            e_out[i] = cost[i]
            e_in[i] = e_in_active[i]
        else:
            e_out[i] = 0.0
            e_in[i] = e_in_silent[i]
        b = b + e_in[i] - e_out[i]
        if b > cap:
            b = cap
    return before, e_in, e_out, active
