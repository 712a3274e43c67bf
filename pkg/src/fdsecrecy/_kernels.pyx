# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Mirrors :mod:`fdsecrecy._kernels_py` function for function; the pure-Python
module is the reference and the fallback when this extension is not built.
"""

import numpy as np

from libc.math cimport exp, log, sqrt, fabs, pow, fmin, INFINITY
from libc.stdlib cimport qsort

cdef enum:
    STACK = 4096
    MAXCOMP = 64
    NBREAK = 9

cdef double[8] XGK = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
]
cdef double[8] WGK = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
]
cdef double[4] WG = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
]
cdef double[9] TBREAK = [-10.0, -6.0, -3.5, -1.75, 0.0, 1.75, 3.5, 6.0, 10.0]
# breakpoints closer than this (in units of the narrowest component) are merged
cdef double MERGE_GAP = 0.5

cdef double LOG_2PI = 1.8378770664093453


cdef inline double _neg_plogp(double y, int n, const double* mu,
                              const double* lw, const double* inv2v) noexcept nogil:
    cdef double t, m = -INFINITY, s = 0.0, lp
    cdef int j
    for j in range(n):
        t = lw[j] - (y - mu[j]) * (y - mu[j]) * inv2v[j]
        if t > m:
            m = t
    if m == -INFINITY:
        return 0.0
    for j in range(n):
        t = lw[j] - (y - mu[j]) * (y - mu[j]) * inv2v[j]
        s += exp(t - m)
    lp = m + log(s)
    return -exp(lp) * lp


cdef inline void _gk15(double a, double b, int n, const double* mu,
                       const double* lw, const double* inv2v,
                       double* kres, double* err) noexcept nogil:
    cdef double c = 0.5 * (a + b), h = 0.5 * (b - a)
    cdef double fc = _neg_plogp(c, n, mu, lw, inv2v)
    cdef double rk = fc * WGK[7], rg = fc * WG[3]
    cdef double fv1[7]
    cdef double fv2[7]
    cdef double dx, mean, asc, e
    cdef int i
    for i in range(7):
        dx = h * XGK[i]
        fv1[i] = _neg_plogp(c - dx, n, mu, lw, inv2v)
        fv2[i] = _neg_plogp(c + dx, n, mu, lw, inv2v)
        rk += WGK[i] * (fv1[i] + fv2[i])
        if i % 2 == 1:
            rg += WG[i // 2] * (fv1[i] + fv2[i])
    # QUADPACK qk15 error heuristic
    mean = 0.5 * rk
    asc = WGK[7] * fabs(fc - mean)
    for i in range(7):
        asc += WGK[i] * (fabs(fv1[i] - mean) + fabs(fv2[i] - mean))
    asc *= fabs(h)
    e = fabs((rk - rg) * h)
    if asc != 0.0 and e != 0.0:
        e = asc * fmin(1.0, pow(200.0 * e / asc, 1.5))
    kres[0] = rk * h
    err[0] = e


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<const double*>a)[0], y = (<const double*>b)[0]
    return (x > y) - (x < y)



cdef int _entropy(int n_in, const double* mu_in, const double* w_in,
                  const double* var_in, double tol,
                  double* value, double* errest) noexcept nogil:
    """Differential entropy (nats) of a 1-D Gaussian mixture.

    Returns 0 on success, 1 if the subdivision budget was exhausted.
    """
    cdef double mu[MAXCOMP]
    cdef double lw[MAXCOMP]
    cdef double inv2v[MAXCOMP]
    cdef double sd[MAXCOMP]
    cdef double brk[MAXCOMP * NBREAK]
    cdef double sa[STACK]
    cdef double sb[STACK]
    cdef int n = 0, j, k, nb = 0, top, status = 0
    cdef double vmin = INFINITY, s0, lo = INFINITY, hi = -INFINITY, x
    cdef double total = 0.0, etot = 0.0, kres, err, span, a, b, m

    for j in range(n_in):
        if w_in[j] > 0.0 and var_in[j] < vmin:
            vmin = var_in[j]
    s0 = sqrt(vmin)
    for j in range(n_in):
        if w_in[j] <= 0.0:
            continue
        if n >= MAXCOMP:
            return 2
        mu[n] = mu_in[j] / s0
        sd[n] = sqrt(var_in[j] / vmin)
        inv2v[n] = 0.5 / (sd[n] * sd[n])
        lw[n] = log(w_in[j]) - 0.5 * LOG_2PI - log(sd[n])
        if mu[n] - 10.0 * sd[n] < lo:
            lo = mu[n] - 10.0 * sd[n]
        if mu[n] + 10.0 * sd[n] > hi:
            hi = mu[n] + 10.0 * sd[n]
        n += 1
    for j in range(n):
        for k in range(NBREAK):
            brk[nb] = mu[j] + TBREAK[k] * sd[j]
            nb += 1
    qsort(brk, nb, sizeof(double), _cmp_double)

    span = hi - lo
    top = 0
    for k in range(nb - 1, 0, -1):
        a = brk[k - 1]
        b = brk[k]
        if b - a <= MERGE_GAP and k > 1 and k < nb - 1:
            # fold a short gap into the next panel to the left
            brk[k - 1] = b
            continue
        if b - a <= 1e-12 * (1.0 + fabs(b)):
            continue
        sa[top] = a
        sb[top] = b
        top += 1
    while top > 0:
        top -= 1
        a = sa[top]
        b = sb[top]
        _gk15(a, b, n, mu, lw, inv2v, &kres, &err)
        if err <= tol * (b - a) / span or b - a < 1e-9 or top >= STACK - 2:
            if err > tol * (b - a) / span and b - a >= 1e-9:
                status = 1
            total += kres
            etot += err
        else:
            m = 0.5 * (a + b)
            sa[top] = m
            sb[top] = b
            top += 1
            sa[top] = a
            sb[top] = m
            top += 1
    value[0] = total + log(s0)
    errest[0] = etot
    return status


def mixture_entropy(means, weights, variances, double tol=1e-13):
    """Entropy in nats; returns ``(value, error_estimate, converged)``."""
    cdef const double[::1] mu = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] v = np.array(
        np.broadcast_to(np.asarray(variances, dtype=np.float64), (mu.shape[0],)))
    cdef double val = 0.0, err = 0.0
    cdef int st
    if mu.shape[0] > MAXCOMP:
        raise ValueError("too many mixture components")
    st = _entropy(mu.shape[0], &mu[0], &w[0], &v[0], tol, &val, &err)
    return val, err, st == 0


def binary_unit_entropy(alphas, double tol=1e-13):
    """Entropy of ½N(-a,1)+½N(a,1) for each ``a`` in ``alphas``."""
    cdef const double[::1] a = np.ascontiguousarray(np.atleast_1d(alphas), dtype=np.float64)
    out = np.empty(a.shape[0])
    cdef double[::1] o = out
    cdef double mu[2]
    cdef double w[2]
    cdef double v[2]
    cdef double val, err, emax = 0.0
    cdef Py_ssize_t i
    cdef int bad = 0
    w[0] = 0.5
    w[1] = 0.5
    v[0] = 1.0
    v[1] = 1.0
    with nogil:
        for i in range(a.shape[0]):
            mu[0] = -a[i]
            mu[1] = a[i]
            bad |= _entropy(2, mu, w, v, tol, &val, &err)
            o[i] = val
            if err > emax:
                emax = err
    return out, emax, bad == 0


def leakage_sum(const double[:, ::1] points, const double[:, ::1] probs,
                const double[:, ::1] powers, const double[::1] pv,
                const double[::1] g_amp, const double[::1] pg,
                const double[::1] f_sq, const double[::1] pf, double sigma3_sq,
                double tol=1e-13):
    """Average of h(Y3) - h(Y3 | X1) over the (v, g, f) grid.

    ``points``/``probs``/``powers`` are indexed ``[v, mass]``; zero-probability
    entries are padding.
    """
    cdef Py_ssize_t nv = points.shape[0], m = points.shape[1]
    cdef Py_ssize_t ng = g_amp.shape[0], nf = f_sq.shape[0]
    cdef Py_ssize_t iv, ig, iff, j
    cdef double mu[MAXCOMP]
    cdef double var[MAXCOMP]
    cdef double h0, h1, err, emax = 0.0, total = 0.0, acc
    cdef int bad = 0
    if m > MAXCOMP:
        raise ValueError("too many mass points")
    with nogil:
        for iv in range(nv):
            if pv[iv] == 0.0:
                continue
            for ig in range(ng):
                for j in range(m):
                    mu[j] = g_amp[ig] * points[iv, j]
                    var[j] = sigma3_sq
                bad |= _entropy(m, mu, &probs[iv, 0], var, tol, &h0, &err)
                emax += err * pv[iv] * pg[ig]
                acc = 0.0
                for iff in range(nf):
                    for j in range(m):
                        var[j] = f_sq[iff] * powers[iv, j] + sigma3_sq
                    bad |= _entropy(m, mu, &probs[iv, 0], var, tol, &h1, &err)
                    emax += err * pv[iv] * pg[ig] * pf[iff]
                    acc += pf[iff] * (h1 - h0)
                total += pv[iv] * pg[ig] * acc
    return total, emax, bad == 0


cdef inline double _s_sum(double p, const double* f_sq, const double* pf,
                          Py_ssize_t nf, double s3, double* ds) noexcept nogil:
    cdef double s = 0.0, d = 0.0, den
    cdef Py_ssize_t k
    for k in range(nf):
        if f_sq[k] > 0.0:
            den = f_sq[k] * p + s3
            s += pf[k] * f_sq[k] / den
            d -= pf[k] * f_sq[k] * f_sq[k] / (den * den)
    ds[0] = d
    return s


def power_roots(c, double lam, f_sq, f_prob, double sigma3_sq, int sign=1):
    """Nonnegative roots of ``c/(1+cP) + sign*S(P) - lam`` for each ``c``.

    ``S(P) = sum_f p(f) f^2/(f^2 P + sigma3_sq)``.  ``sign=+1`` is the
    full-duplex stationarity condition, ``sign=-1`` the half-duplex one.
    Returns 0 where the left side is already nonpositive at ``P = 0``.
    """
    cdef const double[::1] cc = np.ascontiguousarray(np.atleast_1d(c), dtype=np.float64)
    cdef const double[::1] fs = np.ascontiguousarray(f_sq, dtype=np.float64)
    cdef const double[::1] fp = np.ascontiguousarray(f_prob, dtype=np.float64)
    out = np.zeros(cc.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i, it, nf = fs.shape[0]
    cdef double ci, lo, hi, x, h, dh, ds, s, q, xn, scale
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    with nogil:
        for i in range(cc.shape[0]):
            ci = cc[i]
            s = _s_sum(0.0, &fs[0], &fp[0], nf, sigma3_sq, &ds)
            if ci + sign * s - lam <= 0.0:
                o[i] = 0.0
                continue
            lo = 0.0
            hi = (2.0 if sign > 0 else 1.0) / lam
            x = 0.5 * hi
            for it in range(300):
                q = 1.0 + ci * x
                s = _s_sum(x, &fs[0], &fp[0], nf, sigma3_sq, &ds)
                h = ci / q + sign * s - lam
                scale = ci / q + s + lam
                if fabs(h) <= 2e-16 * scale:
                    break
                if h > 0.0:
                    lo = x
                else:
                    hi = x
                if hi - lo <= 1e-16 * hi:
                    break
                dh = -ci * ci / (q * q) + sign * ds
                xn = x - h / dh if dh != 0.0 else 0.5 * (lo + hi)
                if not (xn > lo and xn < hi):
                    xn = 0.5 * (lo + hi)
                x = xn
            o[i] = x
    return out


def battery_run(const double[::1] e_in_active, const double[::1] e_in_silent,
                const double[::1] cost,
                double b0, double cap=INFINITY):
    """Slot-by-slot battery recursion with start-of-slot availability test."""
    cdef Py_ssize_t n = cost.shape[0], i
    before = np.empty(n)
    e_in = np.empty(n)
    e_out = np.empty(n)
    active = np.zeros(n, dtype=np.uint8)
    cdef double[::1] bb = before, ei = e_in, eo = e_out
    cdef unsigned char[::1] ac = active
    cdef double b = b0
    with nogil:
        for i in range(n):
            bb[i] = b
            if b >= cost[i]:
                ac[i] = 1
                eo[i] = cost[i]
                ei[i] = e_in_active[i]
            else:
                eo[i] = 0.0
                ei[i] = e_in_silent[i]
            b = b + ei[i] - eo[i]
            if b > cap:
                b = cap
    return before, e_in, e_out, active.astype(bool)
