# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integrator kernels (same contract as ``_rk_py``)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, isfinite, INFINITY

from .errors import BlowUp, StepUnderflow

cnp.import_array()

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 10.0
cdef long MAX_STEPS = 10000000


cdef cnp.ndarray _call(object rhs, double t, double[::1] y, Py_ssize_t n):
    cdef cnp.ndarray arg = np.empty(n)
    cdef double[::1] av = arg
    cdef Py_ssize_t i
    for i in range(n):
        av[i] = y[i]
    out = np.ascontiguousarray(rhs(t, arg), dtype=np.float64).reshape(-1)
    if out.shape[0] != n:
        raise ValueError(f"rhs returned {out.shape[0]} components, expected {n}")
    return out


cdef void _renorm(double[::1] y, Py_ssize_t n, int block, double radius):
    cdef Py_ssize_t i, j
    cdef double s
    if block <= 0:
        return
    for i in range(0, n, block):
        s = 0.0
        for j in range(block):
            s += y[i + j] * y[i + j]
        s = radius / sqrt(s)
        for j in range(block):
            y[i + j] *= s


cdef double _rms(double[::1] v, double[::1] y, double[::1] y2, Py_ssize_t n,
                 double rtol, double atol, bint use_y2):
    cdef double acc = 0.0, sc, a, b
    cdef Py_ssize_t i
    for i in range(n):
        a = fabs(y[i])
        if use_y2:
            b = fabs(y2[i])
            if b > a:
                a = b
        sc = atol + rtol * a
        acc += (v[i] / sc) * (v[i] / sc)
    return sqrt(acc / n)


def dopri5(rhs, double t0, double t1, y0, double rtol=1e-10, double atol=1e-10,
           double max_step=INFINITY, double first_step=0.0, int renorm_block=0,
           double renorm_radius=1.0, double max_norm=INFINITY):
    """Adaptive Dormand-Prince 5(4); returns ``(ts, ys, fs, nfev)``."""
    cdef cnp.ndarray ya = np.array(y0, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = ya.shape[0]
    cdef double[::1] y = ya
    cdef double t = t0
    cdef double span = fabs(t1 - t0)
    cdef double direction = 1.0 if t1 >= t0 else -1.0
    cdef cnp.ndarray Ka = np.empty((7, n))
    cdef double[:, ::1] k = Ka
    cdef double[::1] yt = np.empty(n)
    cdef double[::1] y5 = np.empty(n)
    cdef double[::1] ev = np.empty(n)
    cdef double h, hs, err, fac, remaining, min_step, ynorm, d0, d1, d2, dmax, h0, h1
    cdef Py_ssize_t i
    cdef long steps = 0
    cdef bint last, rejected_last = False, finite
    cdef long nfev = 1

    _renorm(y, n, renorm_block, renorm_radius)
    f = _call(rhs, t, y, n)
    cdef double[::1] fv = f
    for i in range(n):
        k[0, i] = fv[i]
    ts = [t]
    ys = [np.asarray(y).copy()]
    fs = [f.copy()]
    if span == 0.0:
        return np.array(ts), np.array(ys), np.array(fs), nfev

    if first_step > 0:
        h = first_step
    else:
        d0 = _rms(y, y, y, n, rtol, atol, False)
        d1 = _rms(k[0], y, y, n, rtol, atol, False)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        for i in range(n):
            yt[i] = y[i] + direction * h0 * k[0, i]
        f1 = _call(rhs, t + direction * h0, yt, n)
        nfev += 1
        fv = f1
        for i in range(n):
            ev[i] = fv[i] - k[0, i]
        d2 = _rms(ev, y, y, n, rtol, atol, False) / h0
        dmax = d1 if d1 > d2 else d2
        if dmax <= 1e-15:
            h1 = h0 * 1e-3
            if h1 < 1e-6:
                h1 = 1e-6
        else:
            h1 = pow(0.01 / dmax, 0.2)
        h = 100 * h0 if 100 * h0 < h1 else h1
    if h > max_step:
        h = max_step
    if h > span:
        h = span

    while direction * (t1 - t) > 0:
        steps += 1
        min_step = 1e-14 * (fabs(t) if fabs(t) > 1.0 else 1.0)
        if steps > MAX_STEPS or h < min_step:
            raise StepUnderflow(t, h)
        remaining = fabs(t1 - t)
        last = False
        if h >= remaining * (1 - 1e-12):
            h = remaining
            last = True
        hs = direction * h

        for i in range(n):
            yt[i] = y[i] + hs * (A21 * k[0, i])
        fv = _call(rhs, t + C2 * hs, yt, n)
        for i in range(n):
            k[1, i] = fv[i]
        for i in range(n):
            yt[i] = y[i] + hs * (A31 * k[0, i] + A32 * k[1, i])
        fv = _call(rhs, t + C3 * hs, yt, n)
        for i in range(n):
            k[2, i] = fv[i]
        for i in range(n):
            yt[i] = y[i] + hs * (A41 * k[0, i] + A42 * k[1, i] + A43 * k[2, i])
        fv = _call(rhs, t + C4 * hs, yt, n)
        for i in range(n):
            k[3, i] = fv[i]
        for i in range(n):
            yt[i] = y[i] + hs * (A51 * k[0, i] + A52 * k[1, i] + A53 * k[2, i]
                                 + A54 * k[3, i])
        fv = _call(rhs, t + C5 * hs, yt, n)
        for i in range(n):
            k[4, i] = fv[i]
        for i in range(n):
            yt[i] = y[i] + hs * (A61 * k[0, i] + A62 * k[1, i] + A63 * k[2, i]
                                 + A64 * k[3, i] + A65 * k[4, i])
        fv = _call(rhs, t + hs, yt, n)
        for i in range(n):
            k[5, i] = fv[i]
        for i in range(n):
            y5[i] = y[i] + hs * (B1 * k[0, i] + B3 * k[2, i] + B4 * k[3, i]
                                 + B5 * k[4, i] + B6 * k[5, i])
        fv = _call(rhs, t + hs, y5, n)
        nfev += 6
        finite = True
        for i in range(n):
            k[6, i] = fv[i]
            if not (isfinite(y5[i]) and isfinite(fv[i])):
                finite = False
        if not finite:
            h *= FAC_MIN
            rejected_last = True
            continue
        for i in range(n):
            ev[i] = hs * (E1 * k[0, i] + E3 * k[2, i] + E4 * k[3, i]
                          + E5 * k[4, i] + E6 * k[5, i] + E7 * k[6, i])
        err = _rms(ev, y, y5, n, rtol, atol, True)
        if err <= 1.0:
            t = t1 if last else t + hs
            for i in range(n):
                y[i] = y5[i]
            _renorm(y, n, renorm_block, renorm_radius)
            ynorm = 0.0
            for i in range(n):
                if fabs(y[i]) > ynorm:
                    ynorm = fabs(y[i])
            if ynorm > max_norm:
                raise BlowUp(t, ynorm, max_norm)
            for i in range(n):
                k[0, i] = k[6, i]
            ts.append(t)
            ys.append(np.asarray(y).copy())
            fs.append(np.asarray(k[6]).copy())
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * pow(err, -0.2)
                if fac < FAC_MIN:
                    fac = FAC_MIN
                if fac > FAC_MAX:
                    fac = FAC_MAX
            if rejected_last and fac > 1.0:
                fac = 1.0
            h = h * fac
            if h > max_step:
                h = max_step
            rejected_last = False
        else:
            fac = SAFETY * pow(err, -0.2)
            if fac < FAC_MIN:
                fac = FAC_MIN
            h *= fac
            rejected_last = True
    return np.array(ts), np.array(ys), np.array(fs), nfev


def fixed_rk5(rhs, double t0, double t1, y0, int n_steps):
    """Fixed-step 5th-order Dormand-Prince; returns ``(y_end, displacement)``."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    cdef cnp.ndarray y0a = np.array(y0, dtype=np.float64).reshape(-1)
    cdef double[::1] yb = y0a
    cdef Py_ssize_t n = y0a.shape[0]
    cdef double h = (t1 - t0) / n_steps
    cdef cnp.ndarray da = np.zeros(n)
    cdef double[::1] d = da
    cdef double[:, ::1] k = np.empty((6, n))
    cdef double[::1] yt = np.empty(n)
    cdef double[::1] fv
    cdef double t
    cdef Py_ssize_t i, step

    for step in range(n_steps):
        t = t0 + step * h
        for i in range(n):
            yt[i] = yb[i] + d[i]
        fv = _call(rhs, t, yt, n)
        for i in range(n):
            k[0, i] = fv[i]
        for i in range(n):
            yt[i] = yb[i] + (d[i] + h * (A21 * k[0, i]))
        fv = _call(rhs, t + C2 * h, yt, n)
        for i in range(n):
            k[1, i] = fv[i]
        for i in range(n):
            yt[i] = yb[i] + (d[i] + h * (A31 * k[0, i] + A32 * k[1, i]))
        fv = _call(rhs, t + C3 * h, yt, n)
        for i in range(n):
            k[2, i] = fv[i]
        for i in range(n):
            yt[i] = yb[i] + (d[i] + h * (A41 * k[0, i] + A42 * k[1, i] + A43 * k[2, i]))
        fv = _call(rhs, t + C4 * h, yt, n)
        for i in range(n):
            k[3, i] = fv[i]
        for i in range(n):
            yt[i] = yb[i] + (d[i] + h * (A51 * k[0, i] + A52 * k[1, i] + A53 * k[2, i]
                                         + A54 * k[3, i]))
        fv = _call(rhs, t + C5 * h, yt, n)
        for i in range(n):
            k[4, i] = fv[i]
        for i in range(n):
            yt[i] = yb[i] + (d[i] + h * (A61 * k[0, i] + A62 * k[1, i] + A63 * k[2, i]
                                         + A64 * k[3, i] + A65 * k[4, i]))
        fv = _call(rhs, t + h, yt, n)
        for i in range(n):
            k[5, i] = fv[i]
        for i in range(n):
            d[i] = d[i] + h * (B1 * k[0, i] + B3 * k[2, i] + B4 * k[3, i]
                               + B5 * k[4, i] + B6 * k[5, i])
    return y0a + da, da


def hermite(ts, ys, fs, tq):
    """Cubic Hermite dense output at query times ``tq``."""
    cdef const double[::1] tv = np.ascontiguousarray(ts, dtype=np.float64)
    cdef const double[:, ::1] yv = np.ascontiguousarray(ys, dtype=np.float64)
    cdef const double[:, ::1] fv = np.ascontiguousarray(fs, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(np.atleast_1d(tq), dtype=np.float64)
    cdef Py_ssize_t m = tv.shape[0], n = yv.shape[1], nq = qv.shape[0]
    cdef cnp.ndarray out = np.empty((nq, n))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t q, j, lo, hi, mid
    cdef double ta, h, s, s2, s3, h00, h10, h01, h11, tqq
    cdef bint inc
    if m == 1:
        for q in range(nq):
            for j in range(n):
                ov[q, j] = yv[0, j]
        return out
    inc = tv[m - 1] >= tv[0]
    for q in range(nq):
        tqq = qv[q]
        # bisection for the interval [lo, lo+1] containing tqq
        lo = 0
        hi = m - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if (tv[mid] <= tqq) == inc:
                lo = mid
            else:
                hi = mid
        ta = tv[lo]
        h = tv[lo + 1] - ta
        s = (tqq - ta) / h
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        for j in range(n):
            ov[q, j] = (h00 * yv[lo, j] + h10 * h * fv[lo, j]
                        + h01 * yv[lo + 1, j] + h11 * h * fv[lo + 1, j])
    return out
