"""Pure numpy integrator kernels.

Reference implementation of the routines in ``_rk.pyx``. Both modules expose
the same three functions and produce the same step sequences; the compiled one
only removes interpreter overhead from the stage arithmetic.
"""
import math

import numpy as np

from .errors import BlowUp, StepUnderflow

# Dormand-Prince 5(4) tableau
C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B = A[6]
E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
MAX_STEPS = 10_000_000


def _call(rhs, t, y, n):
    out = np.asarray(rhs(t, y.copy()), dtype=np.float64).reshape(-1)
    if out.shape[0] != n:
        raise ValueError(f"rhs returned {out.shape[0]} components, expected {n}")
    return out


def _renorm(y, block, radius):
    if block > 0:
        v = y.reshape(-1, block)
        v *= (radius / np.sqrt(np.einsum("ij,ij->i", v, v)))[:, None]
    return y


def _err_norm(err, y, ynew, rtol, atol):
    sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
    return math.sqrt(float(np.mean((err / sc) ** 2)))


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol, n):
    sc = atol + rtol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / sc) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = _call(rhs, t0 + direction * h0, y1, n)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / sc) ** 2))) / h0
    dmax = max(d1, d2)
    if dmax <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dmax) ** 0.2
    return min(100 * h0, h1)


def dopri5(rhs, t0, t1, y0, rtol=1e-10, atol=1e-10, max_step=math.inf,
           first_step=0.0, renorm_block=0, renorm_radius=1.0,
           max_norm=math.inf):
    """Adaptive Dormand-Prince 5(4) from ``t0`` to ``t1`` (either direction).

    Returns ``(ts, ys, fs, nfev)``: accepted step times, states and the right
    hand side at each state (for Hermite dense output).
    """
    y = np.array(y0, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    t = float(t0)
    t1 = float(t1)
    span = abs(t1 - t)
    direction = 1.0 if t1 >= t else -1.0
    _renorm(y, renorm_block, renorm_radius)

    f = _call(rhs, t, y, n)
    nfev = 1
    ts = [t]
    ys = [y.copy()]
    fs = [f.copy()]
    if span == 0.0:
        return np.array(ts), np.array(ys), np.array(fs), nfev

    if first_step > 0:
        h = first_step
    else:
        h = _initial_step(rhs, t, y, f, direction, rtol, atol, n)
        nfev += 1
    h = min(h, max_step, span)

    k = np.empty((7, n))
    k[0] = f
    steps = 0
    rejected_last = False
    while direction * (t1 - t) > 0:
        steps += 1
        if steps > MAX_STEPS:
            raise StepUnderflow(t, h)
        min_step = 1e-14 * max(1.0, abs(t))
        if h < min_step:
            raise StepUnderflow(t, h)
        remaining = abs(t1 - t)
        last = False
        if h >= remaining * (1 - 1e-12):
            h = remaining
            last = True
        hs = direction * h
        for s in range(1, 6):
            ys_ = y + hs * np.dot(A[s], k[:s])
            k[s] = _call(rhs, t + C[s] * hs, ys_, n)
        y5 = y + hs * np.dot(B[:6], k[:6])
        k[6] = _call(rhs, t + hs, y5, n)
        nfev += 6
        if not np.all(np.isfinite(y5)) or not np.all(np.isfinite(k[6])):
            h *= FAC_MIN
            rejected_last = True
            continue
        err = _err_norm(hs * np.dot(E, k), y, y5, rtol, atol)
        if err <= 1.0:
            t = t1 if last else t + hs
            y = _renorm(y5, renorm_block, renorm_radius)
            ynorm = float(np.max(np.abs(y)))
            if ynorm > max_norm:
                raise BlowUp(t, ynorm, max_norm)
            k[0] = k[6]
            ts.append(t)
            ys.append(y.copy())
            fs.append(k[6].copy())
            fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
            if rejected_last:
                fac = min(fac, 1.0)
            h = min(h * fac, max_step)
            rejected_last = False
        else:
            h *= max(FAC_MIN, SAFETY * err ** -0.2)
            rejected_last = True
    return np.array(ts), np.array(ys), np.array(fs), nfev


def fixed_rk5(rhs, t0, t1, y0, n_steps):
    """Fixed-step Dormand-Prince (5th-order solution), ``n_steps`` steps.

    Returns ``(y_end, displacement)``; the displacement ``y_end - y0`` is
    accumulated separately so it keeps full relative precision when small.
    """
    y0 = np.array(y0, dtype=np.float64).reshape(-1)
    n = y0.shape[0]
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    h = (float(t1) - float(t0)) / n_steps
    d = np.zeros(n)
    k = np.empty((6, n))
    t = float(t0)
    for i in range(n_steps):
        k[0] = _call(rhs, t, y0 + d, n)
        for s in range(1, 6):
            k[s] = _call(rhs, t + C[s] * h, y0 + (d + h * np.dot(A[s], k[:s])), n)
        d = d + h * np.dot(B[:6], k)
        t = float(t0) + (i + 1) * h
    return y0 + d, d


def hermite(ts, ys, fs, tq):
    """Cubic Hermite interpolation of a trajectory at query times ``tq``."""
    ts = np.asarray(ts, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    fs = np.asarray(fs, dtype=np.float64)
    tq = np.atleast_1d(np.asarray(tq, dtype=np.float64))
    if ts.shape[0] == 1:
        return np.repeat(ys[:1], tq.shape[0], axis=0)
    increasing = ts[-1] >= ts[0]
    key = ts if increasing else ts[::-1]
    idx = np.searchsorted(key, tq, side="right") - 1
    idx = np.clip(idx, 0, ts.shape[0] - 2)
    if not increasing:
        idx = ts.shape[0] - 2 - idx
    ta = ts[idx]
    h = ts[idx + 1] - ta
    s = ((tq - ta) / h)[:, None]
    h = h[:, None]
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return (h00 * ys[idx] + h10 * h * fs[idx]
            + h01 * ys[idx + 1] + h11 * h * fs[idx + 1])
