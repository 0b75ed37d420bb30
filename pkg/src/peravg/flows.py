"""Integration of flows, flow differentials and pullbacks of vector fields."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fields import VectorField, as_rows
from .geometry import Point, TangentVector, Trajectory, _coords, make_point

DEFAULT_TOL = 1e-10
DIFFERENTIAL_STEP = 1e-6


@dataclass(frozen=True)
class FlowSpec:
    """What to integrate and how accurately.

    ``t_span`` is ``(t0, t1)``; ``t1 < t0`` integrates backwards.
    """

    field: VectorField
    t_span: tuple = (0.0, 1.0)
    rel_tol: float = DEFAULT_TOL
    abs_tol: float = DEFAULT_TOL
    max_step: float = math.inf

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not all(math.isfinite(t) for t in self.t_span):
            raise ValueError("t_span must be finite")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")

    @property
    def model(self):
        return self.field.model

    def with_span(self, t0, t1):
        return FlowSpec(self.field, (float(t0), float(t1)), self.rel_tol, self.abs_tol, self.max_step)


def _rows_rhs(field, dim):
    if field.time_dependent:
        return lambda t, y: field.batch(y.reshape(-1, dim), t).ravel()
    return lambda t, y: field.batch(y.reshape(-1, dim)).ravel()


def integrate_rows(spec, P, t_span=None, dense=False):
    """Integrate every row of ``P`` jointly under ``spec.field``.

    All rows share one adaptive step sequence, which keeps differences of
    nearby trajectories smooth. Returns the end rows, or a
    :class:`Trajectory` over the flattened state when ``dense`` is set.
    """
    model = spec.model
    P = np.asarray(P, dtype=np.float64).reshape(-1, model.dim)
    t0, t1 = spec.t_span if t_span is None else t_span
    if t0 == t1:
        if dense:
            raise ValueError("dense output needs a non-empty interval")
        return P.copy()
    ts, ys, fs, nfev = kernels.dopri5(
        _rows_rhs(spec.field, model.dim), float(t0), float(t1), P.ravel(),
        spec.rel_tol, spec.abs_tol, max_step=spec.max_step,
        renorm_block=model.renorm_block, renorm_radius=model.renorm_radius,
        max_norm=model.blowup_bound)
    if dense:
        return Trajectory(ts, ys, fs, nfev=nfev)
    return ys[-1].reshape(-1, model.dim)


def integrate_flow(spec, p):
    """Dense trajectory of ``spec.field`` through ``p`` over ``spec.t_span``."""
    model = spec.model
    P0 = _coords(model, p)
    t0, t1 = spec.t_span
    ts, ys, fs, nfev = kernels.dopri5(
        _rows_rhs(spec.field, model.dim), float(t0), float(t1), P0,
        spec.rel_tol, spec.abs_tol, max_step=spec.max_step,
        renorm_block=model.renorm_block, renorm_radius=model.renorm_radius,
        max_norm=model.blowup_bound)
    return Trajectory(ts, ys, fs, normalize=model.normalize if model.renorm_block else None,
                      nfev=nfev)


def flow_point(spec, p, t):
    """``Fl^t(p)`` for the spec's field, starting at ``spec.t_span[0]``."""
    model = spec.model
    t0 = spec.t_span[0]
    end = integrate_rows(spec, _coords(model, p)[None], (t0, t0 + t))[0]
    return make_point(model, end)


def differential_rows(spec, P, V, t, h=DIFFERENTIAL_STEP):
    """``d_P Fl^t (V)`` for rows ``P``/``V`` by a central difference.

    The offset along each ``V`` is ``h (1 + |P|) / |V|``; both offset
    trajectories are integrated together with the same steps.
    """
    model = spec.model
    P = np.asarray(P, dtype=np.float64).reshape(-1, model.dim)
    V = np.asarray(V, dtype=np.float64).reshape(-1, model.dim)
    if t == 0:
        return model.tangent_project(P, V)
    vn = np.linalg.norm(V, axis=1)
    safe = np.where(vn > 0, vn, 1.0)
    step = h * (1.0 + np.linalg.norm(P, axis=1)) / safe
    n = P.shape[0]
    starts = np.concatenate([P + step[:, None] * V, P - step[:, None] * V])
    t0 = spec.t_span[0]
    ends = integrate_rows(spec, starts, (t0, t0 + t))
    D = (ends[:n] - ends[n:]) / (2 * step[:, None])
    D[vn == 0] = 0.0
    base = integrate_rows(spec, P, (t0, t0 + t))
    return model.tangent_project(base, D)


def flow_differential(spec, p, v, t):
    """Push the tangent vector ``v`` at ``p`` forward by ``d_p Fl^t``."""
    model = spec.model
    P = _coords(model, p)
    V = np.asarray(v.components if isinstance(v, TangentVector) else v, dtype=np.float64)
    D = differential_rows(spec, P[None], V[None], t)[0]
    end = flow_point(spec, p, t)
    return TangentVector(end, tuple(float(x) for x in D))


def pullback_field(spec, t, Y):
    """The field ``m -> (d_m Fl^t)^{-1} Y(Fl^t(m))``.

    The inverse differential is the differential of the time ``-t`` flow at
    ``Fl^t(m)``.
    """
    model = spec.model
    t = float(t)
    t0 = spec.t_span[0]

    def fn(P):
        Q = integrate_rows(spec, P, (t0, t0 + t))
        W = Y.batch(Q)
        back = FlowSpec(spec.field, (t0 + t, t0), spec.rel_tol, spec.abs_tol, spec.max_step)
        return differential_rows(back, Q, W, -t)

    return VectorField(model, fn, name=f"Fl^{t:g}*{Y.name}")
