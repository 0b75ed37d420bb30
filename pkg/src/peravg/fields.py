"""Scalar and vector fields on a manifold model.

Fields are thin wrappers around batched callables: ``fn(P)`` receives an
``(n, dim)`` array of coordinate rows and returns ``(n,)`` (scalar fields) or
``(n, dim)`` (vector fields). Calling a field on a :class:`~peravg.geometry.Point`
returns a float or a :class:`~peravg.geometry.TangentVector`; calling it on an
array returns an array of matching rank.
"""
from __future__ import annotations

import numpy as np


def as_rows(p, dim):
    """Coordinates of a point, point list or array as an ``(n, dim)`` array."""
    coords = getattr(p, "coords", None)
    if coords is not None:
        p = coords
    P = np.asarray(p, dtype=np.float64)
    if P.shape[-1] != dim:
        raise ValueError(f"expected {dim} coordinates, got shape {P.shape}")
    return P.reshape(-1, dim)


class ScalarField:
    def __init__(self, model, fn, name=None):
        self.model = model
        self.fn = fn
        self.name = name or getattr(fn, "__name__", "f")

    def batch(self, P):
        P = np.asarray(P, dtype=np.float64)
        out = np.asarray(self.fn(P.reshape(-1, P.shape[-1])), dtype=np.float64)
        return out.reshape(P.shape[:-1])

    def __call__(self, p):
        from .geometry import Point

        if isinstance(p, Point):
            return float(self.batch(np.asarray(p.coords))[()])
        P = np.asarray(p, dtype=np.float64)
        out = self.batch(P)
        return float(out) if P.ndim == 1 else out

    # arithmetic ------------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, ScalarField):
            return other.batch
        c = float(other)
        return lambda P: np.full(P.shape[:-1], c)

    def __add__(self, other):
        g = self._lift(other)
        return ScalarField(self.model, lambda P: self.batch(P) + g(P))

    __radd__ = __add__

    def __sub__(self, other):
        g = self._lift(other)
        return ScalarField(self.model, lambda P: self.batch(P) - g(P))

    def __rsub__(self, other):
        g = self._lift(other)
        return ScalarField(self.model, lambda P: g(P) - self.batch(P))

    def __mul__(self, other):
        if isinstance(other, VectorField):
            return other * self
        g = self._lift(other)
        return ScalarField(self.model, lambda P: self.batch(P) * g(P))

    __rmul__ = __mul__

    def __truediv__(self, other):
        g = self._lift(other)
        return ScalarField(self.model, lambda P: self.batch(P) / g(P))

    def __neg__(self):
        return ScalarField(self.model, lambda P: -self.batch(P))

    def __repr__(self):
        return f"ScalarField({self.name!r} on {self.model.model_id})"


class VectorField:
    """A (possibly time dependent) vector field.

    Values are projected onto the model's tangent space at the evaluation
    point, so fields on embedded models (the Hopf 3-sphere) stay tangent.
    With ``time_dependent=True`` the callable is ``fn(t, P)``.
    """

    def __init__(self, model, fn, name=None, time_dependent=False):
        self.model = model
        self.fn = fn
        self.name = name or getattr(fn, "__name__", "X")
        self.time_dependent = time_dependent

    def batch(self, P, t=0.0):
        P = np.asarray(P, dtype=np.float64)
        rows = P.reshape(-1, P.shape[-1])
        V = self.fn(t, rows) if self.time_dependent else self.fn(rows)
        V = self.model.tangent_project(rows, np.asarray(V, dtype=np.float64))
        return V.reshape(P.shape)

    def __call__(self, p, t=0.0):
        from .geometry import Point, TangentVector

        if isinstance(p, Point):
            v = self.batch(np.asarray(p.coords), t)
            return TangentVector(p, tuple(float(x) for x in v))
        return self.batch(p, t)

    def at_time(self, t):
        """Freeze a time-dependent field at time ``t``."""
        if not self.time_dependent:
            return self
        return VectorField(self.model, lambda P: self.fn(t, P), name=f"{self.name}@{t}")

    # arithmetic ------------------------------------------------------------
    def _combine(self, other, op):
        if not isinstance(other, VectorField):
            return NotImplemented
        if self.time_dependent or other.time_dependent:
            return VectorField(self.model,
                               lambda t, P: op(self.batch(P, t), other.batch(P, t)),
                               time_dependent=True)
        return VectorField(self.model, lambda P: op(self.batch(P), other.batch(P)))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return VectorField(self.model,
                               lambda P: other.batch(P)[..., None] * self.batch(P))
        c = float(other)
        if self.time_dependent:
            return VectorField(self.model, lambda t, P: c * self.batch(P, t),
                               time_dependent=True)
        return VectorField(self.model, lambda P: c * self.batch(P))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"VectorField({self.name!r} on {self.model.model_id})"


def constant_field(model, components, name="const"):
    c = np.asarray(components, dtype=np.float64)
    return VectorField(model, lambda P: np.broadcast_to(c, P.shape).copy(), name=name)
