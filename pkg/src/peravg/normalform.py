"""First-order S1-invariant normal forms.

The near-identity map is the time-``eps`` flow of the generator ``Z``. For the
pullback of ``X_eps = X0 + eps X1`` we need ``(d Phi_eps)^{-1}`` applied to a
vector, and the whole point is to resolve an ``O(eps^2)`` remainder, so the
differential is taken with care:

* the short ``Z``-flows run with a fixed-step 5th-order Runge-Kutta scheme,
  so neighbouring starting points see exactly the same step sequence and the
  map is a smooth function of its starting point;
* the flow returns the accumulated displacement ``Phi(y) - y`` rather than
  the end point, which keeps roundoff proportional to ``|Phi(y) - y| = O(eps)``;
* the differential of the inverse map is a 4th-order central difference of
  that displacement.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from ._fd import OPERATOR_STEP, directional
from .averaging import DEFAULT_QUAD, average_field, homological_Z
from .fields import VectorField, as_rows
from .geometry import Point, TangentVector, _coords, make_point

REMAINDER_MIN_EPS = 1e-4
MAX_SUBSTEP = 0.025


def _n_steps(eps):
    return max(4, math.ceil(abs(eps) / MAX_SUBSTEP))


def z_displacement(Z, P, eps, n_steps=None):
    """``Fl_Z^eps(P) - P`` for each row of ``P`` (fixed-step RK5)."""
    model = Z.model
    P = np.asarray(P, dtype=np.float64).reshape(-1, model.dim)
    if eps == 0:
        return np.zeros_like(P)
    dim = model.dim

    def rhs(t, y):
        return Z.batch(y.reshape(-1, dim)).ravel()

    _, disp = kernels.fixed_rk5(rhs, 0.0, float(eps), P.ravel(),
                                 _n_steps(eps) if n_steps is None else int(n_steps))
    return np.asarray(disp).reshape(P.shape)


@dataclass(frozen=True)
class NearIdentityMap:
    """``Phi_eps = Fl_Z^eps``; ``Phi_0`` is the identity."""

    generator: VectorField
    epsilon: float

    @property
    def model(self):
        return self.generator.model

    def forward_rows(self, P):
        P = np.asarray(P, dtype=np.float64)
        return self.model.normalize(P + z_displacement(self.generator, P, self.epsilon))

    def inverse_rows(self, P):
        P = np.asarray(P, dtype=np.float64)
        return self.model.normalize(P + z_displacement(self.generator, P, -self.epsilon))


def near_identity_apply(nim, p, direction="forward"):
    """``Phi_eps(p)`` or, with ``direction="inverse"``, ``Phi_eps^{-1}(p)``."""
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    model = nim.model
    P = _coords(model, p)[None]
    Q = nim.forward_rows(P) if direction == "forward" else nim.inverse_rows(P)
    return make_point(model, Q[0])


def pullback_perturbed(model, X0, X1, Z, eps, quad=DEFAULT_QUAD):
    """The field ``(d Phi_eps)^{-1} X_eps(Phi_eps(m))`` with ``X_eps = X0 + eps X1``."""
    eps = float(eps)

    def fn(P):
        if eps == 0:
            return X0.batch(P)
        Q = P + z_displacement(Z, P, eps)
        W = X0.batch(Q) + eps * X1.batch(Q)
        h = OPERATOR_STEP * np.broadcast_to(model.scale(Q), Q.shape[:-1])
        dD = directional(lambda Y: z_displacement(Z, Y, -eps), Q, W, h)
        return model.tangent_project(P, W + dD)

    return VectorField(model, fn, name=f"Phi*X[{eps:g}]")


def first_order_defect(model, X0, X1, Z, eps, P, quad=DEFAULT_QUAD, avg=None):
    """Rows of ``pullback - X0 - eps <X1>`` at the points ``P``."""
    P = as_rows(P, model.dim)
    avg = average_field(model, X1, quad) if avg is None else avg
    pb = pullback_perturbed(model, X0, X1, Z, eps, quad).batch(P)
    return pb - X0.batch(P) - eps * avg.batch(P)


def remainder_rows(model, X0, X1, Z, eps, P, quad=DEFAULT_QUAD, avg=None):
    """``R_eps`` at rows ``P``."""
    if not eps > 0:
        raise ValueError("the remainder needs eps > 0")
    if eps < REMAINDER_MIN_EPS:
        warnings.warn(f"eps = {eps:g} is below {REMAINDER_MIN_EPS:g}; the remainder "
                      "is dominated by cancellation error", RuntimeWarning, stacklevel=2)
    return first_order_defect(model, X0, X1, Z, eps, P, quad, avg) / eps ** 2


def extract_remainder(model, X0, X1, Z, eps, m, quad=DEFAULT_QUAD):
    """``R_eps(m) = (pullback - X0 - eps <X1>) / eps^2`` as a tangent vector."""
    P = _coords(model, m)
    R = remainder_rows(model, X0, X1, Z, eps, P[None], quad)[0]
    base = m if isinstance(m, Point) else make_point(model, P)
    return TangentVector(base, tuple(float(x) for x in R))


def remainder_field(model, X0, X1, Z, eps, quad=DEFAULT_QUAD, avg=None):
    """``R_eps`` as a vector field (no small-eps warning; callers pick eps)."""
    avg = average_field(model, X1, quad) if avg is None else avg
    eps = float(eps)
    pb = pullback_perturbed(model, X0, X1, Z, eps, quad)

    def fn(P):
        return (pb.batch(P) - X0.batch(P) - eps * avg.batch(P)) / eps ** 2

    return VectorField(model, fn, name=f"R[{eps:g}]")


def loglog_slope(xs, ys):
    """Least-squares slope of ``log ys`` against ``log xs``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if np.any(ys <= 0) or len(xs) < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


@dataclass
class NormalFormResult:
    averaged: VectorField
    generator: VectorField
    epsilons: np.ndarray
    defects: np.ndarray
    order2_slope: float
    remainder_at: Callable = field(repr=False, default=None)


DEFAULT_EPS = tuple(2.0 ** -j for j in range(3, 10))


def normal_form(model, X0, X1, points, epsilons=DEFAULT_EPS, quad=DEFAULT_QUAD):
    """Compute ``Z``, ``<X1>`` and the defect sweep over ``epsilons``.

    The defect at each eps is the largest metric norm of the first-order
    defect over ``points``; ``order2_slope`` is its log-log slope.
    """
    P = as_rows(points, model.dim)
    Z = homological_Z(model, X0, X1, quad)
    avg = average_field(model, X1, quad)
    eps = np.asarray(sorted(epsilons, reverse=True), dtype=np.float64)
    defects = np.array([
        float(np.max(model.norm(P, first_order_defect(model, X0, X1, Z, e, P, quad, avg))))
        for e in eps])

    def remainder_at(e, m):
        return extract_remainder(model, X0, X1, Z, e, m, quad)

    return NormalFormResult(avg, Z, eps, defects, loglog_slope(eps, defects), remainder_at)
