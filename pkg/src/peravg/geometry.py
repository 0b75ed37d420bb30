"""Manifold models with a free, isometric S1-action and their orbit spaces.

Two models ship:

* :class:`TrivialBundle` -- ``S1 x R^k`` with coordinates ``(phi, x1..xk)``,
  the product metric, the action ``phi -> phi + theta`` and orbit space ``R^k``.
* :class:`HopfBundle` -- the unit 3-sphere in ``R^4`` with the round metric,
  the action ``(z1, z2) -> (e^{i theta} z1, e^{i theta} z2)`` and orbit space
  the round 2-sphere of radius 1/2 in ``R^3``.

Model methods work on coordinate arrays whose last axis is the coordinate
axis; the module-level functions take :class:`Point` / :class:`TangentVector`
values (or plain arrays) and implement the user-facing operations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import DomainError, NotSameFiber
from .fields import ScalarField, VectorField, as_rows

TWO_PI = 2.0 * math.pi
DISTANCE_SLACK = 1e-9


@dataclass(frozen=True)
class Point:
    model_id: str
    coords: tuple

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class TangentVector:
    base: Point
    components: tuple

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)


@dataclass(frozen=True)
class OrbitPoint:
    model_id: str
    coords: tuple

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


def _dot(U, V):
    return np.einsum("...i,...i->...", U, V)


def _norm(U):
    return np.sqrt(_dot(U, U))


class ManifoldModel:
    """Common interface of the bundle models.

    Subclasses define the coordinates, the S1-action and its differential,
    the projection to the orbit space and the horizontal frame. The metric is
    the Euclidean one on coordinates for both shipped models.
    """

    kind = "abstract"
    dim: int
    orbit_dim: int
    variables: tuple
    orbit_variables: tuple
    renorm_block = 0
    renorm_radius = 1.0
    orbit_renorm_block = 0
    orbit_renorm_radius = 1.0
    blowup_bound = math.inf

    def __init__(self, omega=None):
        if omega is None:
            omega = lambda P: np.ones(P.shape[0])  # noqa: E731
        self.omega = omega if isinstance(omega, ScalarField) else ScalarField(self, omega, "omega")
        if self.omega.model is not self:
            self.omega = ScalarField(self, self.omega.fn, self.omega.name)

    # -- identity -----------------------------------------------------------
    @property
    def model_id(self):
        raise NotImplementedError

    def with_omega(self, omega):
        raise NotImplementedError

    # -- metric -------------------------------------------------------------
    def inner(self, P, U, V):
        return _dot(U, V)

    def norm(self, P, V):
        return np.sqrt(self.inner(P, V, V))

    def tangent_project(self, P, V):
        return V

    def normalize(self, P):
        return np.asarray(P, dtype=np.float64)

    def scale(self, P):
        """Length scale used to size finite-difference steps at ``P``."""
        raise NotImplementedError

    # -- action -------------------------------------------------------------
    def act(self, P, theta):
        raise NotImplementedError

    def act_vector(self, V, theta):
        """Differential of the time-``theta`` action applied to ``V``."""
        raise NotImplementedError

    def generator(self, P):
        """Infinitesimal generator of the action (the field X0 / omega)."""
        raise NotImplementedError

    def x0(self):
        """The unperturbed field ``omega * generator``."""
        return VectorField(self, lambda P: self.omega.batch(P)[:, None] * self.generator(P),
                           name="X0")

    def generator_field(self):
        return VectorField(self, self.generator, name="Upsilon")

    # -- orbit space --------------------------------------------------------
    def project(self, P):
        raise NotImplementedError

    def d_project(self, P, V):
        raise NotImplementedError

    def section(self, Z):
        """A point in the fiber over each orbit point."""
        raise NotImplementedError

    def orbit_tangent_project(self, Z, W):
        return W

    def orbit_normalize(self, Z):
        return np.asarray(Z, dtype=np.float64)

    def orbit_norm(self, Z, W):
        return _norm(W)

    # -- frames -------------------------------------------------------------
    def frame(self, P):
        """Orthonormal tangent frame, shape ``(..., manifold_dim, dim)``."""
        raise NotImplementedError

    def horizontal_frame(self, P):
        raise NotImplementedError

    def horizontal_lift_vector(self, P, W):
        """Horizontal vectors at ``P`` projecting to orbit vectors ``W``."""
        P = np.asarray(P, dtype=np.float64)
        W = np.asarray(W, dtype=np.float64)
        E = self.horizontal_frame(P)  # (..., r, dim)
        A = np.swapaxes(self.d_project(P[..., None, :], E), -1, -2)  # (..., orbit_dim, r)
        c = np.einsum("...ij,...j->...i", np.linalg.pinv(A), W)
        return np.einsum("...i,...ij->...j", c, E)

    # -- distances ----------------------------------------------------------
    def distance(self, P, Q):
        raise NotImplementedError

    def orbit_distance(self, Z1, Z2):
        raise NotImplementedError

    # -- sampling -----------------------------------------------------------
    def random_points(self, rng, n, box=None):
        raise NotImplementedError

    def phase(self, P, Q):
        """Angle ``tau`` with ``act(P, tau) = Q`` assuming same fiber."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.model_id})"


class TrivialBundle(ManifoldModel):
    kind = "trivial"
    blowup_bound = 1e6

    def __init__(self, k=1, omega=None):
        if k < 1:
            raise ValueError("TrivialBundle needs k >= 1")
        self.k = int(k)
        self.dim = self.k + 1
        self.manifold_dim = self.dim
        self.orbit_dim = self.k
        self.variables = ("phi",) + tuple(f"x{i}" for i in range(1, self.k + 1))
        self.orbit_variables = tuple(f"x{i}" for i in range(1, self.k + 1))
        super().__init__(omega)

    @property
    def model_id(self):
        return f"trivial:{self.k}"

    def with_omega(self, omega):
        return TrivialBundle(self.k, omega)

    def scale(self, P):
        P = np.asarray(P, dtype=np.float64)
        return 1.0 + _norm(P[..., 1:])

    def act(self, P, theta):
        P = np.asarray(P, dtype=np.float64)
        phi = P[..., 0] + np.asarray(theta, dtype=np.float64)
        out = np.array(np.broadcast_to(P, phi.shape + P.shape[-1:]))
        out[..., 0] = phi
        return out

    def act_vector(self, V, theta):
        V = np.asarray(V, dtype=np.float64)
        shape = np.broadcast_shapes(V.shape[:-1], np.shape(theta)) + V.shape[-1:]
        return np.array(np.broadcast_to(V, shape))

    def generator(self, P):
        P = np.asarray(P, dtype=np.float64)
        out = np.zeros_like(P)
        out[..., 0] = 1.0
        return out

    def wrap(self, P):
        P = np.array(P, dtype=np.float64)
        P[..., 0] = np.mod(P[..., 0], TWO_PI)
        return P

    def project(self, P):
        return np.array(np.asarray(P, dtype=np.float64)[..., 1:])

    def d_project(self, P, V):
        return np.array(np.asarray(V, dtype=np.float64)[..., 1:])

    def section(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return np.concatenate([np.zeros(Z.shape[:-1] + (1,)), Z], axis=-1)

    def frame(self, P):
        P = np.asarray(P)
        return np.broadcast_to(np.eye(self.dim), P.shape[:-1] + (self.dim, self.dim))

    def horizontal_frame(self, P):
        P = np.asarray(P)
        return np.broadcast_to(np.eye(self.dim)[1:], P.shape[:-1] + (self.k, self.dim))

    def horizontal_lift_vector(self, P, W):
        W = np.asarray(W, dtype=np.float64)
        return np.concatenate([np.zeros(W.shape[:-1] + (1,)), W], axis=-1)

    def distance(self, P, Q):
        P = np.asarray(P, dtype=np.float64)
        Q = np.asarray(Q, dtype=np.float64)
        d = np.mod(P[..., 0] - Q[..., 0], TWO_PI)
        d = np.minimum(d, TWO_PI - d)
        dx = P[..., 1:] - Q[..., 1:]
        return np.sqrt(d * d + _dot(dx, dx))

    def orbit_distance(self, Z1, Z2):
        return _norm(np.asarray(Z1, dtype=np.float64) - np.asarray(Z2, dtype=np.float64))

    def random_points(self, rng, n, box=None):
        if box is None:
            box = [(-1.0, 1.0)] * self.k
        box = np.asarray(box, dtype=np.float64)
        phi = rng.uniform(0.0, TWO_PI, size=(n, 1))
        x = rng.uniform(box[:, 0], box[:, 1], size=(n, self.k))
        return np.concatenate([phi, x], axis=1)

    def phase(self, P, Q):
        return np.mod(np.asarray(Q)[..., 0] - np.asarray(P)[..., 0], TWO_PI)


class HopfBundle(ManifoldModel):
    kind = "hopf"
    dim = 4
    manifold_dim = 3
    orbit_dim = 3
    variables = ("a", "b", "c", "d")
    orbit_variables = ("u1", "u2", "u3")
    renorm_block = 4
    renorm_radius = 1.0
    orbit_renorm_block = 3
    orbit_renorm_radius = 0.5
    blowup_bound = 10.0

    @property
    def model_id(self):
        return "hopf"

    def with_omega(self, omega):
        return HopfBundle(omega)

    def scale(self, P):
        return _norm(np.asarray(P, dtype=np.float64))

    def tangent_project(self, P, V):
        P = np.asarray(P, dtype=np.float64)
        V = np.asarray(V, dtype=np.float64)
        return V - (_dot(P, V) / _dot(P, P))[..., None] * P

    def normalize(self, P):
        P = np.asarray(P, dtype=np.float64)
        return P / _norm(P)[..., None]

    @staticmethod
    def _rotate(V, theta):
        V = np.asarray(V, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64)
        c = np.cos(theta)
        s = np.sin(theta)
        a, b, cc, d = V[..., 0], V[..., 1], V[..., 2], V[..., 3]
        return np.stack([a * c - b * s, a * s + b * c, cc * c - d * s, cc * s + d * c], axis=-1)

    def act(self, P, theta):
        return self._rotate(P, theta)

    def act_vector(self, V, theta):
        return self._rotate(V, theta)

    def generator(self, P):
        P = np.asarray(P, dtype=np.float64)
        return np.stack([-P[..., 1], P[..., 0], -P[..., 3], P[..., 2]], axis=-1)

    def project(self, P):
        P = np.asarray(P, dtype=np.float64)
        a, b, c, d = P[..., 0], P[..., 1], P[..., 2], P[..., 3]
        return np.stack([a * c + b * d, b * c - a * d,
                         0.5 * (a * a + b * b - c * c - d * d)], axis=-1)

    def d_project(self, P, V):
        P = np.asarray(P, dtype=np.float64)
        V = np.asarray(V, dtype=np.float64)
        a, b, c, d = P[..., 0], P[..., 1], P[..., 2], P[..., 3]
        va, vb, vc, vd = V[..., 0], V[..., 1], V[..., 2], V[..., 3]
        return np.stack([c * va + d * vb + a * vc + b * vd,
                         -d * va + c * vb + b * vc - a * vd,
                         a * va + b * vb - c * vc - d * vd], axis=-1)

    def section(self, Z):
        Z = self.orbit_normalize(Z)
        u1, u2, u3 = Z[..., 0], Z[..., 1], Z[..., 2]
        r1 = np.sqrt(np.clip(0.5 + u3, 0.0, None))
        r2 = np.sqrt(np.clip(0.5 - u3, 0.0, None))
        upper = r1 >= r2
        s1 = np.where(upper, r1, 1.0)
        s2 = np.where(upper, 1.0, r2)
        # z1 real when |z1| >= |z2|, otherwise z2 real
        p_upper = np.stack([r1, np.zeros_like(r1), u1 / s1, -u2 / s1], axis=-1)
        p_lower = np.stack([u1 / s2, u2 / s2, r2, np.zeros_like(r2)], axis=-1)
        return self.normalize(np.where(upper[..., None], p_upper, p_lower))

    def orbit_tangent_project(self, Z, W):
        Z = np.asarray(Z, dtype=np.float64)
        W = np.asarray(W, dtype=np.float64)
        return W - (_dot(Z, W) / _dot(Z, Z))[..., None] * Z

    def orbit_normalize(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return 0.5 * Z / _norm(Z)[..., None]

    def frame(self, P):
        P = self.normalize(P)
        a, b, c, d = P[..., 0], P[..., 1], P[..., 2], P[..., 3]
        e1 = np.stack([-b, a, -d, c], axis=-1)
        e2 = np.stack([-c, d, a, -b], axis=-1)
        e3 = np.stack([-d, -c, b, a], axis=-1)
        return np.stack([e1, e2, e3], axis=-2)

    def horizontal_frame(self, P):
        return self.frame(P)[..., 1:, :]

    @staticmethod
    def _check_unit(P, radius, what):
        r = _norm(P)
        # arccos argument <p,q>/r^2 stays in [-1, 1] within slack iff norms are ~r
        if np.any(np.abs(r / radius - 1.0) > DISTANCE_SLACK) or not np.all(np.isfinite(r)):
            raise DomainError(f"{what} not on the sphere of radius {radius} "
                              f"(norms {np.atleast_1d(r)[:3]}...)")
        return P / r[..., None]

    def distance(self, P, Q):
        U = self._check_unit(np.asarray(P, dtype=np.float64), 1.0, "point")
        V = self._check_unit(np.asarray(Q, dtype=np.float64), 1.0, "point")
        return 2.0 * np.arctan2(_norm(U - V), _norm(U + V))

    def orbit_distance(self, Z1, Z2):
        U = self._check_unit(np.asarray(Z1, dtype=np.float64), 0.5, "orbit point")
        V = self._check_unit(np.asarray(Z2, dtype=np.float64), 0.5, "orbit point")
        # great-circle distance on the radius-1/2 sphere
        return np.arctan2(_norm(U - V), _norm(U + V))

    def random_points(self, rng, n, box=None):
        return self.normalize(rng.normal(size=(n, 4)))

    def phase(self, P, Q):
        P = np.asarray(P, dtype=np.float64)
        Q = np.asarray(Q, dtype=np.float64)
        # <q, p>_C = q1 conj(p1) + q2 conj(p2)
        re = Q[..., 0] * P[..., 0] + Q[..., 1] * P[..., 1] + Q[..., 2] * P[..., 2] + Q[..., 3] * P[..., 3]
        im = Q[..., 1] * P[..., 0] - Q[..., 0] * P[..., 1] + Q[..., 3] * P[..., 2] - Q[..., 2] * P[..., 3]
        return np.mod(np.arctan2(im, re), TWO_PI)


# -- conversions -------------------------------------------------------------

def make_point(model, coords):
    """Build a validated :class:`Point` (angles wrapped, sphere points normalized)."""
    P = np.asarray(coords, dtype=np.float64).reshape(model.dim)
    if isinstance(model, TrivialBundle):
        P = model.wrap(P)
    else:
        P = model.normalize(P)
    return Point(model.model_id, tuple(float(x) for x in P))


def make_orbit_point(model, coords):
    Z = model.orbit_normalize(np.asarray(coords, dtype=np.float64).reshape(model.orbit_dim))
    return OrbitPoint(model.model_id, tuple(float(x) for x in Z))


def _coords(model, p):
    if isinstance(p, (Point, OrbitPoint)):
        if p.model_id != model.model_id:
            raise ValueError(f"point of model {p.model_id} used with {model.model_id}")
        return np.asarray(p.coords, dtype=np.float64)
    return np.asarray(p, dtype=np.float64)


def _vector(model, v):
    if isinstance(v, TangentVector):
        return _coords(model, v.base), np.asarray(v.components, dtype=np.float64)
    raise TypeError("expected a TangentVector")


def tangent(model, base, components):
    P = _coords(model, base)
    base = base if isinstance(base, Point) else make_point(model, P)
    V = model.tangent_project(np.asarray(base.coords), np.asarray(components, dtype=np.float64))
    return TangentVector(base, tuple(float(x) for x in V))


# -- operations --------------------------------------------------------------

def s1_flow(model, p, theta):
    """Image of ``p`` under the time-``theta`` flow of the action generator."""
    return make_point(model, model.act(_coords(model, p), float(theta)))


def project_to_orbit(model, p):
    return make_orbit_point(model, model.project(_coords(model, p)))


def split_vector(model, v):
    """Horizontal and vertical parts of ``v`` (orthogonal w.r.t. the metric)."""
    P, V = _vector(model, v)
    Y = model.generator(P)
    coef = model.inner(P, V, Y) / model.inner(P, Y, Y)
    vert = coef * Y
    hor = V - vert
    return (TangentVector(v.base, tuple(float(x) for x in hor)),
            TangentVector(v.base, tuple(float(x) for x in vert)))


def split_array(model, P, V):
    """Array form of :func:`split_vector`: returns ``(hor, vert)``."""
    Y = model.generator(P)
    coef = model.inner(P, V, Y) / model.inner(P, Y, Y)
    vert = coef[..., None] * Y
    return V - vert, vert


def horizontal_part(X):
    """The field ``X^hor``."""
    model = X.model
    if X.time_dependent:
        return VectorField(model, lambda t, P: split_array(model, P, X.batch(P, t))[0],
                           name=f"{X.name}^hor", time_dependent=True)
    return VectorField(model, lambda P: split_array(model, P, X.batch(P))[0], name=f"{X.name}^hor")


def orbit_distance(model, z1, z2):
    return float(model.orbit_distance(_coords(model, z1), _coords(model, z2)))


def manifold_distance(model, p, q):
    return float(model.distance(_coords(model, p), _coords(model, q)))


COVARIANT_STEP = 1e-5


def covariant_rows(model, X, P, V, t=0.0):
    """Levi-Civita derivative ``nabla_V X`` at rows ``P`` (2nd-order central).

    Flat coordinates for the trivial bundle; for the 3-sphere the ambient
    derivative is projected to the tangent space (Gauss formula).
    """
    from ._fd import central2

    P = np.asarray(P, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    h = COVARIANT_STEP * np.broadcast_to(model.scale(P), P.shape[:-1])
    D = central2(lambda Q: X.batch(Q, t), P, V, h)
    return model.tangent_project(P, D)


def covariant_derivative(model, X, m, v):
    P = _coords(model, m)
    if isinstance(v, TangentVector):
        V = np.asarray(v.components, dtype=np.float64)
    else:
        V = np.asarray(v, dtype=np.float64)
    D = covariant_rows(model, X, P[None], V[None])[0]
    base = m if isinstance(m, Point) else make_point(model, P)
    return TangentVector(base, tuple(float(x) for x in D))


def nabla_matrix(model, X, P, t=0.0):
    """Matrix of ``v -> nabla_v X`` in the orthonormal frame at each row."""
    P = np.asarray(P, dtype=np.float64).reshape(-1, model.dim)
    E = model.frame(P)  # (n, m, dim)
    n, m, dim = E.shape
    Prep = np.repeat(P, m, axis=0)
    D = covariant_rows(model, X, Prep, E.reshape(n * m, dim), t).reshape(n, m, dim)
    # M[i, j] = <e_i, nabla_{e_j} X>
    return np.einsum("nid,njd->nij", E, D)


def nabla_norms(model, X, P, t=0.0):
    """Operator norms ``||(nabla X)_m||`` for each row of ``P``."""
    M = nabla_matrix(model, X, P, t)
    return np.linalg.norm(M, ord=2, axis=(1, 2))


def nabla_op_norm(model, X, m):
    return float(nabla_norms(model, X, _coords(model, m)[None])[0])


# -- curves ------------------------------------------------------------------

class Trajectory:
    """Dense-output curve on a model (or its orbit space).

    Evaluation uses cubic Hermite interpolation between accepted steps and is
    re-normalized onto the sphere for embedded models.
    """

    def __init__(self, ts, ys, fs, normalize=None, nfev=0):
        self.ts = np.asarray(ts, dtype=np.float64)
        self.ys = np.asarray(ys, dtype=np.float64)
        self.fs = np.asarray(fs, dtype=np.float64)
        self._normalize = normalize
        self.nfev = nfev
        self.ts.setflags(write=False)
        self.ys.setflags(write=False)
        self.fs.setflags(write=False)

    @property
    def t_span(self):
        return float(self.ts[0]), float(self.ts[-1])

    @property
    def end(self):
        return self.ys[-1]

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(np.asarray(t, dtype=np.float64))
        Y = kernels.hermite(self.ts, self.ys, self.fs, tq)
        exact = np.isin(tq, self.ts)
        if exact.any():
            idx = np.searchsorted(self.ts, tq[exact]) if self.ts[-1] >= self.ts[0] else \
                len(self.ts) - 1 - np.searchsorted(self.ts[::-1], tq[exact])
            Y[exact] = self.ys[idx]
        if self._normalize is not None:
            Y = self._normalize(Y)
        return Y[0] if scalar else Y

    def derivative(self, t):
        """Time derivative of the Hermite interpolant."""
        tq = np.atleast_1d(np.asarray(t, dtype=np.float64))
        ts = self.ts if self.ts[-1] >= self.ts[0] else self.ts[::-1]
        order = slice(None) if self.ts[-1] >= self.ts[0] else slice(None, None, -1)
        ys, fs = self.ys[order], self.fs[order]
        idx = np.clip(np.searchsorted(ts, tq, side="right") - 1, 0, len(ts) - 2)
        h = (ts[idx + 1] - ts[idx])[:, None]
        s = ((tq - ts[idx]) / h[:, 0])[:, None]
        d00 = (6 * s * s - 6 * s) / h
        d10 = 3 * s * s - 4 * s + 1
        d01 = (-6 * s * s + 6 * s) / h
        d11 = 3 * s * s - 2 * s
        out = d00 * ys[idx] + d10 * fs[idx] + d01 * ys[idx + 1] + d11 * fs[idx + 1]
        return out[0] if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class OrbitCurve:
    """A curve on the orbit space, ``fn(t) -> orbit coordinates``.

    ``deriv`` is optional; without it a 4th-order central difference is used.
    """

    fn: Callable
    t_span: tuple
    deriv: Callable | None = None

    def velocity(self, t):
        if self.deriv is not None:
            return np.asarray(self.deriv(t), dtype=np.float64)
        h = 1e-4 * max(1.0, abs(self.t_span[1] - self.t_span[0]))
        f = lambda s: np.asarray(self.fn(s), dtype=np.float64)  # noqa: E731
        return (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h)


def horizontal_lift_curve(model, alpha, m0, n_steps=100, rtol=1e-11, atol=1e-12):
    """Horizontal lift of the orbit curve ``alpha`` through ``m0``.

    Integrates ``beta' = hor(alpha'(t))`` with the adaptive integrator; the
    step is capped so at least ``n_steps`` steps cover the interval.
    """
    P0 = _coords(model, m0)
    a, b = alpha.t_span
    z0 = model.project(P0)
    if np.linalg.norm(z0 - np.asarray(alpha.fn(a), dtype=np.float64)) > 1e-7:
        raise ValueError("alpha(a) must equal the projection of m0")

    def rhs(t, y):
        W = model.orbit_tangent_project(model.project(y), alpha.velocity(t))
        return model.horizontal_lift_vector(y, W)

    ts, ys, fs, nfev = kernels.dopri5(
        rhs, a, b, P0, rtol, atol, max_step=abs(b - a) / max(1, int(n_steps)),
        renorm_block=model.renorm_block, renorm_radius=model.renorm_radius,
        max_norm=model.blowup_bound)
    norm = model.normalize if model.renorm_block else None
    return Trajectory(ts, ys, fs, normalize=norm, nfev=nfev)


def curve_length(model, curve, t_span, n=2049, orbit=False):
    """Arc length of a curve given its velocity function (Simpson's rule)."""
    from scipy.integrate import simpson

    ts = np.linspace(t_span[0], t_span[1], n)
    V = np.asarray([curve(t) for t in ts]) if not hasattr(curve, "derivative") else curve.derivative(ts)
    speeds = _norm(V)
    return float(simpson(speeds, x=ts))


def fiber_phase(model, p, q):
    """Angle ``tau in [0, 2 pi)`` with ``s1_flow(p, tau) == q``."""
    P = _coords(model, p)
    Q = _coords(model, q)
    gap = np.linalg.norm(model.project(P) - model.project(Q))
    if gap > 1e-7:
        raise NotSameFiber(f"points lie on different orbits (orbit gap {gap:.3g})")
    tau = float(model.phase(P, Q))
    if tau >= TWO_PI:
        tau = 0.0
    resid = np.linalg.norm(model.act(P, tau) - Q) if isinstance(model, HopfBundle) else \
        float(model.distance(model.act(P, tau), Q))
    if resid > 1e-7:
        raise NotSameFiber(f"phase reconstruction residual {resid:.3g}")
    return tau
