"""Averaging and integrating operators along the S1-action.

All operators act through the closed-form action of the model: the pullback
of a vector field by the time-``t`` flow of the generator is
``act_vector(R(act(m, t)), -t)``. Results are lazy fields that evaluate the
quadrature on demand.

The integrating operator ``S`` has a sawtooth kernel ``(t - pi) / 2 pi`` that
is discontinuous as a periodic function, so a plain trapezoid sum converges
only at second order. Instead the weights below apply the exact Fourier
multiplier of ``S`` (``-i/k`` on the mode ``e^{ik theta}``) to the sampled
values, which keeps the spectral accuracy the trapezoid rule has for the
mean. ``S^2`` gets its own weights (multiplier ``-1/k^2``), so ``S(S(R))`` is
a single pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._fd import OPERATOR_STEP, directional
from .errors import NotInvariant
from .fields import ScalarField, VectorField, as_rows

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class QuadratureRule:
    """``n_nodes`` uniform nodes ``t_j = 2 pi j / n`` on the circle."""

    n_nodes: int = 64
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    mean_weights: np.ndarray = field(init=False, repr=False, compare=False)
    s_weights: np.ndarray = field(init=False, repr=False, compare=False)
    s2_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n_nodes)
        if n < 8:
            raise ValueError("a quadrature rule needs at least 8 nodes")
        if n != self.n_nodes:
            raise ValueError("n_nodes must be an integer")
        t = TWO_PI * np.arange(n) / n
        k = np.arange(1, (n + 1) // 2)  # drop the Nyquist mode for even n
        kt = np.outer(t, k)
        s = -(2.0 / n) * (np.sin(kt) / k).sum(axis=1)
        s2 = -(2.0 / n) * (np.cos(kt) / k ** 2).sum(axis=1)
        object.__setattr__(self, "nodes", t)
        object.__setattr__(self, "mean_weights", np.full(n, 1.0 / n))
        object.__setattr__(self, "s_weights", s)
        object.__setattr__(self, "s2_weights", s2)

    def weights(self, power):
        return {0: self.mean_weights, 1: self.s_weights, 2: self.s2_weights}[power]


DEFAULT_QUAD = QuadratureRule()


def _orbit_samples(model, P, quad):
    """Points ``act(P, t_j)`` with shape ``(n_nodes, rows, dim)``."""
    t = quad.nodes[:, None]
    return model.act(P[None, :, :], t), t


def _apply_vector(model, R, quad, power):
    def fn(P):
        n, dim = P.shape
        Q, t = _orbit_samples(model, P, quad)
        vals = R.batch(Q.reshape(-1, dim)).reshape(Q.shape)
        back = model.act_vector(vals, -t)
        return np.tensordot(quad.weights(power), back, axes=(0, 0))

    return fn


def _apply_scalar(model, f, quad, power):
    def fn(P):
        n, dim = P.shape
        Q, _ = _orbit_samples(model, P, quad)
        vals = f.batch(Q.reshape(-1, dim)).reshape(Q.shape[:2])
        return quad.weights(power) @ vals

    return fn


def average_field(model, R, quad=DEFAULT_QUAD):
    """The S1-average of a vector field."""
    return VectorField(model, _apply_vector(model, R, quad, 0), name=f"<{R.name}>")


def average_function(model, f, quad=DEFAULT_QUAD):
    return ScalarField(model, _apply_scalar(model, f, quad, 0), name=f"<{f.name}>")


def integrating_op(model, R, quad=DEFAULT_QUAD, power=1):
    """``S(R)`` (``power=1``) or ``S(S(R))`` (``power=2``) for fields or functions."""
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    tag = "S" if power == 1 else "S2"
    if isinstance(R, ScalarField):
        return ScalarField(model, _apply_scalar(model, R, quad, power), name=f"{tag}({R.name})")
    return VectorField(model, _apply_vector(model, R, quad, power), name=f"{tag}({R.name})")


# -- derivatives ---------------------------------------------------------------

def _steps(model, P):
    return OPERATOR_STEP * np.broadcast_to(model.scale(P), P.shape[:-1])


def lie_derivative(model, X, f):
    """The function ``X(f)``, differentiated along ``X`` with a 4th-order stencil."""

    def fn(P):
        return directional(f.batch, P, X.batch(P), _steps(model, P))

    return ScalarField(model, fn, name=f"L_{X.name}{f.name}")


def lie_bracket(model, X, Y):
    """``[X, Y] = DY[X] - DX[Y]`` evaluated in coordinates.

    On the 3-sphere both fields are tangent to the spheres through each point,
    so the ambient bracket is tangent as well; it is projected regardless.
    """

    def fn(P):
        h = _steps(model, P)
        return directional(Y.batch, P, X.batch(P), h) - directional(X.batch, P, Y.batch(P), h)

    return VectorField(model, fn, name=f"[{X.name},{Y.name}]")


def homological_Z(model, X0, X1, quad=DEFAULT_QUAD):
    """Solution ``Z`` of ``L_{X0} Z = X1 - <X1>``.

    ``Z = S(X1) / omega + S^2(X1(omega)) X0 / omega^3``; ``X0`` must be
    ``omega`` times the generator of the model.
    """
    omega = model.omega
    s1 = integrating_op(model, X1, quad, 1)
    s2 = integrating_op(model, lie_derivative(model, X1, omega), quad, 2)

    def fn(P):
        w = omega.batch(P)
        return s1.batch(P) / w[:, None] + (s2.batch(P) / w ** 3)[:, None] * X0.batch(P)

    return VectorField(model, fn, name=f"Z[{X1.name}]")


# -- reduction -------------------------------------------------------------------

class ReducedField:
    """A vector field on the orbit space."""

    def __init__(self, model, fn, name="Y_O"):
        self.model = model
        self.fn = fn
        self.name = name

    def batch(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        rows = Z.reshape(-1, Z.shape[-1])
        W = self.model.orbit_tangent_project(rows, np.asarray(self.fn(rows), dtype=np.float64))
        return W.reshape(Z.shape)

    def __call__(self, z):
        coords = getattr(z, "coords", z)
        return self.batch(np.asarray(coords, dtype=np.float64))

    def __repr__(self):
        return f"ReducedField({self.name!r} on {self.model.model_id})"


def invariance_defect(model, Y, P, quad=DEFAULT_QUAD):
    """Largest relative gap ``|<Y> - Y| / (1 + |Y|)`` over the rows of ``P``."""
    P = as_rows(P, model.dim)
    y = Y.batch(P)
    avg = average_field(model, Y, quad).batch(P)
    return float(np.max(np.linalg.norm(avg - y, axis=1) / (1.0 + np.linalg.norm(y, axis=1))))


def reduce_field(model, Y, quad=DEFAULT_QUAD, sample_points=None, tol=1e-6, seed=0):
    """Push an S1-invariant field down to the orbit space.

    Invariance is checked on ``sample_points`` (16 random points by default)
    before building the reduced field; a failed check raises
    :class:`NotInvariant`.
    """
    if sample_points is None:
        sample_points = model.random_points(np.random.default_rng(seed), 16)
    defect = invariance_defect(model, Y, sample_points, quad)
    if defect > tol:
        raise NotInvariant(f"field {Y.name} is not S1-invariant (defect {defect:.3g} > {tol:g})")

    def fn(Z):
        S = model.section(Z)
        return model.d_project(S, Y.batch(S))

    return ReducedField(model, fn, name=f"{Y.name}_O")


def reduce_function(model, f):
    """An invariant function as a function of orbit coordinates."""
    return lambda Z: f.batch(model.section(np.asarray(Z, dtype=np.float64)))
