import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peravg.averaging import (DEFAULT_QUAD, QuadratureRule, average_field, average_function,
                              homological_Z, integrating_op, invariance_defect, lie_bracket,
                              lie_derivative, reduce_field, reduce_function)
from peravg.errors import NotInvariant
from peravg.fields import ScalarField, VectorField, constant_field
from peravg.geometry import HopfBundle, TrivialBundle

from conftest import omega_hopf, omega_trivial, x1_hopf, x1_trivial

UNIT = TrivialBundle(1)  # omega = 1


def vf(model, *comps):
    return VectorField(model, lambda P: np.stack([c(P) for c in comps], axis=1))


def zero(P):
    return np.zeros(len(P))


def pts(model, rng, n=20):
    box = [[-1.5, 1.5]] * getattr(model, "k", 0)
    return model.random_points(rng, n, box or None)


# -- quadrature --------------------------------------------------------------

def test_quadrature_rule():
    q = QuadratureRule(16)
    assert np.isclose(q.mean_weights.sum(), 1.0)
    assert abs(q.s_weights.sum()) <= 1e-14 and abs(q.s2_weights.sum()) <= 1e-14
    with pytest.raises(ValueError):
        QuadratureRule(4)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_s_weights_invert_derivative(k):
    # S(sin k t) = -cos(k t)/k and S^2(cos k t) = -cos(k t)/k^2 at phi = 0
    q = QuadratureRule(32)
    assert np.isclose(q.s_weights @ np.sin(k * q.nodes), -1.0 / k, atol=1e-13)
    assert np.isclose(q.s2_weights @ np.cos(k * q.nodes), -1.0 / k ** 2, atol=1e-13)


def test_s_weights_match_sawtooth_kernel():
    # the S kernel is (t - pi) / (2 pi) up to its mean; check against a
    # fine trapezoid rule applied to a band-limited integrand
    q = QuadratureRule(64)
    f = lambda t: np.sin(t) + 0.3 * np.cos(3 * t) + 0.1 * np.sin(7 * t)  # noqa: E731
    t = np.linspace(0, 2 * math.pi, 200001)
    ref = np.trapezoid(f(t) * (t - math.pi), t) / (2 * math.pi)
    assert abs(q.s_weights @ f(q.nodes) - ref) <= 1e-8


# -- averaging operator ------------------------------------------------------

def test_average_field_examples(rng):
    P = pts(UNIT, rng)
    R = vf(UNIT, zero, lambda P: np.sin(P[:, 0]))
    assert np.max(np.abs(average_field(UNIT, R).batch(P))) <= 1e-12
    R = vf(UNIT, zero, lambda P: P[:, 1] + np.cos(P[:, 0]))
    assert np.allclose(average_field(UNIT, R).batch(P)[:, 1], P[:, 1], atol=1e-10)


@pytest.mark.parametrize("model", [TrivialBundle(1, omega_trivial), HopfBundle(omega_hopf)],
                         ids=["trivial", "hopf"])
def test_invariant_field_is_its_own_average(model, rng):
    P = pts(model, rng)
    for R in (model.x0(), model.generator_field()):
        assert np.allclose(average_field(model, R).batch(P), R.batch(P), atol=1e-12)
    # and a non-invariant field is not
    X1 = x1_trivial(model) if isinstance(model, TrivialBundle) else x1_hopf(model)
    assert invariance_defect(model, X1, P) > 1e-2


def test_average_function_examples(rng):
    P = pts(UNIT, rng)
    f = ScalarField(UNIT, lambda P: np.cos(P[:, 0]))
    assert np.max(np.abs(average_function(UNIT, f).batch(P))) <= 1e-12
    g = ScalarField(UNIT, lambda P: np.sin(P[:, 0]) + P[:, 1])  # g(phi, I)
    assert np.allclose(average_function(UNIT, g).batch(P), P[:, 1], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(-10, 10))
def test_average_is_shift_invariant(theta):
    H = HopfBundle()
    f = ScalarField(H, lambda P: np.exp(P[:, 0]) * P[:, 2] + P[:, 1] ** 3)
    P = H.random_points(np.random.default_rng(3), 10)
    a = average_function(H, f).batch(P)
    b = average_function(H, f).batch(H.act(P, theta))
    assert np.allclose(a, b, atol=1e-10)


# -- integrating operator ----------------------------------------------------

def test_integrating_op_examples(rng):
    P = pts(UNIT, rng)
    c = ScalarField(UNIT, lambda P: np.full(len(P), 3.0))
    assert np.max(np.abs(integrating_op(UNIT, c).batch(P))) <= 1e-12
    s = ScalarField(UNIT, lambda P: np.sin(P[:, 0]))
    assert np.allclose(integrating_op(UNIT, s).batch(P), -np.cos(P[:, 0]), atol=1e-8)
    R = vf(UNIT, zero, lambda P: np.sin(P[:, 0]))
    assert np.allclose(integrating_op(UNIT, R).batch(P)[:, 1], -np.cos(P[:, 0]), atol=1e-8)


def test_s_squared_is_s_composed(rng):
    H = HopfBundle(omega_hopf)
    R = x1_hopf(H)
    P = pts(H, rng, 10)
    nested = integrating_op(H, integrating_op(H, R)).batch(P)
    assert np.allclose(integrating_op(H, R, power=2).batch(P), nested, atol=1e-10)
    with pytest.raises(ValueError):
        integrating_op(H, R, power=3)


@pytest.mark.parametrize("model", [TrivialBundle(1, omega_trivial), HopfBundle(omega_hopf)],
                         ids=["trivial", "hopf"])
def test_s_kills_averages(model, rng):
    R = x1_trivial(model) if isinstance(model, TrivialBundle) else x1_hopf(model)
    P = pts(model, rng)
    avg, S = average_field(model, R), integrating_op(model, R)
    assert np.max(np.abs(integrating_op(model, avg).batch(P))) <= 1e-8
    assert np.max(np.abs(average_field(model, S).batch(P))) <= 1e-8


# -- the properties of the operators ----------------------------------------

@pytest.fixture(params=["trivial", "hopf"])
def system(request):
    if request.param == "trivial":
        m = TrivialBundle(1, omega_trivial)
        return m, x1_trivial(m)
    m = HopfBundle(omega_hopf)
    return m, x1_hopf(m)


def test_average_is_constant_along_orbits(system, rng):
    model, R = system
    U = model.generator_field()
    avg = average_field(model, R)
    P = pts(model, rng)
    assert np.max(np.abs(lie_bracket(model, U, avg).batch(P))) <= 1e-6


def test_average_commutes_with_generator_derivative(system, rng):
    model, R = system
    U = model.generator_field()
    P = pts(model, rng, 10)
    lhs = average_field(model, lie_bracket(model, U, R)).batch(P)
    rhs = lie_bracket(model, U, average_field(model, R)).batch(P)
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


def test_invariant_factors_pass_through(system, rng):
    model, R = system
    g = model.omega  # invariant by construction
    gR = VectorField(model, lambda P: g.batch(P)[:, None] * R.batch(P))
    P = pts(model, rng)
    w = g.batch(P)[:, None]
    assert np.allclose(average_field(model, gR).batch(P), w * average_field(model, R).batch(P),
                       atol=1e-8)
    assert np.allclose(integrating_op(model, gR).batch(P),
                       w * integrating_op(model, R).batch(P), atol=1e-8)


def test_generator_derivative_inverts_s(system, rng):
    # L_U S(R) = R - <R>
    model, R = system
    U = model.generator_field()
    P = pts(model, rng)
    lhs = lie_bracket(model, U, integrating_op(model, R)).batch(P)
    rhs = model.tangent_project(P, R.batch(P) - average_field(model, R).batch(P))
    assert np.max(np.abs(model.tangent_project(P, lhs) - rhs)) <= 1e-6


def test_quadrature_refinement(system, rng):
    model, R = system
    P = pts(model, rng)
    a = average_field(model, R, QuadratureRule(64)).batch(P)
    b = average_field(model, R, QuadratureRule(128)).batch(P)
    assert np.max(np.abs(a - b)) <= 1e-10


# -- homological equation ----------------------------------------------------

def test_homological_constant_frequency(rng):
    R = vf(UNIT, zero, lambda P: np.sin(P[:, 0]))
    Z = homological_Z(UNIT, UNIT.x0(), R)
    P = pts(UNIT, rng)
    assert np.allclose(Z.batch(P), np.stack([0 * P[:, 0], -np.cos(P[:, 0])], axis=1), atol=1e-8)


def homological_residual(model, X0, X1, P):
    Z = homological_Z(model, X0, X1)
    lhs = lie_bracket(model, X0, Z).batch(P)
    rhs = X1.batch(P) - average_field(model, X1).batch(P)
    return np.max(np.abs(model.tangent_project(P, lhs - rhs)))


def test_homological_residual(system, rng):
    model, X1 = system
    P = pts(model, rng, 50)
    assert homological_residual(model, model.x0(), X1, P) <= 1e-6


def test_homological_residual_for_invariant_input(rng):
    model = TrivialBundle(1, omega_trivial)
    X1 = vf(model, lambda P: P[:, 1] ** 2, lambda P: np.sin(P[:, 1]))
    P = pts(model, rng, 50)
    assert np.max(np.abs(integrating_op(model, X1).batch(P))) <= 1e-10
    assert homological_residual(model, model.x0(), X1, P) <= 1e-6


def test_lie_derivative_oracle(rng):
    model = TrivialBundle(1, omega_trivial)
    X = vf(model, lambda P: np.ones(len(P)), lambda P: P[:, 0])
    f = ScalarField(model, lambda P: np.sin(P[:, 0]) * P[:, 1] ** 2)
    P = pts(model, rng)
    expect = np.cos(P[:, 0]) * P[:, 1] ** 2 + P[:, 0] * 2 * np.sin(P[:, 0]) * P[:, 1]
    assert np.allclose(lie_derivative(model, X, f).batch(P), expect, atol=1e-9)


# -- reduction ---------------------------------------------------------------

def test_reduce_generator_is_zero(rng):
    H = HopfBundle(omega_hopf)
    YO = reduce_field(H, H.generator_field())
    Z = H.project(pts(H, rng))
    assert np.max(np.abs(YO.batch(Z))) <= 1e-12


def test_reduce_trivial_keeps_base_part(rng):
    T2 = TrivialBundle(2)
    Y = vf(T2, lambda P: P[:, 1] ** 2, lambda P: np.cos(P[:, 2]), lambda P: P[:, 1])
    YO = reduce_field(T2, Y)
    Z = rng.normal(size=(10, 2))
    assert np.allclose(YO.batch(Z), np.stack([np.cos(Z[:, 1]), Z[:, 0]], axis=1))


def test_reduced_hopf_vectors_are_tangent_and_fiber_independent(rng):
    H = HopfBundle(omega_hopf)
    avg = average_field(H, x1_hopf(H))
    YO = reduce_field(H, avg)
    P = pts(H, rng)
    Z = H.project(P)
    W = YO.batch(Z)
    assert np.max(np.abs(np.sum(W * Z, axis=1))) <= 1e-9
    for theta in rng.uniform(0, 2 * math.pi, 5):
        Q = H.act(P, theta)
        assert np.allclose(H.d_project(Q, avg.batch(Q)), W, atol=1e-7)


def test_reduce_rejects_non_invariant_field():
    H = HopfBundle(omega_hopf)
    with pytest.raises(NotInvariant):
        reduce_field(H, x1_hopf(H))


def test_reduce_function(rng):
    H = HopfBundle()
    f = ScalarField(H, lambda P: P[:, 0] ** 2 + P[:, 1] ** 2)  # invariant: |z1|^2
    Z = H.project(pts(H, rng))
    assert np.allclose(reduce_function(H, f)(Z), 0.5 + Z[:, 2], atol=1e-12)


def test_default_quadrature_is_shared():
    assert DEFAULT_QUAD.n_nodes == 64
    assert constant_field(UNIT, [1.0, 0.0]).batch(np.zeros((1, 2))).shape == (1, 2)
