import numpy as np
import pytest

from peravg.averaging import average_field, homological_Z
from peravg.fields import VectorField, constant_field
from peravg.geometry import HopfBundle, TrivialBundle, make_point
from peravg.normalform import (DEFAULT_EPS, NearIdentityMap, first_order_defect, loglog_slope,
                               near_identity_apply, normal_form, pullback_perturbed,
                               remainder_rows, z_displacement)

from conftest import omega_hopf, omega_trivial, x1_hopf, x1_trivial


@pytest.fixture(params=["trivial", "hopf"])
def system(request):
    if request.param == "trivial":
        m = TrivialBundle(1, omega_trivial)
        X1 = x1_trivial(m)
    else:
        m = HopfBundle(omega_hopf)
        X1 = x1_hopf(m)
    X0 = m.x0()
    return m, X0, X1, homological_Z(m, X0, X1)


def points(model, n, seed=0):
    box = [[-1.0, 1.0]] * getattr(model, "k", 0)
    return model.random_points(np.random.default_rng(seed), n, box or None)


def test_zero_epsilon_is_identity(system):
    model, X0, X1, Z = system
    P = points(model, 10)
    assert np.array_equal(NearIdentityMap(Z, 0.0).forward_rows(P), model.normalize(P))
    p = make_point(model, P[0])
    assert near_identity_apply(NearIdentityMap(Z, 0.0), p) == p
    assert np.allclose(pullback_perturbed(model, X0, X1, Z, 0.0).batch(P), X0.batch(P),
                       atol=1e-9)


def test_round_trip(system):
    model, _, _, Z = system
    nim = NearIdentityMap(Z, 0.1)
    P = points(model, 100, seed=1)
    back = nim.inverse_rows(nim.forward_rows(P))
    assert np.max(np.abs(back - model.normalize(P))) <= 1e-8


def test_point_api_round_trip(system):
    model, _, _, Z = system
    nim = NearIdentityMap(Z, 0.05)
    p = make_point(model, points(model, 1)[0])
    q = near_identity_apply(nim, near_identity_apply(nim, p, "forward"), "inverse")
    assert model.distance(np.asarray(p.coords), np.asarray(q.coords)) <= 1e-8
    with pytest.raises(ValueError):
        near_identity_apply(nim, p, "sideways")


def test_displacement_within_kappa0(system):
    model, _, _, Z = system
    P = points(model, 200, seed=2)
    kappa0 = float(np.max(model.norm(P, Z.batch(P))))
    # the sup over a neighbourhood: sample the Z-norm on the displaced points too
    for eps in (0.1, 0.02):
        Q = NearIdentityMap(Z, eps).forward_rows(P)
        k = max(kappa0, float(np.max(model.norm(Q, Z.batch(Q)))))
        assert np.all(model.distance(model.normalize(P), Q) <= k * eps * (1 + 1e-9))


def test_displacement_matches_adaptive_flow():
    T1 = TrivialBundle(1)
    Z = VectorField(T1, lambda P: np.stack([np.ones(len(P)), -P[:, 1]], axis=1))
    d = z_displacement(Z, np.array([[0.0, 2.0]]), 0.3)
    assert np.allclose(d, [[0.3, 2.0 * (np.exp(-0.3) - 1)]], atol=1e-12)


def test_defect_is_second_order(system):
    model, X0, X1, _ = system
    res = normal_form(model, X0, X1, points(model, 8))
    assert 1.8 <= res.order2_slope <= 2.2
    assert len(res.defects) == len(DEFAULT_EPS)


def test_invariant_perturbation_is_already_normal():
    model = TrivialBundle(1, omega_trivial)
    X1 = VectorField(model, lambda P: np.stack([P[:, 1] ** 2, np.sin(P[:, 1]) + 0.5], axis=1))
    res = normal_form(model, model.x0(), X1, points(model, 8))
    P = points(model, 8)
    # S kills every invariant term, X1(omega) included, so Z vanishes and the
    # pullback is X0 + eps X1 exactly: the defect is rounding noise, which
    # is stronger than (and makes meaningless) a fitted slope of 2
    assert np.max(np.abs(res.generator.batch(P))) <= 1e-10
    assert np.max(res.defects) <= 1e-12


def test_zero_perturbation_has_no_remainder():
    model = HopfBundle(omega_hopf)
    X0 = model.x0()
    X1 = constant_field(model, [0.0, 0.0, 0.0, 0.0])
    Z = homological_Z(model, X0, X1)
    P = points(model, 5)
    for eps in (0.1, 0.01):
        R = remainder_rows(model, X0, X1, Z, eps, P)
        assert np.max(np.abs(R)) <= 1e-6 / eps ** 2 * 1e-10 + 1e-12


def test_remainder_is_bounded():
    model = TrivialBundle(1, omega_trivial)
    X0, X1 = model.x0(), x1_trivial(model)
    Z = homological_Z(model, X0, X1)
    P = points(model, 5)
    norms = [np.max(model.norm(P, remainder_rows(model, X0, X1, Z, e, P)))
             for e in (2.0 ** -j for j in range(3, 8))]
    assert max(norms) / min(norms) < 1.5


def test_remainder_reassembles_pullback(system):
    model, X0, X1, Z = system
    P = points(model, 5)
    eps = 0.05
    avg = average_field(model, X1)
    R = remainder_rows(model, X0, X1, Z, eps, P, avg=avg)
    pb = pullback_perturbed(model, X0, X1, Z, eps).batch(P)
    assert np.allclose(X0.batch(P) + eps * avg.batch(P) + eps ** 2 * R, pb, atol=1e-12)


def test_small_epsilon_warns():
    model = TrivialBundle(1)
    X1 = x1_trivial(model)
    Z = homological_Z(model, model.x0(), X1)
    with pytest.warns(RuntimeWarning):
        remainder_rows(model, model.x0(), X1, Z, 1e-5, points(model, 1))
    with pytest.raises(ValueError):
        remainder_rows(model, model.x0(), X1, Z, 0.0, points(model, 1))


def test_averaged_field_is_invariant(system):
    model, X0, X1, _ = system
    res = normal_form(model, X0, X1, points(model, 4), epsilons=(0.1, 0.05))
    P = points(model, 10, seed=5)
    again = average_field(model, res.averaged).batch(P)
    assert np.allclose(again, res.averaged.batch(P), atol=1e-10)
    r = res.remainder_at(0.05, P[0])
    assert len(r.components) == model.dim


def test_first_order_defect_shrinks(system):
    model, X0, X1, Z = system
    P = points(model, 4)
    big = np.max(np.abs(first_order_defect(model, X0, X1, Z, 0.1, P)))
    small = np.max(np.abs(first_order_defect(model, X0, X1, Z, 0.025, P)))
    assert small < big / 10


def test_loglog_slope():
    xs = np.array([1.0, 0.5, 0.25])
    assert np.isclose(loglog_slope(xs, 3 * xs ** 2), 2.0)
    assert np.isnan(loglog_slope(xs, np.array([1.0, 0.0, 1.0])))
