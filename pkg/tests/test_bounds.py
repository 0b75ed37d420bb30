import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from peravg.averaging import homological_Z
from peravg.bounds import (AffineFamily, DomainSampler, GronwallParams, compute_constants,
                           constant_c, eps_grid, gronwall_bound, sample_sup,
                           surface_length_bound, surface_sweep)
from peravg.errors import DomainError
from peravg.fields import ScalarField, VectorField, constant_field
from peravg.geometry import HopfBundle, TrivialBundle

from conftest import omega_hopf, omega_trivial, x1_hopf, x1_trivial

pos = st.floats(1e-3, 5.0)
nonneg = st.floats(0.0, 5.0)


# -- Gronwall ------------------------------------------------------------------

def test_gronwall_examples():
    assert math.isclose(gronwall_bound(GronwallParams(2.0, 0.0, 3.0), 1.5), 3 * math.exp(3.0))
    assert math.isclose(gronwall_bound(GronwallParams(1.0, 1.0, 0.0), 1.0), math.e - 1)
    assert gronwall_bound(GronwallParams(1.0, 1.0, 0.7, t0=2.0), 2.0) == 0.7


def test_gronwall_domain_errors():
    with pytest.raises(DomainError):
        GronwallParams(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        GronwallParams(1.0, -1.0, 1.0)
    with pytest.raises(DomainError):
        gronwall_bound(GronwallParams(1.0), -0.1)
    with pytest.raises(DomainError):
        surface_length_bound(0.0, 1.0, 1.0, 1.0)


@given(d1=pos, d2=nonneg, d3=nonneg, t=st.floats(0, 3), dt=st.floats(1e-3, 1))
def test_gronwall_monotone(d1, d2, d3, t, dt):
    b = gronwall_bound(GronwallParams(d1, d2, d3), t)
    assert gronwall_bound(GronwallParams(d1, d2, d3), t + dt) >= b
    assert gronwall_bound(GronwallParams(d1, d2 + dt, d3), t) >= b
    assert gronwall_bound(GronwallParams(d1, d2, d3 + dt), t) >= b
    # closed form, wherever it is not dominated by cancellation
    closed = (d2 / d1 + d3) * math.exp(d1 * t) - d2 / d1
    assert math.isclose(b, closed, rel_tol=1e-9, abs_tol=1e-9 * (1 + d2 / d1))


def test_gronwall_continuous_as_delta2_vanishes():
    p = [gronwall_bound(GronwallParams(1.0, d2, 2.0), 1.0) for d2 in (1e-6, 1e-9, 0.0)]
    assert abs(p[0] - p[2]) < 1e-5 and abs(p[1] - p[2]) < 1e-8


def test_gronwall_small_delta1_is_stable():
    # d1 -> 0 leaves d3 + d2 t; the naive closed form loses every digit here
    assert math.isclose(gronwall_bound(GronwallParams(1e-14, 2.0, 1.0), 3.0), 7.0, rel_tol=1e-12)


def test_surface_length_bound_examples():
    assert surface_length_bound(1.3, 2.0, 0.4, 0.0) == 0.4
    assert math.isclose(surface_length_bound(0.5, 0.0, 2.0, 3.0), 2 * math.exp(1.5))


# -- sampling ------------------------------------------------------------------

def test_sample_sup_examples():
    T1 = TrivialBundle(1)
    sampler = DomainSampler(T1, [[-1, 1]])
    assert sample_sup(sampler, ScalarField(T1, lambda P: np.full(len(P), 3.0))).value == 3.0
    Z = VectorField(T1, lambda P: np.stack([0 * P[:, 0], -np.cos(P[:, 0])], axis=1))
    res = sample_sup(sampler, lambda P: T1.norm(P, Z.batch(P)))
    assert abs(res.value - 1.0) <= 1e-12
    assert res.n_samples == len(sampler) and res.resolution == 3


def test_sample_sup_unbatched():
    T1 = TrivialBundle(1)
    sampler = DomainSampler(T1, [[0, 2]], resolution=2, n_sobol=0)
    res = sample_sup(sampler, lambda p: p[1] ** 2, batched=False)
    assert res.value == 4.0 and res.argmax[1] == 2.0


@pytest.mark.parametrize("model,box", [(TrivialBundle(2), [[-1, 1], [0, 2]]),
                                       (HopfBundle(), None), (HopfBundle(), [[-0.2, 0.3]])],
                         ids=["trivial", "hopf", "hopf-band"])
def test_refinement_is_monotone(model, box, rng):
    sampler = DomainSampler(model, box, resolution=2, fiber_nodes=4, n_sobol=8)
    finer = sampler.refine()
    for _ in range(10):
        A = rng.normal(size=(model.dim,))
        f = lambda P, A=A: np.sin(P @ A) + np.cos(2 * P @ A)  # noqa: E731
        assert sample_sup(finer, f).value >= sample_sup(sampler, f).value


def test_sampler_is_saturated_and_in_domain():
    H = HopfBundle()
    sampler = DomainSampler(H, [[-0.2, 0.3]], resolution=2, fiber_nodes=4, n_sobol=8)
    P = sampler.points()
    assert np.allclose(np.linalg.norm(P, axis=1), 1.0)
    u3 = H.project(P)[:, 2]
    assert np.all((u3 >= -0.2 - 1e-12) & (u3 <= 0.3 + 1e-12))
    # every grid orbit point appears at all fiber angles
    n_orbit = (2 ** 2 + 1) * 2 ** 2
    Z = H.project(P[: 4 * n_orbit]).reshape(4, n_orbit, 3)
    assert np.allclose(Z, Z[0], atol=1e-12)
    with pytest.raises(ValueError):
        DomainSampler(TrivialBundle(1)).points()


def test_sampler_is_deterministic():
    a = DomainSampler(TrivialBundle(1), [[0, 1]], seed=4).points()
    b = DomainSampler(TrivialBundle(1), [[0, 1]], seed=4).points()
    assert np.array_equal(a, b)


# -- constants -------------------------------------------------------------------

def small_sampler(model, box=None):
    return DomainSampler(model, box, resolution=2, fiber_nodes=4, n_sobol=4)


def test_constants_vanish_without_perturbation():
    T1 = TrivialBundle(1, omega_trivial)
    X0 = T1.x0()
    X1 = constant_field(T1, [0.0, 0.0])
    Z = homological_Z(T1, X0, X1)
    K = compute_constants(T1, X0, X1, Z, small_sampler(T1, [[0, 1]]), 0.1, 1.0, n_eps=2)
    assert K.kappa0 == 0 and K.kappa2 <= 1e-9 and K.c <= 1e-9


@pytest.fixture(scope="module")
def trivial_constants():
    T1 = TrivialBundle(1, omega_trivial)
    X0, X1 = T1.x0(), x1_trivial(T1)
    Z = homological_Z(T1, X0, X1)
    sampler = small_sampler(T1, [[0, 1]])
    return T1, X0, X1, Z, sampler, compute_constants(T1, X0, X1, Z, sampler, 0.1, 1.0, n_eps=3)


def test_constants_are_consistent(trivial_constants):
    *_, K = trivial_constants
    assert K.kappa0 > 0 and K.kappa1 > 0 and K.kappa2 > 0
    assert K.c >= K.kappa0
    assert math.isclose(K.c, constant_c(K.kappa0, K.kappa1, K.kappa2, 1.0))
    assert math.isclose(K.c, K.kappa0 + (K.kappa2 / K.kappa1 + K.kappa0) * math.exp(K.kappa1)
                        - K.kappa2 / K.kappa1)
    assert set(K.argmax) == {"kappa0", "kappa1", "kappa2"}
    assert K.bound(0.01) == K.c * 0.01


def test_constants_grow_under_refinement(trivial_constants):
    T1, X0, X1, Z, sampler, K = trivial_constants
    K2 = compute_constants(T1, X0, X1, Z, sampler.refine(), 0.1, 1.0, n_eps=3)
    assert K2.kappa0 >= K.kappa0 and K2.kappa1 >= K.kappa1 and K2.kappa2 >= K.kappa2


def test_eps_grid():
    assert np.allclose(eps_grid(0.1, 3), [0.1, 0.05, 0.025])


# -- surfaces ------------------------------------------------------------------

def test_constant_family_from_a_point_has_no_length():
    T1 = TrivialBundle(1)
    fam = AffineFamily(T1.x0(), T1.x0())
    res = surface_sweep(T1, fam, lambda s: np.array([0.3, 0.2]), 2.0, n_t=10)
    assert np.max(np.abs(res.lengths)) <= 1e-8
    assert res.passed


def test_linear_family_hand_oracle():
    # X_s = (1 + s) d/dx from beta(s) = (0, s): gamma = (0, s + (1 + s) t), so
    # L(t) = 1 + t and the bound with C1 = 0, C2 = 1 is attained exactly
    T1 = TrivialBundle(1)
    F0 = constant_field(T1, [0.0, 1.0])
    F1 = constant_field(T1, [0.0, 2.0])
    res = surface_sweep(T1, AffineFamily(F0, F1), lambda s: np.array([0.0, s]), 3.0, n_t=12)
    assert np.allclose(res.lengths, 1 + res.ts, atol=1e-8)
    assert res.C1 <= 1e-8 and abs(res.C2 - 1.0) <= 1e-12
    assert res.passed and res.verdict == "PASS"


def test_generic_family_matches_affine_evaluation():
    T1 = TrivialBundle(1, omega_trivial)
    X0, X1 = T1.x0(), x1_trivial(T1)
    F1 = X0 + 0.3 * X1
    beta = lambda s: np.array([0.0, 0.5 + 0.2 * s])  # noqa: E731
    a = surface_sweep(T1, AffineFamily(X0, F1), beta, 2.0, n_t=8)
    b = surface_sweep(T1, lambda s: X0 + (0.3 * s) * X1, beta, 2.0, n_t=8)
    assert np.allclose(a.lengths, b.lengths, rtol=1e-6)
    assert math.isclose(a.C1, b.C1, rel_tol=1e-5) and math.isclose(a.C2, b.C2, rel_tol=1e-5)
    assert a.passed and b.passed


def test_hopf_family_bound_holds():
    H = HopfBundle(omega_hopf)
    X0 = H.x0()
    X1 = VectorField(H, lambda P: H.tangent_project(P, x1_hopf(H).batch(P)))
    p0 = H.normalize(np.array([0.8, 0.0, 0.6, 0.0]))
    beta = lambda s: H.normalize(p0 + 0.1 * s * np.array([0, 1.0, 0, 0]))  # noqa: E731
    res = surface_sweep(H, AffineFamily(X0, X0 + 0.5 * X1), beta, 3.0, n_t=12)
    assert res.passed, res.violations
    assert np.all(res.lengths > 0)


def test_violation_is_reported():
    T1 = TrivialBundle(1)
    F0 = constant_field(T1, [0.0, 1.0])
    F1 = constant_field(T1, [0.0, 2.0])
    res = surface_sweep(T1, AffineFamily(F0, F1), lambda s: np.array([0.0, s]), 3.0, n_t=6,
                        C1=1e-3, C2=0.5)
    assert not res.passed and res.verdict == "FAIL"
    assert res.violations and res.violations[0] > 0
