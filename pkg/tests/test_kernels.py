import math

import numpy as np
import pytest

from peravg import kernels
from peravg.errors import BlowUp, StepUnderflow

BACKENDS = kernels.backends()


@pytest.fixture(params=sorted(BACKENDS))
def impl(request):
    return BACKENDS[request.param]


def oscillator(t, y):
    return np.array([y[1], -y[0]])


def test_compiled_backend_is_built():
    # the extension is optional, but the development install must have it
    assert "compiled" in BACKENDS
    assert kernels.BACKEND in BACKENDS


def test_dopri5_oscillator_accuracy(impl):
    ts, ys, fs, nfev = impl.dopri5(oscillator, 0.0, 10.0, np.array([1.0, 0.0]), 1e-10, 1e-10)
    assert ts[0] == 0.0 and ts[-1] == 10.0
    assert np.allclose(ys[-1], [math.cos(10), -math.sin(10)], atol=1e-8)
    assert nfev > 0
    assert np.all(np.diff(ts) > 0)


def test_dopri5_backwards(impl):
    ts, ys, _, _ = impl.dopri5(oscillator, 0.0, -3.0, np.array([1.0, 0.0]), 1e-10, 1e-10)
    assert np.all(np.diff(ts) < 0)
    assert np.allclose(ys[-1], [math.cos(3), math.sin(3)], atol=1e-8)


def test_dopri5_zero_span(impl):
    ts, ys, _, _ = impl.dopri5(oscillator, 1.0, 1.0, np.array([1.0, 2.0]), 1e-10, 1e-10)
    assert np.allclose(ys[-1], [1.0, 2.0])


def test_dopri5_max_step(impl):
    ts, _, _, _ = impl.dopri5(oscillator, 0.0, 1.0, np.array([1.0, 0.0]), 1e-6, 1e-6,
                              max_step=0.01)
    assert np.max(np.diff(ts)) <= 0.01 + 1e-15
    assert len(ts) >= 101


def test_hermite_dense_output(impl):
    ts, ys, fs, _ = impl.dopri5(oscillator, 0.0, 6.0, np.array([1.0, 0.0]), 1e-11, 1e-11)
    tq = np.linspace(0, 6, 997)
    Y = impl.hermite(ts, ys, fs, tq)
    assert np.max(np.abs(Y[:, 0] - np.cos(tq))) < 1e-7


def test_hermite_reproduces_knots(impl):
    ts = np.array([0.0, 0.5, 1.5])
    ys = np.array([[0.0], [1.0], [-1.0]])
    fs = np.array([[1.0], [0.0], [2.0]])
    assert np.allclose(impl.hermite(ts, ys, fs, ts), ys)


def test_hermite_decreasing_times(impl):
    ts, ys, fs, _ = impl.dopri5(oscillator, 0.0, -2.0, np.array([1.0, 0.0]), 1e-11, 1e-11)
    Y = impl.hermite(ts, ys, fs, np.array([-1.0]))
    assert np.allclose(Y[0], [math.cos(1), math.sin(1)], atol=1e-7)


def test_fixed_rk5_order(impl):
    errs = []
    for n in (20, 40, 80):
        y, d = impl.fixed_rk5(oscillator, 0.0, 2.0, np.array([1.0, 0.0]), n)
        errs.append(abs(y[0] - math.cos(2)))
        assert np.allclose(d, y - np.array([1.0, 0.0]), atol=1e-15)
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 4.5)


def test_renormalization_keeps_sphere(impl):
    def rot(t, y):  # rotation of R^4 tangent to S^3
        return np.array([-y[1], y[0], -y[3], y[2]])

    y0 = np.array([0.6, 0.0, 0.8, 0.0])
    ts, ys, _, _ = impl.dopri5(rot, 0.0, 50.0, y0, 1e-6, 1e-6, renorm_block=4, renorm_radius=1.0)
    assert np.allclose(np.linalg.norm(ys, axis=1), 1.0, atol=1e-14)


def test_blowup_detected(impl):
    with pytest.raises(BlowUp) as info:
        impl.dopri5(lambda t, y: y * y, 0.0, 2.0, np.array([1.0]), 1e-8, 1e-8, max_norm=1e6)
    assert info.value.t < 1.0


def test_step_underflow(impl):
    # the field is undefined past t = 0.5, so every step there is rejected
    def rhs(t, y):
        return np.array([np.nan if t > 0.5 else 1.0])

    with pytest.raises(StepUnderflow):
        impl.dopri5(rhs, 0.0, 1.0, np.array([0.0]), 1e-8, 1e-8)


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("only one backend available")
    out = [b.dopri5(oscillator, 0.0, 7.0, np.array([0.3, 1.0]), 1e-9, 1e-9)
           for b in BACKENDS.values()]
    (t1, y1, _, n1), (t2, y2, _, n2) = out
    # same algorithm, different summation order: the step sequences agree to
    # rounding in the error estimate, so compare at the tolerance, not bitwise
    assert len(t1) == len(t2) and n1 == n2
    assert np.allclose(t1, t2, rtol=0, atol=1e-6)
    assert np.allclose(y1[-1], y2[-1], rtol=0, atol=1e-8)
