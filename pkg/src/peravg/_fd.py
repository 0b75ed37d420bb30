"""Finite-difference stencils shared by the operators."""
import numpy as np

# 4th-order central first derivative: offsets and weights (divide by h)
_C4_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_C4_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0

OPERATOR_STEP = 1e-3


def directional(batch_fn, P, U, h):
    """4th-order central derivative of ``batch_fn`` at rows ``P`` along ``U``.

    ``h`` is an array of per-row step lengths (broadcast against rows). ``U`` is
    used as given (not normalized); the result is ``D f(P)[U]``.
    """
    P = np.asarray(P, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    n, dim = P.shape
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), (n,))
    unorm = np.sqrt(np.einsum("ij,ij->i", U, U))
    safe = np.where(unorm > 0, unorm, 1.0)
    step = (h / safe)[:, None]
    pts = P[None, :, :] + _C4_OFFSETS[:, None, None] * step[None] * U[None]
    vals = np.asarray(batch_fn(pts.reshape(-1, dim)))
    vals = vals.reshape((4, n) + vals.shape[1:])
    deriv = np.tensordot(_C4_WEIGHTS, vals, axes=(0, 0))
    scale = (1.0 / step[:, 0]).reshape((n,) + (1,) * (deriv.ndim - 1))
    deriv = deriv * scale
    zero = (unorm == 0).reshape((n,) + (1,) * (deriv.ndim - 1))
    return np.where(zero, 0.0, deriv)


def central2(batch_fn, P, U, h):
    """2nd-order central derivative along ``U`` with per-row step ``h``."""
    P = np.asarray(P, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    n, dim = P.shape
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), (n,))
    unorm = np.sqrt(np.einsum("ij,ij->i", U, U))
    safe = np.where(unorm > 0, unorm, 1.0)
    step = (h / safe)[:, None]
    pts = np.concatenate([P + step * U, P - step * U])
    vals = np.asarray(batch_fn(pts))
    vals = vals.reshape((2, n) + vals.shape[1:])
    scale = (1.0 / (2 * step[:, 0])).reshape((n,) + (1,) * (vals.ndim - 2))
    deriv = (vals[0] - vals[1]) * scale
    zero = (unorm == 0).reshape((n,) + (1,) * (deriv.ndim - 1))
    return np.where(zero, 0.0, deriv)
