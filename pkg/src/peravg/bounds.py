"""Gronwall estimates and the explicit constants of the averaging estimate.

Suprema over domains are taken on deterministic samples (:class:`DomainSampler`):
a nested tensor grid on the orbit space, a set of fiber angles, and a
fixed-seed scrambled Sobol top-up. Refining a sampler only adds points, so
every sampled supremum is nondecreasing under refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
import numpy as np
from scipy.stats import qmc

from . import kernels
from .averaging import DEFAULT_QUAD, average_field
from .errors import DomainError
from .fields import ScalarField, VectorField
from .geometry import HopfBundle, nabla_matrix, nabla_norms, split_array
from .normalform import pullback_perturbed, z_displacement

TWO_PI = 2.0 * math.pi


def _phi1(x):
    """``expm1(x) / x`` with the removable singularity at 0 filled in."""
    x = float(x)
    return 1.0 if abs(x) < 1e-300 else math.expm1(x) / x


# -- Gronwall ------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallParams:
    delta1: float
    delta2: float = 0.0
    delta3: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        if not self.delta1 > 0:
            raise DomainError(f"delta1 must be positive, got {self.delta1}")
        if self.delta2 < 0 or self.delta3 < 0:
            raise DomainError("delta2 and delta3 must be nonnegative")


def gronwall_bound(params, t):
    """``(d2/d1 + d3) e^{d1 (t - t0)} - d2/d1`` for ``t >= t0``.

    Evaluated as ``d3 e^{d1 s} + d2 s (e^{d1 s} - 1)/(d1 s)`` with
    ``s = t - t0``, which is stable when ``d1 s`` is small.
    """
    s = float(t) - params.t0
    if s < 0:
        raise DomainError(f"t = {t} precedes t0 = {params.t0}")
    x = params.delta1 * s
    return params.delta3 * math.exp(x) + params.delta2 * s * _phi1(x)


def _length_bound(C1, C2, L_init, t):
    x = C1 * t
    return L_init * math.exp(x) + C2 * t * _phi1(x)


def surface_length_bound(C1, C2, L_init, t):
    """``(C2/C1 + L_init) e^{C1 t} - C2/C1``; needs ``C1 > 0``."""
    if not C1 > 0:
        raise DomainError(f"C1 must be positive, got {C1}")
    return gronwall_bound(GronwallParams(C1, C2, L_init, 0.0), t)


# -- sampling ------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSampler:
    """Deterministic, S1-saturated samples of ``rho^{-1}(box)``.

    ``box`` holds one ``(lo, hi)`` pair per orbit coordinate for the trivial
    bundle; for the Hopf bundle it is ``None`` (the whole 2-sphere) or a
    single ``(lo, hi)`` band in ``u3``. ``resolution`` r gives ``2^r + 1`` grid
    values per axis; ``fiber_nodes`` angles are applied to every orbit
    sample; ``n_sobol`` extra points come from a scrambled Sobol sequence.
    """

    model: object
    box: tuple | None = None
    resolution: int = 3
    fiber_nodes: int = 8
    n_sobol: int = 16
    seed: int = 0

    def refine(self):
        return replace(self, resolution=self.resolution + 1, fiber_nodes=2 * self.fiber_nodes,
                       n_sobol=2 * self.n_sobol)

    def _param_box(self):
        if isinstance(self.model, HopfBundle):
            lo, hi = (-0.5, 0.5) if self.box is None else self.box[0]
            return np.array([[lo, hi], [0.0, TWO_PI]])
        if self.box is None:
            raise ValueError("the trivial bundle needs a coordinate box")
        return np.asarray(self.box, dtype=np.float64).reshape(-1, 2)

    def _to_orbit(self, U):
        if isinstance(self.model, HopfBundle):
            u3 = np.clip(U[:, 0], -0.5, 0.5)
            r = np.sqrt(np.maximum(0.25 - u3 ** 2, 0.0))
            return np.stack([r * np.cos(U[:, 1]), r * np.sin(U[:, 1]), u3], axis=1)
        return U

    def _grid(self):
        B = self._param_box()
        n = 2 ** self.resolution
        axes = []
        for j, (lo, hi) in enumerate(B):
            if isinstance(self.model, HopfBundle) and j == 1:
                axes.append(TWO_PI * np.arange(n) / n)
            else:
                axes.append(np.linspace(lo, hi, n + 1))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def _sobol(self):
        if self.n_sobol <= 0:
            return np.empty((0, len(self._param_box()) + 1))
        B = self._param_box()
        eng = qmc.Sobol(d=len(B) + 1, scramble=True, seed=self.seed)
        U = eng.random(self.n_sobol)
        lo = np.append(B[:, 0], 0.0)
        hi = np.append(B[:, 1], TWO_PI)
        return lo + U * (hi - lo)

    def orbit_points(self):
        """Orbit-space samples (grid first, then the Sobol top-up)."""
        S = self._sobol()
        return np.concatenate([self._to_orbit(self._grid()), self._to_orbit(S[:, :-1])])

    def points(self):
        """Manifold samples: each grid orbit point at every fiber angle, plus Sobol points."""
        model = self.model
        base = model.section(self._to_orbit(self._grid()))
        theta = TWO_PI * np.arange(self.fiber_nodes) / self.fiber_nodes
        grid = model.act(base[None, :, :], theta[:, None]).reshape(-1, model.dim)
        S = self._sobol()
        extra = model.act(model.section(self._to_orbit(S[:, :-1])), S[:, -1])
        return np.concatenate([grid, extra]).reshape(-1, model.dim)

    def __len__(self):
        return len(self.points())


@dataclass(frozen=True)
class SupResult:
    value: float
    argmax: np.ndarray
    n_samples: int
    resolution: int

    def __float__(self):
        return float(self.value)


def sample_sup(sampler, f, batched=True):
    """Maximum of ``f`` over the sampler's points.

    ``f`` takes an ``(n, dim)`` array (``batched=True``) or one coordinate
    row at a time.
    """
    P = sampler.points()
    if isinstance(f, ScalarField):
        vals = f.batch(P)
    elif batched:
        vals = np.asarray(f(P), dtype=np.float64).reshape(-1)
    else:
        vals = np.array([float(f(p)) for p in P])
    i = int(np.argmax(vals))
    return SupResult(float(vals[i]), P[i].copy(), len(P), sampler.resolution)


# -- theorem constants -----------------------------------------------------------

@dataclass(frozen=True)
class TheoremConstants:
    kappa0: float
    kappa1: float
    kappa2: float
    c: float
    epsilon0: float
    L0: float
    argmax: dict = field(default_factory=dict, compare=False, repr=False)

    def bound(self, eps):
        return self.c * eps

    def mmn(self, eps, t):
        """Bound on the s-curve length of the horizontal surface at time ``t``."""
        return eps * _length_bound(self.kappa1, self.kappa2, self.kappa0, eps * t)


def constant_c(kappa0, kappa1, kappa2, L0):
    """``kappa0 + (kappa2/kappa1 + kappa0) e^{kappa1 L0} - kappa2/kappa1``."""
    return kappa0 + _length_bound(kappa1, kappa2, kappa0, L0)


def eps_grid(eps0, n=8):
    return eps0 * 2.0 ** -np.arange(n)


def compute_constants(model, X0, X1, Z, sampler, eps0, L0, quad=DEFAULT_QUAD,
                      sampler0=None, n_eps=8):
    """kappa0, kappa1, kappa2 and c from sampled suprema.

    kappa0 is the sup of ``|Z|`` over ``sampler0`` (defaults to ``sampler``);
    kappa1 and kappa2 take the sup over the sampler points and over
    ``n_eps`` values ``eps0 2^-j``. The ``argmax`` dict records where each sup
    was attained.
    """
    P = sampler.points()
    P0 = P if sampler0 is None else sampler0.points()
    zn = model.norm(P0, Z.batch(P0))
    i0 = int(np.argmax(zn))
    kappa0 = float(zn[i0])

    avg = average_field(model, X1, quad)
    avg_hor = VectorField(model, lambda Q: split_array(model, Q, avg.batch(Q))[0], name="<X1>hor")
    grad_avg = nabla_norms(model, avg_hor, P)

    kappa1, kappa2 = float(np.max(grad_avg)), 0.0
    arg = {"kappa0": (P0[i0].copy(), None),
           "kappa1": (P[int(np.argmax(grad_avg))].copy(), 0.0),
           "kappa2": (P[0].copy(), None)}
    for e in eps_grid(eps0, n_eps):
        R_hor = _remainder_hor(model, X0, X1, Z, float(e), quad, avg)
        rn = model.norm(P, R_hor.batch(P))
        k1 = grad_avg + e * nabla_norms(model, R_hor, P)
        j1, j2 = int(np.argmax(k1)), int(np.argmax(rn))
        if k1[j1] > kappa1:
            kappa1 = float(k1[j1])
            arg["kappa1"] = (P[j1].copy(), float(e))
        if rn[j2] > kappa2:
            kappa2 = float(rn[j2])
            arg["kappa2"] = (P[j2].copy(), float(e))
    c = constant_c(kappa0, kappa1, kappa2, L0)
    return TheoremConstants(kappa0, kappa1, kappa2, c, float(eps0), float(L0), arg)


def _remainder_hor(model, X0, X1, Z, eps, quad, avg):
    pb = pullback_perturbed(model, X0, X1, Z, eps, quad)

    def fn(P):
        R = (pb.batch(P) - X0.batch(P) - eps * avg.batch(P)) / eps ** 2
        return split_array(model, P, R)[0]

    return VectorField(model, fn, name=f"R[{eps:g}]hor")


# -- surfaces ------------------------------------------------------------------

@dataclass
class SurfaceSweepResult:
    ts: np.ndarray
    lengths: np.ndarray
    bounds: np.ndarray
    C1: float
    C2: float
    passed: bool
    violations: list

    @property
    def verdict(self):
        return "PASS" if self.passed else "FAIL"


SURFACE_DS = 1e-6
BOUND_RTOL = 1e-6
BOUND_ATOL = 1e-9


def _simpson_weights(n):
    """Composite Simpson weights on ``n + 1`` nodes of [0, 1] (``n`` even)."""
    if n % 2:
        raise ValueError("n_s must be even")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * n)


class AffineFamily:
    """The family ``X_s = (1 - s) F0 + s F1``, evaluated for many ``s`` at once."""

    def __init__(self, F0, F1):
        self.F0 = F0
        self.F1 = F1
        self.model = F0.model

    def __call__(self, s):
        s = float(s)
        F0, F1 = self.F0, self.F1
        return VectorField(self.model, lambda P: (1 - s) * F0.batch(P) + s * F1.batch(P),
                           name=f"X_{s:g}")

    def rows(self, s, P):
        s = np.asarray(s, dtype=np.float64)[:, None]
        return (1 - s) * self.F0.batch(P) + s * self.F1.batch(P)

    def derivative_rows(self, s, P):
        return self.F1.batch(P) - self.F0.batch(P)

    def nabla_norms(self, s, P):
        M0 = nabla_matrix(self.model, self.F0, P)
        M1 = nabla_matrix(self.model, self.F1, P)
        s = np.asarray(s, dtype=np.float64)[:, None, None]
        return np.linalg.norm((1 - s) * M0 + s * M1, ord=2, axis=(1, 2))


class _Rows:
    """Batched evaluation of an arbitrary family, one call per row."""

    def __init__(self, model, family):
        self.model = model
        self.family = family

    def rows(self, s, P):
        return np.stack([self.family(float(si)).batch(P[i:i + 1])[0] for i, si in enumerate(s)])

    def derivative_rows(self, s, P, d=1e-4):
        return np.stack([(self.family(float(si) + d).batch(P[i:i + 1])[0]
                          - self.family(float(si) - d).batch(P[i:i + 1])[0]) / (2 * d)
                         for i, si in enumerate(s)])

    def nabla_norms(self, s, P):
        return np.array([nabla_norms(self.model, self.family(float(si)), P[i:i + 1])[0]
                         for i, si in enumerate(s)])


def surface_sweep(model, family, beta, T, n_s=8, n_t=40, rtol=1e-8, atol=1e-10, ds=SURFACE_DS,
                  C1=None, C2=None):
    """Lengths of the s-curves of ``gamma(t, s) = Fl_{X_s}^t(beta(s))``.

    ``family(s)`` returns the vector field ``X_s`` (an :class:`AffineFamily`
    is evaluated in one batch) and ``beta(s)`` the start point coordinates.
    ``d gamma / ds`` is a central difference of the trajectories from
    ``s +- ds``, integrated jointly. C1 and C2 default to sampled suprema of
    ``|nabla X_s|`` and ``|d X_s / ds|`` over the surface points. The verdict
    checks ``L(t) <= bound(t)`` on the t grid, with a relative slack of 1e-6
    for the finite-difference error in ``L``.
    """
    dim = model.dim
    fam = family if isinstance(family, AffineFamily) else _Rows(model, family)
    s_nodes = np.linspace(0.0, 1.0, n_s + 1)
    s_rows = np.concatenate([s_nodes + ds, s_nodes - ds])
    Y0 = np.array([np.asarray(beta(float(s)), dtype=np.float64) for s in s_rows])
    T = float(T)
    ts = np.linspace(0.0, T, n_t + 1)
    if T > 0:
        rhs = lambda t, y: model.tangent_project(  # noqa: E731
            y.reshape(-1, dim), fam.rows(s_rows, y.reshape(-1, dim))).ravel()
        t_arr, ys, fs, _ = kernels.dopri5(
            rhs, 0.0, T, Y0.ravel(), rtol, atol,
            renorm_block=model.renorm_block, renorm_radius=model.renorm_radius,
            max_norm=model.blowup_bound)
        G = kernels.hermite(t_arr, ys, fs, ts).reshape(len(ts), 2 * (n_s + 1), dim)
    else:
        G = Y0[None]
    if model.renorm_block:
        G = model.normalize(G)
    m = n_s + 1
    plus, minus = G[:, :m], G[:, m:]
    mid = model.normalize(0.5 * (plus + minus)) if model.renorm_block else 0.5 * (plus + minus)
    dgds = model.tangent_project(mid, (plus - minus) / (2 * ds))
    speed = model.norm(mid, dgds)  # (n_t+1, n_s+1)
    lengths = speed @ _simpson_weights(n_s)

    if C1 is None or C2 is None:
        pts = mid.reshape(-1, dim)
        s_pts = np.tile(s_nodes, len(ts))
        if C1 is None:
            C1 = float(np.max(fam.nabla_norms(s_pts, pts)))
        if C2 is None:
            C2 = float(np.max(model.norm(pts, model.tangent_project(
                pts, fam.derivative_rows(s_pts, pts)))))
    bounds = np.array([_length_bound(C1, C2, lengths[0], t) for t in ts])
    bad = lengths > bounds * (1 + BOUND_RTOL) + BOUND_ATOL
    violations = [float(t) for t in ts[bad]]
    return SurfaceSweepResult(ts, lengths, bounds, float(C1), float(C2), not violations, violations)


@dataclass
class HorizontalSurfaceResult:
    eps: float
    ts: np.ndarray
    lengths: np.ndarray
    bounds: np.ndarray
    passed: bool
    violations: list


def horizontal_surface(model, X0, X1, Z, eps, m0, constants, quad=DEFAULT_QUAD, n_s=8, n_t=40,
                       rtol=1e-8, atol=1e-10, ds=SURFACE_DS, horizon=None):
    """The horizontal surface of the error analysis and its length bound.

    ``Sigma(t, s)`` is the trajectory from ``m_{s eps} = Phi_{s eps}^{-1}(m0)``
    of the time-dependent horizontal field
    ``eps <X1>^hor + s eps^2 (rho^t)_* R_eps^hor``, where ``rho^t`` rotates
    each fiber by the phase ``tau(t)`` that carries the normalized trajectory
    from ``m_eps`` onto its horizontal lift. The s-curve lengths are compared
    with ``constants.mmn(eps, t)`` for ``t`` in ``[0, L0/eps]``.
    """
    dim = model.dim
    eps = float(eps)
    m0 = np.asarray(m0, dtype=np.float64)
    T = constants.L0 / eps if horizon is None else float(horizon)
    avg = average_field(model, X1, quad)
    pb = pullback_perturbed(model, X0, X1, Z, eps, quad)
    R_hor = _remainder_hor(model, X0, X1, Z, eps, quad, avg)

    # 1. normalized trajectory from m_eps and its fiber phase tau(t)
    m_eps = m0 + z_displacement(Z, m0[None], -eps)[0]
    m_eps = model.normalize(m_eps) if model.renorm_block else m_eps

    def rhs_gamma(t, y):
        P = y[None, :dim]
        v = pb.batch(P)
        Y = model.generator(P)
        dtau = -model.inner(P, v, Y) / model.inner(P, Y, Y)
        return np.concatenate([v[0], dtau])

    tg, yg, fg, _ = kernels.dopri5(rhs_gamma, 0.0, T, np.append(m_eps, 0.0), rtol, atol,
                                   max_norm=model.blowup_bound)

    def tau(t):
        return float(kernels.hermite(tg, yg, fg, np.array([t]))[0, dim])

    # 2. the surface, rows s_j +- ds
    s_nodes = np.linspace(0.0, 1.0, n_s + 1)
    s_rows = np.concatenate([s_nodes + ds, s_nodes - ds])
    starts = np.array([m0 + z_displacement(Z, m0[None], -s * eps, n_steps=16)[0] for s in s_rows])
    if model.renorm_block:
        starts = model.normalize(starts)

    def rhs_sigma(t, y):
        P = y.reshape(-1, dim)
        a = tau(t)
        back = model.act(P, -a)
        R = model.act_vector(R_hor.batch(back), a)
        A = split_array(model, P, avg.batch(P))[0]
        return (eps * A + (s_rows * eps ** 2)[:, None] * R).ravel()

    ts = np.linspace(0.0, T, n_t + 1)
    t_arr, ys, fs, _ = kernels.dopri5(rhs_sigma, 0.0, T, starts.ravel(), rtol, atol,
                                      renorm_block=model.renorm_block,
                                      renorm_radius=model.renorm_radius,
                                      max_norm=model.blowup_bound)
    G = kernels.hermite(t_arr, ys, fs, ts).reshape(len(ts), len(s_rows), dim)
    if model.renorm_block:
        G = model.normalize(G)
    m = n_s + 1
    mid = 0.5 * (G[:, :m] + G[:, m:])
    if model.renorm_block:
        mid = model.normalize(mid)
    dgds = model.tangent_project(mid, (G[:, :m] - G[:, m:]) / (2 * ds))
    lengths = model.norm(mid, dgds) @ _simpson_weights(n_s)
    bounds = np.array([constants.mmn(eps, t) for t in ts])
    bad = lengths > bounds * (1 + BOUND_RTOL) + BOUND_ATOL
    return HorizontalSurfaceResult(eps, ts, lengths, bounds, not bad.any(),
                                   [float(t) for t in ts[bad]])
