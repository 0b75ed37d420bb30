"""End-to-end experiments: the O(eps) averaging estimate, its triangle
decomposition, adiabatic drift, and CSV output.

For each eps the perturbed trajectory ``gamma(t) = Fl_{X_eps}^t(m0)`` is
integrated once on ``[0, L0/eps]`` and everything else is derived from it:

* the averaged orbit trajectory is integrated once in slow time
  ``s = eps t in [0, L0]`` and shared by all eps;
* the trajectory of the normalized field from ``m_eps = Phi_eps^{-1}(m0)``
  is ``Phi_eps^{-1}(gamma(t))`` because the normalized field is the pullback
  of ``X_eps`` by ``Phi_eps``. Both triangle terms therefore only need the
  near-identity map applied to trajectory samples.

Suprema over ``t`` use a uniform grid (at least 200 points and 16 per period
of the fast rotation) refined by a bounded scalar search around the largest
grid value.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from ._fd import directional
from .averaging import QuadratureRule, average_field, homological_Z, reduce_field
from .bounds import DomainSampler, TheoremConstants, compute_constants
from .errors import DomainExit, FirstIntegralViolated
from .fields import VectorField
from .flows import FlowSpec, integrate_flow
from .geometry import HopfBundle, Trajectory
from .normalform import MAX_SUBSTEP, loglog_slope, z_displacement

BOUND_SLACK = 1e-6
DOMAIN_SLACK = 1e-9
MIN_GRID = 200
POINTS_PER_PERIOD = 16
ADIABATIC_TOL = 1e-8

VERIFY_HEADER = ["epsilon", "sup_error", "c_eps_bound", "term1", "term2",
                 "kappa0", "kappa1", "kappa2", "c", "wall_ms"]
ADIABATIC_HEADER = ["epsilon", "drift", "bound", "lambda_J", "c", "wall_ms"]


# -- shared set-up ---------------------------------------------------------------

@dataclass
class System:
    """Fields and derived objects of a configuration."""

    cfg: object
    model: object
    X0: object
    X1: object
    quad: QuadratureRule
    Z: object
    avg: object
    reduced: object
    sampler: DomainSampler

    @classmethod
    def from_config(cls, cfg):
        model, X0, X1 = cfg.fields()
        quad = QuadratureRule(cfg.nodes)
        avg = average_field(model, X1, quad)
        reduced = reduce_field(model, avg, quad, seed=cfg.seed)
        sampler = DomainSampler(model, cfg.box, cfg.resolution, cfg.fiber_nodes, cfg.n_sobol,
                                cfg.seed)
        return cls(cfg, model, X0, X1, quad, homological_Z(model, X0, X1, quad), avg, reduced,
                   sampler)

    def constants(self):
        cfg = self.cfg
        return compute_constants(self.model, self.X0, self.X1, self.Z, self.sampler, cfg.eps0,
                                 cfg.L0, self.quad)

    def in_domain(self, Zo):
        """Mask of orbit points inside the configured closed domain."""
        Zo = np.atleast_2d(Zo)
        if self.cfg.box is None:
            return np.ones(len(Zo), dtype=bool)
        B = np.asarray(self.cfg.box)
        if isinstance(self.model, HopfBundle):
            u3 = Zo[:, 2]
            return (u3 >= B[0, 0] - DOMAIN_SLACK) & (u3 <= B[0, 1] + DOMAIN_SLACK)
        return np.all((Zo >= B[:, 0] - DOMAIN_SLACK) & (Zo <= B[:, 1] + DOMAIN_SLACK), axis=1)

    def averaged_orbit(self):
        """Trajectory of the reduced averaged field on ``[0, L0]`` from ``rho(m0)``."""
        model, cfg = self.model, self.cfg
        z0 = model.project(cfg.m0_array())
        red = self.reduced

        ts, ys, fs, _ = kernels.dopri5(
            lambda t, y: red.batch(y[None])[0], 0.0, cfg.L0, z0, cfg.rtol, cfg.atol,
            renorm_block=model.orbit_renorm_block, renorm_radius=model.orbit_renorm_radius)
        traj = Trajectory(ts, ys, fs,
                          normalize=model.orbit_normalize if model.orbit_renorm_block else None)
        if not self.in_domain(ys).all():
            i = int(np.argmin(self.in_domain(ys)))
            raise DomainExit(f"the averaged orbit trajectory leaves the domain at slow time "
                             f"{ts[i]:.6g} (point {ys[i]})")
        return traj

    def perturbed(self, eps):
        model, x1, e = self.model, self.X1.fn, float(eps)
        # fused X0 + eps X1: one tangent projection per evaluation
        X = VectorField(model, lambda P: model.omega.fn(P)[:, None] * model.generator(P)
                        + e * x1(P), name=f"X[{e:g}]")
        spec = FlowSpec(X, (0.0, self.cfg.L0 / eps), self.cfg.rtol, self.cfg.atol)
        return integrate_flow(spec, self.cfg.m0_array())

    def t_grid(self, eps, traj):
        T = self.cfg.L0 / eps
        w = float(np.max(self.model.omega.batch(traj.ys)))
        n = max(MIN_GRID, math.ceil(POINTS_PER_PERIOD * T * w / (2 * math.pi)))
        return np.linspace(0.0, T, n + 1)

    def inverse_map(self, P, eps):
        """``Phi_eps^{-1}`` on rows ``P``.

        One RK5 substep per 0.025 of ``eps``: the local error is O(eps^6),
        far below the distances measured here, so small ``eps`` takes one.
        """
        P = np.atleast_2d(P)
        n = max(1, math.ceil(abs(eps) / MAX_SUBSTEP))
        return self.model.normalize(P + z_displacement(self.Z, P, -eps, n_steps=n))


def _grid_sup(vals, f_point, ts):
    """Sup of ``f`` over ``[ts[0], ts[-1]]`` from its grid values ``vals``,
    refined by a bounded search around the grid argmax."""
    i = int(np.argmax(vals))
    best_t, best = float(ts[i]), float(vals[i])
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda t: -f_point(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10 * max(1.0, hi)})
        if -res.fun > best:
            best_t, best = float(res.x), float(-res.fun)
    return best, best_t


# -- theorem verification ----------------------------------------------------------

@dataclass
class SweepRow:
    epsilon: float
    sup_error: float
    c_eps_bound: float
    term1: float
    term2: float
    kappa0: float
    kappa1: float
    kappa2: float
    c: float
    wall_ms: float
    t_at_sup: float = 0.0
    checks: dict = field(default_factory=dict)

    def values(self):
        return [self.epsilon, self.sup_error, self.c_eps_bound, self.term1, self.term2,
                self.kappa0, self.kappa1, self.kappa2, self.c, self.wall_ms]


@dataclass
class SweepResult:
    name: str
    rows: list
    slope: float
    constants: TheoremConstants | None

    @property
    def passed(self):
        return all(all(r.checks.values()) for r in self.rows)

    @property
    def verdict(self):
        return "PASS" if self.passed else "FAIL"

    def failures(self):
        return [(r.epsilon, k) for r in self.rows for k, ok in r.checks.items() if not ok]


def _row(system, eps, averaged, K):
    model = system.model
    start = time.perf_counter()
    traj = system.perturbed(eps)
    ts = system.t_grid(eps, traj)
    G = traj(ts)
    if not system.in_domain(model.project(G)).all():
        i = int(np.argmin(system.in_domain(model.project(G))))
        raise DomainExit(f"eps={eps:g}: the perturbed trajectory leaves the domain at "
                         f"t={ts[i]:.6g}")

    def err(t):
        return model.orbit_distance(model.project(traj(t)), averaged(eps * np.asarray(t)))

    def t1(t):
        P = traj(t)
        return model.orbit_distance(model.project(P), model.project(system.inverse_map(P, eps)))

    def t2(t):
        P = system.inverse_map(traj(t), eps)
        return model.orbit_distance(model.project(P), averaged(eps * np.asarray(t)))

    def at(f):
        return lambda t: float(f(np.array([t]))[0])

    # the inverse map dominates the cost: evaluate it once on the grid
    zG, zGi, zA = model.project(G), model.project(system.inverse_map(G, eps)), averaged(eps * ts)
    sup_error, t_sup = _grid_sup(model.orbit_distance(zG, zA), at(err), ts)
    term1, _ = _grid_sup(model.orbit_distance(zG, zGi), at(t1), ts)
    term2, _ = _grid_sup(model.orbit_distance(zGi, zA), at(t2), ts)
    wall = (time.perf_counter() - start) * 1e3

    bound = K.c * eps
    aux4 = K.mmn(eps, system.cfg.L0 / eps)
    checks = {
        "bound": sup_error <= bound + BOUND_SLACK,
        "term1": term1 <= K.kappa0 * eps + BOUND_SLACK,
        "term2": term2 <= aux4 + BOUND_SLACK,
        "triangle": term1 + term2 >= sup_error - BOUND_SLACK,
    }
    return SweepRow(eps, sup_error, bound, term1, term2, K.kappa0, K.kappa1, K.kappa2, K.c,
                    wall, t_sup, checks)


def verify_theorem(cfg, constants=None, epsilons=None, system=None):
    """Run the eps sweep of the averaging estimate for a configuration."""
    system = System.from_config(cfg) if system is None else system
    K = system.constants() if constants is None else constants
    averaged = system.averaged_orbit()
    eps_list = sorted(cfg.epsilons if epsilons is None else epsilons, reverse=True)
    rows = [_row(system, float(e), averaged, K) for e in eps_list]
    slope = loglog_slope([r.epsilon for r in rows], [r.sup_error for r in rows])
    return SweepResult(cfg.name, rows, slope, K)


def triangle_decomposition(cfg, eps, constants=None, system=None):
    """``(term1, term2)`` of the triangle inequality at a single ``eps``."""
    system = System.from_config(cfg) if system is None else system
    K = system.constants() if constants is None else constants
    row = _row(system, float(eps), system.averaged_orbit(), K)
    return row.term1, row.term2


# -- adiabatic invariants -------------------------------------------------------------

@dataclass
class AdiabaticRow:
    epsilon: float
    drift: float
    bound: float
    lambda_J: float
    c: float
    wall_ms: float

    def values(self):
        return [self.epsilon, self.drift, self.bound, self.lambda_J, self.c, self.wall_ms]

    @property
    def ok(self):
        return self.drift <= self.bound + BOUND_SLACK


@dataclass
class AdiabaticResult:
    name: str
    rows: list
    slope: float
    lambda_J: float
    constants: TheoremConstants | None

    @property
    def passed(self):
        return all(r.ok for r in self.rows)

    @property
    def verdict(self):
        return "PASS" if self.passed else "FAIL"


def _orbit_gradient(model, J, Zo, h=1e-4):
    """Gradient rows of ``J`` on the orbit space (4th-order central differences)."""
    n, d = Zo.shape
    G = np.empty((n, d))
    for j in range(d):
        E = np.zeros((n, d))
        E[:, j] = 1.0
        G[:, j] = directional(J, Zo, E, h)
    return model.orbit_tangent_project(Zo, G)


def first_integral_defect(system, J, n=100):
    """Largest ``|L_{<X1>_O} J_O|`` over ``n`` sampled orbit points."""
    rng = np.random.default_rng(system.cfg.seed)
    model = system.model
    if isinstance(model, HopfBundle):
        Zo = model.project(model.random_points(rng, n))
        if system.cfg.box is not None:
            Zo = system.sampler.orbit_points()[:n]
    else:
        B = np.asarray(system.cfg.box)
        Zo = rng.uniform(B[:, 0], B[:, 1], size=(n, len(B)))
    V = system.reduced.batch(Zo)
    dJ = directional(J, Zo, V, 1e-3)
    return float(np.max(np.abs(dJ)))


def adiabatic_drift(cfg, constants=None, epsilons=None, system=None):
    """Drift of ``J = J_O o rho`` along perturbed trajectories, per eps."""
    J = cfg.J_O_function()
    if J is None:
        raise FirstIntegralViolated("the configuration has no J_O")
    system = System.from_config(cfg) if system is None else system
    model = system.model
    defect = first_integral_defect(system, J)
    if defect > ADIABATIC_TOL:
        raise FirstIntegralViolated(f"J_O is not a first integral of the reduced averaged field "
                                    f"(|L J_O| up to {defect:.3g} > {ADIABATIC_TOL:g})")
    K = system.constants() if constants is None else constants
    Zo = system.sampler.orbit_points()
    lam = float(np.max(np.linalg.norm(_orbit_gradient(model, J, Zo), axis=1)))
    J0 = float(J(model.project(cfg.m0_array())[None])[0])
    rows = []
    for eps in sorted(cfg.epsilons if epsilons is None else epsilons, reverse=True):
        eps = float(eps)
        start = time.perf_counter()
        traj = system.perturbed(eps)
        ts = system.t_grid(eps, traj)

        def drift_at(t, traj=traj):
            return float(abs(J(model.project(np.atleast_2d(traj(t))))[0] - J0))

        drift, _ = _grid_sup(np.abs(J(model.project(traj(ts))) - J0), drift_at, ts)
        wall = (time.perf_counter() - start) * 1e3
        rows.append(AdiabaticRow(eps, drift, lam * K.c * eps, lam, K.c, wall))
    slope = loglog_slope([r.epsilon for r in rows], [r.drift for r in rows])
    return AdiabaticResult(cfg.name, rows, slope, lam, K)


# -- CSV --------------------------------------------------------------------------------

def fmt(x):
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def render_csv(header, rows, footer=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    if footer:
        for line in footer:
            buf.write(f"# {line}\n")
    return buf.getvalue()


def result_csv(result, deterministic=False):
    """CSV text of a sweep or adiabatic result.

    ``deterministic=True`` writes ``wall_ms`` as 0 so identical inputs give
    identical bytes. An empty result gives the header line alone.
    """
    rows = sorted(result.rows, key=lambda r: r.epsilon, reverse=True)
    values = []
    for r in rows:
        v = r.values()
        if deterministic:
            v[-1] = 0.0
        values.append(v)
    header = VERIFY_HEADER if isinstance(result, SweepResult) else ADIABATIC_HEADER
    footer = [f"slope={fmt(result.slope)}"] if values else None
    return render_csv(header, values, footer)


def emit_csv(result, path, deterministic=False):
    text = result_csv(result, deterministic)
    Path(path).write_text(text, encoding="utf-8")
    return text


def read_csv(path):
    """Parse a CSV written by :func:`emit_csv` into ``(header, rows, comments)``."""
    rows, comments = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",") if lines else []
    for line in lines[1:]:
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line:
            rows.append([float(v) for v in line.split(",")])
    return header, rows, comments
