"""System configuration files.

A configuration is an INI-style file (``[section]`` headers, ``key = value``
lines). Values are Python literals: expressions are quoted strings, vectors
are lists. Example::

    [model]
    kind = "trivial"
    k = 1

    [system]
    omega = "1 + 0.25*x1^2"
    X1 = ["0.5*cos(phi)", "sin(phi) + x1"]

    [initial]
    m0 = [0.0, 0.5]

    [theorem]
    L0 = 1.0
    eps_min = 1e-3
    eps_max = 1e-1
    eps_count = 8

    [domain]
    box = [[0.0, 2.0]]

    [numerics]
    nodes = 64
    rtol = 1e-10
    atol = 1e-10
    seed = 0

``X0`` is optional and defaults to ``omega`` times the action generator; when
present it must equal that field. ``J_O`` (optional, in ``[system]``) is a
function of the orbit coordinates: ``x1..xk`` for the trivial bundle and
``u1, u2, u3`` for the Hopf bundle. See ``docs/grammar.md`` for the full
key list.
"""
from __future__ import annotations

import ast
import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..fields import ScalarField, VectorField
from ..geometry import HopfBundle, TrivialBundle
from .parser import DSLSyntaxError, compile_columns, parse_expr, to_source

POSITIVITY_SAMPLES = 1000
INVARIANCE_TOL = 1e-9


@dataclass(frozen=True)
class SystemConfig:
    kind: str
    k: int
    omega: object
    X1: tuple
    X0: tuple | None
    m0: tuple
    L0: float
    epsilons: tuple
    eps0: float
    box: tuple | None
    J_O: object | None = None
    nodes: int = 64
    rtol: float = 1e-10
    atol: float = 1e-10
    seed: int = 0
    resolution: int = 3
    fiber_nodes: int = 8
    n_sobol: int = 16
    name: str = "system"
    source: str | None = field(default=None, compare=False)

    # -- derived objects ----------------------------------------------------
    def model(self):
        omega_fn = _scalar_fn(self.omega, self._variables())
        if self.kind == "hopf":
            return HopfBundle(omega_fn)
        return TrivialBundle(self.k, omega_fn)

    def _variables(self):
        if self.kind == "hopf":
            return list(HopfBundle.variables)
        return ["phi"] + [f"x{i}" for i in range(1, self.k + 1)]

    def orbit_variables(self):
        if self.kind == "hopf":
            return list(HopfBundle.orbit_variables)
        return [f"x{i}" for i in range(1, self.k + 1)]

    def fields(self, model=None):
        """``(model, X0, X1)`` built from the expressions."""
        model = self.model() if model is None else model
        X1 = VectorField(model, compile_columns(list(self.X1), self._variables()), name="X1")
        return model, model.x0(), X1

    def J_O_function(self):
        """``J_O`` as a function of orbit coordinate rows, or ``None``."""
        if self.J_O is None:
            return None
        return _scalar_fn(self.J_O, self.orbit_variables())

    def m0_array(self):
        return np.asarray(self.m0, dtype=np.float64)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def to_text(self):
        """Render back to the file format (expressions re-printed)."""
        lines = ["[model]", f'kind = "{self.kind}"']
        if self.kind == "trivial":
            lines.append(f"k = {self.k}")
        lines += ["", "[system]", f'omega = "{to_source(self.omega)}"',
                  "X1 = [" + ", ".join(f'"{to_source(e)}"' for e in self.X1) + "]"]
        if self.X0 is not None:
            lines.append("X0 = [" + ", ".join(f'"{to_source(e)}"' for e in self.X0) + "]")
        if self.J_O is not None:
            lines.append(f'J_O = "{to_source(self.J_O)}"')
        lines += ["", "[initial]", f"m0 = {list(self.m0)!r}",
                  "", "[theorem]", f"L0 = {self.L0!r}", f"eps = {list(self.epsilons)!r}",
                  f"eps0 = {self.eps0!r}",
                  "", "[domain]"]
        if self.box is not None:
            lines.append(f"box = {[list(b) for b in self.box]!r}")
        lines += [f"resolution = {self.resolution}", f"fiber_nodes = {self.fiber_nodes}",
                  f"n_sobol = {self.n_sobol}",
                  "", "[numerics]", f"nodes = {self.nodes}", f"rtol = {self.rtol!r}",
                  f"atol = {self.atol!r}", f"seed = {self.seed}", ""]
        return "\n".join(lines)


def _scalar_fn(expr, variables):
    col = compile_columns([expr], variables)
    return lambda P: col(P)[:, 0]


# -- loading ---------------------------------------------------------------------

def _literal(cp, section, key, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"{section}.{key}", "missing")
        return default
    raw = cp.get(section, key)
    try:
        return ast.literal_eval(raw.strip())
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"{section}.{key}", f"not a literal value: {raw!r}") from exc


def _expr(src, variables, where):
    if not isinstance(src, str):
        raise ConfigError(where, "expressions must be quoted strings")
    try:
        return parse_expr(src, variables)
    except DSLSyntaxError as exc:
        raise ConfigError(where, str(exc)) from exc


def _number(value, where, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(where, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    if positive and value <= 0:
        raise ConfigError(where, f"must be positive, got {value!r}")
    return int(value) if integer else float(value)


def parse_config(text, name="system", source=None, validate=True):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (X0, J_O, L0)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc)) from exc
    for section in ("model", "system", "initial", "theorem"):
        if not cp.has_section(section):
            raise ConfigError(section, "missing section")

    kind = _literal(cp, "model", "kind", required=True)
    if kind not in ("trivial", "hopf"):
        raise ConfigError("model.kind", f"must be 'trivial' or 'hopf', got {kind!r}")
    if kind == "trivial":
        k = _number(_literal(cp, "model", "k", 1), "model.k", positive=True, integer=True)
        variables = ["phi"] + [f"x{i}" for i in range(1, k + 1)]
        orbit_vars = variables[1:]
    else:
        k = 3
        variables = list(HopfBundle.variables)
        orbit_vars = list(HopfBundle.orbit_variables)
    dim = len(variables)

    omega = _expr(_literal(cp, "system", "omega", required=True), variables, "system.omega")
    X1_src = _literal(cp, "system", "X1", required=True)
    if not isinstance(X1_src, (list, tuple)):
        raise ConfigError("system.X1", "expected a list of component expressions")
    if len(X1_src) != dim:
        raise ConfigError("system.X1", f"has {len(X1_src)} components, the model needs {dim} "
                          f"({', '.join(variables)})")
    X1 = tuple(_expr(s, variables, f"system.X1[{i}]") for i, s in enumerate(X1_src))
    X0_src = _literal(cp, "system", "X0")
    X0 = None
    if X0_src is not None:
        if not isinstance(X0_src, (list, tuple)) or len(X0_src) != dim:
            raise ConfigError("system.X0", f"expected {dim} component expressions")
        X0 = tuple(_expr(s, variables, f"system.X0[{i}]") for i, s in enumerate(X0_src))
    J_src = _literal(cp, "system", "J_O")
    J_O = None if J_src is None else _expr(J_src, orbit_vars, "system.J_O")

    m0 = _literal(cp, "initial", "m0", required=True)
    if not isinstance(m0, (list, tuple)) or len(m0) != dim:
        raise ConfigError("initial.m0", f"expected {dim} coordinates")
    m0 = tuple(_number(v, "initial.m0") for v in m0)
    if kind == "hopf":
        r = math.sqrt(sum(v * v for v in m0))
        if r == 0:
            raise ConfigError("initial.m0", "must be nonzero")
        m0 = tuple(v / r for v in m0)

    L0 = _number(_literal(cp, "theorem", "L0", required=True), "theorem.L0", positive=True)
    eps = _literal(cp, "theorem", "eps")
    if eps is None:
        lo = _number(_literal(cp, "theorem", "eps_min", 1e-3), "theorem.eps_min", positive=True)
        hi = _number(_literal(cp, "theorem", "eps_max", 1e-1), "theorem.eps_max", positive=True)
        n = _number(_literal(cp, "theorem", "eps_count", 8), "theorem.eps_count", positive=True,
                    integer=True)
        eps = eps_range(lo, hi, n, "theorem")
    else:
        if not isinstance(eps, (list, tuple)) or not eps:
            raise ConfigError("theorem.eps", "expected a non-empty list")
        eps = tuple(sorted((_number(e, "theorem.eps", positive=True) for e in eps), reverse=True))
    eps0 = _number(_literal(cp, "theorem", "eps0", max(eps)), "theorem.eps0", positive=True)
    if eps0 < max(eps):
        raise ConfigError("theorem.eps0", "must be at least the largest eps")

    def dom(key, default):
        return _literal(cp, "domain", key, default) if cp.has_section("domain") else default

    box = dom("box", None)
    if kind == "trivial":
        if box is None:
            raise ConfigError("domain.box", "required for the trivial bundle")
        try:
            box = tuple(tuple(float(v) for v in b) for b in box)
        except (TypeError, ValueError) as exc:
            raise ConfigError("domain.box", "expected [[lo, hi], ...]") from exc
        if len(box) != k or any(len(b) != 2 or not b[0] < b[1] for b in box):
            raise ConfigError("domain.box", f"expected {k} intervals [lo, hi] with lo < hi")
        for i, (v, (lo, hi)) in enumerate(zip(m0[1:], box)):
            if not lo <= v <= hi:
                raise ConfigError("initial.m0", f"x{i + 1} = {v} is outside the domain box")
    elif box is not None:
        try:
            box = (tuple(float(v) for v in box),)
        except (TypeError, ValueError) as exc:
            raise ConfigError("domain.box", "expected a band [u3_lo, u3_hi]") from exc
        lo, hi = box[0]
        if not -0.5 <= lo < hi <= 0.5:
            raise ConfigError("domain.box", "band must satisfy -1/2 <= lo < hi <= 1/2")

    def num(key, default, **kw):
        return _number(_literal(cp, "numerics", key, default) if cp.has_section("numerics")
                       else default, f"numerics.{key}", **kw)

    cfg = SystemConfig(
        kind=kind, k=k, omega=omega, X1=X1, X0=X0, m0=m0, L0=L0, epsilons=tuple(eps),
        eps0=eps0, box=box, J_O=J_O,
        nodes=num("nodes", 64, positive=True, integer=True),
        rtol=num("rtol", 1e-10, positive=True), atol=num("atol", 1e-10, positive=True),
        seed=num("seed", 0, integer=True),
        resolution=_number(dom("resolution", 3), "domain.resolution", positive=True, integer=True),
        fiber_nodes=_number(dom("fiber_nodes", 8), "domain.fiber_nodes", positive=True,
                            integer=True),
        n_sobol=_number(dom("n_sobol", 16), "domain.n_sobol", integer=True),
        name=name, source=source)
    if cfg.nodes < 8:
        raise ConfigError("numerics.nodes", "at least 8 quadrature nodes are needed")
    if validate:
        validate_config(cfg)
    return cfg


def eps_range(lo, hi, n, where="eps"):
    if lo > hi:
        raise ConfigError(f"{where}.eps_min", "must not exceed eps_max")
    if n == 1:
        return (float(hi),)
    return tuple(float(v) for v in np.geomspace(hi, lo, int(n)))


def load_config(path, validate=True):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc}") from exc
    return parse_config(text, name=path.stem, source=str(path), validate=validate)


def domain_samples(cfg, model, n=POSITIVITY_SAMPLES):
    rng = np.random.default_rng(cfg.seed)
    if cfg.kind == "trivial":
        return model.random_points(rng, n, cfg.box)
    P = model.random_points(rng, n)
    if cfg.box is not None:
        lo, hi = cfg.box[0]
        u3 = rng.uniform(lo, hi, n)
        a = rng.uniform(0, 2 * math.pi, n)
        r = np.sqrt(np.maximum(0.25 - u3 ** 2, 0))
        Z = np.stack([r * np.cos(a), r * np.sin(a), u3], axis=1)
        P = model.act(model.section(Z), rng.uniform(0, 2 * math.pi, n))
    return P


def validate_config(cfg):
    """Semantic checks: omega positive and invariant, X0 = omega Upsilon, finite X1."""
    model, X0, X1 = cfg.fields()
    P = domain_samples(cfg, model)
    w = model.omega.batch(P)
    bad = ~(w > 0)
    if bad.any():
        i = int(np.argmax(bad))
        raise ConfigError("system.omega", f"must be positive on the domain; omega = {w[i]!r} at "
                          f"sample {np.array2string(P[i], precision=6)}")
    theta = np.random.default_rng(cfg.seed + 1).uniform(0, 2 * math.pi, len(P))
    w_rot = model.omega.batch(model.act(P, theta))
    gap = np.abs(w_rot - w) / (1 + np.abs(w))
    if gap.max() > INVARIANCE_TOL:
        i = int(np.argmax(gap))
        raise ConfigError("system.omega", "must be invariant under the S1-action (depend on "
                          f"orbit coordinates only); mismatch {gap[i]:.3g} at "
                          f"{np.array2string(P[i], precision=6)}")
    if cfg.X0 is not None:
        V = VectorField(model, compile_columns(list(cfg.X0), cfg._variables())).batch(P)
        gap = np.linalg.norm(V - X0.batch(P), axis=1)
        if gap.max() > INVARIANCE_TOL * (1 + np.abs(w).max()):
            i = int(np.argmax(gap))
            raise ConfigError("system.X0", "must equal omega times the action generator; "
                              f"mismatch {gap[i]:.3g} at {np.array2string(P[i], precision=6)}")
    V1 = X1.batch(P)
    if not np.all(np.isfinite(V1)):
        i = int(np.argmax(~np.isfinite(V1).all(axis=1)))
        raise ConfigError("system.X1", f"non-finite at {np.array2string(P[i], precision=6)}")
    if cfg.J_O is not None:
        J = cfg.J_O_function()(model.project(P))
        if not np.all(np.isfinite(J)):
            raise ConfigError("system.J_O", "non-finite on the domain")
    return cfg
