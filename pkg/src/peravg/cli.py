"""Command-line interface: ``peravg <command> --config FILE [options]``.

Exit status is 0 when every check passes, 2 when a bound or order check
fails, and 1 on errors (bad configuration, integration failure, I/O).
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .bounds import AffineFamily, horizontal_surface, surface_sweep
from .errors import PeravgError
from .harness import (System, adiabatic_drift, fmt, render_csv, result_csv, verify_theorem)
from .normalform import DEFAULT_EPS, normal_form, pullback_perturbed, z_displacement
from .vfdsl import eps_range, load_config

EXIT_PASS, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2
SLOPE2_RANGE = (1.8, 2.2)


def shipped_config(name):
    """Path of a configuration file shipped with the package."""
    return Path(str(resources.files("peravg") / "configs" / f"{name}.cfg"))


def _config(args):
    path = args.config
    if path is None:
        path = shipped_config("one_frequency")
    elif not Path(path).exists() and shipped_config(path).exists():
        path = shipped_config(path)
    cfg = load_config(path)
    over = {}
    if args.eps_min is not None or args.eps_max is not None or args.eps_count is not None:
        lo = args.eps_min if args.eps_min is not None else min(cfg.epsilons)
        hi = args.eps_max if args.eps_max is not None else max(cfg.epsilons)
        n = args.eps_count if args.eps_count is not None else len(cfg.epsilons)
        if not (lo > 0 and hi > 0 and n > 0):
            raise PeravgError("eps overrides must be positive")
        over["epsilons"] = eps_range(lo, hi, n)
        over["eps0"] = max(cfg.eps0, hi)
    if args.nodes is not None:
        if args.nodes < 8:
            raise PeravgError("--nodes must be at least 8")
        over["nodes"] = args.nodes
    if args.tol is not None:
        if not args.tol > 0:
            raise PeravgError("--tol must be positive")
        over["rtol"] = over["atol"] = args.tol
    if args.seed is not None:
        over["seed"] = args.seed
    return cfg.with_overrides(**over)


def _write(args, text):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _report(msg):
    print(msg, file=sys.stderr)


# -- commands ------------------------------------------------------------------------

def cmd_average(args, cfg):
    system = System.from_config(cfg)
    model = system.model
    Zo = system.sampler.orbit_points()
    W = system.reduced.batch(Zo)
    header = list(model.orbit_variables) + [f"avg_{v}" for v in model.orbit_variables]
    _write(args, render_csv(header, np.hstack([Zo, W]).tolist()))
    _report(f"averaged reduced field at {len(Zo)} orbit points")
    return EXIT_PASS


def cmd_normal_form(args, cfg):
    system = System.from_config(cfg)
    P = system.model.random_points(np.random.default_rng(cfg.seed), 16, cfg.box)
    eps = DEFAULT_EPS if args.eps_min is None and args.eps_max is None else cfg.epsilons
    res = normal_form(system.model, system.X0, system.X1, P, eps, system.quad)
    ok = SLOPE2_RANGE[0] <= res.order2_slope <= SLOPE2_RANGE[1]
    rows = [[e, d] for e, d in zip(res.epsilons, res.defects)]
    _write(args, render_csv(["epsilon", "defect"], rows, [f"slope={fmt(res.order2_slope)}"]))
    _report(f"normal-form defect slope {res.order2_slope:.4f}: {'PASS' if ok else 'FAIL'}")
    return EXIT_PASS if ok else EXIT_VIOLATION


def cmd_verify(args, cfg):
    res = verify_theorem(cfg)
    _write(args, result_csv(res, args.deterministic))
    _report(f"slope {res.slope:.4f}; c = {res.constants.c:.6g}; verdict {res.verdict}")
    for eps, check in res.failures():
        _report(f"  eps={eps:g}: check {check!r} failed")
    return EXIT_PASS if res.passed else EXIT_VIOLATION


def cmd_adiabatic(args, cfg):
    res = adiabatic_drift(cfg)
    _write(args, result_csv(res, args.deterministic))
    _report(f"drift slope {res.slope:.4f}; lambda_J = {res.lambda_J:.6g}; verdict {res.verdict}")
    return EXIT_PASS if res.passed else EXIT_VIOLATION


def cmd_bounds(args, cfg):
    K = System.from_config(cfg).constants()
    header = ["kappa0", "kappa1", "kappa2", "c", "epsilon0", "L0"]
    _write(args, render_csv(header, [[K.kappa0, K.kappa1, K.kappa2, K.c, K.epsilon0, K.L0]]))
    _report(f"kappa0={K.kappa0:.6g} kappa1={K.kappa1:.6g} kappa2={K.kappa2:.6g} c={K.c:.6g}")
    return EXIT_PASS


def cmd_gronwall(args, cfg):
    system = System.from_config(cfg)
    model, X0, X1, Z = system.model, system.X0, system.X1, system.Z
    eps = max(cfg.epsilons)
    m0 = cfg.m0_array()
    pb = pullback_perturbed(model, X0, X1, Z, eps, system.quad)
    family = AffineFamily(X0 + eps * system.avg, pb)

    def beta(s):
        p = m0 + z_displacement(Z, m0[None], -s * eps, n_steps=16)[0]
        return model.normalize(p) if model.renorm_block else p

    T = cfg.L0 / eps
    sweep = surface_sweep(model, family, beta, T, n_t=args.n_t)
    K = system.constants()
    hs = horizontal_surface(model, X0, X1, Z, eps, m0, K, system.quad, n_t=args.n_t)
    rows = [[t, L, b, Lh, bh] for t, L, b, Lh, bh in
            zip(sweep.ts, sweep.lengths, sweep.bounds, hs.lengths, hs.bounds)]
    header = ["t", "length", "bound", "horizontal_length", "horizontal_bound"]
    _write(args, render_csv(header, rows, [f"C1={fmt(sweep.C1)}", f"C2={fmt(sweep.C2)}"]))
    ok = sweep.passed and hs.passed
    _report(f"eps={eps:g}: surface {sweep.verdict}, horizontal surface "
            f"{'PASS' if hs.passed else 'FAIL'}")
    return EXIT_PASS if ok else EXIT_VIOLATION


COMMANDS = {
    "average": (cmd_average, "averaged reduced field on the domain samples"),
    "normal-form": (cmd_normal_form, "first-order normal-form defect and its order"),
    "verify": (cmd_verify, "eps sweep of the averaging estimate"),
    "adiabatic": (cmd_adiabatic, "drift of the adiabatic invariant J_O"),
    "bounds": (cmd_bounds, "the constants kappa0, kappa1, kappa2 and c"),
    "gronwall": (cmd_gronwall, "length bounds for the s-curves of the error surfaces"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="peravg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="configuration file, or the name of a shipped one "
                       "(one_frequency, hopf, adiabatic); default one_frequency")
        p.add_argument("--out", help="write CSV here instead of stdout")
        p.add_argument("--eps-min", type=float)
        p.add_argument("--eps-max", type=float)
        p.add_argument("--eps-count", type=int)
        p.add_argument("--nodes", type=int, help="quadrature nodes on the circle")
        p.add_argument("--tol", type=float, help="integrator rtol and atol")
        p.add_argument("--seed", type=int)
        p.add_argument("--deterministic", action="store_true",
                       help="write wall_ms as 0 so repeated runs give identical bytes")
        if name == "gronwall":
            p.add_argument("--n-t", type=int, default=40, help="time samples on the surface")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for violations here
        return EXIT_PASS if exc.code in (0, None) else EXIT_ERROR
    handler = COMMANDS[args.command][0]
    try:
        cfg = _config(args)
        return handler(args, cfg)
    except (PeravgError, OSError) as exc:
        _report(f"error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
