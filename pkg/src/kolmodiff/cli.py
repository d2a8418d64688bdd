"""Command line interface.

    kolmodiff verify <scenario> [--config cfg.json|cfg.toml] [--seed S]
                     [--out report.json] [--csv report.csv]
    kolmodiff simulate <geometry> [--t T] [--n-steps N] [--n-paths N] [--seed S]
                       [--levels L] [--out path.csv]
    kolmodiff sharpness [--t-grid 0.5,1,2,5] [--out report.json]
    kolmodiff couple <geometry> [--k K] [--distance D] [--t T] [--dt DT]
                     [--n-paths N] [--seed S] [--out report.json]

Exit codes: 0 no violations, 2 violations present, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import coupling as cpl
from . import fields as fl
from . import geometry as geo
from . import reports as rp
from . import semigroup as sg
from . import sim
from . import verifier as vf
from .errors import ConfigError, ToolkitError
from .fields import ProductPoint


def _load_config(path: str) -> dict:
    try:
        if path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"cannot parse config {path!r}: {exc}") from exc


def _cmd_verify(args) -> int:
    data = _load_config(args.config) if args.config else {}
    data.setdefault("scenario", args.scenario)
    if data["scenario"] != args.scenario:
        raise ConfigError("config scenario does not match the command line")
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = vf.config_from_dict(data)
    bundle = vf.run_suite(cfg)
    if args.out:
        vf.emit_report(bundle, args.out, "json")
    if args.csv:
        vf.emit_report(bundle, args.csv, "csv")
    counts = bundle["summary"]["verdicts"]
    print(f"{cfg.scenario}: {bundle['summary']['rows']} rows "
          f"(verified {counts['verified']}, violated {counts['violated']}, "
          f"inconclusive {counts['inconclusive']})")
    if not args.out and not args.csv:
        sys.stdout.write(rp.bundle_to_csv(bundle))
    return 2 if counts["violated"] else 0


def _cmd_simulate(args) -> int:
    geom = geo.from_id(args.geometry)
    cfg = sim.SimConfig(t=args.t, n_steps=args.n_steps, n_paths=args.n_paths,
                        seed=args.seed, record_every=args.record_every)
    if isinstance(geom, geo.Heisenberg):
        x0 = np.zeros(3)
        path = sim.simulate_heisenberg_bm(x0, cfg)
        base, fibers = path.points, ()
    elif args.levels > 0:
        from .gamma import ambient_inclusion, identity_map
        smap = identity_map(geom.dim) if isinstance(geom, geo.Euclidean) \
            else ambient_inclusion(geom.ambient_dim)
        x0 = _default_start(geom)
        lift = sim.simulate_lift(geom, smap, x0,
                                 [np.zeros(smap.k)] * args.levels, cfg)
        base, fibers = lift.base, lift.fibers
        path = lift
    else:
        x0 = _default_start(geom)
        bp = sim.simulate_bm(geom, x0, cfg)
        base, fibers = bp.points, ()
        path = bp
    out = args.out or f"{args.geometry}-paths.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["step", "time", "path"] + [f"b{i}" for i in range(base.shape[-1])]
        for lev, fib in enumerate(fibers):
            header += [f"xi{lev + 1}_{i}" for i in range(fib.shape[-1])]
        w.writerow(header)
        for k, t in enumerate(path.times):
            for j in range(base.shape[1]):
                row = [k, float(t), j] + [repr(float(v)) for v in base[k, j]]
                for fib in fibers:
                    row += [repr(float(v)) for v in fib[k, j]]
                w.writerow(row)
    print(f"wrote {out}")
    return 0


def _default_start(geom):
    x0 = np.zeros(geom.ambient_dim)
    if isinstance(geom, geo.Sphere):
        x0[-1] = 1.0
    elif isinstance(geom, geo.Hyperboloid):
        x0[0] = 1.0
    return x0


def _cmd_sharpness(args) -> int:
    """Linear-in-fiber sharpness sweep: both sides of the gradient bound
    equal t^2 |l|^2 for f = l(xi)."""
    t_grid = [float(v) for v in args.t_grid.split(",")]
    f = fl.linear_fiber(1, 1)
    x = ProductPoint.of([0.0], [0.0])
    rows = []
    for t in t_grid:
        kernel = sg.FlatKolmogorovKernel(1, args.sigma, t)
        rule = sg.default_rule(1, t=t, sigma=args.sigma)
        rep = sg.verify_be_estimate(kernel, f, x, rule)
        gap = abs(rep.lhs - rep.rhs) / max(abs(rep.rhs), 1e-300)
        rows.append({"t": t, "lhs": rep.lhs, "rhs": rep.rhs,
                     "expected": t * t, "relative_gap": gap,
                     "verdict": rep.verdict})
        print(f"t={t}: |grad_p P_t f|^2 = {rep.lhs:.12g}  bound = {rep.rhs:.12g}"
              f"  (t^2 = {t * t:.12g}, rel gap {gap:.2e})")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"sharpness": rows}, fh, sort_keys=True, indent=2)
    return 0


def _cmd_couple(args) -> int:
    geom = geo.from_id(args.geometry)
    K = args.k if args.k is not None else geom.ricci_lower
    p, q = vf._coupling_start(geom, args.distance)
    n_steps = max(10, int(round(args.t / args.dt)))
    cfg = sim.SimConfig(t=args.t, n_steps=n_steps, n_paths=args.n_paths,
                        seed=args.seed, increment_law=args.increment_law,
                        record_every=max(1, n_steps // 200))
    from .gamma import default_lipschitz_map
    coupled = cpl.parallel_coupling(geom, p, q, cfg,
                                    sigma_map=default_lipschitz_map(geom))
    rep = cpl.contraction_report(coupled, K, c_sigma=1.0)
    print(f"{geom.name}: start distance {args.distance}, K={K}")
    print(f"  eps = {rep.eps:.4f}  fiber eps = {rep.fiber_eps:.4f}  "
          f"aborted = {rep.abort_fraction:.2%}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep.as_dict(), fh, sort_keys=True, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kolmodiff", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run an inequality verification scenario")
    v.add_argument("scenario", choices=vf.SCENARIOS)
    v.add_argument("--config", help="JSON or TOML file mirroring RunConfig fields")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--out", help="write the JSON report bundle here")
    v.add_argument("--csv", help="write the flat CSV table here")
    v.set_defaults(fn=_cmd_verify)

    s = sub.add_parser("simulate", help="simulate paths and dump a CSV")
    s.add_argument("geometry")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--n-steps", type=int, default=1000)
    s.add_argument("--n-paths", type=int, default=4)
    s.add_argument("--levels", type=int, default=0,
                   help="fiber levels to lift (0 = base walk only)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--record-every", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(fn=_cmd_simulate)

    sh = sub.add_parser("sharpness", help="sharpness sweep of the gradient bound")
    sh.add_argument("--t-grid", default="0.5,1,2,5")
    sh.add_argument("--sigma", type=float, default=1.0)
    sh.add_argument("--out")
    sh.set_defaults(fn=_cmd_sharpness)

    c = sub.add_parser("couple", help="parallel-transport coupling study")
    c.add_argument("geometry")
    c.add_argument("--k", type=float, default=None,
                   help="Ricci lower bound (defaults to the geometry's)")
    c.add_argument("--distance", type=float, default=0.5)
    c.add_argument("--t", type=float, default=1.0)
    c.add_argument("--dt", type=float, default=1e-3)
    c.add_argument("--n-paths", type=int, default=10000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--increment-law", default=sim.SPHERE_STEPS,
                   choices=[sim.GAUSSIAN_STEPS, sim.SPHERE_STEPS])
    c.add_argument("--out")
    c.set_defaults(fn=_cmd_couple)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except ToolkitError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
