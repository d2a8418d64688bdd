"""Verification campaigns: sweep inequalities over fields, points, and times.

Each scenario assembles InequalityReport rows with full provenance (method,
seeds, dt, N, steps) and statistical verdicts at the configured z-threshold.
Monte Carlo rows at one time share a common-random-numbers ensemble group, so
difference quotients and both sides of each inequality are strongly coupled;
quadrature rows carry deterministic slack only.

Scenarios: flat-exact, flat-mc, relativistic, general-cd, manifold-coupling,
iterated, heisenberg.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import coupling as cpl
from . import fields as fl
from . import gamma as gm
from . import geometry as geo
from . import reports as rp
from . import semigroup as sg
from . import sim
from .errors import ConfigError, HypothesisViolatedError
from .fields import ProductPoint

SCENARIOS = ("flat-exact", "flat-mc", "relativistic", "general-cd",
             "manifold-coupling", "iterated", "heisenberg")

DEFAULT_FLAT_POINTS = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 2.0), (0.5, -0.5))
DEFAULT_FLAT_TIMES = (0.5, 1.0, 2.0, 5.0)


@dataclass
class RunConfig:
    scenario: str
    geometry: str | None = None
    sigma: float = 1.0
    rho: float = 0.0
    c_sigma: float | None = None
    sigma_map: str | None = None
    levels: int = 2
    fields: tuple = ()
    points: tuple = ()
    times: tuple = ()
    alphas: tuple = (2.0,)
    qs: tuple = (1, 2, 4)
    pair_offset: tuple = (1.0, 0.0)
    start_distance: float = 0.5
    eps_cap: float = 0.05
    k_cap: float = 3.0
    n_points: int = 100
    quad_order: int | None = None
    dt: float = 1e-3
    n_paths: int = 100000
    seed: int = 0
    stream: int = 0
    crn: bool = True
    convention: str = sim.HALF_LAPLACIAN
    increment_law: str = sim.GAUSSIAN_STEPS
    grad_step: float = 1e-2
    z_threshold: float = 4.0

    def as_dict(self) -> dict:
        out = asdict(self)
        for key in ("fields", "points", "times", "alphas", "qs", "pair_offset"):
            out[key] = list(out[key]) if out[key] is not None else None
        return out


def default_config(scenario: str, **overrides) -> RunConfig:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    cfg = RunConfig(scenario=scenario)
    if scenario in ("flat-exact", "flat-mc"):
        cfg.geometry = "euclidean-1"
        cfg.fields = tuple(fl.DEFAULT_FLAT_LIBRARY)
        cfg.points = DEFAULT_FLAT_POINTS
        cfg.times = DEFAULT_FLAT_TIMES
    elif scenario == "relativistic":
        cfg.geometry = "hyperboloid-2"
        cfg.fields = ("coordinate-xi0", "gauss-bump(0.2, 1.2)")
        cfg.points = ()
        cfg.times = (0.25, 0.5)
        cfg.n_paths = 20000
        cfg.dt = 2e-3
    elif scenario == "general-cd":
        cfg.geometry = "euclidean-1"
        cfg.fields = tuple(fl.DEFAULT_FLAT_LIBRARY)
        cfg.times = (0.5, 1.0, 2.0)
        cfg.c_sigma = 1.0
        cfg.rho = 0.0
    elif scenario == "manifold-coupling":
        cfg.geometry = "sphere-2"
        cfg.fields = ("linear-xi", "gauss-bump(0.0, 1.0)")
        cfg.times = (1.0,)
        cfg.n_paths = 10000
        cfg.increment_law = sim.SPHERE_STEPS
        cfg.c_sigma = 1.0
    elif scenario == "iterated":
        cfg.geometry = "euclidean-1"
        cfg.levels = 2
        cfg.fields = ("linear-xi", "gauss-bump(0.0, 1.0)")
        cfg.times = (0.5, 1.0, 2.0)
        cfg.c_sigma = 1.0
        cfg.n_paths = 50000
    elif scenario == "heisenberg":
        cfg.geometry = "heisenberg"
        cfg.fields = ("coordinate-x", "coordinate-y", "x-plus-xi", "bump-xy",
                      "bump-mix")
        cfg.times = (0.01, 0.1, 0.5, 1.0)
        cfg.points = ((0.3, -0.2, 0.1),)
        cfg.c_sigma = 1.0
    for k, v in overrides.items():
        if not hasattr(cfg, k):
            raise ConfigError(f"unknown config key {k!r}")
        setattr(cfg, k, v)
    validate_config(cfg)
    return cfg


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    scenario = data.pop("scenario", None)
    if scenario is None:
        raise ConfigError("config must name a scenario")
    for key in ("fields", "points", "times", "alphas", "qs", "pair_offset"):
        if key in data and data[key] is not None:
            data[key] = tuple(tuple(v) if isinstance(v, (list, tuple)) else v
                              for v in data[key]) if key == "points" \
                else tuple(data[key])
    return default_config(scenario, **data)


def validate_config(cfg: RunConfig):
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    if not cfg.times:
        raise ConfigError("time grid must be nonempty")
    if not cfg.fields:
        raise ConfigError("field selection must be nonempty")
    if cfg.scenario in ("flat-exact", "flat-mc") and not cfg.points:
        raise ConfigError("point grid must be nonempty")
    try:
        g = geo.from_id(cfg.geometry)
    except Exception as exc:
        raise ConfigError(f"unresolvable geometry {cfg.geometry!r}") from exc
    if cfg.scenario != "heisenberg":
        k = g.dim if cfg.geometry.startswith("euclidean") else g.ambient_dim
        for spec in cfg.fields:
            fl.field_from_id(spec, k, k)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _flat_point(pt, d) -> ProductPoint:
    arr = np.asarray(pt, dtype=float)
    return ProductPoint.of(arr[:d], arr[d:2 * d] if arr.size >= 2 * d else np.zeros(d))


def _sim_config(cfg: RunConfig, t: float, stream: int, *, min_steps: int = 10,
                n_paths: int | None = None) -> sim.SimConfig:
    n_steps = max(min_steps, int(round(t / cfg.dt)))
    return sim.SimConfig(t=t, n_steps=n_steps, n_paths=n_paths or cfg.n_paths,
                         seed=cfg.seed, stream=stream, crn=cfg.crn,
                         convention=cfg.convention,
                         increment_law=cfg.increment_law)


def _se_combine(*ses) -> float:
    return float(np.sqrt(sum(s * s for s in ses)))


# ---------------------------------------------------------------------------
# flat-exact
# ---------------------------------------------------------------------------

def run_flat_exact(cfg: RunConfig) -> list[rp.InequalityReport]:
    d = geo.from_id(cfg.geometry).dim
    out = []
    for spec in cfg.fields:
        f = fl.field_from_id(spec, d, d)
        for t in cfg.times:
            rule = sg.gauss_hermite(cfg.quad_order) if cfg.quad_order \
                else sg.default_rule(d, t=t, sigma=cfg.sigma)
            kernel = sg.FlatKolmogorovKernel(d, cfg.sigma, t)
            for pt in cfg.points:
                x = _flat_point(pt, d)
                if f.lipschitz:
                    out.append(sg.verify_be_estimate(kernel, f, x, rule))
                if f.bounded:
                    out.append(sg.verify_reverse_poincare(kernel, f, x, rule))
                    if f.positive:
                        out.append(sg.verify_reverse_logsobolev(kernel, f, x, rule))
                if f.bounded and f.positive:
                    offset = np.asarray(cfg.pair_offset, dtype=float)
                    x2 = ProductPoint.of(x.base + offset[:d],
                                         x.fiber + offset[d:2 * d])
                    for alpha in cfg.alphas:
                        out.append(sg.verify_wang_harnack(kernel, f, alpha, x, x2, rule))
    return out


# ---------------------------------------------------------------------------
# flat-mc (mirrors flat-exact rows via one zero-start ensemble per time)
# ---------------------------------------------------------------------------

class _FlatMcEngine:
    """Estimates P_t f, gradients and moments from a shared flat ensemble."""

    def __init__(self, gen, ensemble: sim.FlatLiftSample, h: float):
        self.gen = gen
        self.e = ensemble
        self.h = h
        self.n = ensemble.base.shape[0]

    def _mean_se(self, vals):
        return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(self.n))

    def value(self, f, x):
        s = self.e.at(x)
        return self._mean_se(f.value(s.base, s.fibers))

    def moment(self, values_fn, x):
        s = self.e.at(x)
        return self._mean_se(values_fn(s.base, s.fibers))

    def grad(self, f, x, which: str, i: int):
        h = self.h
        d = self.gen.geometry.dim
        eb = np.eye(d)[i]
        if which == "p":
            xp = ProductPoint(x.base + h * eb, x.fibers)
            xm = ProductPoint(x.base - h * eb, x.fibers)
        else:
            xp = ProductPoint(x.base, (x.fibers[0] + h * eb,) + x.fibers[1:])
            xm = ProductPoint(x.base, (x.fibers[0] - h * eb,) + x.fibers[1:])
        sp, sm = self.e.at(xp), self.e.at(xm)
        quot = (f.value(sp.base, sp.fibers) - f.value(sm.base, sm.fibers)) / (2 * h)
        return self._mean_se(quot)


def run_flat_mc(cfg: RunConfig) -> list[rp.InequalityReport]:
    d = geo.from_id(cfg.geometry).dim
    gen = gm.flat_kolmogorov(d, cfg.sigma)
    out = []
    for ti, t in enumerate(cfg.times):
        scfg = _sim_config(cfg, t, stream=ti)
        engine = _FlatMcEngine(gen, sim.flat_lift_sample(gen, scfg), cfg.grad_step)
        prov = {"method": "monte-carlo", **scfg.provenance()}
        for spec in cfg.fields:
            f = fl.field_from_id(spec, d, d)
            for pt in cfg.points:
                x = _flat_point(pt, d)
                if f.lipschitz:
                    out.append(_mc_be_row(cfg, engine, f, x, t, prov))
                if f.bounded:
                    out.append(_mc_reverse_poincare_row(cfg, engine, f, x, t, prov))
                    if f.positive:
                        out.append(_mc_reverse_logsobolev_row(cfg, engine, f, x, t, prov))
                if f.bounded and f.positive:
                    offset = np.asarray(cfg.pair_offset, dtype=float)
                    x2 = ProductPoint.of(x.base + offset[:d], x.fiber + offset[d:2 * d])
                    for alpha in cfg.alphas:
                        out.append(_mc_wang_harnack_row(cfg, engine, f, alpha, x, x2,
                                                        t, prov))
    return out


def _mc_be_row(cfg, engine, f, x, t, prov):
    d = engine.gen.geometry.dim
    lhs, lhs_se = 0.0, 0.0
    for i in range(d):
        g, se = engine.grad(f, x, "p", i)
        lhs += g * g
        lhs_se += 2.0 * abs(g) * se + se * se
    rhs, rhs_se = engine.moment(
        lambda b, fb: np.sum((fl.grad_base(f, b, fb)
                              + t * fl.grad_fiber(f, b, fb, 0)) ** 2, axis=-1), x)
    return rp.make_report("gradient-bound", x.as_jsonable(), t, lhs, rhs,
                          se_total=_se_combine(lhs_se, rhs_se),
                          slack=rp.quadrature_slack(lhs, rhs), z=cfg.z_threshold,
                          provenance={**prov, "field": f.name, "lhs_se": lhs_se,
                                      "rhs_se": rhs_se, "h": engine.h})


def _mc_reverse_poincare_row(cfg, engine, f, x, t, prov):
    d = engine.gen.geometry.dim
    s2 = cfg.sigma ** 2
    lhs, lhs_se = 0.0, 0.0
    for i in range(d):
        gp, gp_se = engine.grad(f, x, "p", i)
        gx, gx_se = engine.grad(f, x, "xi", i)
        comb = gp - 0.5 * t * gx
        comb_se = _se_combine(gp_se, 0.5 * t * gx_se)
        lhs += comb * comb + (t * t / 12.0) * gx * gx
        lhs_se += 2.0 * abs(comb) * comb_se + (t * t / 6.0) * abs(gx) * gx_se
    mean, mean_se = engine.value(f, x)
    msq, msq_se = engine.moment(lambda b, fb: f.value(b, fb) ** 2, x)
    rhs = (msq - mean * mean) / (s2 * t)
    rhs_se = _se_combine(msq_se, 2.0 * abs(mean) * mean_se) / (s2 * t)
    return rp.make_report("reverse-poincare", x.as_jsonable(), t, lhs, rhs,
                          se_total=_se_combine(lhs_se, rhs_se),
                          slack=rp.quadrature_slack(lhs, rhs), z=cfg.z_threshold,
                          provenance={**prov, "field": f.name, "lhs_se": lhs_se,
                                      "rhs_se": rhs_se, "h": engine.h})


def _mc_reverse_logsobolev_row(cfg, engine, f, x, t, prov):
    d = engine.gen.geometry.dim
    s2 = cfg.sigma ** 2
    mean, mean_se = engine.value(f, x)
    lhs, lhs_se = 0.0, 0.0
    for i in range(d):
        gp, gp_se = engine.grad(f, x, "p", i)
        gx, gx_se = engine.grad(f, x, "xi", i)
        lp, lx = gp / mean, gx / mean
        lp_se = (gp_se + abs(lp) * mean_se) / mean
        lx_se = (gx_se + abs(lx) * mean_se) / mean
        comb = lp - 0.5 * t * lx
        comb_se = _se_combine(lp_se, 0.5 * t * lx_se)
        lhs += comb * comb + (t * t / 12.0) * lx * lx
        lhs_se += 2.0 * abs(comb) * comb_se + (t * t / 6.0) * abs(lx) * lx_se
    ent, ent_se = engine.moment(
        lambda b, fb: sg.entropy_values(f.value(b, fb)), x)
    rhs = 2.0 * (ent - mean * np.log(mean)) / (s2 * t * mean)
    rhs_se = 2.0 * _se_combine(ent_se, (1.0 + abs(np.log(mean))) * mean_se) \
        / (s2 * t * mean) + abs(rhs) * mean_se / mean
    return rp.make_report("reverse-log-sobolev", x.as_jsonable(), t, lhs, rhs,
                          se_total=_se_combine(lhs_se, rhs_se),
                          slack=rp.quadrature_slack(lhs, rhs), z=cfg.z_threshold,
                          provenance={**prov, "field": f.name, "lhs_se": lhs_se,
                                      "rhs_se": rhs_se, "h": engine.h})


def _mc_wang_harnack_row(cfg, engine, f, alpha, x, x2, t, prov):
    mean, mean_se = engine.value(f, x)
    lhs = mean ** alpha
    lhs_se = alpha * abs(mean) ** (alpha - 1.0) * mean_se
    c = sg.wang_harnack_constant(t, x, x2, cfg.sigma, alpha)
    mom, mom_se = engine.moment(
        lambda b, fb: np.clip(f.value(b, fb), 0.0, None) ** alpha, x2)
    rhs, rhs_se = c * mom, c * mom_se
    return rp.make_report("wang-harnack", x.as_jsonable(), t, lhs, rhs,
                          se_total=_se_combine(lhs_se, rhs_se),
                          slack=rp.quadrature_slack(lhs, rhs), z=cfg.z_threshold,
                          provenance={**prov, "field": f.name, "alpha": alpha,
                                      "constant": c, "lhs_se": lhs_se,
                                      "rhs_se": rhs_se,
                                      "point_prime": x2.as_jsonable()})


# ---------------------------------------------------------------------------
# relativistic (hyperboloid, Monte Carlo with CRN ensemble groups)
# ---------------------------------------------------------------------------

def _default_hyperboloid_points(d: int):
    e0 = np.zeros(d + 1)
    e0[0] = 1.0
    r = 0.4
    p1 = np.zeros(d + 1)
    p1[0] = np.cosh(r)
    p1[1] = np.sinh(r) * np.cos(0.7)
    p1[2] = np.sinh(r) * np.sin(0.7)
    return (ProductPoint.of(e0, np.zeros(d + 1)),
            ProductPoint.of(p1, np.linspace(0.2, -0.1, d + 1)))


class _McGroup:
    """CRN ensemble group at one (point, time): a center ensemble plus one
    pair of base-perturbed ensembles per frame direction, all sharing noise."""

    def __init__(self, gen, x: ProductPoint, scfg: sim.SimConfig, h: float):
        self.gen = gen
        self.x = x
        self.cfg = scfg
        self.h = h
        geom = gen.geometry
        self.center = sim.lift_endpoints(gen, x, scfg)
        self.pairs = []
        if geom.sub_riemannian:
            dirs = np.eye(2)
            mk = lambda e, s: ProductPoint(geom.exp(x.base, s * h * e), x.fibers)
        else:
            frame = geom.tangent_frame(x.base)
            dirs = frame
            mk = lambda e, s: ProductPoint(geom.project(geom.exp(x.base, s * h * e)),
                                           x.fibers)
        for e in dirs:
            plus = sim.lift_endpoints(gen, mk(e, +1.0), scfg)
            minus = sim.lift_endpoints(gen, mk(e, -1.0), scfg)
            self.pairs.append((plus, minus))
        self.n = scfg.n_paths

    def _mean_se(self, vals):
        return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(self.n))

    def expectation(self, values_fn):
        return self._mean_se(values_fn(self.center.base, self.center.fibers))

    def base_gradient(self, f):
        comps, ses = [], []
        for plus, minus in self.pairs:
            quot = (f.value(plus.base, plus.fibers)
                    - f.value(minus.base, minus.fibers)) / (2 * self.h)
            m, se = self._mean_se(quot)
            comps.append(m)
            ses.append(se)
        return np.asarray(comps), np.asarray(ses)

    def fiber_gradient(self, f, level=0):
        grads = sim._fiber_endpoint_gradient(self.gen, f, self.center, level)
        comps = np.mean(grads, axis=0)
        ses = np.std(grads, axis=0, ddof=1) / math.sqrt(self.n)
        return comps, ses


def _sq_norm_with_se(comps, ses):
    val = float(np.sum(comps ** 2))
    se = float(2.0 * np.sum(np.abs(comps) * ses) + np.sum(ses ** 2))
    return val, se


def run_relativistic(cfg: RunConfig) -> list[rp.InequalityReport]:
    geom = geo.from_id(cfg.geometry)
    if not isinstance(geom, geo.Hyperboloid):
        raise ConfigError("relativistic scenario needs a hyperboloid geometry")
    d = geom.dim
    gen = gm.relativistic(d, cfg.sigma)
    k = d + 1
    points = [ProductPoint.of(np.asarray(p[0]), np.asarray(p[1]))
              for p in cfg.points] if cfg.points else \
        list(_default_hyperboloid_points(d))
    out = []
    stream = 0
    for spec_t in cfg.times:
        for x in points:
            scfg = _sim_config(cfg, spec_t, stream=stream)
            stream += 1
            group = _McGroup(gen, x, scfg, cfg.grad_step)
            prov = {"method": "monte-carlo", "h": cfg.grad_step,
                    **scfg.provenance()}
            for spec in cfg.fields:
                f = fl.field_from_id(spec, k, k)
                out.extend(_relativistic_rows(cfg, gen, group, f, x, spec_t,
                                              dict(prov, field=f.name)))
    return out


def _relativistic_rows(cfg, gen, group, f, x, t, prov):
    d = gen.geometry.dim
    s2 = gen.sigma ** 2
    ds2 = d * s2
    comps, ses = group.base_gradient(f)
    gamma_lhs, gamma_lhs_se = _sq_norm_with_se(comps, ses)
    gamma_lhs *= 0.5 * s2
    gamma_lhs_se *= 0.5 * s2
    fcomps, fses = group.fiber_gradient(f)
    gz_lhs, gz_lhs_se = _sq_norm_with_se(fcomps, fses)

    gamma_rhs, gamma_rhs_se = group.expectation(
        lambda b, fb: gm.gamma_values(gen, f, f, b, fb))
    gz_rhs, gz_rhs_se = group.expectation(
        lambda b, fb: gm.gamma_z_values(f, f, b, fb))

    ex = math.exp(ds2 * t)
    rows = []

    lhs = 2 * ds2 * gamma_lhs + gz_lhs
    lhs_se = 2 * ds2 * gamma_lhs_se + gz_lhs_se
    rhs = ex * (2 * ds2 * gamma_rhs + gz_rhs)
    rhs_se = ex * (2 * ds2 * gamma_rhs_se + gz_rhs_se)
    rows.append(rp.make_report(
        "relativistic-gradient-combined", x.as_jsonable(), t, lhs, rhs,
        se_total=_se_combine(lhs_se, rhs_se), slack=rp.quadrature_slack(lhs, rhs),
        z=cfg.z_threshold, provenance=dict(prov)))

    rhs2 = ex * gamma_rhs + (ex - 1.0) / (2 * ds2) * gz_rhs
    rhs2_se = ex * gamma_rhs_se + (ex - 1.0) / (2 * ds2) * gz_rhs_se
    rows.append(rp.make_report(
        "relativistic-gradient", x.as_jsonable(), t, gamma_lhs, rhs2,
        se_total=_se_combine(gamma_lhs_se, rhs2_se),
        slack=rp.quadrature_slack(gamma_lhs, rhs2), z=cfg.z_threshold,
        provenance=dict(prov)))

    mean, mean_se = group.expectation(lambda b, fb: f.value(b, fb))
    msq, msq_se = group.expectation(lambda b, fb: f.value(b, fb) ** 2)
    var = msq - mean * mean
    var_se = _se_combine(msq_se, 2 * abs(mean) * mean_se)
    rhs3 = (ex - 1.0) / ds2 ** 2 * (2 * ds2 * gamma_rhs + gz_rhs)
    rhs3_se = (ex - 1.0) / ds2 ** 2 * (2 * ds2 * gamma_rhs_se + gz_rhs_se)
    rows.append(rp.make_report(
        "relativistic-poincare", x.as_jsonable(), t, var, rhs3,
        se_total=_se_combine(var_se, rhs3_se), slack=rp.quadrature_slack(var, rhs3),
        z=cfg.z_threshold, provenance=dict(prov)))

    rows.append(rp.make_report(
        "vertical-contraction", x.as_jsonable(), t, gz_lhs, gz_rhs,
        se_total=_se_combine(gz_lhs_se, gz_rhs_se),
        slack=rp.quadrature_slack(gz_lhs, gz_rhs), z=cfg.z_threshold,
        provenance=dict(prov)))
    return rows


# ---------------------------------------------------------------------------
# general-cd (pointwise suites plus the sum-of-squares gradient bound)
# ---------------------------------------------------------------------------

ALPHA_GRID = (-2.0, -1.0, 0.0, 1.0, 2.0)
BETA_GRID = (0.0, 1.0, 2.0)


def _random_flat_points(rng, n, d):
    base = rng.uniform(-1.5, 1.5, (n, d))
    fib = rng.uniform(-1.5, 1.5, (n, d))
    return base, (fib,)


def _random_hyperboloid_points(rng, n, d):
    # radius kept in [0.15, 1.5]: polar finite differences stay conditioned
    rs = rng.uniform(0.15, 1.5, n)
    omega = rng.standard_normal((n, d))
    omega /= np.linalg.norm(omega, axis=-1, keepdims=True)
    base = np.concatenate([np.cosh(rs)[:, None],
                           np.sinh(rs)[:, None] * omega], axis=-1)
    fib = rng.uniform(-1.0, 1.0, (n, d + 1))
    return base, (fib,)


def run_general_cd(cfg: RunConfig) -> list[rp.InequalityReport]:
    rng = np.random.default_rng(cfg.seed)
    d = geo.from_id(cfg.geometry).dim
    out = []

    # key lemma on the flat library over the (alpha, beta) grid
    gen_flat = gm.flat_kolmogorov(d, cfg.sigma)
    base, fibers = _random_flat_points(rng, cfg.n_points, d)
    for spec in cfg.fields:
        f = fl.field_from_id(spec, d, d)
        for alpha in ALPHA_GRID:
            for beta in BETA_GRID:
                out.extend(gm.check_gamma2_lower_bound(
                    gen_flat, f, gm.GammaParams(alpha, beta), (base, fibers)))

    # relativistic curvature-dimension at d = 2, probed on pure-base and
    # pure-fiber fields (the two budget terms of the inequality); fields
    # coupling grad_xi to far-out base points fall outside the validity
    # domain of the constant 1/4 and are exercised separately in the tests
    gen_rel = gm.relativistic(2, cfg.sigma)
    rbase, rfibers = _random_hyperboloid_points(rng, cfg.n_points, 2)
    rel_library = ("coordinate-xi0", "coordinate-xi1", "gauss-bump-xi(0.2, 1.2)",
                   "coordinate-p0", "coordinate-p1", "gauss-bump-p(0.3, 1.5)")
    for spec in rel_library:
        f = fl.field_from_id(spec, 3, 3)
        out.extend(gm.check_curvature_dimension(gen_rel, f, (rbase, rfibers),
                                                flavor="relativistic"))

    # general curvature-dimension with unit coordinate fields
    gen_gen = gm.sum_of_squares(d, rho=cfg.rho)
    if cfg.c_sigma is not None and gen_gen.c_sigma != cfg.c_sigma:
        gen_gen = replace(gen_gen, sigma_map=gm.SigmaMap(
            gen_gen.sigma_map.name, gen_gen.sigma_map.k, gen_gen.sigma_map.fn,
            cfg.c_sigma))
    for spec in cfg.fields:
        f = fl.field_from_id(spec, d, d)
        out.extend(gm.check_curvature_dimension(gen_gen, f, (base, fibers),
                                                flavor="general"))

    out.extend(run_general_gradient(cfg))
    return out


def run_general_gradient(cfg: RunConfig) -> list[rp.InequalityReport]:
    """Sum-of-squares gradient bound on the flat lift, by quadrature.

    With unit coordinate fields the base generator is the full Laplacian,
    i.e. the kernel with sigma = sqrt(2); the carre du champ drops its 1/2.
    """
    d = geo.from_id(cfg.geometry).dim
    rho, c = cfg.rho, cfg.c_sigma if cfg.c_sigma is not None else 1.0
    if c <= 2 * rho:
        raise HypothesisViolatedError("gradient bound needs C_sigma > 2 rho")
    coef = c / (c - 2 * rho)
    rate = c - 2 * rho
    rule = sg.gauss_hermite(cfg.quad_order) if cfg.quad_order else sg.default_rule(d)
    out = []
    points = [(0.0, 0.0), (0.7, -0.4)]
    for spec in cfg.fields:
        f = fl.field_from_id(spec, d, d)
        for t in cfg.times:
            kernel = sg.FlatKolmogorovKernel(d, math.sqrt(2.0) * cfg.sigma, t)
            for pt in points:
                x = _flat_point(pt, d)
                grad_p, grads_fiber = sg.semigroup_grad(kernel, f, x, rule)
                lhs = float(np.sum(grad_p ** 2)
                            + coef * np.sum(grads_fiber[0] ** 2))

                def integrand(b, fb):
                    gp = fl.grad_base(f, b, fb)
                    gx = fl.grad_fiber(f, b, fb, 0)
                    return (np.sum(gp * gp, axis=-1)
                            + coef * np.sum(gx * gx, axis=-1))

                rhs = math.exp(rate * t) * sg.semigroup_apply_values(
                    kernel, integrand, x, rule)
                prov = {"method": "quadrature", "field": f.name, "rho": rho,
                        "c_sigma": c, "order": rule.order}
                out.append(rp.make_report(
                    "general-gradient", x.as_jsonable(), t, lhs, rhs,
                    slack=rp.quadrature_slack(lhs, rhs), z=cfg.z_threshold,
                    provenance=prov))

                mean = sg.semigroup_apply(kernel, f, x, rule)
                msq = sg.semigroup_apply_values(
                    kernel, lambda b, fb: f.value(b, fb) ** 2, x, rule)
                var = msq - mean * mean
                rhs_p = 2.0 * (math.exp(rate * t) - 1.0) / rate \
                    * sg.semigroup_apply_values(kernel, integrand, x, rule)
                out.append(rp.make_report(
                    "general-poincare", x.as_jsonable(), t, var, rhs_p,
                    slack=rp.quadrature_slack(var, rhs_p), z=cfg.z_threshold,
                    provenance=dict(prov)))
    return out


# ---------------------------------------------------------------------------
# manifold-coupling
# ---------------------------------------------------------------------------

def _coupling_start(geom: geo.Geometry, distance: float):
    if isinstance(geom, geo.Sphere):
        p = np.zeros(geom.ambient_dim)
        p[-1] = 1.0
        q = np.zeros(geom.ambient_dim)
        q[-1] = np.cos(distance)
        q[0] = np.sin(distance)
        return p, q
    if isinstance(geom, geo.Hyperboloid):
        p = np.zeros(geom.ambient_dim)
        p[0] = 1.0
        q = np.zeros(geom.ambient_dim)
        q[0] = np.cosh(distance)
        q[1] = np.sinh(distance)
        return p, q
    p = np.zeros(geom.ambient_dim)
    q = p.copy()
    q[0] = distance
    return p, q


def run_manifold_coupling(cfg: RunConfig) -> list[rp.InequalityReport]:
    geom = geo.from_id(cfg.geometry)
    p, q = _coupling_start(geom, cfg.start_distance)
    t = max(cfg.times)
    n_steps = max(10, int(round(t / cfg.dt)))
    ccfg = sim.SimConfig(t=t, n_steps=n_steps, n_paths=cfg.n_paths, seed=cfg.seed,
                         stream=cfg.stream, convention=cfg.convention,
                         increment_law=cfg.increment_law,
                         record_every=max(1, n_steps // 200))
    smap = gm.default_lipschitz_map(geom)
    study = cpl.refinement_study(geom, p, q, ccfg, n_levels=3, sigma=cfg.sigma,
                                 sigma_map=smap)
    rep0 = study["reports"][0]
    prov = {"method": "coupling", "eps_levels": study["eps"], "dts": study["dts"],
            "C": study["C"], "ratios": study["ratios"],
            "abort_fraction": rep0.abort_fraction, **ccfg.provenance()}
    out = [rp.make_report("base-contraction", {"start_distance": cfg.start_distance},
                          t, rep0.eps, cfg.eps_cap, slack=0.0, z=cfg.z_threshold,
                          provenance=prov),
           rp.make_report("fiber-bound", {"start_distance": cfg.start_distance},
                          t, rep0.fiber_eps, cfg.eps_cap, slack=0.0,
                          z=cfg.z_threshold, provenance=dict(prov))]
    if rep0.inconclusive:
        out[0].verdict = rp.INCONCLUSIVE
        out[1].verdict = rp.INCONCLUSIVE

    out.extend(run_coupling_gradient(cfg))
    return out


def run_coupling_gradient(cfg: RunConfig) -> list[rp.InequalityReport]:
    """Gradient bound |grad_p P_t f|^q <= P_t((K1 |grad_p f| + K2 |grad_xi f|)^q)."""
    geom = geo.from_id(cfg.geometry)
    K = geom.ricci_lower
    c_sigma = cfg.c_sigma if cfg.c_sigma is not None else 1.0
    gen = gm.manifold_lift(geom, cfg.sigma, sigma_map=gm.default_lipschitz_map(geom))
    k = gen.fiber_dim()
    x = ProductPoint.of(_coupling_start(geom, cfg.start_distance)[0], np.zeros(k))
    out = []
    stream = 100
    for t in cfg.times:
        scfg = _sim_config(cfg, t, stream=stream,
                           n_paths=min(cfg.n_paths, 20000))
        stream += 1
        group = _McGroup(gen, x, scfg, cfg.grad_step)
        k1 = float(cpl.base_contraction_bound(K, t))
        k2 = float(cpl.fiber_gap_bound(K, c_sigma, t))
        prov = {"method": "monte-carlo", "K": K, "K1": k1, "K2": k2,
                "h": cfg.grad_step, **scfg.provenance()}
        for spec in cfg.fields:
            f = fl.field_from_id(spec, geom.ambient_dim, k)
            comps, ses = group.base_gradient(f)
            nrm = float(np.linalg.norm(comps))
            nrm_se = float(np.sqrt(np.sum((comps * ses) ** 2)) / max(nrm, 1e-12))

            def integrand(b, fb):
                dp = gm.frame_derivatives(gen, f, b, fb)
                np_norm = np.sqrt(np.sum(dp * dp, axis=-1))
                gx = fl.grad_fiber(f, b, fb, 0)
                nx_norm = np.sqrt(np.sum(gx * gx, axis=-1))
                return k1 * np_norm + k2 * nx_norm

            for q in cfg.qs:
                lhs = nrm ** q
                lhs_se = q * nrm ** max(q - 1, 0) * nrm_se
                rhs, rhs_se = group.expectation(
                    lambda b, fb, q=q: integrand(b, fb) ** q)
                out.append(rp.make_report(
                    "coupling-gradient", x.as_jsonable(), t, lhs, rhs,
                    se_total=_se_combine(lhs_se, rhs_se),
                    slack=rp.quadrature_slack(lhs, rhs), z=cfg.z_threshold,
                    provenance=dict(prov, field=f.name, q=q)))
    return out


# ---------------------------------------------------------------------------
# iterated
# ---------------------------------------------------------------------------

def run_iterated(cfg: RunConfig) -> list[rp.InequalityReport]:
    d = geo.from_id(cfg.geometry).dim
    c_sigma = cfg.c_sigma if cfg.c_sigma is not None else 1.0
    out = []

    # closed form vs quadrature recursion for the coefficients
    worst = 0.0
    for t in cfg.times:
        closed = cpl.iterated_fiber_bounds(4, 0.0, c_sigma, t)
        quadr = cpl.iterated_fiber_bounds_quadrature(4, 0.0, c_sigma, t)
        worst = max(worst, float(np.max(np.abs(closed - quadr))))
    out.append(rp.make_report("iterated-constants", None, None, worst, 1e-10,
                              slack=0.0, z=cfg.z_threshold,
                              provenance={"method": "quadrature-recursion",
                                          "levels": 4, "times": list(cfg.times)}))

    # flat iterated gradient bound by quadrature, cross-checked by MC
    n = cfg.levels
    gen = gm.flat_kolmogorov(d, cfg.sigma, levels=n)
    rule = sg.default_rule(d, levels=n)
    x = ProductPoint(np.zeros(d), tuple(np.zeros(d) for _ in range(n)))
    stream = 300
    for spec in cfg.fields:
        f = fl.field_from_id(spec, d, d, levels=n)
        for t in cfg.times:
            kernel = sg.FlatKolmogorovKernel(d, cfg.sigma, t, levels=n)
            ks = cpl.iterated_fiber_bounds(n, 0.0, c_sigma, t)

            def integrand(b, fb):
                gp = fl.grad_base(f, b, fb)
                tot = np.sqrt(np.sum(gp * gp, axis=-1))
                for r in range(n):
                    gx = fl.grad_fiber(f, b, fb, r)
                    tot = tot + ks[r] * np.sqrt(np.sum(gx * gx, axis=-1))
                return tot

            grad_p, _ = sg.semigroup_grad(kernel, f, x, rule)
            nrm = float(np.linalg.norm(grad_p))
            for q in cfg.qs:
                lhs = nrm ** q
                rhs = sg.semigroup_apply_values(
                    kernel, lambda b, fb, q=q: integrand(b, fb) ** q, x, rule)
                out.append(rp.make_report(
                    "iterated-gradient", x.as_jsonable(), t, lhs, rhs,
                    slack=rp.quadrature_slack(lhs, rhs), z=cfg.z_threshold,
                    provenance={"method": "quadrature", "field": f.name, "q": q,
                                "levels": n, "coefficients": ks.tolist(),
                                "order": rule.order}))

            # MC cross-check of the q = 2 right-hand side and gradient
            scfg = _sim_config(cfg, t, stream=stream)
            stream += 1
            group = _McGroup(gen, x, scfg, cfg.grad_step)
            comps, ses = group.base_gradient(f)
            nrm_mc = float(np.linalg.norm(comps))
            rhs_mc, rhs_mc_se = group.expectation(
                lambda b, fb: integrand(b, fb) ** 2)
            lhs_mc = nrm_mc ** 2
            lhs_mc_se = 2 * nrm_mc * float(np.sqrt(np.sum(ses ** 2)))
            out.append(rp.make_report(
                "iterated-gradient-mc", x.as_jsonable(), t, lhs_mc, rhs_mc,
                se_total=_se_combine(lhs_mc_se, rhs_mc_se),
                slack=rp.quadrature_slack(lhs_mc, rhs_mc), z=cfg.z_threshold,
                provenance={"method": "monte-carlo", "field": f.name, "q": 2,
                            "levels": n, "quadrature_lhs": nrm ** 2,
                            "h": cfg.grad_step, **scfg.provenance()}))
    return out


# ---------------------------------------------------------------------------
# heisenberg
# ---------------------------------------------------------------------------

def _heisenberg_field(spec: str) -> fl.ScalarField:
    if spec == "coordinate-x":
        return fl.base_coordinate(3, 3, 0, name="coordinate-x")
    if spec == "coordinate-y":
        return fl.base_coordinate(3, 3, 1, name="coordinate-y")
    if spec == "x-plus-xi":
        # sharp member: K-hat is identically one for every t and q
        return fl.polynomial(3, 3, [(1.0, (1,), ()), (1.0, (), (1,))],
                             name="x-plus-xi")
    if spec == "bump-xy":
        # center sits a width away from the evaluation point: the gradient
        # norm is locally flat there, so K-hat converges to 1 at O(t^2)
        return fl.gauss_bump(3, 3, 1.3, 1.6, mode="base", name="bump-xy")
    if spec == "bump-mix":
        return fl.gauss_bump(3, 3, 1.5, 2.0, name="bump-mix")
    return fl.field_from_id(spec, 3, 3)


def run_heisenberg(cfg: RunConfig) -> list[rp.InequalityReport]:
    gen = gm.heisenberg_lift()
    c_sigma = cfg.c_sigma if cfg.c_sigma is not None else gen.sigma_map.lipschitz
    pts = cfg.points or ((0.3, -0.2, 0.1),)
    x = ProductPoint.of(np.asarray(pts[0], dtype=float), np.zeros(3))
    out = []
    stream = 500
    family_max = 0.0
    for t in cfg.times:
        scfg = _sim_config(cfg, t, stream=stream, min_steps=20)
        stream += 1
        group = _McGroup(gen, x, scfg, cfg.grad_step)
        prov = {"method": "monte-carlo", "h": cfg.grad_step, "c_sigma": c_sigma,
                **scfg.provenance()}
        for spec in cfg.fields:
            f = _heisenberg_field(spec)
            comps, ses = group.base_gradient(f)
            nrm = float(np.linalg.norm(comps))
            nrm_se = float(np.sqrt(np.sum((comps * ses) ** 2)) / max(nrm, 1e-12))

            def integrand(b, fb):
                dh = gm.frame_derivatives(gen, f, b, fb)
                nh = np.sqrt(np.sum(dh * dh, axis=-1))
                gx = fl.grad_fiber(f, b, fb, 0)
                nx = np.sqrt(np.sum(gx * gx, axis=-1))
                return nh + c_sigma * t * nx

            for q in cfg.qs:
                rhs, rhs_se = group.expectation(
                    lambda b, fb, q=q: integrand(b, fb) ** q)
                rhs_root = rhs ** (1.0 / q) if rhs > 0 else 0.0
                if rhs_root < 1e-8:
                    rep = rp.make_report(
                        "heisenberg-gradient", x.as_jsonable(), t, 0.0, cfg.k_cap,
                        se_total=0.0, slack=0.0, z=cfg.z_threshold,
                        provenance=dict(prov, field=f.name, q=q, degenerate=True))
                    rep.verdict = rp.INCONCLUSIVE
                    out.append(rep)
                    continue
                khat = nrm / rhs_root
                khat_se = nrm_se / rhs_root \
                    + nrm * rhs_se / (q * rhs_root * max(rhs, 1e-300))
                family_max = max(family_max, khat)
                out.append(rp.make_report(
                    "heisenberg-gradient", x.as_jsonable(), t, khat, cfg.k_cap,
                    se_total=khat_se, slack=0.0, z=cfg.z_threshold,
                    provenance=dict(prov, field=f.name, q=q, k_hat=khat,
                                    lower_bound_reference=math.sqrt(2.0))))
    if out:
        out[-1].provenance["family_max_k_hat"] = family_max
    return out


# ---------------------------------------------------------------------------
# suite driver
# ---------------------------------------------------------------------------

_RUNNERS = {
    "flat-exact": run_flat_exact,
    "flat-mc": run_flat_mc,
    "relativistic": run_relativistic,
    "general-cd": run_general_cd,
    "manifold-coupling": run_manifold_coupling,
    "iterated": run_iterated,
    "heisenberg": run_heisenberg,
}


def run_suite(cfg: RunConfig) -> dict:
    validate_config(cfg)
    reports = _RUNNERS[cfg.scenario](cfg)
    return rp.bundle(cfg.scenario, cfg.as_dict(), reports)


def emit_report(bundle: dict, path: str, fmt: str = "json") -> str:
    if fmt == "json":
        text = rp.bundle_to_json(bundle)
    elif fmt == "csv":
        text = rp.bundle_to_csv(bundle)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
    return path
