import math

import numpy as np
import pytest

from kolmodiff import fields as fl
from kolmodiff import gamma as gmod
from kolmodiff import geometry as geo
from kolmodiff import semigroup as sg
from kolmodiff import sim
from kolmodiff.errors import VarianceUnsafeError
from kolmodiff.fields import ProductPoint

GEN1 = gmod.flat_kolmogorov(1)


def test_bitwise_reproducibility():
    gen = gmod.flat_kolmogorov(1)
    cfg = sim.SimConfig(t=1.0, n_steps=100, n_paths=500, seed=11, stream=3)
    a = sim.lift_endpoints(gen, ProductPoint.of([0.0], [0.0]), cfg)
    b = sim.lift_endpoints(gen, ProductPoint.of([0.0], [0.0]), cfg)
    assert np.array_equal(a.base, b.base)
    assert np.array_equal(a.fibers[0], b.fibers[0])
    other = sim.SimConfig(t=1.0, n_steps=100, n_paths=500, seed=11, stream=4)
    c = sim.lift_endpoints(gen, ProductPoint.of([0.0], [0.0]), other)
    assert not np.array_equal(a.base, c.base)


def test_euclidean_variance():
    cfg = sim.SimConfig(t=1.0, n_steps=200, n_paths=30000, seed=1)
    path = sim.simulate_bm(geo.Euclidean(1), np.zeros(1), cfg)
    end = path.points[-1][:, 0]
    se = end.std(ddof=1) ** 2 * math.sqrt(2.0 / (len(end) - 1))
    assert abs(end.var(ddof=1) - 1.0) < 4 * se + 1e-3


def test_sphere_harmonic_decay():
    # <x0, B_t> is a degree-one harmonic: mean decays like e^{-t} on S^2
    cfg = sim.SimConfig(t=1.0, n_steps=800, n_paths=30000, seed=2)
    x0 = np.array([0.0, 0.0, 1.0])
    path = sim.simulate_bm(geo.Sphere(2), x0, cfg)
    vals = path.points[-1] @ x0
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - math.exp(-1.0)) < 4 * se + 2e-3


def test_hyperboloid_constraint_and_mean_growth():
    # q(B_t, B_t) = 1 exactly after projection; E p0(B_t) = e^{d t / 2}
    cfg = sim.SimConfig(t=0.5, n_steps=400, n_paths=30000, seed=3)
    e0 = np.array([1.0, 0.0, 0.0])
    path = sim.simulate_bm(geo.Hyperboloid(2), e0, cfg)
    end = path.points[-1]
    assert np.max(np.abs(geo.minkowski_form(end, end) - 1.0)) < 1e-12
    vals = end[:, 0]
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - math.exp(0.5)) < 4 * se + 2e-3


def test_heisenberg_bm_moments():
    cfg = sim.SimConfig(t=1.0, n_steps=1000, n_paths=30000, seed=4)
    path = sim.simulate_heisenberg_bm(np.array([0.0, 0.0, 0.7]), cfg)
    end = path.points[-1]
    n = end.shape[0]
    # planar marginal is standard BM; the area integral is a centered
    # martingale with Var = t^2 / 4 from the origin
    assert abs(end[:, 0].var(ddof=1) - 1.0) < 4 * math.sqrt(2.0 / n) + 2e-3
    se_z = end[:, 2].std(ddof=1) / math.sqrt(n)
    assert abs(end[:, 2].mean() - 0.7) < 4 * se_z
    var_z = (end[:, 2] - 0.7).var(ddof=1)
    se_var = var_z * math.sqrt(2.0 / (n - 1))
    assert abs(var_z - 0.25) < 4 * se_var + 2e-3


def test_heisenberg_area_fine_step_oracle():
    # a much finer grid serves as ground truth for the area variance
    fine = sim.SimConfig(t=1.0, n_steps=20000, n_paths=4000, seed=5)
    coarse = sim.SimConfig(t=1.0, n_steps=500, n_paths=4000, seed=6)
    vf = sim.simulate_heisenberg_bm(np.zeros(3), fine).points[-1][:, 2].var(ddof=1)
    vc = sim.simulate_heisenberg_bm(np.zeros(3), coarse).points[-1][:, 2].var(ddof=1)
    se = 0.25 * math.sqrt(2.0 / 3999)
    assert abs(vf - vc) < 8 * se + 5e-3


def test_heisenberg_midpoint_equals_ito_update():
    # the midpoint area update coincides algebraically with the Ito sum
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(1000), rng.standard_normal(1000)
    dx, dy = 0.03 * rng.standard_normal(1000), 0.03 * rng.standard_normal(1000)
    midpoint = 0.5 * ((x + dx / 2) * dy - (y + dy / 2) * dx)
    ito = 0.5 * (x * dy - y * dx)
    assert np.max(np.abs(midpoint - ito)) < 1e-15


def test_lift_exact_for_constant_map():
    gen = gmod.GeneratorSpec(geometry=geo.Euclidean(1), sigma=1.0,
                             sigma_map=gmod.constant_map([2.0]), levels=3)
    cfg = sim.SimConfig(t=1.5, n_steps=64, n_paths=8, seed=1)
    x = ProductPoint(np.zeros(1), tuple(np.zeros(1) for _ in range(3)))
    s = sim.lift_endpoints(gen, x, cfg)
    for r in range(3):
        want = 2.0 * 1.5 ** (r + 1) / math.factorial(r + 1)
        assert np.max(np.abs(s.fibers[r] - want)) < 1e-12


def test_lift_level_one_variance():
    # Var(int_0^1 B) = 1/3 for the identity map started at zero
    cfg = sim.SimConfig(t=1.0, n_steps=1000, n_paths=30000, seed=7)
    s = sim.lift_endpoints(GEN1, ProductPoint.of([0.0], [0.0]), cfg)
    v = s.fibers[0][:, 0].var(ddof=1)
    se = (1.0 / 3.0) * math.sqrt(2.0 / (cfg.n_paths - 1))
    assert abs(v - 1.0 / 3.0) < 4 * se + 2e-3


def test_mc_semigroup_constant_field():
    const = fl.polynomial(1, 1, [(2.5, (), ())], name="c")
    cfg = sim.SimConfig(t=0.5, n_steps=50, n_paths=200, seed=8)
    est = sim.mc_semigroup(GEN1, const, ProductPoint.of([0.3], [0.1]), cfg)
    assert est.value == pytest.approx(2.5)
    assert est.se == pytest.approx(0.0, abs=1e-14)
    assert est.method == "monte-carlo"


def test_mc_semigroup_hyperboloid_fiber_oracle():
    # P_t xi_0 at (e0, 0) equals int_0^t e^s ds = e^t - 1 for d = 2
    gen = gmod.relativistic(2)
    f = fl.fiber_coordinate(3, 3, 0)
    t = 0.5
    x = ProductPoint.of([1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    cfg = sim.SimConfig(t=t, n_steps=250, n_paths=30000, seed=9)
    est = sim.mc_semigroup(gen, f, x, cfg)
    want = math.exp(t) - 1.0
    assert abs(est.value - want) < 4 * est.se + 3e-3
    fine = sim.SimConfig(t=t, n_steps=2000, n_paths=8000, seed=10)
    est_fine = sim.mc_semigroup(gen, f, x, fine)
    assert abs(est_fine.value - want) < 4 * est_fine.se + 1e-3


def test_mc_gradient_flat_matches_quadrature():
    f = fl.gauss_bump(1, 1, 0.0, 1.0)
    x = ProductPoint.of([0.4], [-0.2])
    cfg = sim.SimConfig(t=1.0, n_steps=500, n_paths=40000, seed=11)
    est = sim.mc_gradient(GEN1, f, x, cfg, h=1e-2)
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    gp, _ = sg.semigroup_grad(ker, f, x, sg.default_rule(1))
    assert abs(est.components[0] - gp[0]) < 4 * est.ses[0] + 1e-3


def test_mc_gradient_constant_field_and_refusal():
    const = fl.polynomial(1, 1, [(1.0, (), ())], name="c")
    cfg = sim.SimConfig(t=0.5, n_steps=50, n_paths=500, seed=12)
    est = sim.mc_gradient(GEN1, const, ProductPoint.of([0.0], [0.0]), cfg)
    assert est.norm == pytest.approx(0.0, abs=1e-12)
    nocrn = sim.SimConfig(t=0.5, n_steps=50, n_paths=500, seed=12, crn=False)
    with pytest.raises(VarianceUnsafeError):
        sim.mc_gradient(GEN1, const, ProductPoint.of([0.0], [0.0]), nocrn)


def test_mc_gradient_heisenberg_small_time_limit():
    # horizontal gradient of the x coordinate tends to one as t -> 0
    gen = gmod.heisenberg_lift()
    f = fl.base_coordinate(3, 3, 0)
    x = ProductPoint.of([0.2, -0.1, 0.3], [0.0, 0.0, 0.0])
    cfg = sim.SimConfig(t=0.01, n_steps=20, n_paths=20000, seed=13)
    est = sim.mc_gradient(gen, f, x, cfg, h=1e-2)
    assert est.norm == pytest.approx(1.0, abs=1e-6)


def test_fiber_direction_gradient_uses_affine_rule():
    f = fl.gauss_bump(1, 1, 0.0, 1.0)
    x = ProductPoint.of([0.2], [0.1])
    cfg = sim.SimConfig(t=1.0, n_steps=400, n_paths=30000, seed=14)
    est = sim.mc_gradient(GEN1, f, x, cfg, directions="fiber:0")
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    _, gxs = sg.semigroup_grad(ker, f, x, sg.default_rule(1))
    assert abs(est.components[0] - gxs[0][0]) < 4 * est.ses[0] + 1e-3


def test_weak_convergence_under_step_halving():
    f = fl.gauss_bump(1, 1, 0.0, 1.0)
    x = ProductPoint.of([0.3], [0.0])
    a = sim.mc_semigroup(GEN1, f, x,
                         sim.SimConfig(t=1.0, n_steps=250, n_paths=100000, seed=15))
    b = sim.mc_semigroup(GEN1, f, x,
                         sim.SimConfig(t=1.0, n_steps=500, n_paths=100000, seed=15))
    assert abs(a.value - b.value) < 4 * math.hypot(a.se, b.se) + 5e-4


def test_crn_variance_reduction_benchmark():
    # CRN difference quotients beat independent-noise quotients by >= 10x
    f = fl.gauss_bump(1, 1, 0.0, 1.0)
    x = ProductPoint.of([0.4], [0.0])
    h = 1e-2
    cfg = sim.SimConfig(t=1.0, n_steps=200, n_paths=20000, seed=16)
    crn = sim.mc_gradient(GEN1, f, x, cfg, h=h)
    plus = sim.lift_endpoints(GEN1, ProductPoint.of([0.4 + h], [0.0]), cfg)
    minus = sim.lift_endpoints(
        GEN1, ProductPoint.of([0.4 - h], [0.0]),
        sim.SimConfig(t=1.0, n_steps=200, n_paths=20000, seed=17))
    vp = f.value(plus.base, plus.fibers)
    vm = f.value(minus.base, minus.fibers)
    se_indep = math.hypot(vp.std(ddof=1), vm.std(ddof=1)) \
        / (2 * h * math.sqrt(cfg.n_paths))
    assert se_indep > 10 * crn.ses[0]


def test_record_stride_and_path_shapes():
    cfg = sim.SimConfig(t=1.0, n_steps=100, n_paths=7, seed=18, record_every=10)
    path = sim.simulate_bm(geo.Sphere(2), np.array([0.0, 0.0, 1.0]), cfg)
    assert path.points.shape == (11, 7, 3)
    assert path.times[0] == 0.0 and path.times[-1] == pytest.approx(1.0)
    lift = sim.simulate_lift(geo.Euclidean(1), gmod.identity_map(1),
                             np.zeros(1), [np.zeros(1), np.zeros(1)], cfg)
    assert lift.fibers[0].shape == (11, 7, 1)
    assert lift.fibers[1].shape == (11, 7, 1)


def test_sphere_increment_law_preserves_moments():
    cfg = sim.SimConfig(t=1.0, n_steps=800, n_paths=30000, seed=19,
                        increment_law=sim.SPHERE_STEPS)
    x0 = np.array([0.0, 0.0, 1.0])
    path = sim.simulate_bm(geo.Sphere(2), x0, cfg)
    vals = path.points[-1] @ x0
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - math.exp(-1.0)) < 4 * se + 2e-3
