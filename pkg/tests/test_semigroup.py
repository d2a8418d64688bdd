import numpy as np
import pytest

from kolmodiff import fields as fl
from kolmodiff import gamma as gmod
from kolmodiff import semigroup as sg
from kolmodiff import sim
from kolmodiff.errors import BudgetExceededError, FieldClassError, InvalidAlphaError
from kolmodiff.fields import ProductPoint

RULE = sg.default_rule(1)
XI = fl.linear_fiber(1, 1)
ORIGIN = ProductPoint.of([0.0], [0.0])


def test_axis_covariance_single_level():
    ker = sg.FlatKolmogorovKernel(1, 2.0, 3.0)
    c = ker.axis_covariance()
    s2, t = 4.0, 3.0
    want = np.array([[s2 * t, s2 * t * t / 2], [s2 * t * t / 2, s2 * t ** 3 / 3]])
    assert np.allclose(c, want)
    assert np.linalg.det(c) == pytest.approx(s2 ** 2 * t ** 4 / 12)
    assert np.all(np.linalg.eigvalsh(c) > 0)
    with pytest.raises(ValueError):
        sg.FlatKolmogorovKernel(1, 1.0, 0.0)


def test_kernel_moments_match_simulation_oracle():
    # endpoint mean/covariance of the simulated lift agree within 4 SE
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    gen = gmod.flat_kolmogorov(1)
    x = ProductPoint.of([0.7], [-0.2])
    cfg = sim.SimConfig(t=1.0, n_steps=2000, n_paths=40000, seed=31)
    s = sim.lift_endpoints(gen, x, cfg)
    b = s.base[:, 0]
    y = s.fibers[0][:, 0]
    mean = ker.mean(x)
    n = cfg.n_paths
    assert abs(b.mean() - mean[0, 0]) < 4 * b.std() / np.sqrt(n)
    assert abs(y.mean() - mean[1, 0]) < 4 * y.std() / np.sqrt(n)
    cov = ker.axis_covariance()
    for sample, want in ((b.var(), cov[0, 0]), (y.var(), cov[1, 1]),
                         (np.cov(b, y)[0, 1], cov[0, 1])):
        assert abs(sample - want) < 4 * want / np.sqrt(n) + 0.01


def test_quadrature_rule_integrates_gaussian_moments():
    # degree <= 2m - 1 exactness per factor after whitening
    rule = sg.gauss_hermite(8)
    moments = {0: 1.0, 1: 0.0, 2: 1.0, 3: 0.0, 4: 3.0, 6: 15.0, 8: 105.0,
               10: 945.0, 12: 10395.0, 14: 135135.0}
    for k, want in moments.items():
        got = float(np.dot(rule.weights, rule.nodes ** k))
        if k <= 15:
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)
    # degree 2m = 16 is no longer exact
    got = float(np.dot(rule.weights, rule.nodes ** 16))
    assert abs(got - 2027025.0) > 1.0


def test_node_budget_enforced():
    with pytest.raises(BudgetExceededError):
        sg.default_rule(4)
    ker = sg.FlatKolmogorovKernel(3, 1.0, 1.0)
    with pytest.raises(BudgetExceededError):
        sg.semigroup_apply(ker, fl.linear_fiber(3, 3),
                           ProductPoint.of(np.zeros(3), np.zeros(3)),
                           sg.gauss_hermite(60))


def test_semigroup_apply_examples():
    # P_t xi = xi + t p; constants are fixed; P_1 xi^2 (0,0) = 1/3
    ker = sg.FlatKolmogorovKernel(1, 1.0, 2.0)
    x = ProductPoint.of([0.4], [-0.1])
    assert sg.semigroup_apply(ker, XI, x, RULE) == pytest.approx(-0.1 + 2 * 0.4)
    const = fl.polynomial(1, 1, [(5.0, (), ())], name="c")
    assert sg.semigroup_apply(ker, const, x, RULE) == pytest.approx(5.0)
    ker1 = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    xi_sq = fl.polynomial(1, 1, [(1.0, (), (2,))], name="xi^2")
    assert sg.semigroup_apply(ker1, xi_sq, ORIGIN, RULE) == pytest.approx(1.0 / 3.0)


def test_semigroup_property():
    f = fl.polynomial(1, 1, [(1.0, (2,), (1,)), (0.5, (), (2,)), (1.0, (1,), ())],
                      name="mix")
    s_, t_ = 0.4, 0.9
    ker_s = sg.FlatKolmogorovKernel(1, 1.0, s_)
    ker_t = sg.FlatKolmogorovKernel(1, 1.0, t_)
    ker_ts = sg.FlatKolmogorovKernel(1, 1.0, s_ + t_)

    def inner_values(b, fb):
        flat_b = b.reshape(-1, 1)
        flat_f = fb[0].reshape(-1, 1)
        out = [sg.semigroup_apply(ker_s, f, ProductPoint.of(pb, pf), RULE)
               for pb, pf in zip(flat_b, flat_f)]
        return np.asarray(out).reshape(b.shape[:-1])

    inner = fl.function_field("P_s f", 1, 1, inner_values)
    lhs = sg.semigroup_apply(ker_t, inner, ORIGIN, RULE)
    rhs = sg.semigroup_apply(ker_ts, f, ORIGIN, RULE)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_gradient_commutation_matches_fd():
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    f = fl.gauss_bump(1, 1, 0.0, 1.0)
    x = ProductPoint.of([0.4], [0.2])
    gp, gxs = sg.semigroup_grad(ker, f, x, RULE)
    h = 1e-5
    for i, (which, got) in enumerate((("p", gp[0]), ("xi", gxs[0][0]))):
        if which == "p":
            xp = ProductPoint.of([0.4 + h], [0.2])
            xm = ProductPoint.of([0.4 - h], [0.2])
        else:
            xp = ProductPoint.of([0.4], [0.2 + h])
            xm = ProductPoint.of([0.4], [0.2 - h])
        fd = (sg.semigroup_apply(ker, f, xp, RULE)
              - sg.semigroup_apply(ker, f, xm, RULE)) / (2 * h)
        assert got == pytest.approx(fd, abs=1e-6)


def test_semigroup_grad_examples():
    ker = sg.FlatKolmogorovKernel(1, 1.0, 2.0)
    x = ProductPoint.of([0.3], [0.9])
    gp, gxs = sg.semigroup_grad(ker, XI, x, RULE)
    assert gp[0] == pytest.approx(2.0)
    assert gxs[0][0] == pytest.approx(1.0)
    const = fl.polynomial(1, 1, [(2.0, (), ())], name="c")
    gp, gxs = sg.semigroup_grad(ker, const, x, RULE)
    assert gp[0] == pytest.approx(0.0, abs=1e-12)
    assert gxs[0][0] == pytest.approx(0.0, abs=1e-12)
    gp, gxs = sg.semigroup_grad(ker, fl.linear_base(1, 1), x, RULE)
    assert gp[0] == pytest.approx(1.0)
    assert gxs[0][0] == pytest.approx(0.0, abs=1e-12)


def test_gradient_bound_sharp_on_linear_fiber_fields():
    # equality within 1e-8 relative at every t on the grid
    for t in (0.5, 1.0, 2.0, 5.0):
        ker = sg.FlatKolmogorovKernel(1, 1.0, t)
        rep = sg.verify_be_estimate(ker, XI, ORIGIN, RULE)
        assert rep.verdict == "verified"
        assert rep.lhs == pytest.approx(t * t, rel=1e-12)
        assert abs(rep.lhs - rep.rhs) <= 1e-8 * abs(rep.rhs)
        assert rep.provenance["fiber_lhs"] == pytest.approx(1.0)


def test_gradient_bound_strict_for_bumps():
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    rep = sg.verify_be_estimate(ker, fl.gauss_bump(1, 1), ORIGIN, RULE)
    assert rep.verdict == "verified"
    assert rep.rhs - rep.lhs > 1e-3


def test_reverse_poincare_on_bounded_fields():
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    rep = sg.verify_reverse_poincare(ker, fl.tanh_base(1, 1), ORIGIN, RULE)
    assert rep.verdict == "verified"
    for t in (0.1, 1.0, 5.0):
        ker = sg.FlatKolmogorovKernel(1, 1.0, t)
        rule = sg.default_rule(1, t=t)
        rep = sg.verify_reverse_poincare(ker, fl.gauss_bump(1, 1), ORIGIN, rule)
        assert rep.verdict == "verified"
    with pytest.raises(FieldClassError):
        sg.verify_reverse_poincare(ker, XI, ORIGIN, RULE)


def test_reverse_logsobolev_on_positive_fields():
    pb = fl.positive_bump(1, 1, 0.0, 1.0, 0.1)
    for t in (0.25, 1.0, 4.0):
        ker = sg.FlatKolmogorovKernel(1, 1.0, t)
        rule = sg.default_rule(1, t=t)
        rep = sg.verify_reverse_logsobolev(ker, pb, ProductPoint.of([0.5], [-0.3]),
                                           rule)
        assert rep.verdict == "verified"
    # constant positive field: both sides vanish
    const = fl.ScalarField(name="c", base_dim=1, fiber_dim=1,
                           fn=lambda b, fb: 2.0 + 0.0 * b[..., 0] * fb[0][..., 0],
                           positive=True, bounded=True, lipschitz=True)
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    rep = sg.verify_reverse_logsobolev(ker, const, ORIGIN, RULE)
    assert rep.verdict == "verified"
    assert rep.lhs == pytest.approx(0.0, abs=1e-10)
    assert rep.rhs == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(FieldClassError):
        sg.verify_reverse_logsobolev(ker, fl.tanh_base(1, 1), ORIGIN, RULE)


def test_wang_harnack_constant_and_inequality():
    x0 = ProductPoint.of([0.0], [0.0])
    x1 = ProductPoint.of([1.0], [0.0])
    c = sg.wang_harnack_constant(1.0, x0, x1, 1.0, 2.0)
    assert c == pytest.approx(np.exp(4.0), rel=1e-12)
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    pb = fl.positive_bump(1, 1, 0.0, 1.0, 0.1)
    rep = sg.verify_wang_harnack(ker, pb, 2.0, x0, x1, RULE)
    assert rep.verdict == "verified"
    # x = x': the constant collapses to 1 and the row reduces to Jensen
    rep = sg.verify_wang_harnack(ker, pb, 2.0, x0, x0, RULE)
    assert rep.provenance["constant"] == pytest.approx(1.0)
    assert rep.verdict == "verified"
    assert rep.lhs <= rep.rhs
    with pytest.raises(InvalidAlphaError):
        sg.verify_wang_harnack(ker, pb, 1.0, x0, x1, RULE)
    with pytest.raises(FieldClassError):
        sg.verify_wang_harnack(ker, XI, 2.0, x0, x1, RULE)


def test_quadrature_matches_monte_carlo_on_library():
    gen = gmod.flat_kolmogorov(1)
    cfg = sim.SimConfig(t=1.0, n_steps=1000, n_paths=30000, seed=17)
    ker = sg.FlatKolmogorovKernel(1, 1.0, 1.0)
    x = ProductPoint.of([0.5], [-0.5])
    for spec in fl.DEFAULT_FLAT_LIBRARY:
        f = fl.field_from_id(spec, 1, 1)
        est = sim.mc_semigroup(gen, f, x, cfg)
        exact = sg.semigroup_apply(ker, f, x, RULE)
        tol = 4 * est.se + 2e-3 * (1 + abs(exact))  # weak O(dt) allowance
        assert abs(est.value - exact) < tol, (spec, est.value, exact)


def test_time_derivative_functional_identity():
    """d/ds P_s(G_{a(s),b(s)}(P_{t-s} f)) matches

        2 P_s(Gamma2^{a,b}(g)) - 2 a'(s) P_s<grad_p g, grad_xi g>
        + (2 a'(s) a(s) + b'(s)) P_s|grad_xi g|^2,   g = P_{t-s} f,

    for the affine schedule a(s) = -s with constant b."""
    t = 0.8
    s0 = 0.3
    sched = gmod.gradient_proof_schedule(beta=0.5)
    f = fl.polynomial(1, 1, [(1.0, (2,), (1,)), (0.4, (), (2,))], name="mix")
    gen = gmod.flat_kolmogorov(1)
    x = ProductPoint.of([0.2], [0.1])

    rule = sg.gauss_hermite(8)  # every integrand here is a low-degree polynomial

    def _apply_kernel_batch(ker, field, b, fb):
        b2, fb2 = fl.broadcast_point(b, fb)
        flat_b = b2.reshape(-1, 1)
        flat_f = fb2[0].reshape(-1, 1)
        out = [sg.semigroup_apply(ker, field, ProductPoint.of(pb, pf), rule)
               for pb, pf in zip(flat_b, flat_f)]
        return np.asarray(out).reshape(b2.shape[:-1])

    def phi(s):
        params = sched.at(s)
        ker_out = sg.FlatKolmogorovKernel(1, 1.0, s)
        ker_in = sg.FlatKolmogorovKernel(1, 1.0, t - s)
        inner = fl.function_field(
            "g", 1, 1, lambda bb, ff: _apply_kernel_batch(ker_in, f, bb, ff))

        def values(b, fb):
            b2, fb2 = fl.broadcast_point(b, fb)
            flat_b = b2.reshape(-1, 1)
            flat_f = fb2[0].reshape(-1, 1)
            out = [gmod.gamma_ab(inner, None, params, ProductPoint.of(pb, pf))
                   for pb, pf in zip(flat_b, flat_f)]
            return np.asarray(out).reshape(b2.shape[:-1])

        return sg.semigroup_apply_values(ker_out, values, x, rule)

    h = 2e-3
    dphi = (phi(s0 + h) - phi(s0 - h)) / (2 * h)

    params = sched.at(s0)
    ker_out = sg.FlatKolmogorovKernel(1, 1.0, s0)
    ker_in = sg.FlatKolmogorovKernel(1, 1.0, t - s0)
    inner = fl.function_field(
        "g", 1, 1, lambda bb, ff: _apply_kernel_batch(ker_in, f, bb, ff))

    def rhs_values(b, fb):
        b2, fb2 = fl.broadcast_point(b, fb)
        flat_b = b2.reshape(-1, 1)
        flat_f = fb2[0].reshape(-1, 1)
        out = []
        ap = float(sched.alpha_prime(s0))
        bp = float(sched.beta_prime(s0))
        a = float(sched.alpha(s0))
        for pb, pf in zip(flat_b, flat_f):
            pt = ProductPoint.of(pb, pf)
            g2 = gmod.gamma2_ab(gen, inner, params, pt)
            bb = pb[None, :]
            ffb = (pf[None, :],)
            gp = fl.grad_base(inner, bb, ffb)[0]
            gx = fl.grad_fiber(inner, bb, ffb, 0)[0]
            out.append(2 * g2 - 2 * ap * float(gp @ gx)
                       + (2 * ap * a + bp) * float(gx @ gx))
        return np.asarray(out).reshape(b2.shape[:-1])

    rhs = sg.semigroup_apply_values(ker_out, rhs_values, x, rule)
    assert dphi == pytest.approx(rhs, rel=2e-2, abs=2e-3)
