import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kolmodiff import fields as fl
from kolmodiff.errors import ConfigError

RNG = np.random.default_rng(20240811)

LIBRARY_IDS = list(fl.DEFAULT_FLAT_LIBRARY) + [
    "poly([(0.5, (2,), (1,)), (-1.0, (1,), ())])",
    "gauss-bump-p(0.3, 1.5)",
    "gauss-bump-xi(0.2, 1.2)",
    "coordinate-p0",
    "coordinate-xi0",
]


@pytest.mark.parametrize("spec", LIBRARY_IDS)
def test_exact_gradients_match_finite_differences(spec):
    # invariant: exact callbacks agree with central differences to O(h^2)
    f = fl.field_from_id(spec, 2, 2)
    if not f.has_exact_gradients:
        pytest.skip("finite-difference-only field")
    h = 1e-4
    tol = 10 * h * h
    for _ in range(20):
        p = RNG.uniform(-1.5, 1.5, (1, 2))
        xi = RNG.uniform(-1.5, 1.5, (1, 2))
        gp = f.grad_base(p, (xi,))
        gx = f.grad_fiber(p, (xi,), 0)
        gp_fd = fl.fd_grad_base(f, p, (xi,), h)
        gx_fd = fl.fd_grad_fiber(f, p, (xi,), 0, h)
        assert np.max(np.abs(gp - gp_fd)) < tol
        assert np.max(np.abs(gx - gx_fd)) < tol


def test_positive_fields_are_positive():
    for spec in LIBRARY_IDS:
        f = fl.field_from_id(spec, 2, 2)
        if not f.positive:
            continue
        p = RNG.uniform(-4, 4, (200, 2))
        xi = RNG.uniform(-4, 4, (200, 2))
        assert np.all(f.value(p, (xi,)) > 0)


def test_hessian_trace_matches_fd_laplacian():
    f = fl.field_from_id("gauss-bump(0.1, 0.9)", 2, 2)
    p = RNG.uniform(-1, 1, (5, 2))
    xi = RNG.uniform(-1, 1, (5, 2))
    exact = fl.laplacian_base(f, p, (xi,))
    fd = fl.fd_laplacian_base(f, p, (xi,), 1e-4)
    assert np.max(np.abs(exact - fd)) < 1e-6


def test_unknown_field_id_rejected():
    with pytest.raises(ConfigError):
        fl.field_from_id("no-such-field", 1, 1)
    with pytest.raises(ConfigError):
        fl.field_from_id("gauss-bump(1.0", 1, 1)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=50, deadline=None)
def test_polynomial_evaluation_matches_monomials(p0, p1, x0, x1):
    f = fl.polynomial(2, 2, [(1.5, (2, 1), ()), (-0.5, (), (1, 1))])
    val = f.value(np.array([p0, p1]), (np.array([x0, x1]),))
    assert val == pytest.approx(1.5 * p0 ** 2 * p1 - 0.5 * x0 * x1, abs=1e-12)


def test_levels_and_fiber_levels():
    f = fl.linear_fiber(1, 1, [2.0], levels=3, level=2)
    p = np.zeros((1, 1))
    xis = (np.array([[1.0]]), np.array([[10.0]]), np.array([[100.0]]))
    assert f.value(p, xis)[0] == pytest.approx(200.0)
    g2 = f.grad_fiber(p, xis, 2)
    g0 = f.grad_fiber(p, xis, 0)
    assert g2[0, 0] == pytest.approx(2.0)
    assert g0[0, 0] == pytest.approx(0.0)


def test_strip_exact_derivatives_forces_fd_path():
    f = fl.field_from_id("gauss-bump(0.0, 1.0)", 1, 1)
    bare = fl.strip_exact_derivatives(f)
    assert not bare.has_exact_gradients
    p = np.array([[0.3]])
    xi = (np.array([[0.2]]),)
    assert np.allclose(fl.grad_base(bare, p, xi), f.grad_base(p, xi), atol=1e-6)


def test_product_point_scale():
    x = fl.ProductPoint.of([3.0, 4.0], [0.0, 0.0])
    assert x.scale() == pytest.approx(5.0)
    small = fl.ProductPoint.of([0.1], [0.1])
    assert small.scale() == 1.0
