import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kolmodiff import geometry as geo
from kolmodiff.errors import (ConfigError, CutLocusError, NotTangentError,
                              UnsupportedGeometryError)

RNG = np.random.default_rng(7)
SPHERE = geo.from_id("sphere-2")
HYPER = geo.from_id("hyperboloid-2")
HEIS = geo.from_id("heisenberg")


def _metric_inner(geom, u, v):
    if isinstance(geom, geo.Hyperboloid):
        return -geo.minkowski_form(u, v)
    return np.sum(u * v, axis=-1)


def _random_tangent(geom, x, scale=1.0):
    frame = geom.tangent_frame(x)
    return scale * RNG.standard_normal(geom.dim) @ frame


@pytest.mark.parametrize("geom", [SPHERE, HYPER, geo.from_id("euclidean-3")])
def test_distance_axioms(geom):
    for _ in range(100):
        x = geom.random_point(RNG)
        y = geom.random_point(RNG)
        z = geom.random_point(RNG)
        dxy, dyx = float(geom.dist(x, y)), float(geom.dist(y, x))
        assert dxy >= 0
        assert abs(dxy - dyx) < 1e-12
        assert float(geom.dist(x, x)) < 1e-12
        assert float(geom.dist(x, z)) <= dxy + float(geom.dist(y, z)) + 1e-10


@pytest.mark.parametrize("geom", [SPHERE, HYPER])
def test_exp_log_roundtrip_and_radius(geom):
    for _ in range(100):
        x = geom.random_point(RNG)
        v = _random_tangent(geom, x, 0.7)
        y = geom.exp(x, v, check=True)
        w = geom.log(x, y)
        assert np.max(np.abs(geom.exp(x, w) - y)) < 1e-10
        n = np.sqrt(_metric_inner(geom, v, v))
        assert abs(float(geom.dist(x, y)) - n) < 1e-8


@pytest.mark.parametrize("geom", [SPHERE, HYPER])
def test_unit_speed_distance(geom):
    x = geom.random_point(RNG)
    u = _random_tangent(geom, x)
    u = u / np.sqrt(_metric_inner(geom, u, u))
    for s in (0.05, 0.3, 1.0):
        assert abs(float(geom.dist(geom.exp(x, s * u), x)) - s) < 1e-8


@pytest.mark.parametrize("geom", [SPHERE, HYPER])
def test_transport_is_linear_isometry(geom):
    for _ in range(100):
        x = geom.random_point(RNG)
        y = geom.exp(x, _random_tangent(geom, x, 0.6))
        a = _random_tangent(geom, x)
        b = _random_tangent(geom, x)
        ta = geom.transport(x, y, a)
        tb = geom.transport(x, y, b)
        assert abs(_metric_inner(geom, ta, tb) - _metric_inner(geom, a, b)) < 1e-10
        # transported vectors stay tangent
        if isinstance(geom, geo.Sphere):
            assert abs(np.dot(ta, y)) < 1e-10
        else:
            assert abs(geo.minkowski_form(ta, y)) < 1e-10


@pytest.mark.parametrize("geom", [SPHERE, HYPER])
def test_transport_composes_along_geodesic(geom):
    for _ in range(50):
        x = geom.random_point(RNG)
        w = _random_tangent(geom, x, 0.8)
        y = geom.exp(x, w)
        m = geom.exp(x, 0.5 * w)
        a = _random_tangent(geom, x)
        direct = geom.transport(x, y, a)
        relay = geom.transport(m, y, geom.transport(x, m, a))
        assert np.max(np.abs(direct - relay)) < 1e-8


@pytest.mark.parametrize("geom", [SPHERE, HYPER])
def test_constraint_preserved_over_many_steps(geom):
    x = np.broadcast_to(geom.random_point(RNG), (100, 3)).copy()
    for _ in range(100):  # 10^4 random exponential steps in total
        frame = geom.tangent_frame(x)
        v = 0.05 * np.einsum("nd,nda->na", RNG.standard_normal((100, 2)), frame)
        x = geom.exp(x, v)
    if isinstance(geom, geo.Sphere):
        err = np.abs(np.sum(x * x, axis=-1) - 1.0)
    else:
        err = np.abs(geo.minkowski_form(x, x) - 1.0)
    assert np.max(err) < 1e-10


def test_sphere_antipodal_distance_and_cut_locus():
    north = np.array([0.0, 0.0, 1.0])
    south = -north
    assert float(SPHERE.dist(north, south)) == pytest.approx(np.pi)
    with pytest.raises(CutLocusError):
        SPHERE.log(north, south)
    with pytest.raises(CutLocusError):
        SPHERE.transport(north, south, np.array([1.0, 0.0, 0.0]))


def test_sphere_chord_below_arc():
    for _ in range(200):
        x = SPHERE.random_point(RNG)
        y = SPHERE.random_point(RNG)
        assert np.linalg.norm(x - y) <= float(SPHERE.dist(x, y)) + 1e-12


def test_exp_rejects_non_tangent_vectors():
    x = np.array([0.0, 0.0, 1.0])
    with pytest.raises(NotTangentError):
        SPHERE.exp(x, np.array([0.0, 0.0, 0.5]), check=True)
    e0 = np.array([1.0, 0.0, 0.0])
    with pytest.raises(NotTangentError):
        HYPER.exp(e0, np.array([0.3, 0.0, 0.0]), check=True)


def test_frames_are_orthonormal_batches():
    xs = np.stack([SPHERE.random_point(RNG) for _ in range(64)])
    frame = SPHERE.tangent_frame(xs)
    gram = np.einsum("nia,nja->nij", frame, frame)
    assert np.max(np.abs(gram - np.eye(2))) < 1e-12
    xs = np.stack([HYPER.random_point(RNG) for _ in range(64)])
    frame = HYPER.tangent_frame(xs)
    eta = np.diag([1.0, -1.0, -1.0])
    gram = -np.einsum("nia,ab,njb->nij", frame, eta, frame)
    assert np.max(np.abs(gram - np.eye(2))) < 1e-12


# -- Heisenberg group --------------------------------------------------------

@given(st.lists(st.floats(-3, 3), min_size=9, max_size=9))
@settings(max_examples=80, deadline=None)
def test_heisenberg_group_axioms(vals):
    a = np.array(vals[0:3])
    b = np.array(vals[3:6])
    c = np.array(vals[6:9])
    lhs = HEIS.multiply(HEIS.multiply(a, b), c)
    rhs = HEIS.multiply(a, HEIS.multiply(b, c))
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    assert np.max(np.abs(HEIS.multiply(a, HEIS.inverse(a)))) < 1e-12
    assert np.max(np.abs(HEIS.multiply(np.zeros(3), a) - a)) < 1e-12


def test_heisenberg_frame_at_identity_and_sample_point():
    fr = HEIS.frame(np.zeros(3))
    assert np.allclose(fr[0], [1, 0, 0])
    assert np.allclose(fr[1], [0, 1, 0])
    # X acting on f(x,y,z) = z at (1,2,3) gives -y/2 = -1
    fr = HEIS.frame(np.array([1.0, 2.0, 3.0]))
    assert fr[0] @ np.array([0.0, 0.0, 1.0]) == pytest.approx(-1.0)
    assert np.allclose(fr[1], [0.0, 1.0, 0.5])


def _commutator_fd(conv, p, f, h=1e-4):
    def deriv(vec_index, g, q):
        e = np.zeros(3)
        e[vec_index] = 1.0

        def curve(s):
            step = np.array([e[0] * s, e[1] * s, 0.0])
            return HEIS.multiply(q, step)

        return (g(curve(h)) - g(curve(-h))) / (2 * h)

    def xf(q):
        return deriv(0, f, q)

    def yf(q):
        return deriv(1, f, q)

    if conv == "printed":
        # printed variant: flows of d_x - (y/2) d_z and d_y - (x/2) d_z
        def flow_y(q, s):
            return q + np.array([0.0, s, -q[0] * s / 2.0])

        def yf(q):  # noqa: F811
            return (f(flow_y(q, h)) - f(flow_y(q, -h))) / (2 * h)

    return deriv(0, yf, p) - deriv(1, xf, p)


def test_heisenberg_bracket_generates_vertical_direction():
    # [X, Y] = Z for the group-law frame, checked by differencing flows
    f = lambda q: q[2] + 0.3 * q[0]  # df/dz = 1
    for _ in range(10):
        p = RNG.uniform(-2, 2, 3)
        comm = _commutator_fd("group-law", p, f)
        assert comm == pytest.approx(1.0, abs=1e-4)


def test_heisenberg_printed_signs_fail_to_bracket():
    # with the printed sign of Y the commutator vanishes; kept as a record
    f = lambda q: q[2]
    p = np.array([0.4, -0.8, 0.2])
    comm = _commutator_fd("printed", p, f)
    assert abs(comm) < 1e-6
    fr = HEIS.frame(p, convention="printed")
    assert fr[1] @ np.array([0.0, 0.0, 1.0]) == pytest.approx(-0.5 * p[0])


def test_heisenberg_frame_is_left_translate_of_identity_frame():
    # frame at p equals the group-law differential applied to the frame at e
    h = 1e-6
    for _ in range(10):
        p = RNG.uniform(-2, 2, 3)
        fr = HEIS.frame(p)
        for i in range(2):
            e = np.zeros(3)
            e[i] = 1.0
            fd = (HEIS.multiply(p, h * e) - HEIS.multiply(p, -h * e)) / (2 * h)
            assert np.max(np.abs(fd - fr[i])) < 1e-8


def test_heisenberg_has_no_distance_or_transport():
    with pytest.raises(UnsupportedGeometryError):
        HEIS.dist(np.zeros(3), np.ones(3))
    with pytest.raises(UnsupportedGeometryError):
        HEIS.transport(np.zeros(3), np.ones(3), np.ones(3))
    with pytest.raises(UnsupportedGeometryError):
        HEIS.log(np.zeros(3), np.ones(3))
    assert HEIS.sub_riemannian and not HEIS.has_log


def test_geometry_ids_and_ricci_bounds():
    assert geo.from_id("sphere-2").ricci_lower == 1.0
    assert geo.from_id("sphere-3").ricci_lower == 2.0
    assert geo.from_id("hyperboloid-2").ricci_lower == -1.0
    assert geo.from_id("euclidean-5").ricci_lower == 0.0
    assert geo.from_id("heisenberg").ricci_lower is None
    with pytest.raises(ConfigError):
        geo.from_id("torus-2")
    with pytest.raises(ConfigError):
        geo.from_id("hyperboloid-1")
