"""Generators and (generalized) carre du champ operators on product spaces.

The flat Kolmogorov generator is L f = <sigma_map(p), grad_xi f> +
(sigma^2/2) Laplacian_p f; the hyperbolic variant replaces the base part by
the Laplace-Beltrami operator of H^d and pairs the full ambient point with
grad_xi.  General generators are sums of squares of vector fields plus a
drift, lifted by a fiber map.

Operators:

    gamma(f, g)     = (1/2)(L(fg) - f Lg - g Lf), evaluated in closed form
                      per generator kind (sigma^2/2 <grad_p f, grad_p g> for
                      the prebuilt diffusions, sum_i (V_i f)(V_i g) for sums
                      of squares, half the horizontal product on the
                      Heisenberg group)
    gamma_z(f, g)   = <grad_xi f, grad_xi g>
    gamma_ab        = <grad_p f, grad_p g> - a <grad_p f, grad_xi g>
                      - a <grad_xi f, grad_p g> + (a^2 + b) <grad_xi f, grad_xi g>
    gamma2*(f)      = (1/2) L G(f) - G(f, Lf) for G in {gamma, gamma_z, gamma_ab},
                      realized by nested differencing of derived fields.

Batched evaluation: every operator accepts a ProductPoint or a pair
(base (B, nb), fibers tuple) and vectorizes over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import geometry as geo
from .errors import (HypothesisViolatedError, InsufficientSmoothnessError,
                     SingularChartError, UnsupportedGeometryError)
from .fields import (OUTER_FD_SCALE, ProductPoint, ScalarField,
                     broadcast_point, fd_step, grad_base, grad_fiber,
                     laplacian_base, smoothness_order)
from .reports import fd_slack, make_report

# polar chart is abandoned for the ambient projection below this radius:
# the 1/sinh(r)^2 angular term amplifies finite-difference noise
POLAR_MIN_RADIUS = 0.05
# angular differences use a coarser step than radial ones; the degree-zero
# extension in the angle is O(sinh r)-flat, so the larger step costs little
# truncation but buys a much lower noise floor
ANGULAR_STEP_FACTOR = 10.0


# ---------------------------------------------------------------------------
# fiber maps and vector fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SigmaMap:
    """Fiber drift map sigma: base -> R^k with a declared Lipschitz constant."""

    name: str
    k: int
    fn: Callable
    lipschitz: float

    def __call__(self, p):
        return np.asarray(self.fn(p), dtype=float)


def identity_map(d: int) -> SigmaMap:
    return SigmaMap("identity", d, lambda p: p, 1.0)


def ambient_inclusion(ambient_dim: int) -> SigmaMap:
    # chordal distance never exceeds the intrinsic one on our embeddings
    return SigmaMap("inclusion", ambient_dim, lambda p: p, 1.0)


def constant_map(values) -> SigmaMap:
    v = np.atleast_1d(np.asarray(values, dtype=float))

    def fn(p):
        return np.broadcast_to(v, p.shape[:-1] + v.shape).copy()

    return SigmaMap(f"constant({list(map(float, v))})", v.size, fn, 0.0)


def sine_map(d: int) -> SigmaMap:
    return SigmaMap("sine", d, lambda p: np.sin(p), 1.0)


def planar_position() -> SigmaMap:
    """sigma(x, y, z) = (x, y, 0) on the Heisenberg group; 1-Lipschitz for d_CC."""

    def fn(p):
        out = np.array(p, dtype=float, copy=True)
        out[..., 2] = 0.0
        return out

    return SigmaMap("planar-position", 3, fn, 1.0)


def distance_map(geom: geo.Geometry, anchor) -> SigmaMap:
    anchor = np.asarray(anchor, dtype=float)

    def fn(p):
        return geom.dist(p, anchor)[..., None]

    return SigmaMap("distance-to-anchor", 1, fn, 1.0)


def default_lipschitz_map(geom: geo.Geometry) -> SigmaMap:
    """A 1-Lipschitz fiber map valid for the geometry: the ambient inclusion
    where chords are dominated by arcs (flat, sphere), else the intrinsic
    distance to a base point (chords grow exponentially on the hyperboloid)."""
    if isinstance(geom, geo.Hyperboloid):
        anchor = np.zeros(geom.ambient_dim)
        anchor[0] = 1.0
        return distance_map(geom, anchor)
    if geom.name == "heisenberg":
        return planar_position()
    return ambient_inclusion(geom.ambient_dim) if geom.ambient_dim > geom.dim \
        else identity_map(geom.dim)


@dataclass(frozen=True)
class VectorField:
    """First-order operator (Vf)(p) = <coeffs(p), grad_p f> on a flat base."""

    name: str
    fn: Callable  # (..., nb) -> (..., nb)

    def coeffs(self, p):
        return np.asarray(self.fn(p), dtype=float)


def coordinate_vector_fields(d: int, scale: float = 1.0) -> tuple[VectorField, ...]:
    out = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = scale

        def fn(p, e=e):
            return np.broadcast_to(e, p.shape).copy()

        out.append(VectorField(f"d/dp{i}", fn))
    return tuple(out)


# ---------------------------------------------------------------------------
# generator specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    geometry: geo.Geometry
    sigma: float = 1.0
    sigma_map: Optional[SigmaMap] = None
    rho: Optional[float] = None
    vector_fields: Optional[tuple[VectorField, ...]] = None
    drift: Optional[VectorField] = None
    levels: int = 1

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.sigma_map is not None and self.sigma_map.lipschitz < 0:
            raise ValueError("Lipschitz constant must be nonnegative")

    @property
    def kind(self) -> str:
        if self.vector_fields is not None:
            return "vector-fields"
        name = self.geometry.name
        if name.startswith("euclidean"):
            return "flat"
        if name.startswith("hyperboloid"):
            return "relativistic"
        if name.startswith("sphere"):
            return "sphere"
        if name == "heisenberg":
            return "heisenberg"
        raise UnsupportedGeometryError(name)

    @property
    def c_sigma(self) -> float | None:
        return None if self.sigma_map is None else self.sigma_map.lipschitz

    @property
    def ricci_lower(self) -> float | None:
        return self.geometry.ricci_lower

    def fiber_dim(self) -> int:
        if self.sigma_map is not None:
            return self.sigma_map.k
        return self.geometry.ambient_dim if self.kind in ("relativistic", "sphere") \
            else self.geometry.dim


def flat_kolmogorov(d: int, sigma: float = 1.0, sigma_map: SigmaMap | None = None,
                    levels: int = 1) -> GeneratorSpec:
    return GeneratorSpec(geometry=geo.Euclidean(d), sigma=sigma,
                         sigma_map=sigma_map or identity_map(d), levels=levels)


def relativistic(d: int, sigma: float = 1.0) -> GeneratorSpec:
    return GeneratorSpec(geometry=geo.Hyperboloid(d), sigma=sigma,
                         sigma_map=ambient_inclusion(d + 1))


def manifold_lift(geom: geo.Geometry, sigma: float = 1.0,
                  sigma_map: SigmaMap | None = None) -> GeneratorSpec:
    return GeneratorSpec(geometry=geom, sigma=sigma,
                         sigma_map=sigma_map or ambient_inclusion(geom.ambient_dim))


def sum_of_squares(d: int, vector_fields=None, sigma_map=None, rho: float = 0.0,
                   drift: VectorField | None = None) -> GeneratorSpec:
    return GeneratorSpec(geometry=geo.Euclidean(d), sigma=1.0,
                         sigma_map=sigma_map or identity_map(d), rho=rho,
                         vector_fields=tuple(vector_fields or coordinate_vector_fields(d)),
                         drift=drift)


def heisenberg_lift(sigma_map: SigmaMap | None = None) -> GeneratorSpec:
    return GeneratorSpec(geometry=geo.Heisenberg(), sigma=1.0,
                         sigma_map=sigma_map or planar_position())


@dataclass(frozen=True)
class GammaParams:
    """Parameters (alpha, beta) of the generalized form; beta must be >= 0."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


@dataclass(frozen=True)
class ParamSchedule:
    """Closed-form time-dependent (alpha(s), beta(s)) family."""

    family: str  # "constant" | "affine" | "quadratic"
    alpha_coeffs: tuple[float, ...]
    beta_coeffs: tuple[float, ...]

    def alpha(self, s):
        return np.polyval(self.alpha_coeffs[::-1], s)

    def beta(self, s):
        return np.polyval(self.beta_coeffs[::-1], s)

    def alpha_prime(self, s):
        c = np.polyder(np.poly1d(self.alpha_coeffs[::-1]))
        return c(s)

    def beta_prime(self, s):
        c = np.polyder(np.poly1d(self.beta_coeffs[::-1]))
        return c(s)

    def at(self, s) -> GammaParams:
        return GammaParams(float(self.alpha(s)), float(max(self.beta(s), 0.0)))


def gradient_proof_schedule(beta: float = 0.0) -> ParamSchedule:
    """alpha(s) = -s with constant beta."""
    return ParamSchedule("affine", (0.0, -1.0), (beta,))


def reverse_proof_schedule(t: float) -> ParamSchedule:
    """alpha(s) = (t - s)/2, beta(s) = (t - s)^2 / 12."""
    return ParamSchedule("quadratic", (t / 2.0, -0.5),
                         (t * t / 12.0, -t / 6.0, 1.0 / 12.0))


# ---------------------------------------------------------------------------
# batching helpers
# ---------------------------------------------------------------------------

def _as_batch(x):
    if isinstance(x, ProductPoint):
        return x.base[None, :], tuple(f[None, :] for f in x.fibers), True
    base, fibers = x
    return (np.asarray(base, dtype=float),
            tuple(np.asarray(f, dtype=float) for f in fibers), False)


def _unbatch(values, scalar):
    return float(values[0]) if scalar else values


def _require_smoothness(f: ScalarField, order: int, what: str):
    if smoothness_order(f.smoothness) < order:
        raise InsufficientSmoothnessError(
            f"{what} needs C^{order} but field {f.name!r} is {f.smoothness}")


# ---------------------------------------------------------------------------
# directional derivatives along the geometry
# ---------------------------------------------------------------------------

def frame_derivatives(gen: GeneratorSpec, f: ScalarField, base, fibers,
                      h: float | None = None) -> np.ndarray:
    """Derivatives of f along the orthonormal (or horizontal) frame, (..., d)."""
    geom = gen.geometry
    frame = geom.tangent_frame(base)
    if f.grad_base is not None:
        g = np.asarray(f.grad_base(base, tuple(fibers)), dtype=float)
        return np.einsum("...a,...ma->...m", g, frame)
    hh = h or fd_step(f, base, fibers)
    fb = tuple(fi[..., None, :] for fi in fibers)
    if geom.sub_riemannian:
        m = frame.shape[-2]
        coeff = np.eye(m)
        plus = geom.exp(base[..., None, :], hh * coeff)
        minus = geom.exp(base[..., None, :], -hh * coeff)
    else:
        plus = geom.exp(base[..., None, :], hh * frame)
        minus = geom.exp(base[..., None, :], -hh * frame)
    return (f.value(plus, fb) - f.value(minus, fb)) / (2.0 * hh)


def _vector_field_derivative(v: VectorField, f: ScalarField, base, fibers,
                             h: float | None = None) -> np.ndarray:
    g = grad_base(f, base, fibers, h)
    return np.sum(v.coeffs(base) * g, axis=-1)


# ---------------------------------------------------------------------------
# base Laplacians on curved geometries
# ---------------------------------------------------------------------------

def _projective_laplacian(geom, f: ScalarField, base, fibers, h: float,
                          signs=None) -> np.ndarray:
    """Sum of ambient second differences of the projection-invariant extension.

    For the sphere this is the spherical Laplacian of f; for the hyperboloid,
    ``signs`` weights the time coordinate with -1 so the result is the
    Laplace-Beltrami operator of the induced metric.
    """
    amb = geom.ambient_dim
    eye = np.eye(amb)
    offs = np.concatenate([eye, -eye], axis=0)
    shifted = geom.project(base[..., None, :] + h * offs)
    fb = tuple(fi[..., None, :] for fi in fibers)
    vals = f.value(shifted, fb)
    center = f.value(base, fibers)
    second = (vals[..., :amb] + vals[..., amb:] - 2.0 * center[..., None]) / (h * h)
    if signs is None:
        return np.sum(second, axis=-1)
    return np.sum(np.asarray(signs) * second, axis=-1)


def hyperbolic_laplacian_polar(geom: geo.Hyperboloid, f: ScalarField, base, fibers,
                               h: float) -> np.ndarray:
    """Laplace-Beltrami on H^d in polar coordinates,

        f_rr + (d-1) coth(r) f_r + Laplacian_omega f / sinh(r)^2.

    Signals singular-chart when any point sits below the polar radius floor.
    """
    d = geom.dim
    p0 = np.clip(base[..., 0], 1.0, None)
    r = np.arccosh(p0)
    sh = np.sinh(r)
    if np.any(r < POLAR_MIN_RADIUS):
        raise SingularChartError("polar chart rejected near r = 0")
    omega = base[..., 1:] / sh[..., None]

    def chart(rr, ww):
        return np.concatenate([np.cosh(rr)[..., None], np.sinh(rr)[..., None] * ww],
                              axis=-1)

    center = f.value(base, fibers)
    vp = f.value(chart(r + h, omega), fibers)
    vm = f.value(chart(r - h, omega), fibers)
    f_rr = (vp - 2.0 * center + vm) / (h * h)
    f_r = (vp - vm) / (2.0 * h)

    ha = ANGULAR_STEP_FACTOR * h
    eye = np.eye(d)
    offs = np.concatenate([eye, -eye], axis=0)
    w = omega[..., None, :] + ha * offs
    w = w / np.linalg.norm(w, axis=-1, keepdims=True)
    fb = tuple(fi[..., None, :] for fi in fibers)
    vals = f.value(chart(r[..., None] + np.zeros(2 * d), w), fb)
    lap_omega = (np.sum(vals, axis=-1) - 2.0 * d * center) / (ha * ha)

    coth = np.cosh(r) / sh
    return f_rr + (d - 1) * coth * f_r + lap_omega / (sh * sh)


def base_laplacian(gen: GeneratorSpec, f: ScalarField, base, fibers,
                   h: float | None = None) -> np.ndarray:
    """Laplace(-Beltrami) operator of the base geometry applied to f."""
    geom = gen.geometry
    hh = h or fd_step(f, base, fibers)
    kind = gen.kind
    if kind == "flat" or kind == "vector-fields":
        return laplacian_base(f, base, fibers, hh)
    if kind == "sphere":
        return _projective_laplacian(geom, f, base, fibers, hh)
    if kind == "relativistic":
        p0 = np.clip(base[..., 0], 1.0, None)
        r = np.arccosh(p0)
        near = r < POLAR_MIN_RADIUS
        out = np.empty(r.shape)
        if np.any(~near):
            sel = ~near
            out[sel] = hyperbolic_laplacian_polar(
                geom, f, base[sel], tuple(fi[sel] for fi in fibers), hh)
        if np.any(near):
            signs = np.concatenate([[-1.0], np.ones(geom.dim)])
            sel = near
            out[sel] = _projective_laplacian(
                geom, f, base[sel], tuple(fi[sel] for fi in fibers), hh, signs=signs)
        return out
    raise UnsupportedGeometryError(gen.geometry.name)


# ---------------------------------------------------------------------------
# the generator and its derived fields
# ---------------------------------------------------------------------------

def _fiber_drift(gen: GeneratorSpec, f: ScalarField, base, fibers) -> np.ndarray:
    """<sigma(p), grad_{xi_1} f> plus the chain terms <xi_{r-1}, grad_{xi_r} f>."""
    smap = gen.sigma_map
    out = 0.0
    for level in range(len(fibers)):
        coeff = smap(base) if level == 0 else fibers[level - 1]
        g = grad_fiber(f, base, fibers, level)
        out = out + np.sum(coeff * g, axis=-1)
    return out


def generator_values(gen: GeneratorSpec, f: ScalarField, base, fibers) -> np.ndarray:
    base, fibers = broadcast_point(base, fibers)
    kind = gen.kind
    if kind == "vector-fields":
        acc = 0.0
        for v in gen.vector_fields:
            vf = _derived_field(f"{v.name}[{f.name}]", f,
                                lambda b, fb, v=v: _vector_field_derivative(v, f, b, fb))
            acc = acc + _vector_field_derivative(v, vf, base, fibers)
        if gen.drift is not None:
            acc = acc + _vector_field_derivative(gen.drift, f, base, fibers)
        return acc + _fiber_drift(gen, f, base, fibers)
    if kind == "heisenberg":
        h = fd_step(f, base, fibers)
        geom = gen.geometry
        center = f.value(base, fibers)
        fb = tuple(fi[..., None, :] for fi in fibers)
        coeff = np.eye(2)
        plus = f.value(geom.exp(base[..., None, :], h * coeff), fb)
        minus = f.value(geom.exp(base[..., None, :], -h * coeff), fb)
        second = (plus + minus - 2.0 * center[..., None]) / (h * h)
        return 0.5 * np.sum(second, axis=-1) + _fiber_drift(gen, f, base, fibers)
    lap = base_laplacian(gen, f, base, fibers)
    return 0.5 * gen.sigma ** 2 * lap + _fiber_drift(gen, f, base, fibers)


def apply_generator(gen: GeneratorSpec, f: ScalarField, x):
    """(Lf)(x) for the diffusion generator described by gen."""
    _require_smoothness(f, 2, "apply_generator")
    base, fibers, scalar = _as_batch(x)
    return _unbatch(generator_values(gen, f, base, fibers), scalar)


def _derived_field(name: str, parent: ScalarField, values_fn) -> ScalarField:
    return ScalarField(name=name, base_dim=parent.base_dim,
                       fiber_dim=parent.fiber_dim, levels=parent.levels,
                       fn=values_fn, smoothness=parent.smoothness,
                       fd_scale=max(OUTER_FD_SCALE, parent.fd_scale))


def generator_field(gen: GeneratorSpec, f: ScalarField) -> ScalarField:
    return _derived_field(f"L[{f.name}]", f,
                          lambda b, fb: generator_values(gen, f, b, fb))


def gamma_values(gen: GeneratorSpec, f: ScalarField, g: ScalarField,
                 base, fibers) -> np.ndarray:
    base, fibers = broadcast_point(base, fibers)
    kind = gen.kind
    if kind == "vector-fields":
        acc = 0.0
        for v in gen.vector_fields:
            acc = acc + (_vector_field_derivative(v, f, base, fibers)
                         * _vector_field_derivative(v, g, base, fibers))
        return acc
    df = frame_derivatives(gen, f, base, fibers)
    dg = df if g is f else frame_derivatives(gen, g, base, fibers)
    prod = np.sum(df * dg, axis=-1)
    if kind == "heisenberg":
        return 0.5 * prod
    return 0.5 * gen.sigma ** 2 * prod


def gamma(gen: GeneratorSpec, f: ScalarField, g: ScalarField | None, x):
    """Carre du champ Gamma(f, g) of the generator at x."""
    g = f if g is None else g
    _require_smoothness(f, 1, "gamma")
    _require_smoothness(g, 1, "gamma")
    base, fibers, scalar = _as_batch(x)
    return _unbatch(gamma_values(gen, f, g, base, fibers), scalar)


def gamma_field(gen: GeneratorSpec, f: ScalarField) -> ScalarField:
    return _derived_field(f"Gamma[{f.name}]", f,
                          lambda b, fb: gamma_values(gen, f, f, b, fb))


def gamma_z_values(f: ScalarField, g: ScalarField, base, fibers,
                   level: int = 0) -> np.ndarray:
    df = grad_fiber(f, base, fibers, level)
    dg = df if g is f else grad_fiber(g, base, fibers, level)
    return np.sum(df * dg, axis=-1)


def gamma_z(f: ScalarField, g: ScalarField | None, x, level: int = 0):
    """Vertical form <grad_xi f, grad_xi g> at x."""
    g = f if g is None else g
    base, fibers, scalar = _as_batch(x)
    return _unbatch(gamma_z_values(f, g, base, fibers, level), scalar)


def gamma_z_field(f: ScalarField, level: int = 0) -> ScalarField:
    return _derived_field(f"GammaZ[{f.name}]", f,
                          lambda b, fb: gamma_z_values(f, f, b, fb, level))


def _require_flat(gen: GeneratorSpec | None, what: str):
    if gen is not None and not gen.geometry.name.startswith("euclidean"):
        raise UnsupportedGeometryError(
            f"{what} is defined on the flat product space only")


def gamma_ab_values(f: ScalarField, g: ScalarField, params: GammaParams,
                    base, fibers) -> np.ndarray:
    a = params.alpha
    fp = grad_base(f, base, fibers)
    fx = grad_fiber(f, base, fibers, 0)
    if g is f:
        gp, gx = fp, fx
    else:
        gp = grad_base(g, base, fibers)
        gx = grad_fiber(g, base, fibers, 0)
    return (np.sum(fp * gp, axis=-1)
            - a * np.sum(fp * gx, axis=-1)
            - a * np.sum(fx * gp, axis=-1)
            + (a * a + params.beta) * np.sum(fx * gx, axis=-1))


def gamma_ab(f: ScalarField, g: ScalarField | None, params: GammaParams, x,
             gen: GeneratorSpec | None = None):
    """Generalized form Gamma^{a,b}(f, g) on the flat product space."""
    _require_flat(gen, "gamma_ab")
    g = f if g is None else g
    base, fibers, scalar = _as_batch(x)
    return _unbatch(gamma_ab_values(f, g, params, base, fibers), scalar)


def gamma_ab_field(f: ScalarField, params: GammaParams) -> ScalarField:
    return _derived_field(f"GammaAB[{f.name};{params.alpha},{params.beta}]", f,
                          lambda b, fb: gamma_ab_values(f, f, params, b, fb))


# -- iterated forms ---------------------------------------------------------

def _gamma2_generic(gen, f, x, pair_form_values, pair_field):
    """(1/2) L G(f) - G(f, Lf) with G given by value/field callbacks."""
    _require_smoothness(f, 4, "gamma2")
    base, fibers, scalar = _as_batch(x)
    lf = generator_field(gen, f)
    half_l_gamma = 0.5 * generator_values(gen, pair_field, base, fibers)
    cross = pair_form_values(f, lf, base, fibers)
    return _unbatch(half_l_gamma - cross, scalar)


def gamma2(gen: GeneratorSpec, f: ScalarField, x):
    return _gamma2_generic(gen, f, x,
                           lambda a, b, bb, fb: gamma_values(gen, a, b, bb, fb),
                           gamma_field(gen, f))


def gamma2_z(gen: GeneratorSpec, f: ScalarField, x):
    return _gamma2_generic(gen, f, x,
                           lambda a, b, bb, fb: gamma_z_values(a, b, bb, fb),
                           gamma_z_field(f))


def gamma2_ab(gen: GeneratorSpec, f: ScalarField, params: GammaParams, x):
    _require_flat(gen, "gamma2_ab")
    return _gamma2_generic(gen, f, x,
                           lambda a, b, bb, fb: gamma_ab_values(a, b, params, bb, fb),
                           gamma_ab_field(f, params))


# ---------------------------------------------------------------------------
# pointwise inequality checks
# ---------------------------------------------------------------------------

def _point_rows(base, fibers):
    rows = []
    for i in range(base.shape[0]):
        rows.append({"base": [float(v) for v in base[i]],
                     "fibers": [[float(v) for v in f[i]] for f in fibers]})
    return rows


def check_gamma2_lower_bound(gen: GeneratorSpec, f: ScalarField,
                             params: GammaParams, x):
    """Check Gamma2^{a,b}(f) >= a |grad_xi f|^2 - <grad_xi f, grad_p f>.

    Accepts a single point (one report) or a batch (list of reports).
    """
    _require_flat(gen, "check_gamma2_lower_bound")
    base, fibers, scalar = _as_batch(x)
    lhs = np.atleast_1d(gamma2_ab(gen, f, params, (base, fibers)))
    fx = grad_fiber(f, base, fibers, 0)
    fp = grad_base(f, base, fibers)
    rhs = np.atleast_1d(params.alpha * np.sum(fx * fx, axis=-1)
                        - np.sum(fx * fp, axis=-1))
    prov = {"alpha": params.alpha, "beta": params.beta, "field": f.name,
            "method": "finite-difference"}
    reports = [make_report("gamma2-lower-bound", pt, None, float(l), float(r),
                           direction="ge",
                           slack=fd_slack(float(l), float(r), f.has_exact_gradients),
                           provenance=dict(prov))
               for pt, l, r in zip(_point_rows(base, fibers), lhs, rhs)]
    return reports[0] if scalar else reports


def check_curvature_dimension(gen: GeneratorSpec, f: ScalarField, x,
                              flavor: str = "relativistic"):
    """Generalized curvature-dimension check.

    relativistic:  Gamma2(f) >= -(d/2) sigma^2 Gamma(f) - (1/4) Gamma^Z(f)
    general:       Gamma2(f) >= (rho - C/2) Gamma(f) - (C/2) Gamma^Z(f)

    Both flavors also require Gamma2^Z(f) >= 0; the verdict is the
    conjunction and the vertical values ride along in the provenance.
    Accepts a single point (one report) or a batch (list of reports).
    """
    base, fibers, scalar = _as_batch(x)
    xb = (base, fibers)
    g2 = np.atleast_1d(gamma2(gen, f, xb))
    g = np.atleast_1d(gamma(gen, f, None, xb))
    gz = np.atleast_1d(gamma_z(f, None, xb))
    g2z = np.atleast_1d(gamma2_z(gen, f, xb))
    if flavor == "relativistic":
        if gen.kind != "relativistic":
            raise UnsupportedGeometryError("relativistic flavor needs a hyperboloid generator")
        d = gen.geometry.dim
        rhs = -(d / 2.0) * gen.sigma ** 2 * g - 0.25 * gz
    elif flavor == "general":
        if gen.rho is None or gen.c_sigma is None:
            raise HypothesisViolatedError("general flavor needs rho and C_sigma")
        c = gen.c_sigma
        rhs = (gen.rho - c / 2.0) * g - (c / 2.0) * gz
    else:
        raise ValueError(f"unknown flavor {flavor!r}")
    reports = []
    for pt, l, r, gv, gzv, g2zv in zip(_point_rows(base, fibers), g2, rhs, g, gz, g2z):
        slack = fd_slack(float(l), float(r), f.has_exact_gradients)
        rep = make_report(f"cd-{flavor}", pt, None, float(l), float(r),
                          direction="ge", slack=slack,
                          provenance={"field": f.name, "gamma": float(gv),
                                      "gamma_z": float(gzv), "gamma2_z": float(g2zv),
                                      "method": "finite-difference"})
        vertical_ok = g2zv >= -fd_slack(float(g2zv), 0.0, f.has_exact_gradients)
        if rep.verdict == "verified" and not vertical_ok:
            rep.verdict = "violated"
            rep.provenance["vertical_violation"] = float(g2zv)
        reports.append(rep)
    return reports[0] if scalar else reports


def check_declared_lipschitz(gen: GeneratorSpec, rng, n_pairs: int = 200,
                             scale: float = 1.0) -> bool:
    """Sampled difference quotients of sigma_map never exceed the declared bound."""
    smap = gen.sigma_map
    geom = gen.geometry
    ok = True
    for _ in range(n_pairs):
        p = geom.random_point(rng, scale)
        q = geom.random_point(rng, scale)
        dist = float(geom.dist(p, q))
        if dist < 1e-9:
            continue
        gap = float(np.linalg.norm(smap(p) - smap(q)))
        ok = ok and gap <= smap.lipschitz * dist * (1.0 + 1e-9) + 1e-12
    return ok
