"""Geometry kernels: Euclidean space, round sphere, hyperboloid, Heisenberg group.

Sphere S^d lives in R^{d+1} as unit vectors.  The hyperbolic space H^d is the
upper sheet {p0 > 0, q(p,p) = 1} of the unit "sphere" of the Minkowski form
q(u,v) = u0 v0 - <u_vec, v_vec> on R^{1,d}; its Riemannian metric is -q
restricted to tangent spaces.  The Heisenberg group is R^3 with

    (x1,y1,z1) * (x2,y2,z2) = (x1+x2, y1+y2, z1+z2 + (x1 y2 - x2 y1)/2)

and is sub-Riemannian: it exposes the horizontal left-invariant frame and the
group exponential of horizontal vectors, but no distance and no transport.

All maps are vectorized over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CutLocusError, NotTangentError, UnsupportedGeometryError

_EPS_ANTIPODAL = 1e-6
_TANGENT_TOL = 1e-8


def minkowski_form(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """q(u, v) = u0 v0 - <u_vec, v_vec> on R^{1,d}."""
    return u[..., 0] * v[..., 0] - np.sum(u[..., 1:] * v[..., 1:], axis=-1)


@dataclass(frozen=True)
class Geometry:
    name: str
    dim: int            # intrinsic dimension
    ambient_dim: int
    ricci_lower: float | None
    has_transport: bool = True
    has_log: bool = True
    sub_riemannian: bool = False

    # -- interface stubs -------------------------------------------------
    def exp(self, x, v, check=False):
        raise NotImplementedError

    def log(self, x, y):
        raise NotImplementedError

    def dist(self, x, y):
        raise NotImplementedError

    def transport(self, x, y, v):
        raise NotImplementedError

    def tangent_frame(self, x):
        """Orthonormal tangent frame, shape (..., dim, ambient_dim)."""
        raise NotImplementedError

    def project(self, x):
        return x

    def random_point(self, rng, scale=1.0):
        raise NotImplementedError


class Euclidean(Geometry):
    def __init__(self, d: int):
        super().__init__(name=f"euclidean-{d}", dim=d, ambient_dim=d, ricci_lower=0.0)

    def exp(self, x, v, check=False):
        return x + v

    def log(self, x, y):
        return y - x

    def dist(self, x, y):
        return np.linalg.norm(np.asarray(y) - np.asarray(x), axis=-1)

    def transport(self, x, y, v):
        return v

    def tangent_frame(self, x):
        x = np.asarray(x)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()

    def random_point(self, rng, scale=1.0):
        return scale * rng.standard_normal(self.dim)


class Sphere(Geometry):
    def __init__(self, d: int):
        super().__init__(name=f"sphere-{d}", dim=d, ambient_dim=d + 1,
                         ricci_lower=float(d - 1))

    def project(self, x):
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def _check_tangent(self, x, v):
        if np.max(np.abs(np.sum(x * v, axis=-1))) > _TANGENT_TOL * max(1.0, float(np.max(np.abs(v)))):
            raise NotTangentError("vector is not tangent to the sphere")

    def exp(self, x, v, check=False):
        if check:
            self._check_tangent(x, v)
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        small = n < 1e-14
        nn = np.where(small, 1.0, n)
        out = np.cos(n) * x + np.sin(n) * (v / nn)
        return self.project(np.where(small, x + v, out))

    def dist(self, x, y):
        # chord form 2 asin(|x - y| / 2): well conditioned at coincidence
        chord = np.linalg.norm(np.asarray(y) - np.asarray(x), axis=-1)
        return 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))

    def log(self, x, y):
        c = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
        theta = np.arccos(c)
        if np.any(theta > np.pi - _EPS_ANTIPODAL):
            raise CutLocusError("log map rejected near the antipode")
        u = y - c[..., None] * x
        un = np.linalg.norm(u, axis=-1, keepdims=True)
        un = np.where(un < 1e-14, 1.0, un)
        return theta[..., None] * u / un

    def transport(self, x, y, v):
        """Parallel transport along the minimal geodesic from x to y."""
        c = np.clip(np.sum(x * y, axis=-1, keepdims=True), -1.0, 1.0)
        if np.any(c < -1.0 + _EPS_ANTIPODAL):
            raise CutLocusError("transport rejected near the antipode")
        u = y - c * x
        un = np.linalg.norm(u, axis=-1, keepdims=True)
        degenerate = un < 1e-14
        e = u / np.where(degenerate, 1.0, un)
        a = np.sum(v * e, axis=-1, keepdims=True)
        s = np.sqrt(np.clip(1.0 - c * c, 0.0, 1.0))
        out = v + a * ((c - 1.0) * e - s * x)
        return np.where(degenerate, v, out)

    def tangent_frame(self, x):
        # reference frame at +/- north pole moved by the rotation fixing the
        # orthogonal complement of span(pole, x); equals parallel transport
        # along the minimal geodesic from the pole.
        x = np.asarray(x)
        d1 = self.ambient_dim
        pole_sign = np.where(x[..., -1] >= 0.0, 1.0, -1.0)[..., None]
        denom = 1.0 + np.abs(x[..., -1])[..., None]
        frame = np.zeros(x.shape[:-1] + (self.dim, d1))
        for i in range(self.dim):
            ei = np.zeros(d1)
            ei[i] = 1.0
            coef = x[..., i:i + 1] / denom
            vec = ei - coef * (pole_sign * np.eye(d1)[-1] + x)
            frame[..., i, :] = vec
        return frame

    def random_point(self, rng, scale=1.0):
        v = rng.standard_normal(self.ambient_dim)
        return v / np.linalg.norm(v)


class Hyperboloid(Geometry):
    def __init__(self, d: int):
        super().__init__(name=f"hyperboloid-{d}", dim=d, ambient_dim=d + 1,
                         ricci_lower=float(-(d - 1)))

    def project(self, x):
        qn = np.sqrt(np.clip(minkowski_form(x, x), 1e-300, None))
        return x / qn[..., None]

    def _check_tangent(self, x, v):
        if np.max(np.abs(minkowski_form(x, v))) > _TANGENT_TOL * max(1.0, float(np.max(np.abs(v)))):
            raise NotTangentError("vector is not q-orthogonal to the base point")

    @staticmethod
    def tangent_norm(v):
        """Riemannian norm sqrt(-q(v, v)) of a tangent vector."""
        return np.sqrt(np.clip(-minkowski_form(v, v), 0.0, None))

    def exp(self, x, v, check=False):
        if check:
            self._check_tangent(x, v)
        n = self.tangent_norm(v)[..., None]
        small = n < 1e-14
        nn = np.where(small, 1.0, n)
        out = np.cosh(n) * x + np.sinh(n) * (v / nn)
        return self.project(np.where(small, x + v, out))

    def dist(self, x, y):
        # 2 asinh of the half Minkowski chord: q(x-y, x-y) = -4 sinh^2(d/2)
        diff = np.asarray(y) - np.asarray(x)
        chord = np.sqrt(np.clip(-minkowski_form(diff, diff), 0.0, None))
        return 2.0 * np.arcsinh(0.5 * chord)

    def log(self, x, y):
        c = np.clip(minkowski_form(x, y), 1.0, None)
        theta = np.arccosh(c)
        u = y - c[..., None] * x
        un = self.tangent_norm(u)[..., None]
        un = np.where(un < 1e-14, 1.0, un)
        return theta[..., None] * u / un

    def transport(self, x, y, v):
        c = np.clip(minkowski_form(x, y), 1.0, None)[..., None]
        u = y - c * x
        un = self.tangent_norm(u)[..., None]
        degenerate = un < 1e-14
        e = u / np.where(degenerate, 1.0, un)
        a = -minkowski_form(v, e)[..., None]      # Riemannian <v, e>
        s = np.sqrt(np.clip(c * c - 1.0, 0.0, None))
        out = v + a * ((c - 1.0) * e + s * x)
        return np.where(degenerate, v, out)

    def tangent_frame(self, x):
        # boost of the reference frame {e_1..e_d} at e_0; q-orthonormal for
        # every x since x0 >= 1 (no cut locus on the sheet).
        x = np.asarray(x)
        d1 = self.ambient_dim
        denom = (1.0 + x[..., 0])[..., None]
        e0 = np.eye(d1)[0]
        frame = np.zeros(x.shape[:-1] + (self.dim, d1))
        for i in range(self.dim):
            ei = np.eye(d1)[i + 1]
            frame[..., i, :] = ei + (x[..., i + 1:i + 2] / denom) * (e0 + x)
        return frame

    def random_point(self, rng, scale=1.0):
        v = scale * rng.standard_normal(self.dim)
        x0 = np.zeros(self.ambient_dim)
        x0[0] = 1.0
        frame = self.tangent_frame(x0)
        return self.exp(x0, v @ frame)


class Heisenberg(Geometry):
    """3-D Heisenberg group; sub-Riemannian, no distance/transport kernels."""

    def __init__(self):
        super().__init__(name="heisenberg", dim=3, ambient_dim=3, ricci_lower=None,
                         has_transport=False, has_log=False, sub_riemannian=True)

    @staticmethod
    def multiply(g1, g2):
        g1 = np.asarray(g1, dtype=float)
        g2 = np.asarray(g2, dtype=float)
        x = g1[..., 0] + g2[..., 0]
        y = g1[..., 1] + g2[..., 1]
        z = (g1[..., 2] + g2[..., 2]
             + 0.5 * (g1[..., 0] * g2[..., 1] - g2[..., 0] * g1[..., 1]))
        return np.stack([x, y, z], axis=-1)

    @staticmethod
    def inverse(g):
        return -np.asarray(g, dtype=float)

    @staticmethod
    def frame(point, convention="group-law"):
        """Left-invariant frame (X, Y, Z) evaluated at a point, rows of (..., 3, 3).

        "group-law" differentiates left translation: X = d_x - (y/2) d_z,
        Y = d_y + (x/2) d_z.  "printed" flips the sign of Y's vertical part
        (that variant fails to be bracket-generating and is kept only for
        comparison).
        """
        p = np.asarray(point, dtype=float)
        shape = p.shape[:-1]
        out = np.zeros(shape + (3, 3))
        out[..., 0, 0] = 1.0
        out[..., 0, 2] = -0.5 * p[..., 1]
        out[..., 1, 1] = 1.0
        sign = 1.0 if convention == "group-law" else -1.0
        out[..., 1, 2] = sign * 0.5 * p[..., 0]
        out[..., 2, 2] = 1.0
        return out

    def horizontal_frame(self, point, convention="group-law"):
        return self.frame(point, convention)[..., :2, :]

    def exp(self, x, v, check=False):
        """Group exponential of a horizontal vector v = (a, b): x * (a, b, 0)."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] == 2:
            v = np.concatenate([v, np.zeros(v.shape[:-1] + (1,))], axis=-1)
        elif check and np.max(np.abs(v[..., 2])) > _TANGENT_TOL:
            raise NotTangentError("Heisenberg exp expects horizontal vectors")
        return self.multiply(x, np.stack([v[..., 0], v[..., 1],
                                          np.zeros_like(v[..., 0])], axis=-1))

    def dist(self, x, y):
        raise UnsupportedGeometryError("Carnot-Caratheodory distance not provided")

    def log(self, x, y):
        raise UnsupportedGeometryError("log map not provided on the Heisenberg group")

    def transport(self, x, y, v):
        raise UnsupportedGeometryError("no parallel transport on the Heisenberg group")

    def tangent_frame(self, x):
        # horizontal directions only; vertical motion is reached via brackets
        return self.horizontal_frame(x)

    def random_point(self, rng, scale=1.0):
        return scale * rng.standard_normal(3)


def from_id(geometry_id: str) -> Geometry:
    """Build a geometry kernel from ids like euclidean-2, sphere-2, hyperboloid-3."""
    gid = geometry_id.strip().lower()
    if gid == "heisenberg":
        return Heisenberg()
    try:
        head, d = gid.rsplit("-", 1)
        d = int(d)
    except ValueError as exc:
        raise ConfigError(f"unknown geometry id: {geometry_id!r}") from exc
    if head == "euclidean":
        return Euclidean(d)
    if head == "sphere":
        if d < 1:
            raise ConfigError("sphere dimension must be >= 1")
        return Sphere(d)
    if head == "hyperboloid":
        if d < 2:
            raise ConfigError("hyperboloid dimension must be >= 2")
        return Hyperboloid(d)
    raise ConfigError(f"unknown geometry id: {geometry_id!r}")
