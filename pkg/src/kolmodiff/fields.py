"""Scalar test fields on product spaces base x fiber^levels.

A field evaluates on batched coordinate arrays: ``base`` has shape
``(..., base_dim)`` and each fiber level has shape ``(..., fiber_dim)``.
Manifold fields take ambient base coordinates and must be defined (and
smooth) on an ambient neighbourhood so that Euclidean gradient callbacks
restrict correctly to curves on the manifold.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError

C1 = "C1"
C2 = "C2"
SMOOTH = "smooth"

_ORDER = {C1: 1, C2: 2, SMOOTH: 99}


def smoothness_order(flag: str) -> int:
    return _ORDER[flag]


@dataclass(frozen=True)
class ProductPoint:
    """A point x = (p, xi_1, .., xi_n) on a product space."""

    base: np.ndarray
    fibers: tuple[np.ndarray, ...]

    @classmethod
    def of(cls, base, *fibers) -> "ProductPoint":
        b = np.atleast_1d(np.asarray(base, dtype=float))
        fs = tuple(np.atleast_1d(np.asarray(f, dtype=float)) for f in fibers)
        return cls(base=b, fibers=fs)

    @property
    def fiber(self) -> np.ndarray:
        return self.fibers[0]

    @property
    def levels(self) -> int:
        return len(self.fibers)

    def scale(self) -> float:
        """max(1, |x|) used to scale finite-difference steps."""
        sq = float(np.dot(self.base, self.base))
        for f in self.fibers:
            sq += float(np.dot(f, f))
        return max(1.0, np.sqrt(sq))

    def as_jsonable(self):
        return {
            "base": [float(v) for v in self.base],
            "fibers": [[float(v) for v in f] for f in self.fibers],
        }


# Finite-difference step scales. Library fields differentiate with the inner
# step; derived fields (generator/gamma fields realized by differencing) carry
# the larger outer step so nested differentiation stays conditioned.
INNER_FD_SCALE = 1e-4
OUTER_FD_SCALE = 1e-3


@dataclass(frozen=True)
class ScalarField:
    name: str
    base_dim: int
    fiber_dim: int
    levels: int = 1
    fn: Callable = None  # (base, fibers) -> values
    grad_base: Optional[Callable] = None  # (base, fibers) -> (..., base_dim)
    grad_fiber: Optional[Callable] = None  # (base, fibers, level) -> (..., fiber_dim)
    hess_base: Optional[Callable] = None  # (base, fibers) -> (..., bd, bd)
    smoothness: str = SMOOTH
    positive: bool = False
    bounded: bool = False
    lipschitz: bool = False
    fd_scale: float = INNER_FD_SCALE
    params: dict = dc_field(default_factory=dict)

    def value(self, base: np.ndarray, fibers: Sequence[np.ndarray]) -> np.ndarray:
        vals = np.asarray(self.fn(base, tuple(fibers)), dtype=float)
        # derived fields may ignore one factor; pin the full stencil shape
        shape = np.broadcast_shapes(np.shape(base)[:-1],
                                    *[np.shape(f)[:-1] for f in fibers])
        if vals.shape != shape:
            vals = np.broadcast_to(vals, shape)
        return vals

    def at(self, x: ProductPoint) -> float:
        return float(self.value(x.base, x.fibers))

    @property
    def has_exact_gradients(self) -> bool:
        return self.grad_base is not None and self.grad_fiber is not None

    def with_name(self, name: str) -> "ScalarField":
        return replace(self, name=name)


def function_field(name, base_dim, fiber_dim, fn, *, levels=1, **kw) -> ScalarField:
    """Field from a plain vectorized callable, derivative-free by default."""
    return ScalarField(name=name, base_dim=base_dim, fiber_dim=fiber_dim,
                       levels=levels, fn=fn, **kw)


def broadcast_point(base, fibers):
    """Broadcast base and fiber arrays to one common batch shape."""
    base = np.asarray(base, dtype=float)
    fibers = tuple(np.asarray(f, dtype=float) for f in fibers)
    shape = np.broadcast_shapes(base.shape[:-1], *[f.shape[:-1] for f in fibers])
    b = np.broadcast_to(base, shape + base.shape[-1:])
    fs = tuple(np.broadcast_to(f, shape + f.shape[-1:]) for f in fibers)
    return b, fs


# ---------------------------------------------------------------------------
# coordinate finite differences (flat/ambient coordinates)
# ---------------------------------------------------------------------------

def fd_step(field: ScalarField, base, fibers) -> float:
    sq = np.sum(np.asarray(base) ** 2, axis=-1)
    for f in fibers:
        sq = sq + np.sum(np.asarray(f) ** 2, axis=-1)
    scale = max(1.0, float(np.sqrt(np.max(sq))))
    return field.fd_scale * scale


def fd_grad_base(field: ScalarField, base, fibers, h: float) -> np.ndarray:
    """Central-difference gradient in the base coordinates, batched."""
    nb = field.base_dim
    eye = np.eye(nb)
    shifted = base[..., None, :] + h * np.concatenate([eye, -eye], axis=0)
    fb = tuple(f[..., None, :] for f in fibers)
    vals = field.value(shifted, fb)
    return (vals[..., :nb] - vals[..., nb:]) / (2.0 * h)


def fd_grad_fiber(field: ScalarField, base, fibers, level: int, h: float) -> np.ndarray:
    k = field.fiber_dim
    eye = np.eye(k)
    offs = np.concatenate([eye, -eye], axis=0)
    fb = []
    for lev, f in enumerate(fibers):
        if lev == level:
            fb.append(f[..., None, :] + h * offs)
        else:
            fb.append(f[..., None, :])
    vals = field.value(base[..., None, :], tuple(fb))
    return (vals[..., :k] - vals[..., k:]) / (2.0 * h)


def fd_laplacian_base(field: ScalarField, base, fibers, h: float) -> np.ndarray:
    """Sum of pure second differences over the base coordinates."""
    nb = field.base_dim
    eye = np.eye(nb)
    shifted = base[..., None, :] + h * np.concatenate([eye, -eye], axis=0)
    fb = tuple(f[..., None, :] for f in fibers)
    vals = field.value(shifted, fb)
    center = field.value(base, fibers)
    return (np.sum(vals, axis=-1) - 2.0 * nb * center) / (h * h)


def grad_base(field: ScalarField, base, fibers, h: float | None = None) -> np.ndarray:
    if field.grad_base is not None:
        return np.asarray(field.grad_base(base, tuple(fibers)), dtype=float)
    return fd_grad_base(field, base, fibers, h or fd_step(field, base, fibers))


def grad_fiber(field: ScalarField, base, fibers, level: int = 0,
               h: float | None = None) -> np.ndarray:
    if field.grad_fiber is not None:
        return np.asarray(field.grad_fiber(base, tuple(fibers), level), dtype=float)
    return fd_grad_fiber(field, base, fibers, level, h or fd_step(field, base, fibers))


def laplacian_base(field: ScalarField, base, fibers, h: float | None = None) -> np.ndarray:
    if field.hess_base is not None:
        hb = np.asarray(field.hess_base(base, tuple(fibers)), dtype=float)
        return np.trace(hb, axis1=-2, axis2=-1)
    return fd_laplacian_base(field, base, fibers, h or fd_step(field, base, fibers))


# ---------------------------------------------------------------------------
# library fields
# ---------------------------------------------------------------------------

def linear_fiber(base_dim, fiber_dim, coeffs=None, *, levels=1, level=0,
                 name="linear-xi") -> ScalarField:
    a = np.ones(fiber_dim) if coeffs is None else np.asarray(coeffs, dtype=float)

    def fn(p, xis):
        return np.sum(a * xis[level], axis=-1)

    def gp(p, xis):
        return np.zeros(p.shape)

    def gf(p, xis, lev):
        out = np.zeros(np.broadcast_shapes(p[..., :1].shape, xis[lev].shape))
        if lev == level:
            out = out + a
        return out

    def hb(p, xis):
        return np.zeros(p.shape + (base_dim,))

    return ScalarField(name=name, base_dim=base_dim, fiber_dim=fiber_dim,
                       levels=levels, fn=fn, grad_base=gp, grad_fiber=gf,
                       hess_base=hb, lipschitz=True,
                       params={"coeffs": list(map(float, a)), "level": level})


def linear_base(base_dim, fiber_dim, coeffs=None, *, levels=1,
                name="linear-p") -> ScalarField:
    a = np.ones(base_dim) if coeffs is None else np.asarray(coeffs, dtype=float)

    def fn(p, xis):
        return np.sum(a * p, axis=-1)

    def gp(p, xis):
        return np.zeros(p.shape) + a

    def gf(p, xis, lev):
        return np.zeros(np.broadcast_shapes(p[..., :1].shape, xis[lev].shape))

    def hb(p, xis):
        return np.zeros(p.shape + (base_dim,))

    return ScalarField(name=name, base_dim=base_dim, fiber_dim=fiber_dim,
                       levels=levels, fn=fn, grad_base=gp, grad_fiber=gf,
                       hess_base=hb, lipschitz=True,
                       params={"coeffs": list(map(float, a))})


def polynomial(base_dim, fiber_dim, terms, *, levels=1, name="poly") -> ScalarField:
    """Sum of monomials c * p^a * xi^b.

    ``terms`` is a sequence of (coef, base_exponents, fiber_exponents); the
    exponent tuples may be shorter than the dimension (padded with zeros).
    Only level-0 fiber monomials are supported.
    """
    parsed = []
    for coef, pa, xa in terms:
        pa = tuple(pa) + (0,) * (base_dim - len(pa))
        xa = tuple(xa) + (0,) * (fiber_dim - len(xa))
        parsed.append((float(coef), pa, xa))

    def mono(v, exps):
        out = 1.0
        for j, e in enumerate(exps):
            if e:
                out = out * v[..., j] ** e
        return out

    def fn(p, xis):
        out = 0.0
        for c, pa, xa in parsed:
            out = out + c * mono(p, pa) * mono(xis[0], xa)
        return out + np.zeros(np.broadcast_shapes(p[..., 0].shape, xis[0][..., 0].shape))

    def d_mono(v, exps, j):
        e = exps[j]
        if e == 0:
            return 0.0
        lowered = exps[:j] + (e - 1,) + exps[j + 1:]
        return e * mono(v, lowered)

    def gp(p, xis):
        cols = []
        for j in range(base_dim):
            col = 0.0
            for c, pa, xa in parsed:
                col = col + c * d_mono(p, pa, j) * mono(xis[0], xa)
            cols.append(col + np.zeros(np.broadcast_shapes(p[..., 0].shape, xis[0][..., 0].shape)))
        return np.stack(cols, axis=-1)

    def gf(p, xis, lev):
        shape = np.broadcast_shapes(p[..., 0].shape, xis[0][..., 0].shape)
        if lev != 0:
            return np.zeros(shape + (fiber_dim,))
        cols = []
        for j in range(fiber_dim):
            col = 0.0
            for c, pa, xa in parsed:
                col = col + c * mono(p, pa) * d_mono(xis[0], xa, j)
            cols.append(col + np.zeros(shape))
        return np.stack(cols, axis=-1)

    def hb(p, xis):
        shape = np.broadcast_shapes(p[..., 0].shape, xis[0][..., 0].shape)
        out = np.zeros(shape + (base_dim, base_dim))
        for i in range(base_dim):
            for j in range(base_dim):
                acc = 0.0
                for c, pa, xa in parsed:
                    e = pa[i]
                    if e == 0:
                        continue
                    lowered = pa[:i] + (e - 1,) + pa[i + 1:]
                    acc = acc + c * e * d_mono(p, lowered, j) * mono(xis[0], xa)
                out[..., i, j] = acc
        return out

    return ScalarField(name=name, base_dim=base_dim, fiber_dim=fiber_dim,
                       levels=levels, fn=fn, grad_base=gp, grad_fiber=gf,
                       hess_base=hb, params={"terms": [list(map(list, (t[1], t[2]))) + [t[0]] for t in parsed]})


def gauss_bump(base_dim, fiber_dim, center=0.0, width=1.0, *, levels=1,
               mode="both", base_only=False, name=None) -> ScalarField:
    """Gaussian bump exp(-|. - c|^2 / (2 s^2)); bounded, Lipschitz, positive.

    mode selects the arguments entering the exponent: "both", "base"
    (constant in the fibers), or "fiber" (constant on the base).
    """
    c = float(center)
    s = float(width)
    if base_only:
        mode = "base"
    nm = name or f"gauss-bump({center}, {width})"

    def quad(p, xis):
        q = np.sum((p - c) ** 2, axis=-1) if mode != "fiber" \
            else 0.0 * p[..., 0]
        if mode != "base":
            for f in xis:
                q = q + np.sum((f - c) ** 2, axis=-1)
        else:
            q = q + 0.0 * xis[0][..., 0]
        return q

    def fn(p, xis):
        return np.exp(-quad(p, xis) / (2.0 * s * s))

    def gp(p, xis):
        if mode == "fiber":
            return np.zeros(np.broadcast_shapes(p.shape, xis[0][..., :1].shape[:-1] + p.shape[-1:]))
        return fn(p, xis)[..., None] * (-(p - c) / (s * s))

    def gf(p, xis, lev):
        if mode == "base":
            return np.zeros(np.broadcast_shapes(p[..., :1].shape, xis[lev].shape))
        return fn(p, xis)[..., None] * (-(xis[lev] - c) / (s * s))

    def hb(p, xis):
        v = fn(p, xis)
        shape = np.broadcast_shapes(p[..., 0].shape, xis[0][..., 0].shape)
        if mode == "fiber":
            return np.zeros(shape + (base_dim, base_dim))
        u = (p - c) / (s * s)
        outer = u[..., :, None] * u[..., None, :]
        return np.broadcast_to(
            v[..., None, None] * (outer - np.eye(base_dim) / (s * s)),
            shape + (base_dim, base_dim))

    return ScalarField(name=nm, base_dim=base_dim, fiber_dim=fiber_dim,
                       levels=levels, fn=fn, grad_base=gp, grad_fiber=gf,
                       hess_base=hb, positive=True, bounded=True, lipschitz=True,
                       params={"center": c, "width": s, "mode": mode})


def positive_bump(base_dim, fiber_dim, center=0.0, width=1.0, floor=0.1, *,
                  levels=1, name=None) -> ScalarField:
    """Gaussian bump lifted by an additive floor so log P_t f stays conditioned."""
    bump = gauss_bump(base_dim, fiber_dim, center, width, levels=levels)
    fl = float(floor)
    nm = name or f"positive-bump({center}, {width}, {floor})"

    def fn(p, xis):
        return fl + bump.fn(p, xis)

    return ScalarField(name=nm, base_dim=base_dim, fiber_dim=fiber_dim,
                       levels=levels, fn=fn, grad_base=bump.grad_base,
                       grad_fiber=bump.grad_fiber, hess_base=bump.hess_base,
                       positive=True, bounded=True, lipschitz=True,
                       params={"center": center, "width": width, "floor": fl})


def tanh_base(base_dim, fiber_dim, *, levels=1, name="tanh-p") -> ScalarField:
    """f = sum_i tanh(p_i); bounded with bounded derivatives of all orders."""

    def fn(p, xis):
        return np.sum(np.tanh(p), axis=-1) + 0.0 * xis[0][..., 0]

    def gp(p, xis):
        return (1.0 / np.cosh(p) ** 2) + 0.0 * xis[0][..., :1]

    def gf(p, xis, lev):
        return np.zeros(np.broadcast_shapes(p[..., :1].shape, xis[lev].shape))

    def hb(p, xis):
        d = -2.0 * np.tanh(p) / np.cosh(p) ** 2
        shape = np.broadcast_shapes(p[..., 0].shape, xis[0][..., 0].shape)
        out = np.zeros(shape + (base_dim, base_dim))
        for j in range(base_dim):
            out[..., j, j] = d[..., j]
        return out

    return ScalarField(name=name, base_dim=base_dim, fiber_dim=fiber_dim,
                       levels=levels, fn=fn, grad_base=gp, grad_fiber=gf,
                       hess_base=hb, bounded=True, lipschitz=True)


def base_coordinate(base_dim, fiber_dim, index, *, levels=1, name=None) -> ScalarField:
    return linear_base(base_dim, fiber_dim,
                       np.eye(base_dim)[index], levels=levels,
                       name=name or f"coordinate-p{index}")


def fiber_coordinate(base_dim, fiber_dim, index, *, levels=1, level=0, name=None) -> ScalarField:
    return linear_fiber(base_dim, fiber_dim, np.eye(fiber_dim)[index],
                        levels=levels, level=level,
                        name=name or f"coordinate-xi{index}")


def strip_exact_derivatives(f: ScalarField, smoothness=SMOOTH) -> ScalarField:
    """Keep only pointwise evaluation; forces the finite-difference path."""
    return replace(f, grad_base=None, grad_fiber=None, hess_base=None,
                   smoothness=smoothness, name=f.name + "#fd")


# ---------------------------------------------------------------------------
# string registry
# ---------------------------------------------------------------------------

def _parse_id(s: str):
    s = s.strip()
    if "(" in s:
        head, rest = s.split("(", 1)
        if not rest.endswith(")"):
            raise ConfigError(f"malformed field id: {s!r}")
        try:
            args = ast.literal_eval("(" + rest[:-1] + ",)")
        except (SyntaxError, ValueError) as exc:
            raise ConfigError(f"malformed field id: {s!r}") from exc
        return head.strip(), args
    return s, ()


def field_from_id(spec: str, base_dim: int, fiber_dim: int, levels: int = 1) -> ScalarField:
    """Resolve a library field from its string id.

    Supported ids: linear-xi, linear-p, poly(coeffs), gauss-bump(c, s),
    positive-bump(c, s, floor), tanh-p, poly-quadratic, poly-cross,
    coordinate-p<j>, coordinate-xi<j>.
    """
    head, args = _parse_id(spec)
    if head == "linear-xi":
        return linear_fiber(base_dim, fiber_dim, args[0] if args else None, levels=levels)
    if head == "linear-p":
        return linear_base(base_dim, fiber_dim, args[0] if args else None, levels=levels)
    if head == "poly":
        return polynomial(base_dim, fiber_dim, args[0], levels=levels, name=spec)
    if head == "poly-quadratic":
        terms = [(1.0, (2,), ()), (1.0, (), (2,))]
        return polynomial(base_dim, fiber_dim, terms, levels=levels, name="poly-quadratic")
    if head == "poly-cross":
        terms = [(1.0, (1,), (1,))]
        return polynomial(base_dim, fiber_dim, terms, levels=levels, name="poly-cross")
    if head == "gauss-bump":
        c = args[0] if args else 0.0
        s = args[1] if len(args) > 1 else 1.0
        return gauss_bump(base_dim, fiber_dim, c, s, levels=levels)
    if head == "gauss-bump-p":
        c = args[0] if args else 0.0
        s = args[1] if len(args) > 1 else 1.0
        return gauss_bump(base_dim, fiber_dim, c, s, levels=levels, mode="base",
                          name=spec)
    if head == "gauss-bump-xi":
        c = args[0] if args else 0.0
        s = args[1] if len(args) > 1 else 1.0
        return gauss_bump(base_dim, fiber_dim, c, s, levels=levels, mode="fiber",
                          name=spec)
    if head == "positive-bump":
        c = args[0] if args else 0.0
        s = args[1] if len(args) > 1 else 1.0
        fl = args[2] if len(args) > 2 else 0.1
        return positive_bump(base_dim, fiber_dim, c, s, fl, levels=levels)
    if head == "tanh-p":
        return tanh_base(base_dim, fiber_dim, levels=levels)
    if head.startswith("coordinate-p"):
        return base_coordinate(base_dim, fiber_dim, int(head[len("coordinate-p"):]), levels=levels)
    if head.startswith("coordinate-xi"):
        return fiber_coordinate(base_dim, fiber_dim, int(head[len("coordinate-xi"):]), levels=levels)
    raise ConfigError(f"unknown field id: {spec!r}")


DEFAULT_FLAT_LIBRARY = (
    "linear-xi",
    "linear-p",
    "poly-quadratic",
    "poly-cross",
    "gauss-bump(0.0, 1.0)",
    "positive-bump(0.0, 1.0, 0.1)",
    "tanh-p",
)
