"""Pathwise simulation: geodesic random walks, fiber lifts, Monte Carlo estimators.

Walks are geodesic Euler schemes x_{k+1} = exp(x_k, sqrt(dt) sigma Xi_k) with
coordinates Xi_k in an orthonormal tangent frame, standard Gaussian by default
or the fixed-length isotropic variant used by coupling studies; the frame is
parallel-transported along the walk from a reference frame at the start (weak
order one, constraint projection every step).  With the default
"half-laplacian" convention the generator is (sigma^2/2) Laplacian.

Fiber levels accumulate xi_r' = xi_{r-1} exactly for frozen integrands over a
step (trapezoidal at the first two levels), so constant fiber maps produce
machine-exact integrals at every level.

Randomness comes from a counter-based Philox generator keyed by
(seed, stream); identical configs reproduce runs bit for bit, which is what
makes common-random-numbers (CRN) difference quotients usable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import VarianceUnsafeError
from .fields import ProductPoint, ScalarField, grad_fiber
from .gamma import GeneratorSpec

HALF_LAPLACIAN = "half-laplacian"
FULL_LAPLACIAN = "laplacian"

_REORTHO_EVERY = 64


GAUSSIAN_STEPS = "gaussian"
SPHERE_STEPS = "sphere"   # fixed length sqrt(d dt), uniform direction


@dataclass(frozen=True)
class SimConfig:
    t: float
    n_steps: int
    n_paths: int
    seed: int = 0
    stream: int = 0
    crn: bool = True
    convention: str = HALF_LAPLACIAN
    increment_law: str = GAUSSIAN_STEPS
    record_every: int = 1

    def __post_init__(self):
        if self.t < 0 or self.n_steps < 1 or self.n_paths < 1:
            raise ValueError("need t >= 0, n_steps >= 1, n_paths >= 1")
        if self.convention not in (HALF_LAPLACIAN, FULL_LAPLACIAN):
            raise ValueError(f"unknown generator convention {self.convention!r}")
        if self.increment_law not in (GAUSSIAN_STEPS, SPHERE_STEPS):
            raise ValueError(f"unknown increment law {self.increment_law!r}")

    @property
    def dt(self) -> float:
        return self.t / self.n_steps

    def sigma_scale(self) -> float:
        return math.sqrt(2.0) if self.convention == FULL_LAPLACIAN else 1.0

    def provenance(self) -> dict:
        return {"seed": self.seed, "stream": self.stream, "n_paths": self.n_paths,
                "dt": self.dt, "t": self.t, "convention": self.convention,
                "increment_law": self.increment_law, "crn": self.crn}


def draw_increments(rng: np.random.Generator, n: int, d: int, law: str) -> np.ndarray:
    """Per-step frame coordinates: standard Gaussian, or the fixed-length
    isotropic variant |z| = sqrt(d) matching the same second moments."""
    z = rng.standard_normal((n, d))
    if law == SPHERE_STEPS:
        z = z / np.linalg.norm(z, axis=-1, keepdims=True) * math.sqrt(d)
    return z


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class SemigroupEstimate:
    value: float
    se: float
    n: int
    method: str

    def as_dict(self):
        return {"value": self.value, "se": self.se, "n": self.n, "method": self.method}


@dataclass
class GradientEstimate:
    components: np.ndarray
    ses: np.ndarray
    h: float
    n: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    @property
    def norm_se(self) -> float:
        nrm = self.norm
        if nrm < 1e-12:
            return float(np.sqrt(np.sum(self.ses ** 2)))
        return float(np.sqrt(np.sum((self.components * self.ses) ** 2)) / nrm)


# ---------------------------------------------------------------------------
# frames and stepping
# ---------------------------------------------------------------------------

def _reorthonormalize(geom, x, frame):
    if isinstance(geom, geo.Sphere):
        def inner(a, b):
            return np.sum(a * b, axis=-1, keepdims=True)

        frame = frame - inner(frame, x[:, None, :]) * x[:, None, :]
    elif isinstance(geom, geo.Hyperboloid):
        def inner(a, b):
            return -geo.minkowski_form(a, b)[..., None]

        # tangency restoration: v <- v - q(v, x) x  (q(x, x) = 1)
        qvx = geo.minkowski_form(frame, x[:, None, :])[..., None]
        frame = frame - qvx * x[:, None, :]
    else:
        return frame
    d = frame.shape[-2]
    for i in range(d):
        v = frame[:, i]
        for j in range(i):
            v = v - inner(v, frame[:, j]) * frame[:, j]
        frame[:, i] = v / np.sqrt(np.clip(inner(v, v), 1e-300, None))
    return frame


class _WalkState:
    """Walker ensemble on a geometry with a transported orthonormal frame."""

    def __init__(self, geom: geo.Geometry, x0: np.ndarray, n_paths: int):
        self.geom = geom
        self.x = np.broadcast_to(np.asarray(x0, dtype=float),
                                 (n_paths, geom.ambient_dim)).copy()
        self.frame = geom.tangent_frame(self.x)
        self._steps = 0

    def step(self, dxi: np.ndarray, scale: float) -> np.ndarray:
        """Advance by exp(x, scale * sum_i dxi_i frame_i); returns new points."""
        geom = self.geom
        v = np.einsum("nd,nda->na", dxi, self.frame)
        x_new = geom.exp(self.x, scale * v)
        if geom.has_transport:
            self.frame = geom.transport(self.x[:, None, :], x_new[:, None, :],
                                        self.frame)
            self._steps += 1
            if self._steps % _REORTHO_EVERY == 0:
                self.frame = _reorthonormalize(geom, x_new, self.frame)
        self.x = x_new
        return x_new


class _HeisenbergWalk:
    """Explicit Heisenberg Brownian motion: planar BM plus signed-area integral.

    The vertical update uses the midpoint (Stratonovich-consistent) rule,
    which coincides algebraically with the Ito sum for the signed area.
    """

    def __init__(self, x0, n_paths):
        self.x = np.broadcast_to(np.asarray(x0, dtype=float), (n_paths, 3)).copy()

    def step(self, dxi: np.ndarray, scale: float) -> np.ndarray:
        dw = scale * dxi
        x, y, z = self.x[:, 0], self.x[:, 1], self.x[:, 2]
        xm = x + 0.5 * dw[:, 0]
        ym = y + 0.5 * dw[:, 1]
        z_new = z + 0.5 * (xm * dw[:, 1] - ym * dw[:, 0])
        self.x = np.stack([x + dw[:, 0], y + dw[:, 1], z_new], axis=-1)
        return self.x


def _make_walker(geom, x0, n_paths):
    if isinstance(geom, geo.Heisenberg):
        return _HeisenbergWalk(x0, n_paths)
    return _WalkState(geom, x0, n_paths)


def _noise_dim(geom) -> int:
    return 2 if isinstance(geom, geo.Heisenberg) else geom.dim


class _FiberAccumulator:
    """Iterated time integrals xi_r of the fiber drift along a walk."""

    def __init__(self, sigma_map, xi0s, n_paths):
        self.sigma_map = sigma_map
        self.fibers = [np.broadcast_to(np.asarray(f, dtype=float),
                                       (n_paths, np.asarray(f).shape[-1])).copy()
                       for f in xi0s]

    def update(self, x_old, x_new, dt):
        m = 0.5 * (self.sigma_map(x_old) + self.sigma_map(x_new))
        old = [f.copy() for f in self.fibers]
        for r in range(len(self.fibers)):
            acc = m * dt ** (r + 1) / math.factorial(r + 1)
            for j in range(r):
                acc = acc + old[j] * dt ** (r - j) / math.factorial(r - j)
            self.fibers[r] = old[r] + acc


# ---------------------------------------------------------------------------
# path simulation
# ---------------------------------------------------------------------------

@dataclass
class BasePath:
    times: np.ndarray
    points: np.ndarray  # (n_records, n_paths, ambient_dim)


@dataclass
class LiftPath:
    times: np.ndarray
    base: np.ndarray
    fibers: tuple[np.ndarray, ...]  # each (n_records, n_paths, k)


@dataclass
class LiftSample:
    """Endpoint ensemble of a lifted walk."""

    base: np.ndarray                 # (n_paths, ambient_dim)
    fibers: tuple[np.ndarray, ...]   # each (n_paths, k)
    config: SimConfig


def simulate_bm(geom: geo.Geometry, x0, cfg: SimConfig, sigma: float = 1.0) -> BasePath:
    """Brownian motion on the geometry; records every cfg.record_every steps."""
    rng = make_rng(cfg.seed, cfg.stream)
    walker = _make_walker(geom, x0, cfg.n_paths)
    scale = math.sqrt(cfg.dt) * sigma * cfg.sigma_scale()
    nd = _noise_dim(geom)
    records = [walker.x.copy()]
    times = [0.0]
    for k in range(cfg.n_steps):
        x_new = walker.step(draw_increments(rng, cfg.n_paths, nd, cfg.increment_law), scale)
        if (k + 1) % cfg.record_every == 0 or k + 1 == cfg.n_steps:
            records.append(x_new.copy())
            times.append((k + 1) * cfg.dt)
    return BasePath(times=np.asarray(times), points=np.stack(records))


def simulate_heisenberg_bm(p0, cfg: SimConfig) -> BasePath:
    return simulate_bm(geo.Heisenberg(), p0, cfg)


def simulate_lift(geom: geo.Geometry, sigma_map, x0, xi0s, cfg: SimConfig,
                  sigma: float = 1.0) -> LiftPath:
    """Walk plus iterated fiber integrals, recorded on the step grid."""
    rng = make_rng(cfg.seed, cfg.stream)
    walker = _make_walker(geom, x0, cfg.n_paths)
    fibers = _FiberAccumulator(sigma_map, xi0s, cfg.n_paths)
    scale = math.sqrt(cfg.dt) * sigma * cfg.sigma_scale()
    nd = _noise_dim(geom)
    rec_b = [walker.x.copy()]
    rec_f = [[f.copy() for f in fibers.fibers]]
    times = [0.0]
    for k in range(cfg.n_steps):
        x_old = walker.x.copy()
        x_new = walker.step(draw_increments(rng, cfg.n_paths, nd, cfg.increment_law), scale)
        fibers.update(x_old, x_new, cfg.dt)
        if (k + 1) % cfg.record_every == 0 or k + 1 == cfg.n_steps:
            rec_b.append(x_new.copy())
            rec_f.append([f.copy() for f in fibers.fibers])
            times.append((k + 1) * cfg.dt)
    stacked = tuple(np.stack([rf[r] for rf in rec_f])
                    for r in range(len(fibers.fibers)))
    return LiftPath(times=np.asarray(times), base=np.stack(rec_b), fibers=stacked)


def lift_endpoints(gen: GeneratorSpec, x: ProductPoint, cfg: SimConfig) -> LiftSample:
    """Endpoints only; the workhorse of the Monte Carlo estimators."""
    rng = make_rng(cfg.seed, cfg.stream)
    geom = gen.geometry
    walker = _make_walker(geom, x.base, cfg.n_paths)
    fibers = _FiberAccumulator(gen.sigma_map, x.fibers, cfg.n_paths)
    scale = math.sqrt(cfg.dt) * gen.sigma * cfg.sigma_scale()
    nd = _noise_dim(geom)
    for _ in range(cfg.n_steps):
        x_old = walker.x.copy()
        x_new = walker.step(draw_increments(rng, cfg.n_paths, nd, cfg.increment_law), scale)
        fibers.update(x_old, x_new, cfg.dt)
    return LiftSample(base=walker.x, fibers=tuple(fibers.fibers), config=cfg)


# ---------------------------------------------------------------------------
# Monte Carlo estimators
# ---------------------------------------------------------------------------

def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.shape[0]
    mean = float(np.mean(values))
    if n < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(n))


def mc_expectation(gen: GeneratorSpec, values_fn, x: ProductPoint,
                   cfg: SimConfig, sample: LiftSample | None = None) -> SemigroupEstimate:
    """Monte Carlo P_t[values_fn] from lifted endpoints (optionally shared)."""
    sample = sample or lift_endpoints(gen, x, cfg)
    vals = np.asarray(values_fn(sample.base, sample.fibers), dtype=float)
    mean, se = _mean_se(vals)
    return SemigroupEstimate(value=mean, se=se, n=cfg.n_paths, method="monte-carlo")


def mc_semigroup(gen: GeneratorSpec, f: ScalarField, x: ProductPoint,
                 cfg: SimConfig, sample: LiftSample | None = None) -> SemigroupEstimate:
    """(P_t f)(x) as a sample mean over lifted endpoints, with standard error."""
    return mc_expectation(gen, lambda b, fb: f.value(b, fb), x, cfg, sample)


def _fiber_endpoint_gradient(gen, f, sample: LiftSample, level: int):
    """P_t gradient in a starting-fiber coordinate via the affine shift rule."""
    t = sample.config.t
    k = sample.fibers[level].shape[-1]
    total = np.zeros((sample.base.shape[0], k))
    for r in range(level, len(sample.fibers)):
        coef = t ** (r - level) / math.factorial(r - level)
        total += coef * grad_fiber(f, sample.base, sample.fibers, r)
    return total


def mc_gradient(gen: GeneratorSpec, f: ScalarField, x: ProductPoint, cfg: SimConfig,
                h: float = 1e-2, directions: str = "base") -> GradientEstimate:
    """Gradient of y -> P_t f(y) at x by CRN central differences.

    Base directions run one pair of lifted ensembles per frame vector with
    identical driving noise; starting-fiber directions reduce to endpoint
    derivatives (the fiber start enters the endpoint affinely), so they reuse
    a single ensemble.  Refuses to run without common random numbers: the
    difference quotients would be noise-dominated.
    """
    if not cfg.crn:
        raise VarianceUnsafeError("gradient estimation requires common random numbers")
    geom = gen.geometry
    if directions == "base":
        if isinstance(geom, geo.Heisenberg):
            dirs = np.eye(2)
            perturb = lambda e, s: ProductPoint(
                geom.exp(x.base, s * h * e), x.fibers)
        else:
            frame = geom.tangent_frame(x.base)
            dirs = frame
            perturb = lambda e, s: ProductPoint(
                geom.project(geom.exp(x.base, s * h * e)), x.fibers)
        comps, ses = [], []
        for e in dirs:
            plus = lift_endpoints(gen, perturb(e, +1.0), cfg)
            minus = lift_endpoints(gen, perturb(e, -1.0), cfg)
            quot = (f.value(plus.base, plus.fibers)
                    - f.value(minus.base, minus.fibers)) / (2.0 * h)
            m, se = _mean_se(quot)
            comps.append(m)
            ses.append(se)
        return GradientEstimate(components=np.asarray(comps), ses=np.asarray(ses),
                                h=h, n=cfg.n_paths)
    if directions.startswith("fiber"):
        level = int(directions.split(":")[1]) if ":" in directions else 0
        sample = lift_endpoints(gen, x, cfg)
        grads = _fiber_endpoint_gradient(gen, f, sample, level)
        comps = np.mean(grads, axis=0)
        ses = np.std(grads, axis=0, ddof=1) / math.sqrt(cfg.n_paths)
        return GradientEstimate(components=comps, ses=ses, h=0.0, n=cfg.n_paths)
    raise ValueError(f"unknown direction set {directions!r}")


# ---------------------------------------------------------------------------
# flat fast path: one zero-start ensemble serves every start (CRN shifts)
# ---------------------------------------------------------------------------

@dataclass
class FlatLiftSample:
    """Zero-start flat ensemble for the identity fiber map.

    The discrete update is affine in the starting point with the continuous
    coefficients t^{r-a}/(r-a)!, so endpoints for any start are exact shifts
    of the zero-start ensemble (the CRN backbone of the flat MC scenario).
    """

    t: float
    base: np.ndarray
    fibers: tuple[np.ndarray, ...]
    config: SimConfig

    def at(self, x: ProductPoint) -> LiftSample:
        comps = [np.asarray(x.base, dtype=float)] + [np.asarray(f, dtype=float)
                                                     for f in x.fibers]
        base = self.base + comps[0]
        fibers = []
        for r in range(1, len(self.fibers) + 1):
            shift = sum(self.t ** (r - a) / math.factorial(r - a) * comps[a]
                        for a in range(r + 1))
            fibers.append(self.fibers[r - 1] + shift)
        return LiftSample(base=base, fibers=tuple(fibers), config=self.config)


def flat_lift_sample(gen: GeneratorSpec, cfg: SimConfig) -> FlatLiftSample:
    if gen.kind != "flat" or gen.sigma_map.name != "identity":
        raise ValueError("flat fast path needs a flat generator with the identity map")
    d = gen.geometry.dim
    zero = ProductPoint(np.zeros(d), tuple(np.zeros(d) for _ in range(gen.levels)))
    sample = lift_endpoints(gen, zero, cfg)
    return FlatLiftSample(t=cfg.t, base=sample.base, fibers=sample.fibers, config=cfg)
