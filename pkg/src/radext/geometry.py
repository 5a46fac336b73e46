"""Domains, uniform samplers, seeded RNG streams, and the maps between
the ball, the cube, and the polar cap chart."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Domain",
    "CapChart",
    "RngStream",
    "norm",
    "sample",
    "phi_map",
    "cap_chart_build",
    "gnomonic",
    "sphere_area",
    "ball_volume",
    "north_pole",
]

ORIGIN_CUSHION = 1e-12

_VOLUME_KINDS = ("ball", "cube", "annulus", "halfspace_cone")
_SURFACE_KINDS = ("sphere", "cube_boundary", "plane_disk")


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def north_pole(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[-1] = 1.0
    return e


def norm(v, kind: str = "euclidean"):
    """Euclidean or sup norm along the last axis."""
    v = np.asarray(v, dtype=float)
    if kind == "euclidean":
        return np.sqrt(np.sum(v * v, axis=-1))
    if kind == "sup":
        return np.max(np.abs(v), axis=-1)
    raise ValueError(f"unknown norm kind {kind!r}")


@dataclass(frozen=True)
class Domain:
    """A sampling domain in ambient dimension ``dim``.

    Kinds: ``sphere`` (unit sphere), ``ball`` (closed unit ball), ``cube``
    ((-1,1)^n), ``cube_boundary``, ``annulus`` (dyadic shell
    2^{-level-1} < |X| < 2^{-level}), ``plane_disk`` (disk of ``radius``
    in R^{n-1}), ``halfspace_cone`` (the homogeneous cone over the plane
    disk placed at height 1, truncated to heights (0, 1]).
    """

    kind: str
    dim: int
    level: int = 0
    radius: float = 0.5

    def __post_init__(self):
        if self.kind not in _VOLUME_KINDS + _SURFACE_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("domains live in ambient dimension >= 2")
        if self.kind == "annulus" and self.level < 0:
            raise ValueError("annulus level must be >= 0")
        if self.kind in ("plane_disk", "halfspace_cone") and self.radius <= 0:
            raise ValueError("disk radius must be positive")

    # -- constructors ------------------------------------------------------

    @classmethod
    def sphere(cls, n):
        return cls("sphere", n)

    @classmethod
    def ball(cls, n):
        return cls("ball", n)

    @classmethod
    def cube(cls, n):
        return cls("cube", n)

    @classmethod
    def cube_boundary(cls, n):
        return cls("cube_boundary", n)

    @classmethod
    def annulus(cls, n, j):
        return cls("annulus", n, level=j)

    @classmethod
    def plane_disk(cls, n, radius):
        return cls("plane_disk", n, radius=radius)

    @classmethod
    def halfspace_cone(cls, n, radius=0.5):
        return cls("halfspace_cone", n, radius=radius)

    # -- geometry ----------------------------------------------------------

    @property
    def point_dim(self) -> int:
        """Length of coordinate vectors for points of this domain."""
        return self.dim - 1 if self.kind == "plane_disk" else self.dim

    @property
    def intrinsic_dim(self) -> int:
        """Dimension of the measure, the one entering Gagliardo exponents."""
        if self.kind in _VOLUME_KINDS:
            return self.dim
        return self.dim - 1

    @property
    def measure(self) -> float:
        n = self.dim
        if self.kind == "sphere":
            return sphere_area(n)
        if self.kind == "ball":
            return ball_volume(n)
        if self.kind == "cube":
            return 2.0 ** n
        if self.kind == "cube_boundary":
            return 2.0 * n * 2.0 ** (n - 1)
        if self.kind == "annulus":
            outer = 2.0 ** (-self.level * n)
            return ball_volume(n) * outer * (1.0 - 2.0 ** (-n))
        if self.kind == "plane_disk":
            return ball_volume(n - 1) * self.radius ** (n - 1)
        # halfspace_cone: slices at height t are disks of radius t*r
        return ball_volume(n - 1) * self.radius ** (n - 1) / n

    @property
    def diameter(self) -> float:
        n = self.dim
        if self.kind in ("sphere", "ball"):
            return 2.0
        if self.kind in ("cube", "cube_boundary"):
            return 2.0 * math.sqrt(n)
        if self.kind == "annulus":
            return 2.0 ** (1 - self.level)
        if self.kind == "plane_disk":
            return 2.0 * self.radius
        return max(2.0 * self.radius, math.hypot(1.0, self.radius))

    def contains(self, pts, tol: float = 1e-12):
        """Vectorized membership test with tolerance ``tol``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "sphere":
            return np.abs(norm(pts) - 1.0) <= tol
        if self.kind == "ball":
            return norm(pts) <= 1.0 + tol
        if self.kind == "cube":
            return norm(pts, "sup") <= 1.0 + tol
        if self.kind == "cube_boundary":
            return np.abs(norm(pts, "sup") - 1.0) <= tol
        if self.kind == "annulus":
            r = norm(pts)
            lo = 2.0 ** (-self.level - 1)
            hi = 2.0 ** (-self.level)
            return (r >= lo - tol) & (r <= hi + tol)
        if self.kind == "plane_disk":
            return norm(pts) <= self.radius + tol
        h = pts[:, -1]
        ok = h > 0
        slope = np.full(pts.shape[0], np.inf)
        slope[ok] = norm(pts[ok, :-1]) / h[ok]
        return ok & (h <= 1.0 + tol) & (slope <= self.radius + tol)


@dataclass(frozen=True)
class RngStream:
    """Reproducible RNG handle keyed by (seed, stream).

    Each call to :meth:`generator` rebuilds the underlying generator, so a
    stream always replays the same sequence no matter what else has been
    drawn elsewhere.  Chunked estimators pass ``chunk`` to get mutually
    independent per-chunk substreams whose output does not depend on the
    execution order of the chunks.
    """

    seed: int
    stream: int = 0

    def generator(self, chunk: int | None = None) -> np.random.Generator:
        key = (self.stream,) if chunk is None else (self.stream, chunk)
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))

    def shifted(self, offset: int) -> "RngStream":
        """A sibling stream with the same seed and a shifted stream id."""
        return RngStream(self.seed, self.stream + offset)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


def _unit_directions(gen, m, n):
    # Gaussian normalization, uniform on the sphere in R^n
    g = gen.standard_normal((m, n))
    return g / norm(g)[:, None]


def sample(d: Domain, rng, size: int | None = None) -> np.ndarray:
    """Draw uniform points from ``d`` with respect to its natural measure.

    Returns shape ``(size, point_dim)``, or a single point when ``size``
    is None.
    """
    m = 1 if size is None else int(size)
    gen = _as_generator(rng)
    n = d.dim

    if d.kind == "sphere":
        pts = _unit_directions(gen, m, n)
    elif d.kind == "ball":
        u = _unit_directions(gen, m, n)
        r = gen.random(m) ** (1.0 / n)
        pts = u * r[:, None]
    elif d.kind == "cube":
        pts = gen.uniform(-1.0, 1.0, (m, n))
    elif d.kind == "cube_boundary":
        # all 2n faces have equal area, pick one uniformly
        face = gen.integers(0, 2 * n, m)
        pts = gen.uniform(-1.0, 1.0, (m, n))
        axis = face // 2
        sign = np.where(face % 2 == 0, 1.0, -1.0)
        pts[np.arange(m), axis] = sign
    elif d.kind == "annulus":
        u = _unit_directions(gen, m, n)
        lo = 2.0 ** (-d.level - 1)
        hi = 2.0 ** (-d.level)
        r = (lo ** n + gen.random(m) * (hi ** n - lo ** n)) ** (1.0 / n)
        pts = u * r[:, None]
    elif d.kind == "plane_disk":
        k = n - 1
        u = _unit_directions(gen, m, k)
        r = d.radius * gen.random(m) ** (1.0 / k)
        pts = u * r[:, None]
    else:  # halfspace_cone
        t = gen.random(m) ** (1.0 / n)
        k = n - 1
        u = _unit_directions(gen, m, k)
        rho = d.radius * gen.random(m) ** (1.0 / k)
        pts = np.empty((m, n))
        pts[:, :-1] = u * (t * rho)[:, None]
        pts[:, -1] = t
    return pts[0] if size is None else pts


def phi_map(X, direction: str = "forward") -> np.ndarray:
    """Radial homeomorphism between the closed unit ball and the closed cube.

    ``forward`` sends X to (|X|/||X||_inf) X, so the sup norm of the image
    equals the Euclidean norm of the argument; ``inverse`` undoes it.  The
    origin maps to itself.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    pts = np.atleast_2d(X)
    eu = norm(pts)
    su = norm(pts, "sup")
    scale = np.zeros(pts.shape[0])
    nz = su > 0.0
    if direction == "forward":
        scale[nz] = eu[nz] / su[nz]
    elif direction == "inverse":
        scale[nz] = su[nz] / eu[nz]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    out = pts * scale[:, None]
    return out[0] if single else out


@dataclass(frozen=True)
class CapChart:
    """Gnomonic chart data around the north pole of the unit sphere.

    ``eps`` is the chordal radius of the inner cap (where functions are
    allowed to live), ``2 eps`` that of the outer cap (where the chart
    stays valid), and ``radius`` the radius of the plane disk the outer
    cap projects onto from the center of the sphere.
    """

    dim: int
    eps: float
    radius: float
    residual: float = 0.0

    @property
    def outer_chordal(self) -> float:
        return 2.0 * self.eps

    @property
    def min_height(self) -> float:
        """Smallest last coordinate on the outer cap."""
        return 1.0 - 2.0 * self.eps ** 2

    @property
    def inner_image_radius(self) -> float:
        """Plane radius of the projected inner cap."""
        return chordal_to_plane(self.eps)

    def plane_domain(self, radius: float | None = None) -> Domain:
        return Domain.plane_disk(self.dim, self.radius if radius is None else radius)

    def project(self, x):
        return gnomonic(self, x, "project")

    def lift(self, y):
        return gnomonic(self, y, "lift")

    def chordal_from_pole(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.sqrt(np.maximum(0.0, 2.0 - 2.0 * x[:, -1]))

    def in_inner_cap(self, x, tol: float = 0.0):
        return self.chordal_from_pole(x) <= self.eps + tol

    def in_outer_cap(self, x, tol: float = 0.0):
        return self.chordal_from_pole(x) <= self.outer_chordal + tol


def chordal_to_plane(delta: float) -> float:
    """Plane radius of the central projection of the cap of chordal radius delta."""
    if not 0.0 <= delta < math.sqrt(2.0):
        raise ValueError("chordal radius must lie in [0, sqrt(2))")
    height = 1.0 - delta ** 2 / 2.0
    return math.sqrt(max(0.0, 1.0 / height ** 2 - 1.0))


def plane_to_chordal(rho: float) -> float:
    """Inverse of :func:`chordal_to_plane`."""
    return math.sqrt(2.0 - 2.0 / math.sqrt(1.0 + rho * rho))


def _image_radius(eps: float) -> float:
    # plane radius of the projected outer cap (chordal radius 2 eps)
    return 2.0 * eps * math.sqrt(1.0 - eps * eps) / (1.0 - 2.0 * eps * eps)


def cap_chart_build(n: int, target_radius: float = 0.5) -> CapChart:
    """Solve for the cap half-angle whose chart disk has the given radius.

    Bisection on eps in (0, 1/sqrt(2)); the image radius is strictly
    increasing there and sweeps (0, inf), so any positive target is
    attained.  The residual of the returned chart is below 1e-14.
    """
    if n < 2:
        raise ValueError("chart needs ambient dimension >= 2")
    if target_radius <= 0:
        raise ValueError("target radius must be positive")
    lo, hi = 1e-12, 1.0 / math.sqrt(2.0) - 1e-12
    if _image_radius(lo) > target_radius:
        raise ValueError("target radius too small to bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _image_radius(mid) < target_radius:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-17:
            break
    eps = 0.5 * (lo + hi)
    residual = _image_radius(eps) - target_radius
    if abs(residual) >= 1e-14:
        raise ArithmeticError(f"cap solve stalled, residual {residual:.3e}")
    return CapChart(dim=n, eps=eps, radius=target_radius, residual=residual)


def gnomonic(chart: CapChart, x, direction: str) -> np.ndarray:
    """Central projection between the upper sphere and the plane at height 1.

    ``project`` maps sphere points with positive last coordinate to
    X'/X_n in R^{n-1}; ``lift`` maps plane points Y' to the unit vector
    through (Y', 1).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if direction == "project":
        h = pts[:, -1]
        if np.any(h <= ORIGIN_CUSHION):
            bad = pts[h <= ORIGIN_CUSHION][0]
            raise ValueError(f"cannot project point with height <= {ORIGIN_CUSHION}: {bad}")
        out = pts[:, :-1] / h[:, None]
    elif direction == "lift":
        lifted = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
        out = lifted / norm(lifted)[:, None]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return out[0] if single else out
