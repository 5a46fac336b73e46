"""Test functions on the unit sphere and on the chart plane.

Plane functions built from polynomial spline bumps carry exact partial
derivatives through the weighted-polynomial algebra; the chart transfer
moves them to cap-supported sphere functions and back without losing that
data.  Generic closures (cusps, direct chordal bumps) evaluate but do not
differentiate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    CapChart,
    Domain,
    RngStream,
    chordal_to_plane,
    norm,
    north_pole,
    plane_to_chordal,
    sample,
)
from .polyalg import Poly, WeightedPoly

__all__ = [
    "DiskSupport",
    "CapSupport",
    "PlaneFn",
    "SphereFn",
    "ChartSource",
    "DerivativeDataError",
    "make_test_function",
    "plane_bump",
    "plane_rational",
    "random_mix_plane",
    "plane_to_sphere",
    "sphere_to_plane",
]

SMOOTH = float("inf")


class DerivativeDataError(ValueError):
    """Raised when exact partial derivatives are requested but unavailable."""


@dataclass(frozen=True)
class DiskSupport:
    """Closed disk in the chart plane outside which a function vanishes."""

    center: tuple
    radius: float

    def mask(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = np.asarray(self.center)
        return norm(pts - c) <= self.radius

    @property
    def outer_radius(self):
        return float(norm(np.asarray(self.center)) + self.radius)


@dataclass(frozen=True)
class CapSupport:
    """Chordal ball around the north pole outside which a sphere function vanishes."""

    chart: CapChart
    chordal_radius: float


class PlaneFn:
    """Function on R^{n-1}, zero outside a disk.

    Backed either by masked weighted-polynomial components (exact partials
    available) or by a raw closure (evaluation only).
    """

    def __init__(self, nvars, components=None, raw_fn=None, deriv_order=SMOOTH, support=None):
        if (components is None) == (raw_fn is None):
            raise ValueError("exactly one of components/raw_fn must be given")
        self.nvars = int(nvars)
        self.components = tuple(components) if components is not None else None
        self.raw_fn = raw_fn
        self.deriv_order = deriv_order
        if support is None:
            if self.components is None:
                raise ValueError("raw plane functions need an explicit support disk")
            outer = max(s.outer_radius for _, s in self.components)
            support = DiskSupport(center=(0.0,) * self.nvars, radius=outer)
        self.support = support

    @property
    def has_derivatives(self):
        return self.components is not None

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        P = np.atleast_2d(pts)
        out = np.zeros(P.shape[0])
        if self.components is not None:
            for wp, sup in self.components:
                sel = sup.mask(P)
                if np.any(sel):
                    out[sel] += wp.eval(P[sel])
        else:
            sel = self.support.mask(P)
            if np.any(sel):
                out[sel] = np.asarray(self.raw_fn(P[sel]), dtype=float)
        return float(out[0]) if single else out

    def partial(self, beta):
        """Exact partial derivative d^beta as a vectorized callable."""
        beta = tuple(int(b) for b in beta)
        if len(beta) != self.nvars:
            raise ValueError("beta must match the number of variables")
        if sum(beta) == 0:
            return self
        if self.components is None:
            raise DerivativeDataError("this plane function has no exact derivative data")
        pieces = [(wp.partial_multi(beta), sup) for wp, sup in self.components]

        def d(pts):
            pts = np.asarray(pts, dtype=float)
            single = pts.ndim == 1
            P = np.atleast_2d(pts)
            out = np.zeros(P.shape[0])
            for wp, sup in pieces:
                sel = sup.mask(P)
                if np.any(sel):
                    out[sel] += wp.eval(P[sel])
            return float(out[0]) if single else out

        d.support = self.support
        return d

    def __add__(self, other):
        if not isinstance(other, PlaneFn):
            return NotImplemented
        if self.components is None or other.components is None:
            raise DerivativeDataError("can only combine component-backed plane functions")
        if self.nvars != other.nvars:
            raise ValueError("mixed dimensions")
        return PlaneFn(
            self.nvars,
            components=self.components + other.components,
            deriv_order=min(self.deriv_order, other.deriv_order),
        )

    def scale(self, t):
        if self.components is None:
            raise DerivativeDataError("can only scale component-backed plane functions")
        return PlaneFn(
            self.nvars,
            components=tuple((wp.scale(t), sup) for wp, sup in self.components),
            deriv_order=self.deriv_order,
        )

    def weight_shift(self, dc):
        """Multiply by (1 + |Y|^2)^(dc/2), the chart re-weighting."""
        if self.components is None:
            raise DerivativeDataError("cannot reweight a raw plane function exactly")
        return PlaneFn(
            self.nvars,
            components=tuple((wp.weight_shift(dc), sup) for wp, sup in self.components),
            deriv_order=self.deriv_order,
        )


@dataclass(frozen=True)
class ChartSource:
    """Provenance of a sphere function built by lifting a plane function."""

    g: PlaneFn
    a: float
    chart: CapChart


class SphereFn:
    """Function on the unit sphere with a declared support and smoothness."""

    def __init__(self, n, fn, deriv_order=SMOOTH, support="full", chart_source=None):
        self.n = int(n)
        self._fn = fn
        self.deriv_order = deriv_order
        self.support = support
        self.chart_source = chart_source
        if isinstance(support, CapSupport) and support.chordal_radius > support.chart.outer_chordal + 1e-12:
            raise ValueError("cap support exceeds the chart's outer cap")

    @property
    def is_cap_supported(self):
        return isinstance(self.support, CapSupport)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        P = np.atleast_2d(pts)
        if P.shape[1] != self.n:
            raise ValueError(f"points must have dimension {self.n}")
        out = np.zeros(P.shape[0])
        if self.is_cap_supported:
            sel = self.support.chart.chordal_from_pole(P) <= self.support.chordal_radius
            if np.any(sel):
                out[sel] = np.asarray(self._fn(P[sel]), dtype=float)
        else:
            out = np.asarray(self._fn(P), dtype=float)
        return float(out[0]) if single else out


def plane_to_sphere(g: PlaneFn, a: float, chart: CapChart) -> SphereFn:
    """Lift a plane function to the sphere cap: f(x) = x_n^a g(x'/x_n).

    The support of g must sit inside the chart disk so that the lift stays
    inside the outer cap.
    """
    if g.nvars != chart.dim - 1:
        raise ValueError("plane function dimension does not match the chart")
    if g.support.outer_radius > chart.radius + 1e-12:
        raise ValueError("plane support sticks out of the chart disk")
    chordal = plane_to_chordal(min(g.support.outer_radius, chart.radius))

    def f(P):
        h = P[:, -1]
        vals = np.zeros(P.shape[0])
        ok = h > 0
        if np.any(ok):
            Y = P[ok, :-1] / h[ok, None]
            gv = g(Y)
            nz = gv != 0.0
            if np.any(nz):
                contrib = np.zeros(gv.shape[0])
                contrib[nz] = h[ok][nz] ** a * gv[nz]
                vals[ok] = contrib
        return vals

    return SphereFn(
        chart.dim,
        f,
        deriv_order=g.deriv_order,
        support=CapSupport(chart, chordal),
        chart_source=ChartSource(g=g, a=float(a), chart=chart),
    )


def sphere_to_plane(f: SphereFn, a: float, chart: CapChart, probe=4096) -> PlaneFn:
    """Chart transfer g(Y) = (1+|Y|^2)^(a/2) f(lift(Y)).

    For chart-built f this is exact algebra on the components.  Otherwise
    f must vanish outside the outer cap; functions with material mass out
    there are rejected, not truncated.
    """
    src = f.chart_source
    if src is not None and src.chart == chart:
        return src.g.weight_shift(a - src.a)
    if not f.is_cap_supported:
        gen = RngStream(0x5EED, 901).generator()
        pts = sample(Domain.sphere(f.n), gen, probe)
        outside = ~chart.in_outer_cap(pts)
        if np.any(np.abs(f(pts[outside])) > 0.0):
            raise ValueError("sphere function has material mass outside the chart cap")

    def g(Y):
        x = chart.lift(Y)
        w = np.sqrt(1.0 + np.sum(np.atleast_2d(Y) ** 2, axis=1))
        return w ** a * f(x)

    radius = chart.radius
    if f.is_cap_supported:
        radius = min(radius, chordal_to_plane(min(f.support.chordal_radius, chart.outer_chordal)))
    return PlaneFn(
        chart.dim - 1,
        raw_fn=g,
        deriv_order=f.deriv_order,
        support=DiskSupport(center=(0.0,) * (chart.dim - 1), radius=radius),
    )


def _spline_poly(nvars, center, radius, order):
    # (1 - |Y - c|^2 / R^2)^(order+1) expanded as a polynomial
    q = Poly.one(nvars)
    r2 = radius * radius
    for i in range(nvars):
        yi = Poly.variable(nvars, i)
        shift = yi - Poly.const(nvars, center[i])
        q = q - shift * shift * (1.0 / r2)
    return q.pow(order + 1)


def plane_bump(nvars, center=None, radius=0.25, order=3, amplitude=1.0) -> PlaneFn:
    """Polynomial spline bump (1-(d/R)^2)^(order+1) on a plane disk.

    The profile is C^order across the support boundary and polynomial
    inside, so all partials are exact.
    """
    if radius <= 0:
        raise ValueError("bump radius must be positive")
    center = tuple(0.0 for _ in range(nvars)) if center is None else tuple(center)
    wp = WeightedPoly.from_poly(_spline_poly(nvars, center, radius, order) * amplitude)
    sup = DiskSupport(center=center, radius=radius)
    return PlaneFn(nvars, components=[(wp, sup)], deriv_order=order)


def plane_rational(nvars, c=-4.0, amplitude=1.0) -> PlaneFn:
    """Smooth radial profile amplitude * (1 + |Y|^2)^(c/2).

    Unlike the spline bumps this has no support edge, so difference
    quotients of any order converge cleanly; all partials stay exact
    through the weighted-polynomial algebra.  Decays like |Y|^c, so c
    must be negative for an integrable profile.
    """
    if c >= 0:
        raise ValueError("the decay exponent c must be negative")
    wp = WeightedPoly.from_poly(Poly.const(nvars, amplitude), c=c)
    sup = DiskSupport(center=(0.0,) * nvars, radius=math.inf)
    return PlaneFn(nvars, components=[(wp, sup)])


def _mix_dictionary(nvars, region_radius):
    """Fixed dictionary of 8 bump placements inside the given disk."""
    ring = 0.45 * region_radius
    rad = 0.5 * region_radius
    centers = []
    if nvars == 1:
        for t in np.linspace(-1.0, 1.0, 8):
            centers.append((ring * t,))
    else:
        centers.append((0.0,) * nvars)
        for k in range(7):
            ang = 2.0 * math.pi * k / 7.0
            c = [0.0] * nvars
            c[0] = ring * math.cos(ang)
            c[1] = ring * math.sin(ang)
            centers.append(tuple(c))
    return [(c, rad) for c in centers]


def random_mix_plane(nvars, seed, count=8, region_radius=0.4, order=3) -> PlaneFn:
    """Seeded mixture of dictionary bumps with coefficients in [-1, 1]."""
    if not 1 <= count <= 8:
        raise ValueError("count must be between 1 and 8")
    entries = _mix_dictionary(nvars, region_radius)[:count]
    coeffs = RngStream(int(seed), 77).generator().uniform(-1.0, 1.0, count)
    mix = None
    for (center, rad), c in zip(entries, coeffs):
        b = plane_bump(nvars, center=center, radius=rad, order=order, amplitude=float(c))
        mix = b if mix is None else mix + b
    return mix


def _cap_bump(n, chart, center=None, radius=None, order=3):
    pole = north_pole(n)
    center = pole if center is None else np.asarray(center, dtype=float)
    if radius is None:
        radius = 0.9 * chart.eps
    off_pole = float(norm(center - pole))
    if off_pole + radius > chart.eps + 1e-12:
        raise ValueError("bump support would leave the inner cap")
    if off_pole == 0.0:
        plane_center = (0.0,) * (n - 1)
        plane_radius = chordal_to_plane(radius)
    else:
        plane_center = tuple(chart.project(center))
        plane_radius = chordal_to_plane(off_pole + radius) - float(norm(np.asarray(plane_center)))
        if plane_radius <= 0:
            raise ValueError("bump radius too small to resolve at this center")
    g = plane_bump(n - 1, center=plane_center, radius=plane_radius, order=order)
    return plane_to_sphere(g, 0.0, chart)


def make_test_function(kind, n, chart=None, **params):
    """Build a named test function on the sphere (or its chart plane).

    Kinds: ``constant`` (value c), ``coordinate`` (index i), ``bump``
    (cap spline via the chart, or a direct chordal bump with
    support='full'), ``cusp`` (|x-anchor|^gamma, evaluation only), and
    ``random_mix`` (seeded dictionary mixture lifted to the cap).
    """
    if kind == "constant":
        c = float(params.get("c", 1.0))
        return SphereFn(n, lambda P: np.full(P.shape[0], c), deriv_order=SMOOTH)

    if kind == "coordinate":
        i = int(params.get("i", 0))
        if not 0 <= i < n:
            raise ValueError("coordinate index out of range")
        return SphereFn(n, lambda P: P[:, i].copy(), deriv_order=SMOOTH)

    if kind == "bump":
        support = params.get("support", "cap")
        order = int(params.get("order", 3))
        if support == "cap":
            if chart is None:
                raise ValueError("cap bumps need a chart")
            return _cap_bump(
                n, chart,
                center=params.get("center"),
                radius=params.get("radius"),
                order=order,
            )
        center = np.asarray(params.get("center", north_pole(n)), dtype=float)
        radius = float(params.get("radius", 0.5))
        k = order + 1

        def f(P):
            d2 = np.sum((P - center) ** 2, axis=1) / (radius * radius)
            return np.where(d2 < 1.0, (1.0 - d2) ** k, 0.0)

        return SphereFn(n, f, deriv_order=order)

    if kind == "cusp":
        anchor = np.asarray(params.get("anchor", north_pole(n)), dtype=float)
        gamma = float(params.get("gamma", 0.5))
        if gamma <= 0:
            raise ValueError("cusp exponent must be positive")
        return SphereFn(n, lambda P: norm(P - anchor) ** gamma, deriv_order=0)

    if kind == "random_mix":
        if chart is None:
            raise ValueError("random_mix needs a chart")
        seed = int(params.get("seed", 0))
        count = int(params.get("count", 8))
        region = 0.9 * chart.inner_image_radius
        g = random_mix_plane(n - 1, seed, count=count, region_radius=region,
                             order=int(params.get("order", 3)))
        return plane_to_sphere(g, 0.0, chart)

    raise ValueError(f"unknown test function kind {kind!r}")
