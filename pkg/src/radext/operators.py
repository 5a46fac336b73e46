"""Extension operators: radial power extensions of boundary functions,
the homogeneous lift of chart-plane functions over the cone, the cube
composition through the ball route, and the boundary trace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import DerivativeDataError, PlaneFn, SphereFn
from .geometry import norm, phi_map
from .polyalg import HEIGHT_CUSHION, deriv_expansion, eval_derivative

__all__ = [
    "ExtensionSpec",
    "VolumeFn",
    "radial_extend",
    "extend_V",
    "compose_T_via_U",
    "trace",
    "ORIGIN_CUSHION",
]

ORIGIN_CUSHION = 1e-12


@dataclass(frozen=True)
class ExtensionSpec:
    """Recipe for a radial power extension.

    ``geometry`` selects the norm used for the radial ray: ``ball`` uses
    the Euclidean norm, ``cube`` the sup norm.  A cube extension with a
    nonzero power is permitted but flagged as nonstandard.
    """

    f: object
    a: float
    geometry: str = "ball"

    def __post_init__(self):
        if self.geometry not in ("ball", "cube"):
            raise ValueError("geometry must be 'ball' or 'cube'")

    @property
    def nonstandard(self):
        return self.geometry == "cube" and self.a != 0.0


class VolumeFn:
    """Function on a volume domain with optional homogeneity and derivative data.

    Evaluation inside the origin cushion |X| < 1e-12 returns NaN, the
    explicit sentinel that downstream estimators refuse to absorb.
    """

    def __init__(self, n, fn, degree=None, geometry="ball", cone_source=None,
                 nonstandard=False, description="", support=None):
        self.n = int(n)
        self._fn = fn
        self.degree = degree
        self.geometry = geometry
        self.cone_source = cone_source
        self.nonstandard = nonstandard
        self.description = description
        # directional support hint (a cap the rays stay inside), picked up
        # by the estimators to aim their samples
        self.support = support

    @property
    def has_derivatives(self):
        return self.cone_source is not None

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        P = np.atleast_2d(pts)
        if P.shape[1] != self.n:
            raise ValueError(f"points must have dimension {self.n}")
        out = np.asarray(self._fn(P), dtype=float).copy()
        out[norm(P) < ORIGIN_CUSHION] = np.nan
        return float(out[0]) if single else out

    def partial(self, alpha):
        """Exact mixed partial for cone-structured functions.

        Returns a vectorized callable; zero below the cone, NaN inside the
        origin cushion, and the expanded homogeneous derivative on the cone
        side of the height cushion.
        """
        if self.cone_source is None:
            raise DerivativeDataError("no exact derivative data for this volume function")
        g, a = self.cone_source
        alpha = tuple(int(v) for v in alpha)
        if sum(alpha) == 0:
            return self
        exp = deriv_expansion(alpha, a, self.n)

        def d(pts):
            pts = np.asarray(pts, dtype=float)
            single = pts.ndim == 1
            P = np.atleast_2d(pts)
            out = np.zeros(P.shape[0])
            sel = P[:, -1] > HEIGHT_CUSHION
            if np.any(sel):
                out[sel] = eval_derivative(exp, g, P[sel])
            out[norm(P) < ORIGIN_CUSHION] = np.nan
            return float(out[0]) if single else out

        d.support = self.support
        return d


def _ray_values(f, dirs):
    vals = np.asarray(f(dirs), dtype=float)
    return vals


def radial_extend(spec: ExtensionSpec, n=None) -> VolumeFn:
    """Extend a boundary function along rays: X -> ||X||^a f(X/||X||).

    ``ball`` geometry extends sphere functions with the Euclidean norm,
    ``cube`` extends cube-boundary functions with the sup norm.  When the
    boundary function was lifted through the cap chart, the result carries
    exact derivative data as a homogeneous cone function.
    """
    f, a = spec.f, spec.a
    if n is None:
        n = getattr(f, "n", None)
        if n is None:
            raise ValueError("pass the ambient dimension for plain callables")
    kind = "euclidean" if spec.geometry == "ball" else "sup"

    def F(P):
        r = norm(P, kind)
        out = np.zeros(P.shape[0])
        ok = r >= ORIGIN_CUSHION
        if np.any(ok):
            dirs = P[ok] / r[ok, None]
            fv = _ray_values(f, dirs)
            nz = fv != 0.0
            if np.any(nz):
                vals = np.zeros(fv.shape[0])
                vals[nz] = r[ok][nz] ** a * fv[nz]
                out[ok] = vals
        return out

    cone_source = None
    src = getattr(f, "chart_source", None)
    if spec.geometry == "ball" and src is not None:
        # the extension coincides with the homogeneous cone lift of the
        # reweighted plane function
        g_eff = src.g.weight_shift(a - src.a)
        cone_source = (g_eff, float(a))
    # the hint is a Euclidean cone around the pole either way: sup-norm
    # rays sweep the same directions as Euclidean ones
    support = getattr(f, "support", None)
    return VolumeFn(
        n, F, degree=float(a), geometry=spec.geometry,
        cone_source=cone_source, nonstandard=spec.nonstandard,
        description=f"radial extension (a={a}, {spec.geometry})",
        support=support,
    )


def extend_V(g: PlaneFn, a: float) -> VolumeFn:
    """Homogeneous lift over the cone: X -> X_n^a g(X'/X_n), zero elsewhere."""
    n = g.nvars + 1

    def F(P):
        h = P[:, -1]
        out = np.zeros(P.shape[0])
        ok = h > HEIGHT_CUSHION
        if np.any(ok):
            Y = P[ok, :-1] / h[ok, None]
            gv = g(Y)
            nz = gv != 0.0
            if np.any(nz):
                vals = np.zeros(gv.shape[0])
                vals[nz] = h[ok][nz] ** a * gv[nz]
                out[ok] = vals
        return out

    return VolumeFn(
        n, F, degree=float(a), geometry="cone", cone_source=(g, float(a)),
        description=f"cone lift (a={a})",
    )


def compose_T_via_U(f_boundary, n) -> VolumeFn:
    """Sup-norm ray extension of a cube-boundary function, routed through
    the ball: pull back by the cube-to-ball map, extend radially with
    power zero, evaluate.

    Identical (up to rounding) to X -> f(X / ||X||_inf).
    """

    def F(P):
        Z = phi_map(P, "inverse")
        r = norm(Z)
        out = np.zeros(P.shape[0])
        ok = r >= ORIGIN_CUSHION
        if np.any(ok):
            dirs = Z[ok] / r[ok, None]
            out[ok] = np.asarray(f_boundary(phi_map(dirs, "forward")), dtype=float)
        return out

    return VolumeFn(n, F, degree=0.0, geometry="cube",
                    description="cube extension via the ball route",
                    support=getattr(f_boundary, "support", None))


def trace(F, a: float, r: float, x) -> np.ndarray:
    """Rescaled restriction to the sphere of radius r: r^(-a) F(r x).

    For F a radial power extension this recovers the boundary function for
    every admissible r.
    """
    if not 0.0 < r <= 1.0:
        raise ValueError("trace radius must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    P = np.atleast_2d(x)
    vals = np.asarray(F(r * P), dtype=float) * r ** (-a)
    return float(vals[0]) if single else vals
