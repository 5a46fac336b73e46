"""Monte Carlo estimators for L^p integrals, Gagliardo seminorms, and the
derivative-split Sobolev seminorms.

All estimators run a deterministic chunked reduction: chunk i draws from
the substream (seed, stream, i) and the partial sums are combined in chunk
order, so results are byte-identical for a given seed regardless of thread
count.  Values are reported as p-th power integrals; callers take roots.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product as _cartesian

import numpy as np

from .functions import DerivativeDataError
from .geometry import Domain, RngStream, ball_volume, norm, sample, sphere_area
from .polyalg import finite_difference

__all__ = [
    "Estimate",
    "EstimatorConfig",
    "NonFiniteSampleError",
    "mc_mean",
    "lp_norm",
    "gagliardo_seminorm",
    "sobolev_seminorm",
    "sphere_norm_full",
    "combined_stderr",
]

ORIGIN_EXCLUSION = 1e-6

_MODES = ("uniform-pair", "radial-importance")


class NonFiniteSampleError(RuntimeError):
    """A sample evaluated to NaN or infinity; estimators refuse to average it."""

    def __init__(self, where, value):
        self.where = np.asarray(where)
        self.value = value
        super().__init__(f"non-finite sample value {value!r} at {self.where}")


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate with its provenance."""

    value: float
    stderr: float
    samples: int
    seed: int
    mode: str
    metadata: dict = field(default_factory=dict, compare=False)


def combined_stderr(*estimates):
    return math.sqrt(sum(e.stderr ** 2 for e in estimates))


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs shared by every estimator.

    ``importance_exponent`` (beta) defaults to p(1-sigma) at the call
    site, which makes the reweighted Gagliardo integrand bounded near the
    diagonal for Lipschitz functions.  ``truncation_radius`` bounds the
    outer variable of plane-domain double integrals; the dropped tail is
    bounded analytically and reported in metadata.

    ``position_exponent`` (gamma), when set, draws the base point's
    radius with density proportional to r^(gamma-1) instead of uniformly
    in volume; gamma = 0 means log-uniform.  Radial extensions put equal
    seminorm mass in every dyadic shell near the origin, which a uniform
    base point almost never visits, so the plain pair estimators have
    heavy-tailed weights there.  Honored by the radial-importance pair
    sampler on balls, annuli, and the solid cube, the last one in sup-norm
    shells (the base point then stays outside the documented origin
    exclusion); ignored on domains with no radial structure to exploit.
    """

    samples: int = 100_000
    mode: str = "uniform-pair"
    importance_exponent: float | None = None
    position_exponent: float | None = None
    truncation_radius: float = 4.0
    seed: int = 0
    stream: int = 0
    chunk_size: int = 65536
    threads: int = 1

    def __post_init__(self):
        if self.samples < 1000:
            raise ValueError("estimators need at least 1000 samples")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.importance_exponent is not None and self.importance_exponent <= 0:
            raise ValueError("importance exponent must be positive")
        if self.position_exponent is not None and self.position_exponent < 0:
            raise ValueError("position exponent must be >= 0")
        if self.truncation_radius <= 0:
            raise ValueError("truncation radius must be positive")
        if self.chunk_size < 100:
            raise ValueError("chunk size too small")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def _check_finite(vals, pts):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NonFiniteSampleError(pts[i], float(vals[i]))


def _chunk_sizes(total, chunk):
    out = [chunk] * (total // chunk)
    if total % chunk:
        out.append(total % chunk)
    return out


def mc_mean(weight_fn, cfg: EstimatorConfig, stream_offset=0):
    """Chunked deterministic mean of a weight function.

    ``weight_fn(generator, m)`` must return m sample weights.  Chunk i
    draws from the substream (seed, stream + offset, i); partial sums are
    combined in chunk order so the result is independent of thread count.
    Returns (mean, stderr, metadata); the metadata carries a heuristic
    infinite-variance warning based on weight kurtosis growth.
    """
    stream = RngStream(cfg.seed, cfg.stream + stream_offset)
    sizes = _chunk_sizes(cfg.samples, cfg.chunk_size)

    def one(args):
        i, m = args
        w = np.asarray(weight_fn(stream.generator(chunk=i), m), dtype=float)
        return w.sum(), (w * w).sum(), (w ** 4).sum()

    jobs = list(enumerate(sizes))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]

    n = cfg.samples
    s1 = s2 = s4 = 0.0
    h1 = h2 = h4 = 0.0
    half_n = 0
    for k, (a, b, c) in enumerate(parts):
        s1 += a
        s2 += b
        s4 += c
        if k < max(1, len(parts) // 2):
            h1, h2, h4 = h1 + a, h2 + b, h4 + c
            half_n += sizes[k]
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    stderr = math.sqrt(var / n)

    meta = {}
    # heuristic divergence alarm: kurtosis of the weights blowing up as the
    # sample doubles signals an infinite-variance integrand
    if var > 0 and half_n > 0:
        kurt_full = (s4 / n) / var ** 2
        hvar = max(h2 / half_n - (h1 / half_n) ** 2, 0.0)
        if hvar > 0:
            kurt_half = (h4 / half_n) / hvar ** 2
            if kurt_full > 2.0 * kurt_half and kurt_full > 100.0:
                meta["variance_warning"] = {
                    "kurtosis_half": kurt_half,
                    "kurtosis_full": kurt_full,
                }
    return mean, stderr, meta


def _origin_inside(d: Domain):
    return d.kind in ("ball", "cube", "halfspace_cone")


def _needs_origin_exclusion(F, d: Domain):
    a = getattr(F, "degree", None)
    return a is not None and a < 0 and _origin_inside(d)


def _draw_excluding_origin(d, gen, m):
    pts = sample(d, gen, m)
    while True:
        bad = norm(pts) < ORIGIN_EXCLUSION
        if not np.any(bad):
            return pts
        pts[bad] = sample(d, gen, int(bad.sum()))


def lp_norm(F, d: Domain, p: float, cfg: EstimatorConfig) -> Estimate:
    """Unbiased estimate of the p-th power integral of |F| over the domain.

    Parameters
    ----------
    F : callable on (m, point_dim) arrays
    d : Domain
    p : exponent, >= 1
    cfg : EstimatorConfig

    Returns
    -------
    Estimate whose ``value`` is the integral of |F|^p (not its root).
    For negative-homogeneity integrands on origin-containing domains a
    ball of radius 1e-6 is excluded and the scale of the dropped mass is
    reported in metadata.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    measure = d.measure
    exclude = _needs_origin_exclusion(F, d)
    a = getattr(F, "degree", None)
    if a is not None and _origin_inside(d) and d.dim + a * p <= 0:
        raise ValueError("homogeneity makes |F|^p non-integrable at the origin")
    gamma = cfg.position_exponent
    sup = getattr(F, "support", None)
    chordal = getattr(sup, "chordal_radius", None)
    disk_center = getattr(sup, "center", None)
    if (d.kind == "sphere" and chordal is not None and d.dim in (2, 3)
            and chordal < 2.0):
        # the declared support is enforced by the function itself, so
        # integrating over the cap alone is exact, not an approximation
        tag = "support"
        theta = 2.0 * math.asin(chordal / 2.0)

        def weights(gen, m):
            pts, area = _cap_uniform(d.dim, theta, gen, m)
            vals = np.asarray(F(pts), dtype=float)
            _check_finite(vals, pts)
            return area * np.abs(vals) ** p

    elif (d.kind == "plane_disk" and disk_center is not None
          and sup.outer_radius <= d.radius):
        tag = "support"
        k = d.point_dim
        center = np.asarray(disk_center, dtype=float)
        vol = ball_volume(k) * sup.radius ** k

        def weights(gen, m):
            pts = center + _disk_uniform(k, sup.radius, gen, m)
            vals = np.asarray(F(pts), dtype=float)
            _check_finite(vals, pts)
            return vol * np.abs(vals) ** p

    elif gamma is not None and d.kind in ("ball", "annulus"):
        tag = "radial-position"
        rho = chordal

        def weights(gen, m):
            pts, base = _base_point_radial(d, gamma, rho, gen, m)
            vals = np.asarray(F(pts), dtype=float)
            _check_finite(vals, pts)
            return base * np.abs(vals) ** p

    else:
        tag = "uniform"

        def weights(gen, m):
            pts = _draw_excluding_origin(d, gen, m) if exclude else sample(d, gen, m)
            vals = np.asarray(F(pts), dtype=float)
            _check_finite(vals, pts)
            return measure * np.abs(vals) ** p

    mean, stderr, meta = mc_mean(weights, cfg)
    meta.update({"domain": d.kind, "p": p})
    if tag == "radial-position":
        meta["position_exponent"] = gamma
    if exclude:
        expo = d.dim + a * p
        meta["excluded_origin_radius"] = ORIGIN_EXCLUSION
        meta["excluded_mass_bound"] = ORIGIN_EXCLUSION ** expo / expo
    return Estimate(mean, stderr, cfg.samples, cfg.seed, tag, meta)


def _distance_kind(d: Domain):
    return "sup" if d.kind == "cube_boundary" else "euclidean"


def _pair_uniform(F, d, p, exponent, measure2, drop_origin, gen, m):
    X = sample(d, gen, m)
    Y = sample(d, gen, m)
    fx = np.asarray(F(X), dtype=float)
    fy = np.asarray(F(Y), dtype=float)
    _check_finite(fx, X)
    _check_finite(fy, Y)
    dif = fx - fy
    w = np.zeros(m)
    nz = dif != 0.0
    if np.any(nz):
        dist = norm((X - Y)[nz], _distance_kind(d))
        w[nz] = measure2 * np.abs(dif[nz]) ** p / dist ** exponent
        _check_finite(w[nz], X[nz])
    if drop_origin:
        w[(norm(X) < ORIGIN_EXCLUSION) | (norm(Y) < ORIGIN_EXCLUSION)] = 0.0
    return w


def _support_chordal(F):
    """Chordal radius of F's directional support cap, when declared."""
    return getattr(getattr(F, "support", None), "chordal_radius", None)


def _cap_uniform(n, theta, gen, m):
    """Uniform draw in the polar cap of angle theta, with the cap's measure."""
    if n == 2:
        phi = theta * (2.0 * gen.random(m) - 1.0)
        return np.column_stack([np.sin(phi), np.cos(phi)]), 2.0 * theta
    hc = math.cos(theta)
    h = hc + (1.0 - hc) * gen.random(m)
    psi = 2.0 * math.pi * gen.random(m)
    rad = np.sqrt(np.maximum(1.0 - h * h, 0.0))
    dirs = np.column_stack([rad * np.cos(psi), rad * np.sin(psi), h])
    return dirs, 2.0 * math.pi * (1.0 - hc)


def _disk_uniform(k, radius, gen, m):
    g = gen.standard_normal((m, k))
    g /= norm(g)[:, None]
    return g * (radius * gen.random(m) ** (1.0 / k))[:, None]


def _direction_mixture(k, rho, gen, m):
    """Directions half uniform, half inside the polar cap of chordal radius rho.

    Returns (dirs, mult) with mult the uniform-over-mixture density ratio;
    falls back to plain uniform in dimensions without a closed-form draw.
    """
    theta = 2.0 * math.asin(min(rho / 2.0, 1.0))
    if k == 2 and theta < math.pi:
        in_cap = gen.random(m) < 0.5
        u = gen.random(m)
        phi = np.where(in_cap, theta * (2.0 * u - 1.0), math.pi * (2.0 * u - 1.0))
        dens = 0.5 / (2.0 * math.pi) + np.where(np.abs(phi) <= theta,
                                                0.5 / (2.0 * theta), 0.0)
        dirs = np.column_stack([np.sin(phi), np.cos(phi)])
        return dirs, (1.0 / (2.0 * math.pi)) / dens
    if k == 3 and theta < math.pi:
        hc = math.cos(theta)
        in_cap = gen.random(m) < 0.5
        u = gen.random(m)
        h = np.where(in_cap, hc + u * (1.0 - hc), 2.0 * u - 1.0)
        dens = 0.25 + np.where(h >= hc, 0.5 / (1.0 - hc), 0.0)
        psi = 2.0 * math.pi * gen.random(m)
        rad = np.sqrt(np.maximum(1.0 - h * h, 0.0))
        dirs = np.column_stack([rad * np.cos(psi), rad * np.sin(psi), h])
        return dirs, 0.5 / dens
    g = gen.standard_normal((m, k))
    return g / norm(g)[:, None], 1.0


def _radial_gamma(lo, hi, gamma, gen, m):
    """Radius with density proportional to r^(gamma-1) on [lo, hi].

    gamma = 0 is the log-uniform limit.  Returns (r, density).
    """
    u = gen.random(m)
    if gamma == 0.0:
        r = lo * (hi / lo) ** u
        return r, 1.0 / (r * math.log(hi / lo))
    r = (lo ** gamma + u * (hi ** gamma - lo ** gamma)) ** (1.0 / gamma)
    return r, gamma * r ** (gamma - 1.0) / (hi ** gamma - lo ** gamma)


def _base_point_radial(d, gamma, rho, gen, m):
    """Base point with radius density ~ r^(gamma-1), plus its dX Jacobian.

    ``rho`` aims half the directions into the polar support cap of that
    chordal radius; the Jacobian absorbs the reweighting.
    """
    k = d.point_dim
    if d.kind == "ball":
        lo, hi = ORIGIN_EXCLUSION, 1.0
    else:
        hi = 2.0 ** (-d.level)
        lo = 0.5 * hi
    r, dens = _radial_gamma(lo, hi, gamma, gen, m)
    if rho is not None:
        dirs, mult = _direction_mixture(k, float(rho), gen, m)
    else:
        dirs = gen.standard_normal((m, k))
        dirs /= norm(dirs)[:, None]
        mult = 1.0
    return dirs * r[:, None], sphere_area(k) * r ** (k - 1) / dens * mult


def _displacement_mixture(R, rloc, beta, gen, m):
    """Displacement radius drawn half at the global scale R, half at rloc.

    Both halves use the r^(beta-1) profile; returns (r, r_safe, density)
    with r_safe substituting 1 where r underflowed to 0.
    """
    local = gen.random(m) < 0.5
    t = gen.random(m) ** (1.0 / beta)
    r = np.where(local, rloc * t, R * t)
    rs = np.where(r > 0.0, r, 1.0)
    dens = 0.5 * beta * rs ** (beta - 1.0) * (
        R ** -beta + (r <= rloc) * rloc ** -beta)
    return r, rs, dens


def _cone_patch_radius(F):
    """Half-width of the top-face patch cut out by F's directional cap.

    The cap around the pole with opening angle theta meets the unit cube
    shell inside the top face whenever theta < pi/4, in the disk of radius
    tan(theta) around the face center.  None when no usable cap is declared.
    """
    rho = _support_chordal(F)
    if rho is None or not rho < 2.0:
        return None
    theta = 2.0 * math.asin(rho / 2.0)
    if theta >= 0.25 * math.pi:
        return None
    return math.tan(theta)


def _cube_shell_points(n, patch, gen, m):
    """Points on the unit cube shell, half aimed into the top-face patch.

    Returns (points, weight) with weight = 1/density against surface
    measure; plain uniform draw (weight = total area) without a patch.
    """
    d = Domain.cube_boundary(n)
    if patch is None:
        return sample(d, gen, m), np.full(m, d.measure)
    upts = sample(d, gen, m)
    ppts = np.empty((m, n))
    ppts[:, :n - 1] = _disk_uniform(n - 1, patch, gen, m)
    ppts[:, n - 1] = 1.0
    pick = gen.random(m) < 0.5
    pts = np.where(pick[:, None], ppts, upts)
    parea = ball_volume(n - 1) * patch ** (n - 1)
    # face coordinates are assigned exactly, so the membership test is exact
    inp = (pts[:, n - 1] == 1.0) & (norm(pts[:, :n - 1]) <= patch)
    dens = 0.5 / d.measure + np.where(inp, 0.5 / parea, 0.0)
    return pts, 1.0 / dens


def _perimeter_coord(X):
    """Arc-length coordinate in [0, 8) along the boundary square.

    Walks the top edge left to right, then down the right edge, along the
    bottom right to left, and up the left edge.
    """
    x1, x2 = X[:, 0], X[:, 1]
    top = x2 == 1.0
    right = (x1 == 1.0) & ~top
    bottom = (x2 == -1.0) & ~top & ~right
    t = 6.0 + (x2 + 1.0)
    t = np.where(bottom, 4.0 + (1.0 - x1), t)
    t = np.where(right, 2.0 + (1.0 - x2), t)
    t = np.where(top, x1 + 1.0, t)
    return t


def _perimeter_point(t):
    """Inverse of :func:`_perimeter_coord`."""
    t = np.mod(t, 8.0)
    out = np.empty((t.shape[0], 2))
    top = t < 2.0
    right = (t >= 2.0) & (t < 4.0)
    bottom = (t >= 4.0) & (t < 6.0)
    left = t >= 6.0
    out[top] = np.column_stack([t[top] - 1.0, np.ones(int(top.sum()))])
    out[right] = np.column_stack([np.ones(int(right.sum())), 3.0 - t[right]])
    out[bottom] = np.column_stack([5.0 - t[bottom], -np.ones(int(bottom.sum()))])
    out[left] = np.column_stack([-np.ones(int(left.sum())), t[left] - 7.0])
    return out


def _pair_importance_cube_boundary(F, d, p, exponent, beta, gen, m):
    """Displacement-importance pair sampler on the cube shell.

    Base points are cube shell draws, aimed at the support patch when F
    declares a cap.  At n = 2 the partner walks the perimeter by a signed
    arc step of density ~ r^(beta-1); in higher dimensions the partner is
    a mixture of an independent uniform point and an in-face planar step,
    with steps that leave the face rejected by zero weight.
    """
    n = d.dim
    X, base = _cube_shell_points(n, _cone_patch_radius(F), gen, m)
    if n == 2:
        # the perimeter is one closed curve of length 8; both signs with
        # r <= 4 reach every point, so the step density alone is complete
        R = 0.5 * d.measure
        sgn = np.where(gen.random(m) < 0.5, 1.0, -1.0)
        r = R * gen.random(m) ** (1.0 / beta)
        Y = _perimeter_point(_perimeter_coord(X) + sgn * r)
        rs = np.where(r > 0.0, r, 1.0)
        jac = 2.0 * R ** beta * rs ** (1.0 - beta) / beta
        valid = np.ones(m, dtype=bool)
    else:
        k = n - 1
        R = 2.0 * math.sqrt(k)
        idx = np.arange(m)
        axis = np.argmax(np.abs(X) == 1.0, axis=1)
        g = gen.standard_normal((m, n))
        g[idx, axis] = 0.0
        u = g / norm(g)[:, None]
        r = R * gen.random(m) ** (1.0 / beta)
        pick = gen.random(m) < 0.5
        Yu = sample(d, gen, m)
        Y = np.where(pick[:, None], X + u * r[:, None], Yu)
        valid = d.contains(Y, tol=0.0)
        same = Y[idx, axis] == X[idx, axis]
        off = np.array(Y - X)
        off[idx, axis] = 0.0
        rp = norm(off)
        rps = np.where(rp > 0.0, rp, 1.0)
        dens = 0.5 / d.measure + np.where(
            same & (rp > 0.0) & (rp <= R),
            0.5 * beta * rps ** (beta - k) / (sphere_area(k) * R ** beta),
            0.0,
        )
        jac = 1.0 / dens
    w = np.zeros(m)
    if not np.any(valid):
        return w
    fx = np.asarray(F(X[valid]), dtype=float)
    fy = np.asarray(F(Y[valid]), dtype=float)
    _check_finite(fx, X[valid])
    _check_finite(fy, Y[valid])
    dif = fx - fy
    ww = np.zeros(dif.shape[0])
    nz = dif != 0.0
    if np.any(nz):
        dist = norm((X[valid] - Y[valid])[nz], "sup")
        ww[nz] = (base[valid][nz] * jac[valid][nz]
                  * np.abs(dif[nz]) ** p / dist ** exponent)
        _check_finite(ww[nz], X[valid][nz])
    w[valid] = ww
    return w


def _pair_importance_volume(F, d, p, exponent, beta, gamma, drop_origin, gen, m):
    k = d.point_dim
    R = d.diameter
    outward = None
    if gamma is not None and d.kind in ("ball", "annulus"):
        X, base = _base_point_radial(d, gamma, _support_chordal(F), gen, m)
        g = gen.standard_normal((m, k))
        u = g / norm(g)[:, None]
        # half the displacements live at the base point's own scale, so
        # same-shell pairs are seen at every depth down to the exclusion
        rloc = np.minimum(2.0 * norm(X), R)
        r, rs, dens = _displacement_mixture(R, rloc, beta, gen, m)
        # each unordered pair is counted from its inner end and doubled,
        # so the partner of a deep base point never sits deeper still
        jac = 2.0 * sphere_area(k) * rs ** (k - 1) / dens
        outward = "euclidean"
    elif gamma is not None and d.kind == "cube":
        # polar base draw in sup-norm shells: X = t B with B on the unit
        # shell, dX = t^(n-1) dt dsigma(B) since B . nu = 1 on every face
        B, bw = _cube_shell_points(k, _cone_patch_radius(F), gen, m)
        t, tdens = _radial_gamma(ORIGIN_EXCLUSION, 1.0, gamma, gen, m)
        X = B * t[:, None]
        base = bw * t ** (k - 1) / tdens
        g = gen.standard_normal((m, k))
        u = g / norm(g)[:, None]
        rloc = np.minimum(2.0 * t, R)
        r, rs, dens = _displacement_mixture(R, rloc, beta, gen, m)
        jac = 2.0 * sphere_area(k) * rs ** (k - 1) / dens
        outward = "sup"
    else:
        sup = getattr(F, "support", None)
        scenter = getattr(sup, "center", None)
        if (d.kind == "plane_disk" and scenter is not None
                and sup.outer_radius <= d.radius):
            # aim half the base points into the support disk; pairs with
            # only the partner inside still arrive through the other half
            center = np.asarray(scenter, dtype=float)
            svol = ball_volume(k) * sup.radius ** k
            upts = sample(d, gen, m)
            spts = center + _disk_uniform(k, sup.radius, gen, m)
            pick = gen.random(m) < 0.5
            X = np.where(pick[:, None], spts, upts)
            dens = 0.5 / d.measure + np.where(sup.mask(X), 0.5 / svol, 0.0)
            base = 1.0 / dens
        else:
            X = sample(d, gen, m)
            base = np.full(m, d.measure)
        g = gen.standard_normal((m, k))
        u = g / norm(g)[:, None]
        r = R * gen.random(m) ** (1.0 / beta)
        # density of the displacement radius is beta r^(beta-1) / R^beta
        jac = sphere_area(k) * R ** beta * r ** (k - beta) / beta
    Y = X + u * r[:, None]
    inside = d.contains(Y, tol=0.0)
    if outward is not None:
        inside &= norm(Y, outward) >= norm(X, outward)
    if drop_origin:
        inside &= norm(Y) >= ORIGIN_EXCLUSION
        inside &= norm(X) >= ORIGIN_EXCLUSION
    w = np.zeros(m)
    if not np.any(inside):
        return w
    fx = np.asarray(F(X[inside]), dtype=float)
    fy = np.asarray(F(Y[inside]), dtype=float)
    _check_finite(fx, X[inside])
    _check_finite(fy, Y[inside])
    dif = fx - fy
    ww = np.zeros(dif.shape[0])
    nz = dif != 0.0
    ww[nz] = (base[inside][nz] * jac[inside][nz]
              * np.abs(dif[nz]) ** p / r[inside][nz] ** exponent)
    _check_finite(ww, X[inside])
    w[inside] = ww
    return w


def _pair_importance_sphere(F, d, p, exponent, beta, gen, m):
    n = d.dim
    rho = _support_chordal(F)
    if rho is not None and n in (2, 3) and rho < 2.0:
        X, mult = _direction_mixture(n, float(rho), gen, m)
        base = d.measure * mult
    else:
        X = sample(d, gen, m)
        base = np.full(m, d.measure)
    g = gen.standard_normal((m, n))
    g -= np.sum(g * X, axis=1)[:, None] * X
    u = g / norm(g)[:, None]
    theta = math.pi * gen.random(m) ** (1.0 / beta)
    Y = np.cos(theta)[:, None] * X + np.sin(theta)[:, None] * u
    fx = np.asarray(F(X), dtype=float)
    fy = np.asarray(F(Y), dtype=float)
    _check_finite(fx, X)
    _check_finite(fy, Y)
    dif = fx - fy
    # geodesic angle density beta theta^(beta-1) / pi^beta against the
    # surface element a_{n-2} sin^{n-2}(theta) d(theta)
    jac = (
        sphere_area(n - 1)
        * math.pi ** beta
        * np.sin(theta) ** (n - 2)
        * theta ** (1.0 - beta)
        / beta
    )
    w = np.zeros(m)
    nz = dif != 0.0
    if np.any(nz):
        dist = norm((X - Y)[nz])
        w[nz] = base[nz] * jac[nz] * np.abs(dif[nz]) ** p / dist ** exponent
        _check_finite(w[nz], X[nz])
    return w


def gagliardo_seminorm(F, d: Domain, sigma: float, p: float, cfg: EstimatorConfig) -> Estimate:
    """Estimate the double integral of |F(X)-F(Y)|^p / dist^(dim + sigma p).

    The exponent uses the intrinsic dimension of the domain; distance is
    Euclidean (chordal on the sphere) except on the cube boundary, where
    the sup norm replaces it.  ``radial-importance`` mode draws the pair
    displacement with density proportional to r^(beta-1): geodesic angle
    on the sphere, arc length or in-face steps on the cube shell, straight
    steps on volume domains.

    On plane disks the outer variable is truncated at
    ``cfg.truncation_radius``; for compactly supported F the dropped tail
    is bounded in closed form and reported as ``tail_bound`` in metadata.
    """
    if not 0.0 < sigma <= 1.0:
        raise ValueError("sigma must lie in (0, 1]")
    if p < 1:
        raise ValueError("p must be >= 1")
    exponent = d.intrinsic_dim + sigma * p
    drop_origin = _needs_origin_exclusion(F, d)
    beta = cfg.importance_exponent
    if beta is None:
        beta = p * (1.0 - sigma)
        if beta <= 0.0:
            beta = 1.0

    if cfg.mode == "uniform-pair":
        m2 = d.measure ** 2

        def weights(gen, m):
            return _pair_uniform(F, d, p, exponent, m2, drop_origin, gen, m)

    else:
        if d.kind == "cube_boundary":

            def weights(gen, m):
                return _pair_importance_cube_boundary(F, d, p, exponent, beta,
                                                      gen, m)

        elif d.kind == "sphere":

            def weights(gen, m):
                return _pair_importance_sphere(F, d, p, exponent, beta, gen, m)

        else:
            gamma = cfg.position_exponent

            def weights(gen, m):
                return _pair_importance_volume(F, d, p, exponent, beta, gamma,
                                               drop_origin, gen, m)

    mean, stderr, meta = mc_mean(weights, cfg)
    meta.update({
        "domain": d.kind,
        "sigma": sigma,
        "p": p,
        "exponent": exponent,
        "distance": _distance_kind(d),
    })
    if cfg.mode == "radial-importance":
        meta["importance_exponent"] = beta
        if cfg.position_exponent is not None and d.kind in ("ball", "annulus", "cube"):
            meta["position_exponent"] = cfg.position_exponent
            if d.kind in ("ball", "cube"):
                meta["excluded_origin_radius"] = ORIGIN_EXCLUSION
    if sigma >= 1.0:
        meta["sigma_one_warning"] = "seminorm is divergent in the limit at sigma = 1"
    if drop_origin:
        meta["excluded_origin_radius"] = ORIGIN_EXCLUSION
    if d.kind == "plane_disk":
        meta.update(_plane_tail(F, d, sigma, p, cfg))
    return Estimate(mean, stderr, cfg.samples, cfg.seed, cfg.mode, meta)


def _plane_tail(F, d: Domain, sigma, p, cfg):
    """Closed-form bound on the pair mass beyond the truncation disk."""
    support = getattr(F, "support", None)
    radius = getattr(support, "outer_radius", None)
    T = d.radius
    if radius is None or radius >= T:
        return {"tail_bound": None, "tail_note": "no compact support declared"}
    k = d.dim - 1
    inner = Domain.plane_disk(d.dim, min(radius * 1.0001, T))
    sub = replace(cfg, samples=max(1000, min(cfg.samples, 50_000)), stream=cfg.stream + 7919)
    mass = lp_norm(F, inner, p, sub)
    gap = T - radius
    bound = 2.0 * mass.value * sphere_area(k) * gap ** (-sigma * p) / (sigma * p)
    return {"tail_bound": bound, "tail_gap": gap}


def _multi_indices(k, total):
    """All length-k multi-indices with the given order, lexicographic."""
    out = []
    for combo in _cartesian(range(total + 1), repeat=k):
        if sum(combo) == total:
            out.append(tuple(combo))
    return sorted(out)


def _split_order(s):
    m = int(math.floor(s))
    sigma = s - m
    if sigma == 0.0 and m >= 1:
        return m, 0.0
    return m, sigma


def _partial_callable(F, d: Domain, alpha):
    try:
        return F.partial(alpha), "exact"
    except (AttributeError, DerivativeDataError):
        h = 1e-4 * d.diameter

        def fd(pts):
            return finite_difference(F, pts, alpha, h)

        return fd, "finite-difference"


def sobolev_seminorm(F, d: Domain, s: float, p: float, cfg: EstimatorConfig,
                     leading_only: bool = False) -> Estimate:
    """Derivative-split seminorm |F|^p over a volume domain.

    For s = m + sigma the full seminorm sums the L^p powers of all partials
    of order 1..m plus, when sigma > 0, the Gagliardo seminorms of the
    order-m partials.  ``leading_only`` keeps just the top block (the
    order-m L^p powers for integer s, the sigma block otherwise), which is
    the part that scales exactly under dyadic dilation of annuli.

    Derivatives come from exact expansion data when ``F`` carries it and
    nested central differences otherwise.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    m, sigma = _split_order(s)
    k = d.point_dim
    terms = {}
    kinds = {}
    offset = 0
    total_value = 0.0
    total_var = 0.0

    if m == 0:
        est = gagliardo_seminorm(F, d, sigma, p, cfg)
        meta = {"terms": {"gagliardo": est}, "s": s, "p": p, "leading_only": leading_only}
        return Estimate(est.value, est.stderr, cfg.samples, cfg.seed, cfg.mode, meta)

    lp_orders = range(m, m + 1) if (leading_only and sigma == 0.0) else range(1, m + 1)
    if not (leading_only and sigma > 0.0):
        for order in lp_orders:
            for alpha in _multi_indices(k, order):
                dF, how = _partial_callable(F, d, alpha)
                est = lp_norm(dF, d, p, replace(cfg, stream=cfg.stream + offset))
                offset += 1
                terms[f"lp:{alpha}"] = est
                kinds[f"lp:{alpha}"] = how
                total_value += est.value
                total_var += est.stderr ** 2

    if sigma > 0.0:
        offset = 1000
        for alpha in _multi_indices(k, m):
            dF, how = _partial_callable(F, d, alpha)
            est = gagliardo_seminorm(dF, d, sigma, p, replace(cfg, stream=cfg.stream + offset))
            offset += 1
            terms[f"gagliardo:{alpha}"] = est
            kinds[f"gagliardo:{alpha}"] = how
            total_value += est.value
            total_var += est.stderr ** 2

    meta = {
        "terms": terms,
        "derivative_sources": kinds,
        "s": s,
        "p": p,
        "leading_only": leading_only,
    }
    return Estimate(total_value, math.sqrt(total_var), cfg.samples, cfg.seed, cfg.mode, meta)


def sphere_norm_full(f, s: float, p: float, cfg: EstimatorConfig, chart=None) -> Estimate:
    """Full W^{s,p} norm (p-th power) of a sphere function.

    For s <= 1 this is the L^p power plus the chordal Gagliardo seminorm,
    for any f.  For s > 1 the function must be cap-supported and the norm
    is the flat chart norm of its unweighted transfer, derivatives and all,
    with the plane integrals truncated at ``cfg.truncation_radius``.
    """
    n = f.n
    sphere = Domain.sphere(n)
    if s <= 1.0:
        base = lp_norm(f, sphere, p, cfg)
        semi = gagliardo_seminorm(f, sphere, s, p, replace(cfg, stream=cfg.stream + 101))
        meta = {"parts": {"lp": base, "gagliardo": semi}, "s": s, "p": p, "route": "direct"}
        return Estimate(
            base.value + semi.value,
            combined_stderr(base, semi),
            cfg.samples,
            cfg.seed,
            cfg.mode,
            meta,
        )

    from .functions import sphere_to_plane

    if chart is None:
        raise ValueError("the chart norm for s > 1 needs a chart")
    if not getattr(f, "is_cap_supported", False):
        raise ValueError("the s > 1 norm is defined for cap-supported functions only")
    g = sphere_to_plane(f, 0.0, chart)
    plane = Domain.plane_disk(n, cfg.truncation_radius)
    base = lp_norm(g, plane, p, cfg)
    semi = sobolev_seminorm(g, plane, s, p, replace(cfg, stream=cfg.stream + 101))
    meta = {"parts": {"lp": base, "sobolev": semi}, "s": s, "p": p, "route": "chart"}
    return Estimate(
        base.value + semi.value,
        combined_stderr(base, semi),
        cfg.samples,
        cfg.seed,
        cfg.mode,
        meta,
    )
