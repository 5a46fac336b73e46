"""Verification experiments for the radial extension operators.

Each experiment pits a Monte Carlo estimate against an independent route
(a closed form, an adaptive quadrature, an exact rescaling, or a second
estimator) and reports a verdict.  A comparison passes only when the
discrepancy is both statistically compatible (within three combined
standard errors) and below an absolute floor; it is inconclusive when the
noise floor itself is too large to certify the comparison at that floor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product as _cartesian

import numpy as np
from scipy import integrate

from .functions import make_test_function, plane_rational
from .geometry import (
    Domain,
    RngStream,
    cap_chart_build,
    gnomonic,
    norm,
    sample,
    sphere_area,
)
from .norms import (
    EstimatorConfig,
    gagliardo_seminorm,
    lp_norm,
    mc_mean,
    sobolev_seminorm,
    sphere_norm_full,
)
from .operators import ExtensionSpec, compose_T_via_U, extend_V, radial_extend
from .polyalg import deriv_expansion, eval_derivative, finite_difference

__all__ = [
    "Params",
    "CheckRecord",
    "Report",
    "ZeroSeminormError",
    "verdict_compare",
    "check_lp_identity",
    "check_decomposition",
    "kernel_bound_scan",
    "j_oracle",
    "compute_J",
    "scaling_law",
    "divergence_probe",
    "operator_sweep",
    "derivative_check",
    "chart_report",
]

FLOOR_EXACT = 0.01     # exact identities estimated twice
FLOOR_STAT = 0.05      # two genuinely different estimators
EXACT_SCALING_TOL = 1e-12


class ZeroSeminormError(RuntimeError):
    """The base seminorm is statistically indistinguishable from zero."""


@dataclass(frozen=True)
class Params:
    """Exponent bundle for one experiment.

    ``n`` is the ambient dimension, ``s`` the smoothness, ``p`` the
    integrability exponent, ``a`` the homogeneity weight.
    """

    n: int
    s: float
    p: float
    a: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be at least 2")
        if self.s <= 0:
            raise ValueError("smoothness must be positive")
        if self.p < 1 or not math.isfinite(self.p):
            raise ValueError("p must lie in [1, infinity)")

    @property
    def order(self) -> int:
        return int(math.floor(self.s))

    @property
    def sigma(self) -> float:
        return self.s - self.order

    @property
    def wellposed(self) -> bool:
        return (self.s - self.a) * self.p < self.n

    def as_dict(self):
        return {"n": self.n, "s": self.s, "p": self.p, "a": self.a}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class CheckRecord:
    label: str
    value: float
    reference: float
    stderr: float
    tolerance: float
    verdict: str
    note: str = ""

    def as_dict(self):
        return {
            "label": self.label,
            "value": _num(self.value),
            "reference": _num(self.reference),
            "stderr": _num(self.stderr),
            "tolerance": _num(self.tolerance),
            "verdict": self.verdict,
            "note": self.note,
        }


@dataclass
class Report:
    experiment: str
    params: dict
    verdict: str
    checks: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    seed: int = 0
    samples: int = 0

    def as_dict(self):
        return {
            "experiment": self.experiment,
            "params": self.params,
            "verdict": self.verdict,
            "checks": [c.as_dict() for c in self.checks],
            "details": self.details,
            "seed": self.seed,
            "samples": self.samples,
        }

    def rows(self):
        """Long-format rows for CSV output."""
        out = []
        for c in self.checks:
            out.append({
                "experiment": self.experiment,
                "check": c.label,
                "value": _num(c.value),
                "reference": _num(c.reference),
                "stderr": _num(c.stderr),
                "tolerance": _num(c.tolerance),
                "verdict": c.verdict,
            })
        return out


def _overall(checks):
    verdicts = [c.verdict for c in checks]
    if any(v == "fail" for v in verdicts):
        return "fail"
    if any(v == "inconclusive" for v in verdicts):
        return "inconclusive"
    return "pass"


def verdict_compare(label, value, reference, stderr, floor, scale=None, note=""):
    """Compare two estimates of the same quantity.

    Passes when |value - reference| is within three combined standard
    errors and within floor * scale.  When the three-sigma band itself
    exceeds the floor, a statistically compatible result is reported
    inconclusive rather than passed: the run was too noisy to certify
    anything at that floor.  Exact agreement (including 0 = 0) passes.
    A zero stderr marks a deterministic comparison, judged on the floor
    alone.
    """
    value = float(value)
    reference = float(reference)
    diff = abs(value - reference)
    if scale is None:
        scale = max(abs(value), abs(reference))
    tol = floor * scale
    if diff == 0.0:
        return CheckRecord(label, value, reference, stderr, tol, "pass", note)
    band = 3.0 * float(stderr)
    if stderr == 0.0:
        v = "pass" if diff <= tol else "fail"
        return CheckRecord(label, value, reference, 0.0, tol, v, note)
    if diff <= band and diff <= tol:
        v = "pass"
    elif diff <= band and band > tol:
        v = "inconclusive"
    else:
        v = "fail"
    return CheckRecord(label, value, reference, float(stderr), tol, v, note)


def _bound_check(label, value, bound, slack=0.0, note=""):
    value = float(value)
    v = "pass" if value <= bound + slack else "fail"
    return CheckRecord(label, value, float(bound), 0.0, slack, v, note)


def _multi_indices(k, total):
    return sorted(c for c in _cartesian(range(total + 1), repeat=k) if sum(c) == total)


def _default_boundary_fn(params: Params, chart=None):
    if chart is None:
        chart = cap_chart_build(params.n)
    return make_test_function("bump", params.n, chart=chart, support="cap"), chart


# ---------------------------------------------------------------------------
# the exact L^p identity for the homogeneous ball extension


def check_lp_identity(params: Params, f=None, cfg: EstimatorConfig | None = None) -> Report:
    """Check that the L^p power of the extension equals the boundary L^p
    power divided by n + a p."""
    cfg = cfg or EstimatorConfig()
    n, p, a = params.n, params.p, params.a
    if n + a * p <= 0:
        raise ValueError("n + a p must be positive for an integrable extension")
    if f is None:
        f = make_test_function("constant", n, c=1.0)
    F = radial_extend(ExtensionSpec(f, a))
    ball = lp_norm(F, Domain.ball(n), p, cfg)
    bdry = lp_norm(f, Domain.sphere(n), p, replace(cfg, stream=cfg.stream + 1))
    predicted = bdry.value / (n + a * p)
    se = math.hypot(ball.stderr, bdry.stderr / (n + a * p))
    checks = [verdict_compare("lp_power_identity", ball.value, predicted, se, FLOOR_EXACT)]
    details = {
        "ball_lp_power": ball.value,
        "boundary_lp_power": bdry.value,
        "constant": 1.0 / (n + a * p),
        "excluded_mass_bound": ball.metadata.get("excluded_mass_bound"),
    }
    return Report("lp_identity", params.as_dict(), _overall(checks), checks, details,
                  cfg.seed, cfg.samples)


# ---------------------------------------------------------------------------
# the triple-integral form of the ball Gagliardo seminorm


def check_decomposition(params: Params, f=None, cfg: EstimatorConfig | None = None) -> Report:
    """Check the ball seminorm against its boundary triple integral.

    The seminorm power of the weighted extension equals 2/(n - (s-a)p)
    times the integral of t^{n-1} |f(x) - t^a f(y)|^p / |x - t y|^{n+sp}
    over boundary pairs (x, y) and t in (0, 1).  The t >= 1/2 range is
    additionally split along |f(x) - t^a f(y)| <= |f(x) - f(y)| +
    |1 - t^a| |f(y)|, and each split's empirical constant against the
    matching boundary norm is checked for stability under sample doubling.
    """
    cfg = cfg or EstimatorConfig()
    n, s, p, a = params.n, params.s, params.p, params.a
    if not 0.0 < s < 1.0:
        raise ValueError("the decomposition identity needs 0 < s < 1")
    if not params.wellposed:
        raise ValueError("needs (s - a) p < n for a finite seminorm")
    if f is None:
        f = make_test_function("coordinate", n, i=0)

    F = radial_extend(ExtensionSpec(f, a))
    lhs = gagliardo_seminorm(F, Domain.ball(n), s, p, cfg)

    expo = n + s * p
    area = sphere_area(n)
    factor = 2.0 / (n - (s - a) * p)
    sphere = Domain.sphere(n)

    def rhs_weights(gen, m):
        x = sample(sphere, gen, m)
        y = sample(sphere, gen, m)
        t = gen.random(m)
        fx = np.asarray(f(x), dtype=float)
        fy = np.asarray(f(y), dtype=float)
        dif = fx - t ** a * fy
        w = np.zeros(m)
        nz = dif != 0.0
        if np.any(nz):
            dist = norm(x[nz] - t[nz, None] * y[nz])
            w[nz] = area * area * t[nz] ** (n - 1) * np.abs(dif[nz]) ** p / dist ** expo
        return w

    def split_weights(which):
        def wfun(gen, m):
            x = sample(sphere, gen, m)
            y = sample(sphere, gen, m)
            t = gen.random(m)
            fx = np.asarray(f(x), dtype=float)
            fy = np.asarray(f(y), dtype=float)
            if which == "near_origin":
                sel = t < 0.5
                top = np.abs(fx - t ** a * fy) ** p
            elif which == "boundary_difference":
                sel = t >= 0.5
                top = np.abs(fx - fy) ** p
            else:  # weight_defect
                sel = t >= 0.5
                top = np.abs(1.0 - t ** a) ** p * np.abs(fy) ** p
            w = np.zeros(m)
            nz = sel & (top != 0.0)
            if np.any(nz):
                dist = norm(x[nz] - t[nz, None] * y[nz])
                w[nz] = area * area * t[nz] ** (n - 1) * top[nz] / dist ** expo
            return w
        return wfun

    mean, se, _ = mc_mean(rhs_weights, replace(cfg, stream=cfg.stream + 11))
    rhs_value = factor * mean
    rhs_se = factor * se
    checks = [verdict_compare("seminorm_triple_integral", lhs.value, rhs_value,
                              math.hypot(lhs.stderr, rhs_se), FLOOR_STAT)]

    f_lp = lp_norm(f, sphere, p, replace(cfg, stream=cfg.stream + 21))
    f_semi = gagliardo_seminorm(f, sphere, s, p, replace(cfg, stream=cfg.stream + 22))

    details = {
        "lhs_seminorm_power": lhs.value,
        "rhs_triple_integral": rhs_value,
        "prefactor": factor,
        "boundary_lp_power": f_lp.value,
        "boundary_seminorm_power": f_semi.value,
        "splits": {},
    }

    refs = {
        "near_origin": f_lp.value,
        "boundary_difference": f_semi.value,
        "weight_defect": f_lp.value,
    }
    for which, ref in refs.items():
        m1, se1, _ = mc_mean(split_weights(which), replace(cfg, stream=cfg.stream + 31))
        m2, se2, _ = mc_mean(split_weights(which),
                             replace(cfg, samples=2 * cfg.samples, stream=cfg.stream + 32))
        details["splits"][which] = {"value": m1, "doubled": m2, "stderr": se1}
        if ref > 0 and m2 > 0:
            c1, c2 = m1 / ref, m2 / ref
            se_c = math.hypot(se1, se2) / ref
            checks.append(verdict_compare(
                f"constant_stability:{which}", c1, c2, se_c, 0.20,
                scale=max(c1, c2), note="empirical constant under sample doubling"))
            details["splits"][which]["constant"] = c2
        elif m1 == 0.0 and m2 == 0.0:
            checks.append(CheckRecord(f"constant_stability:{which}", 0.0, 0.0, 0.0,
                                      0.0, "pass", "identically zero split"))
    return Report("decomposition", params.as_dict(), _overall(checks), checks, details,
                  cfg.seed, cfg.samples)


# ---------------------------------------------------------------------------
# the near-diagonal kernel bound


def _one_d_kernel_integral(expo):
    return math.sqrt(math.pi) * math.gamma((expo - 1) / 2.0) / math.gamma(expo / 2.0)


def kernel_bound_scan(params: Params, pairs: int = 2000, seed: int = 0) -> Report:
    """Scan L(x, y) = int_{1/2}^1 |x - t y|^{-(n+sp)} dt against its bound.

    The bound is C / |x - y|^{n-1+sp} with
    C = 2^{(n-1+sp)/2} int (1 + u^2)^{-(n+sp)/2} du over the line; pairs
    with non-positive inner product additionally satisfy L <= 1/2.  The
    scan mixes uniform pairs with log-spaced near-diagonal separations
    down to 1e-4, where the bound is sharpest.
    """
    n, s, p = params.n, params.s, params.p
    expo = n + s * p
    power = n - 1 + s * p
    one_d, _ = integrate.quad(lambda u: (1 + u * u) ** (-expo / 2.0),
                              -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13)
    C = 2.0 ** (power / 2.0) * one_d
    C_gamma = 2.0 ** (power / 2.0) * _one_d_kernel_integral(expo)
    checks = [verdict_compare("analytic_constant_quadrature", C, C_gamma, 0.0,
                              1e-10, scale=1.0, note="quad against the gamma closed form")]

    gen = RngStream(seed, 5150).generator()
    half = pairs // 2
    xs = sample(Domain.sphere(n), gen, pairs)
    ys = np.empty_like(xs)
    ys[:half] = sample(Domain.sphere(n), gen, half)
    gaps = np.logspace(-4, 0, pairs - half)
    for i, d in enumerate(gaps):
        x = xs[half + i]
        g = gen.standard_normal(n)
        g -= np.dot(g, x) * x
        u = g / np.linalg.norm(g)
        theta = 2.0 * math.asin(min(d / 2.0, 1.0))
        ys[half + i] = math.cos(theta) * x + math.sin(theta) * u

    worst = 0.0
    worst_gap = None
    obtuse_max = 0.0
    obtuse_seen = 0
    with warnings.catch_warnings():
        # the near-diagonal integrands are huge at the hinted peak; the
        # quadrature still resolves them relatively, which is all the
        # ratio needs
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for x, y in zip(xs, ys):
            A = float(np.dot(x, y))
            d = float(np.linalg.norm(x - y))
            if d == 0.0:
                continue
            tstar = min(max(A, 0.5), 1.0)
            val, _ = integrate.quad(
                lambda t: (1.0 + t * t - 2.0 * t * A) ** (-expo / 2.0),
                0.5, 1.0, points=[tstar], limit=200, epsabs=1e-12, epsrel=1e-10)
            ratio = val * d ** power / C
            if ratio > worst:
                worst, worst_gap = ratio, d
            if A <= 0.0:
                obtuse_seen += 1
                obtuse_max = max(obtuse_max, val)
    checks.append(_bound_check("kernel_ratio_max", worst, 1.0, slack=1e-8,
                               note=f"worst separation {worst_gap:.3e}"))
    checks.append(_bound_check("obtuse_pairs_bounded", obtuse_max, 0.5, slack=1e-12,
                               note=f"{obtuse_seen} pairs with <x,y> <= 0"))
    details = {"analytic_constant": C, "pairs": pairs, "max_ratio": worst,
               "max_ratio_separation": worst_gap, "obtuse_max": obtuse_max}
    return Report("kernel_bound", params.as_dict(), _overall(checks), checks, details,
                  seed, pairs)


# ---------------------------------------------------------------------------
# the boundary-layer integral J


@lru_cache(maxsize=None)
def j_oracle(n: int, s: float, p: float) -> float:
    """Adaptive quadrature of J in polar form.

    The surface integral over y collapses to the polar angle against x,
    leaving a 2-d integral with an integrable corner at t = 1, theta = 0.
    """
    expo = n + s * p
    ring = sphere_area(n - 1)

    def inner(t):
        f = lambda th: ((1.0 + t * t - 2.0 * t * math.cos(th)) ** (-expo / 2.0)
                        * math.sin(th) ** (n - 2))
        v, _ = integrate.quad(f, 0.0, math.pi, epsabs=1e-11, epsrel=1e-11,
                              limit=400, points=[0.0])
        return ring * v

    with warnings.catch_warnings():
        # the corner at t = 1, theta = 0 is integrable but trips the
        # roundoff detector; runs at tightened tolerances agree to 2e-12
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out, _ = integrate.quad(lambda t: (1.0 - t) ** p * inner(t), 0.5, 1.0,
                                epsabs=1e-10, epsrel=1e-10, limit=400, points=[1.0])
    return out


def compute_J(params: Params, cfg: EstimatorConfig | None = None) -> Report:
    """Monte Carlo estimate of J = int_{1/2}^1 int (1-t)^p |x - t y|^{-(n+sp)}
    over boundary y, checked for base-point independence, doubling
    stability, and agreement with the polar quadrature oracle."""
    cfg = cfg or EstimatorConfig()
    n, s, p = params.n, params.s, params.p
    expo = n + s * p
    sphere = Domain.sphere(n)
    area = sphere_area(n)

    def weights_for(x):
        def wf(gen, m):
            y = sample(sphere, gen, m)
            t = 0.5 + 0.5 * gen.random(m)
            dist = norm(x[None, :] - t[:, None] * y)
            return 0.5 * area * (1.0 - t) ** p / dist ** expo
        return wf

    north = np.zeros(n)
    north[-1] = 1.0
    other = sample(sphere, RngStream(cfg.seed, 4242).generator(), 1)[0]

    m1, se1, meta1 = mc_mean(weights_for(north), cfg)
    m2, se2, _ = mc_mean(weights_for(other), replace(cfg, stream=cfg.stream + 1))
    mdbl, sedbl, _ = mc_mean(weights_for(north),
                             replace(cfg, samples=2 * cfg.samples, stream=cfg.stream + 2))
    oracle = j_oracle(n, s, p)

    checks = [
        verdict_compare("oracle_agreement", m1, oracle, se1, 0.02),
        verdict_compare("doubling_stability", m1, mdbl, math.hypot(se1, sedbl), FLOOR_EXACT),
        # base-point independence is a purely statistical statement
        verdict_compare("base_point_independence", m1, m2, math.hypot(se1, se2), math.inf),
    ]
    details = {"estimate": m1, "stderr": se1, "oracle": oracle,
               "doubled": mdbl, "second_base_point": m2}
    if "variance_warning" in meta1:
        details["variance_warning"] = meta1["variance_warning"]
    return Report("compute_J", params.as_dict(), _overall(checks), checks, details,
                  cfg.seed, cfg.samples)


# ---------------------------------------------------------------------------
# exact dyadic scaling across annuli


def _leading_seminorm(F, n, j, s, p, cfg):
    return sobolev_seminorm(F, Domain.annulus(n, j), s, p, cfg, leading_only=True)


def scaling_law(params: Params, f=None, j_list=(0, 1, 2, 3), cfg=None, chart=None,
                mode: str = "both") -> Report:
    """Check the dyadic scaling of the leading seminorm block over annuli.

    Reusing the same random streams on every annulus makes each sample at
    level j an exact power-of-two rescaling of its level-0 twin, so the
    estimate ratio must match 2^{j[(s-a)p - n]} to near machine precision.
    Independent streams then give a purely statistical confirmation.
    ``mode`` selects the exact leg, the independent leg, or both.
    """
    if mode not in ("exact", "independent", "both"):
        raise ValueError("mode must be exact, independent, or both")
    cfg = cfg or EstimatorConfig()
    n, s, p, a = params.n, params.s, params.p, params.a
    if f is None:
        f, chart = _default_boundary_fn(params, chart)
    F = radial_extend(ExtensionSpec(f, a))
    log_ratio = (s - a) * p - n

    ests = {j: _leading_seminorm(F, n, j, s, p, cfg) for j in j_list}
    base = ests[j_list[0]]
    if base.value <= 0:
        raise ZeroSeminormError("base annulus seminorm vanished; pick a livelier f")

    checks = []
    details = {"log2_ratio_per_level": log_ratio,
               "estimates": {str(j): ests[j].value for j in j_list},
               "measured_ratios": {str(j): ests[j].value / base.value
                                   for j in j_list[1:]}}
    if mode in ("exact", "both"):
        for j in j_list[1:]:
            predicted = base.value * 2.0 ** ((j - j_list[0]) * log_ratio)
            rel = abs(ests[j].value - predicted) / predicted
            checks.append(CheckRecord(
                f"exact_scaling:j={j}", ests[j].value, predicted, 0.0,
                EXACT_SCALING_TOL, "pass" if rel <= EXACT_SCALING_TOL else "fail",
                f"shared-stream relative error {rel:.3e}"))

    if mode in ("independent", "both"):
        for j in j_list[1:]:
            scalefac = 2.0 ** ((j - j_list[0]) * log_ratio)
            ind = _leading_seminorm(F, n, j, s, p,
                                    replace(cfg, stream=cfg.stream + 4000 + 17 * j))
            predicted = base.value * scalefac
            se = math.hypot(ind.stderr, scalefac * base.stderr)
            # purely statistical confirmation: the exact-arithmetic check
            # above already pins the ratio, so agreement within three sigma
            # is all the independent streams owe us
            checks.append(verdict_compare(f"independent_scaling:j={j}", ind.value,
                                          predicted, se, math.inf))
    return Report("scaling_law", params.as_dict(), _overall(checks), checks, details,
                  cfg.seed, cfg.samples)


# ---------------------------------------------------------------------------
# divergence detection at and past the well-posedness edge


def divergence_probe(params: Params, f=None, j_max: int = 40, cfg=None, chart=None) -> Report:
    """Decide finiteness of the ball seminorm from annulus partial sums.

    The leading seminorm block over annulus j scales like
    2^{j[(s-a)p - n]} exactly, so the measured level ratio decides the
    series: a ratio at or above 1 (within 1e-9) means the partial sums
    grow without bound and the extension misses the target space; below 1
    they sum to a finite geometric series.  The verdict passes when the
    measurement agrees with the sign of (s-a)p - n.
    """
    cfg = cfg or EstimatorConfig()
    n, s, p, a = params.n, params.s, params.p, params.a
    if f is None:
        f, chart = _default_boundary_fn(params, chart)
    F = radial_extend(ExtensionSpec(f, a))
    log_ratio = (s - a) * p - n

    e0 = _leading_seminorm(F, n, 0, s, p, cfg)
    if e0.value <= 3.0 * e0.stderr:
        raise ZeroSeminormError(
            "base seminorm estimate is consistent with zero; divergence cannot "
            f"be probed (estimate {e0.value:.3e}, stderr {e0.stderr:.3e})")
    e1 = _leading_seminorm(F, n, 1, s, p, cfg)
    measured = e1.value / e0.value
    theoretical = 2.0 ** log_ratio

    ratio_rel = abs(measured - theoretical) / theoretical
    checks = [CheckRecord(
        "geometric_ratio", measured, theoretical, 0.0, EXACT_SCALING_TOL,
        "pass" if ratio_rel <= EXACT_SCALING_TOL else "fail",
        "shared-stream annulus ratio")]

    divergent_measured = measured >= 1.0 - 1e-9
    divergent_theory = not params.wellposed
    checks.append(CheckRecord(
        "divergence_detected", float(divergent_measured), float(divergent_theory),
        0.0, 0.0, "pass" if divergent_measured == divergent_theory else "fail",
        "series diverges iff (s-a)p >= n"))

    partial = []
    acc = 0.0
    for j in range(j_max + 1):
        acc += e0.value * measured ** j
        if j in (0, 1, 3, 7, 15, j_max):
            partial.append({"j": j, "sum": acc})
    details = {
        "base_estimate": e0.value,
        "base_stderr": e0.stderr,
        "measured_ratio": measured,
        "theoretical_ratio": theoretical,
        "partial_sums": partial,
        "limit": None if divergent_measured else e0.value / (1.0 - measured),
    }
    return Report("divergence_probe", params.as_dict(), _overall(checks), checks, details,
                  cfg.seed, cfg.samples)


# ---------------------------------------------------------------------------
# the norm-ratio sweep over random boundary families


def _family_ratio(f, params: Params, cfg, geometry, chart):
    n, s, p, a = params.n, params.s, params.p, params.a
    if geometry == "ball":
        F = radial_extend(ExtensionSpec(f, a))
        vcfg = cfg
        if cfg.mode == "radial-importance" and cfg.position_exponent is None:
            # sample the ball legs to match the extension's known per-shell
            # mass decay; at the divergence boundary this is log-uniform
            vcfg = replace(cfg, position_exponent=max(0.0, n - (s - a) * p))
        num_lp = lp_norm(F, Domain.ball(n), p, vcfg)
        num_semi = sobolev_seminorm(F, Domain.ball(n), s, p,
                                    replace(vcfg, stream=vcfg.stream + 1))
        num = num_lp.value + num_semi.value
        den = sphere_norm_full(f, s, p, replace(cfg, stream=cfg.stream + 2),
                               chart=chart).value
    else:
        def boundary(z):
            z = np.asarray(z, dtype=float)
            return f(z / norm(z)[:, None])
        # radial transport keeps the directional support, and the shell
        # samplers aim at it
        boundary.support = getattr(f, "support", None)
        F = compose_T_via_U(boundary, n)
        vcfg = cfg
        if cfg.mode == "radial-importance" and cfg.position_exponent is None:
            vcfg = replace(cfg, position_exponent=max(0.0, n - (s - a) * p))
        num_lp = lp_norm(F, Domain.cube(n), p, cfg)
        num_semi = gagliardo_seminorm(F, Domain.cube(n), s, p,
                                      replace(vcfg, stream=cfg.stream + 1))
        num = num_lp.value + num_semi.value
        bcfg = replace(cfg, stream=cfg.stream + 2)
        den_lp = lp_norm(boundary, Domain.cube_boundary(n), p, bcfg)
        den_semi = gagliardo_seminorm(boundary, Domain.cube_boundary(n), s, p,
                                      replace(bcfg, stream=bcfg.stream + 1))
        den = den_lp.value + den_semi.value
    if den <= 0:
        raise ZeroSeminormError("boundary norm vanished for a sweep family member")
    return float((num / den) ** (1.0 / p))


def operator_sweep(params: Params, count: int = 4, cfg=None,
                   geometry: str = "ball", chart=None) -> Report:
    """Worst norm ratio ||extension|| / ||boundary data|| over a family of
    random boundary functions, with a doubling stability check.

    The cube route transports the sphere data radially to the cube
    boundary and extends with the sup-norm scaling; it is limited to
    s < 1 because that extension is not differentiable across the cube's
    diagonal planes.

    When (s - a) p >= n the boundedness statement fails in the limit; the
    sweep still runs as an evidence collector, with the report labelled,
    since the finite-sample estimates stay finite.
    """
    cfg = cfg or EstimatorConfig()
    n, s = params.n, params.s
    if geometry not in ("ball", "cube"):
        raise ValueError("geometry must be 'ball' or 'cube'")
    if geometry == "cube":
        if s >= 1.0:
            raise ValueError("the cube sweep needs s < 1")
        if params.a != 0.0:
            raise ValueError("the cube extension is unweighted; use a = 0")
    if chart is None:
        chart = cap_chart_build(n)

    ratios = []
    for i in range(2 * count):
        f = make_test_function("random_mix", n, chart=chart, seed=i)
        sub = replace(cfg, stream=cfg.stream + 100 * (i + 1))
        ratios.append(_family_ratio(f, params, sub, geometry, chart))

    first = max(ratios[:count])
    full = max(ratios)
    drift = (full - first) / first
    bad = int(np.sum(~np.isfinite(ratios)))
    checks = [
        CheckRecord("max_ratio_stability", full, first, 0.0, 0.10,
                    "pass" if drift <= 0.10 else "fail",
                    f"family of {count} grown to {2 * count}"),
        _bound_check("ratios_finite", bad, 0,
                     note="count of non-finite family ratios"),
    ]
    details = {"ratios": ratios, "max_first_half": first, "max_full": full,
               "median_ratio": float(np.median(ratios)), "geometry": geometry}
    if not params.wellposed:
        details["outside_wellposed_range"] = (
            "(s - a) p >= n: the extension misses the target space in the "
            "limit; finite-sample evidence only")
    return Report("operator_sweep", params.as_dict(), _overall(checks), checks, details,
                  cfg.seed, cfg.samples)


# ---------------------------------------------------------------------------
# the derivative expansion on the cone


def _cone_points(params: Params, gen, total, support_radius):
    n = params.n
    pts = np.empty((total, n))
    half = total // 2
    got = 0
    while got < half:
        cand = sample(Domain.halfspace_cone(n), gen, half)
        keep = cand[cand[:, -1] >= 0.2]
        take = min(len(keep), half - got)
        pts[got:got + take] = keep[:take]
        got += take
    # targeted points whose slope variable lands in a fixed disk, so the
    # stencils mix the radial and tangential variables at moderate slopes
    m = total - half
    disk = gen.standard_normal((m, n - 1))
    disk /= norm(disk)[:, None]
    r = support_radius * 0.9 * gen.random(m) ** (1.0 / (n - 1))
    h = 0.2 + 0.8 * gen.random(m)
    pts[half:, :-1] = disk * (r * h)[:, None]
    pts[half:, -1] = h
    return pts


def derivative_check(params: Params, max_order: int = 3, points: int = 100,
                     seed: int = 0) -> Report:
    """Validate the exact derivative expansion of the cone extension.

    Every partial up to ``max_order`` is compared against Richardson-
    extrapolated central differences at cone points with height at least
    0.2.  The error is measured relative to the largest magnitude the
    exact partial takes on the point set, since a pointwise quotient is
    meaningless wherever the derivative passes through zero.  The raw
    central differences must converge at second order, mixed partials
    must agree exactly across differentiation orders, and the radial
    moment integral behind each derivative level is checked against
    1/(n + (a - k) p), with the divergent levels flagged.
    """
    n, p, a = params.n, params.p, params.a
    # smooth everywhere, so the extrapolation order is clean at every point;
    # a compactly supported profile would poison stencils near its edge
    g = plane_rational(n - 1)
    G = extend_V(g, a)

    gen = RngStream(seed, 808).generator()
    pts = _cone_points(params, gen, points, 0.45)

    worst = 0.0
    worst_alpha = None
    slopes = []
    mixed_exact = True
    for order in range(1, max_order + 1):
        for alpha in _multi_indices(n, order):
            exact = G.partial(alpha)(pts)
            rich = finite_difference(G, pts, alpha, 4e-3, richardson=2)
            scale = float(np.max(np.abs(exact))) or 1.0
            err = float(np.max(np.abs(exact - rich))) / scale
            if err > worst:
                worst, worst_alpha = err, alpha
            raw1 = finite_difference(G, pts, alpha, 1e-3)
            raw2 = finite_difference(G, pts, alpha, 5e-4)
            e1 = np.abs(raw1 - exact)
            e2 = np.abs(raw2 - exact)
            ok = (e1 > 1e-9) & (e2 > 1e-10)
            if np.any(ok):
                slopes.append(float(np.median(np.log2(e1[ok] / e2[ok]))))
            if order >= 2 and alpha[0] >= 1 and alpha[-1] >= 1:
                axes = tuple(i for i, k in enumerate(alpha) for _ in range(k))
                e_fwd = deriv_expansion(alpha, a, n, order=axes)
                e_rev = deriv_expansion(alpha, a, n, order=tuple(reversed(axes)))
                ga, _aa = G.cone_source
                va = eval_derivative(e_fwd, ga, pts)
                vb = eval_derivative(e_rev, ga, pts)
                if not np.array_equal(va, vb):
                    mixed_exact = False

    slope = float(np.median(slopes))
    checks = [
        _bound_check("richardson_relative_error", worst, 1e-6,
                     note=f"worst multi-index {worst_alpha}, scaled by the "
                          "largest exact value per index"),
        CheckRecord("central_difference_order", slope, 2.0, 0.0, 0.1,
                    "pass" if abs(slope - 2.0) <= 0.1 else "fail",
                    "median log2 error ratio under h -> h/2"),
        CheckRecord("mixed_partial_order_independence", 0.0 if mixed_exact else 1.0,
                    0.0, 0.0, 0.0, "pass" if mixed_exact else "fail",
                    "expansion identical for permuted differentiation orders"),
    ]

    moments = {}
    for k in range(0, max_order + 1):
        c = n - 1 + (a - k) * p
        # truncated moment against the closed form, on [lo, 1]
        los = [1e-2, 1e-4, 1e-6]
        vals = []
        for lo in los:
            with warnings.catch_warnings():
                # the integrand spans up to 30 orders of magnitude, which
                # trips the roundoff detector; the relative tolerance below
                # is still honoured, as the closed-form comparison confirms
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                v, _ = integrate.quad(lambda t: t ** c, lo, 1.0,
                                      epsabs=0.0, epsrel=1e-12)
            closed = (math.log(1.0 / lo) if c == -1.0
                      else (1.0 - lo ** (c + 1.0)) / (c + 1.0))
            checks.append(verdict_compare(
                f"moment_quadrature:k={k},lo={lo:g}", v, closed, 0.0, 1e-10,
                scale=max(abs(closed), 1.0)))
            vals.append(v)
        if (k - a) * p < n:
            closed_full = 1.0 / (n + (a - k) * p)
            # the cutoff drops exactly lo^{c+1}/(c+1) of the moment
            tail = los[-1] ** (c + 1.0) / (c + 1.0)
            checks.append(_bound_check(
                f"radial_moment:k={k}", abs(vals[-1] - closed_full),
                tail + 1e-10 * closed_full,
                note=f"lo = 1e-6 truncation, analytic tail {tail:.3e}"))
            moments[str(k)] = {"value": vals[-1], "closed_form": closed_full,
                               "divergent": False}
        else:
            growing = vals[0] < vals[1] < vals[2]
            checks.append(CheckRecord(
                f"radial_moment_divergent:k={k}", vals[-1], math.inf, 0.0, 0.0,
                "pass" if growing else "fail",
                "truncated moment grows as the cutoff shrinks"))
            moments[str(k)] = {"truncated": dict(zip(map(str, los), vals)),
                               "divergent": True}

    details = {"worst_relative_error": worst, "slope": slope, "moments": moments}
    return Report("derivative_check", params.as_dict(), _overall(checks), checks, details,
                  seed, points)


# ---------------------------------------------------------------------------
# chart construction report


def chart_report(n: int = 3, target_radius: float = 0.5, probe: int = 10000,
                 seed: int = 0) -> Report:
    """Solve for the cap aperture hitting the target slope radius and verify
    the chart's round trips."""
    chart = cap_chart_build(n, target_radius)
    gen = RngStream(seed, 271).generator()
    rho = chart.inner_image_radius * gen.random(probe) ** (1.0 / (n - 1))
    ang = gen.standard_normal((probe, n - 1))
    ang /= norm(ang)[:, None]
    Y = ang * rho[:, None]
    X = gnomonic(chart, Y, "lift")
    back = gnomonic(chart, X, "project")
    rt = float(np.max(norm(back - Y)))
    r_eps = (2.0 * chart.eps * math.sqrt(1.0 - chart.eps ** 2)
             / (1.0 - 2.0 * chart.eps ** 2))
    checks = [
        _bound_check("solver_residual", abs(chart.residual), 1e-14),
        verdict_compare("image_radius", r_eps, target_radius, 0.0, 1e-12, scale=1.0),
        _bound_check("round_trip_error", rt, 1e-12),
    ]
    details = {"eps": chart.eps, "residual": chart.residual,
               "image_radius": r_eps, "round_trip_max_error": rt}
    return Report("chart", {"n": n, "target_radius": target_radius},
                  _overall(checks), checks, details, seed, probe)
