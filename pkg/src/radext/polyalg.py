"""Sparse multivariate polynomial algebra and the derivative expansion of
homogeneous cone extensions into polynomial-weighted lower derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Poly",
    "WeightedPoly",
    "DerivExpansion",
    "poly_op",
    "deriv_expansion",
    "eval_derivative",
    "finite_difference",
    "HEIGHT_CUSHION",
]

HEIGHT_CUSHION = 1e-12
PRUNE_REL = 1e-15


def _pruned(terms):
    if not terms:
        return {}
    top = max(abs(c) for c in terms.values())
    if top == 0.0:
        return {}
    cut = PRUNE_REL * top
    return {e: c for e, c in terms.items() if abs(c) >= cut}


class Poly:
    """Polynomial in ``nvars`` variables, stored as exponent-tuple -> coefficient."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = int(nvars)
        self.terms = _pruned(dict(terms or {}))

    @classmethod
    def zero(cls, nvars):
        return cls(nvars)

    @classmethod
    def const(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: float(c)})

    @classmethod
    def one(cls, nvars):
        return cls.const(nvars, 1.0)

    @classmethod
    def variable(cls, nvars, i):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1.0})

    def is_zero(self):
        return not self.terms

    @property
    def total_degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        merged = dict(self.terms)
        for e, c in other.terms.items():
            merged[e] = merged.get(e, 0.0) + c
        return Poly(self.nvars, merged)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.nvars, {e: c * float(other) for e, c in self.terms.items()})
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Poly(self.nvars, out)

    def __rmul__(self, other):
        return self.__mul__(other)

    def partial(self, i):
        out = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            d = list(e)
            d[i] -= 1
            out[tuple(d)] = out.get(tuple(d), 0.0) + c * e[i]
        return Poly(self.nvars, out)

    def pow(self, k):
        out = Poly.one(self.nvars)
        for _ in range(int(k)):
            out = out * self
        return out

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        P = np.atleast_2d(pts)
        if P.shape[1] != self.nvars:
            raise ValueError(f"expected {self.nvars} variables, got {P.shape[1]}")
        out = np.zeros(P.shape[0])
        for e, c in self.terms.items():
            term = np.full(P.shape[0], c)
            for i, k in enumerate(e):
                if k:
                    term = term * P[:, i] ** k
            out += term
        return float(out[0]) if single else out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, tuple(sorted(self.terms.items()))))

    def __repr__(self):
        return f"Poly({self.nvars}, {self.terms!r})"


def poly_op(op, *args):
    """Name-dispatched polynomial operations: add, mul, partial, eval."""
    if op == "add":
        return args[0] + args[1]
    if op == "mul":
        return args[0] * args[1]
    if op == "partial":
        return args[0].partial(args[1])
    if op == "eval":
        return args[0].eval(args[1])
    raise ValueError(f"unknown polynomial op {op!r}")


class WeightedPoly:
    """Sum of terms P(Y) * (1 + |Y|^2)^(c/2).

    The family is closed under partial derivatives and under multiplication
    by polynomials or integer-step weight shifts, which is exactly what the
    chart transfer of sphere functions produces.
    """

    __slots__ = ("nvars", "parts")

    def __init__(self, nvars, parts=None):
        self.nvars = int(nvars)
        self.parts = {}
        for c, poly in (parts or {}).items():
            if not poly.is_zero():
                self.parts[float(c)] = poly

    @classmethod
    def from_poly(cls, poly, c=0.0):
        return cls(poly.nvars, {float(c): poly})

    def __add__(self, other):
        merged = dict(self.parts)
        for c, poly in other.parts.items():
            merged[c] = merged[c] + poly if c in merged else poly
        return WeightedPoly(self.nvars, merged)

    def scale(self, t):
        return WeightedPoly(self.nvars, {c: p * t for c, p in self.parts.items()})

    def mul_poly(self, poly):
        return WeightedPoly(self.nvars, {c: p * poly for c, p in self.parts.items()})

    def weight_shift(self, dc):
        """Multiply by (1 + |Y|^2)^(dc/2)."""
        return WeightedPoly(self.nvars, {c + float(dc): p for c, p in self.parts.items()})

    def partial(self, i):
        out = WeightedPoly(self.nvars)
        yi = Poly.variable(self.nvars, i)
        for c, p in self.parts.items():
            out = out + WeightedPoly(self.nvars, {c: p.partial(i)})
            if c != 0.0:
                out = out + WeightedPoly(self.nvars, {c - 2.0: (yi * p) * c})
        return out

    def partial_multi(self, beta):
        out = self
        for i, k in enumerate(beta):
            for _ in range(k):
                out = out.partial(i)
        return out

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        P = np.atleast_2d(pts)
        w2 = 1.0 + np.sum(P * P, axis=1)
        out = np.zeros(P.shape[0])
        for c, poly in self.parts.items():
            vals = poly.eval(P)
            out += vals if c == 0.0 else vals * w2 ** (c / 2.0)
        return float(out[0]) if single else out

    def __repr__(self):
        return f"WeightedPoly({self.nvars}, {self.parts!r})"


@dataclass(frozen=True)
class DerivExpansion:
    """Expansion of a mixed partial of the homogeneous cone extension.

    For F(X) = X_n^a g(X'/X_n), the partial d^alpha F is the sum over the
    stored terms (beta, P) of X_n^(a - |alpha|) P(X'/X_n) d^beta g(X'/X_n).
    """

    alpha: tuple
    a: float
    dim: int
    terms: dict = field(compare=False)

    @property
    def order(self):
        return sum(self.alpha)

    @property
    def level(self):
        return self.a - self.order


# The recursion below runs over exact arithmetic.  Every coefficient it
# produces is an integer-coefficient polynomial in the homogeneity exponent
# (the only non-integer ever multiplied in is the exponent itself, shifted
# by whole numbers), stored here as a tuple of ints in ascending degree.
# Floats appear once, at the end, through a single canonical Horner pass,
# so permuted differentiation orders yield bitwise identical expansions.


def _ca_add(u, v):
    out = list(u) if len(u) >= len(v) else list(v)
    for i, c in enumerate(v if len(u) >= len(v) else u):
        out[i] += c
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


def _ca_level(u, j):
    """Multiply the coefficient by (exponent - j)."""
    out = [0] * (len(u) + 1)
    for i, c in enumerate(u):
        out[i] -= j * c
        out[i + 1] += c
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


def _ca_eval(u, a):
    acc = 0.0
    for c in reversed(u):
        acc = acc * a + float(c)
    return acc


def _sym_add(p, q):
    out = dict(p)
    for e, c in q.items():
        c = _ca_add(out[e], c) if e in out else c
        if c:
            out[e] = c
        else:
            out.pop(e, None)
    return out


def _sym_partial(p, i):
    out = {}
    for e, c in p.items():
        if e[i]:
            d = list(e)
            d[i] -= 1
            out[tuple(d)] = _ca_add(out.get(tuple(d), ()), tuple(v * e[i] for v in c))
    return out


def _sym_neg_var(p, i):
    """Multiply by -Y_i."""
    out = {}
    for e, c in p.items():
        up = list(e)
        up[i] += 1
        out[tuple(up)] = tuple(-v for v in c)
    return out


def _step(terms, depth, axis, n):
    """One differentiation step at recursion depth ``depth``."""
    k = n - 1
    out = {}

    def _accum(beta, poly):
        out[beta] = _sym_add(out[beta], poly) if beta in out else dict(poly)

    for beta, poly in terms.items():
        if axis < k:
            up = list(beta)
            up[axis] += 1
            _accum(tuple(up), poly)
            _accum(beta, _sym_partial(poly, axis))
        else:
            # height direction: product and chain rule through X'/X_n
            combo = {e: _ca_level(c, depth) for e, c in poly.items()}
            for i in range(k):
                combo = _sym_add(combo, _sym_neg_var(_sym_partial(poly, i), i))
            _accum(beta, combo)
            for i in range(k):
                up = list(beta)
                up[i] += 1
                _accum(tuple(up), _sym_neg_var(poly, i))
    return {b: p for b, p in out.items() if p}


def deriv_expansion(alpha, a, n, order=None):
    """Build the expansion of d^alpha applied to X -> X_n^a g(X'/X_n).

    ``alpha`` is a length-n multi-index; ``order`` optionally fixes the
    sequence of single differentiations (a permutation of the multiset
    of axes in alpha), the default being ascending axis order.  Any two
    orders give expansions that agree exactly, term for term and bit for
    bit, because the merge happens in integer arithmetic.
    """
    alpha = tuple(int(v) for v in alpha)
    if len(alpha) != n:
        raise ValueError("alpha must have one entry per ambient coordinate")
    if any(v < 0 for v in alpha):
        raise ValueError("alpha entries must be nonnegative")
    axes = []
    for i, v in enumerate(alpha):
        axes.extend([i] * v)
    if order is not None:
        order = [int(i) for i in order]
        if sorted(order) != axes:
            raise ValueError("order must be a permutation of the axes of alpha")
        axes = order

    k = n - 1
    terms = {(0,) * k: {(0,) * k: (1,)}}
    for depth, axis in enumerate(axes):
        terms = _step(terms, depth, axis, n)

    total = sum(alpha)
    lowered = {}
    for beta in sorted(terms):
        assert sum(beta) <= total
        coeffs = {}
        for e in sorted(terms[beta]):
            assert sum(e) <= total
            c = _ca_eval(terms[beta][e], float(a))
            if c != 0.0:
                coeffs[e] = c
        if coeffs:
            lowered[beta] = Poly(k, coeffs)
    return DerivExpansion(alpha=alpha, a=float(a), dim=n, terms=lowered)


def eval_derivative(exp: DerivExpansion, g, X):
    """Evaluate the expanded derivative at cone points X with X_n above the cushion.

    ``g`` must expose ``partial(beta) -> callable`` for every beta stored in
    the expansion (the zero multi-index returning g itself).
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    P = np.atleast_2d(X)
    if P.shape[1] != exp.dim:
        raise ValueError(f"points must have dimension {exp.dim}")
    h = P[:, -1]
    if np.any(h <= HEIGHT_CUSHION):
        bad = P[h <= HEIGHT_CUSHION][0]
        raise ValueError(f"height at or below {HEIGHT_CUSHION} in derivative evaluation: {bad}")
    Y = P[:, :-1] / h[:, None]
    out = np.zeros(P.shape[0])
    scale = h ** exp.level
    for beta, poly in exp.terms.items():
        out += poly.eval(Y) * np.asarray(g.partial(beta)(Y), dtype=float)
    out *= scale
    return float(out[0]) if single else out


def finite_difference(fn, X, alpha, h, richardson=0):
    """Nested central differences of ``fn`` for the multi-index ``alpha``.

    Plain nesting has error O(h^2).  ``richardson`` counts extrapolation
    levels: 1 combines h and h/2 to O(h^4), 2 adds h/4 for O(h^6), which
    is what certifying tight tolerances on sharply peaked functions needs
    before step roundoff takes over.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    P = np.atleast_2d(X)
    alpha = tuple(int(v) for v in alpha)
    if len(alpha) != P.shape[1]:
        raise ValueError("alpha must match the point dimension")

    def _nested(pts, alpha, h):
        for i, k in enumerate(alpha):
            if k > 0:
                lower = list(alpha)
                lower[i] -= 1
                up = pts.copy()
                up[:, i] += h
                down = pts.copy()
                down[:, i] -= h
                return (_nested(up, tuple(lower), h) - _nested(down, tuple(lower), h)) / (2.0 * h)
        return np.asarray(fn(pts), dtype=float)

    levels = int(richardson)
    table = [_nested(P, alpha, h / 2.0 ** j) for j in range(levels + 1)]
    for lev in range(1, levels + 1):
        fac = 4.0 ** lev
        table = [(fac * table[j + 1] - table[j]) / (fac - 1.0)
                 for j in range(len(table) - 1)]
    out = table[0]
    return float(out[0]) if single else out
