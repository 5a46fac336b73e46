import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radext.functions import (
    DerivativeDataError,
    make_test_function,
    plane_bump,
    plane_to_sphere,
)
from radext.geometry import Domain, RngStream, norm, sample
from radext.operators import (
    ExtensionSpec,
    VolumeFn,
    compose_T_via_U,
    extend_V,
    radial_extend,
    trace,
)
from radext.polyalg import finite_difference


def _ball_points(n, m, seed=0):
    gen = RngStream(seed, 0).generator()
    pts = sample(Domain.ball(n), gen, m)
    return pts[norm(pts) > 1e-3]


def test_extension_spec_validation():
    f = make_test_function("constant", 2)
    with pytest.raises(ValueError):
        ExtensionSpec(f, 0.0, geometry="torus")
    assert not ExtensionSpec(f, 0.5, geometry="ball").nonstandard
    assert not ExtensionSpec(f, 0.0, geometry="cube").nonstandard
    spec = ExtensionSpec(f, 0.5, geometry="cube")
    assert spec.nonstandard
    assert radial_extend(spec, n=2).nonstandard


def test_trace_recovers_the_boundary_function():
    f = make_test_function("coordinate", 3, i=0)
    pts = sample(Domain.sphere(3), RngStream(11, 0).generator(), 64)
    for a in (0.5, 0.0, -1.0):
        F = radial_extend(ExtensionSpec(f, a))
        for r in (0.55, 0.75, 0.99, 1.0):
            assert np.allclose(trace(F, a, r, pts), f(pts), rtol=1e-12, atol=1e-15)
    with pytest.raises(ValueError):
        trace(F, 0.0, 0.0, pts)
    with pytest.raises(ValueError):
        trace(F, 0.0, 1.5, pts)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.5, 1.5), st.integers(0, 2 ** 31 - 1))
def test_extension_is_homogeneous(a, seed):
    f = make_test_function("coordinate", 3, i=2)
    F = radial_extend(ExtensionSpec(f, a))
    X = _ball_points(3, 32, seed=seed) * 0.5
    assert np.allclose(F(2.0 * X), 2.0 ** a * F(X), rtol=1e-13)


def test_extension_matches_the_cone_lift(chart3):
    # lifting with the same exponent as the extension makes the radial
    # power extension coincide with the homogeneous cone lift
    g = plane_bump(2, center=(0.03, -0.04), radius=0.2, order=3)
    for a in (0.0, 0.5, -0.5):
        f = plane_to_sphere(g, a, chart3)
        F = radial_extend(ExtensionSpec(f, a))
        G = extend_V(g, a)
        X = _ball_points(3, 512, seed=5)
        X = X[X[:, -1] > 1e-6]
        assert np.allclose(F(X), G(X), rtol=1e-12, atol=1e-14)
    # mismatched lift exponents are absorbed by the chart weight
    f0 = plane_to_sphere(g, 0.0, chart3)
    F = radial_extend(ExtensionSpec(f0, 0.5))
    G = extend_V(g.weight_shift(0.5), 0.5)
    X = _ball_points(3, 256, seed=6)
    X = X[X[:, -1] > 1e-6]
    assert np.allclose(F(X), G(X), rtol=1e-12, atol=1e-14)


def test_cube_route_matches_direct_sup_extension():
    def boundary(z):
        return np.asarray(z, dtype=float)[:, 0]

    F = compose_T_via_U(boundary, 2)
    # X = (0.5, 0.25) scales along its sup-norm ray to the boundary point
    # (1, 0.5), whose first coordinate is 1
    assert F(np.array([[0.5, 0.25]]))[0] == pytest.approx(1.0, rel=1e-12)
    gen = RngStream(4, 0).generator()
    X = sample(Domain.cube(2), gen, 256)
    X = X[norm(X, "sup") > 1e-3]
    direct = boundary(X / norm(X, "sup")[:, None])
    assert np.allclose(F(X), direct, rtol=1e-10, atol=1e-12)
    sup_ext = radial_extend(ExtensionSpec(boundary, 0.0, geometry="cube"), n=2)
    assert np.allclose(F(X), sup_ext(X), rtol=1e-10, atol=1e-12)


def test_origin_cushion_returns_nan():
    f = make_test_function("constant", 2)
    F = radial_extend(ExtensionSpec(f, 0.5))
    vals = F(np.array([[0.0, 0.0], [0.5, 0.0]]))
    assert np.isnan(vals[0]) and vals[1] == pytest.approx(0.5 ** 0.5 * 1.0)
    with pytest.raises(ValueError):
        F(np.zeros((2, 3)))


def test_volume_partial_requires_cone_data():
    f = make_test_function("cusp", 2)
    F = radial_extend(ExtensionSpec(f, 0.5))
    assert not F.has_derivatives
    with pytest.raises(DerivativeDataError):
        F.partial((1, 0))


def test_volume_partial_matches_differences(chart3):
    g = plane_bump(2, radius=0.2, order=5)
    f = plane_to_sphere(g, 0.0, chart3)
    F = radial_extend(ExtensionSpec(f, 0.7))
    assert F.has_derivatives
    assert F.partial((0, 0, 0)) is F
    pts = np.array([[0.02, -0.03, 0.6], [0.05, 0.04, 0.9], [-0.03, 0.01, 0.45]])
    for alpha in [(1, 0, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1)]:
        exact = F.partial(alpha)(pts)
        approx = finite_difference(F, pts, alpha, 2e-4, richardson=1)
        assert np.allclose(exact, approx, atol=5e-7)


def test_partial_zero_below_the_cone_and_nan_at_origin(chart3):
    g = plane_bump(2, radius=0.2)
    F = radial_extend(ExtensionSpec(plane_to_sphere(g, 0.0, chart3), 0.5))
    d = F.partial((0, 0, 1))
    vals = d(np.array([[0.1, 0.1, -0.5], [0.0, 0.0, 0.0]]))
    assert vals[0] == 0.0
    assert np.isnan(vals[1])


def test_support_hint_propagation(chart3):
    g = plane_bump(2, radius=0.2)
    f = plane_to_sphere(g, 0.0, chart3)
    F_ball = radial_extend(ExtensionSpec(f, 0.5))
    assert F_ball.support is f.support
    assert F_ball.partial((1, 0, 0)).support is f.support

    def boundary(z):
        z = np.asarray(z, dtype=float)
        return f(z / norm(z)[:, None])

    boundary.support = f.support
    assert compose_T_via_U(boundary, 3).support is f.support
    F_cube = radial_extend(ExtensionSpec(boundary, 0.0, geometry="cube"), n=3)
    assert F_cube.support is f.support


def test_extend_v_needs_positive_height():
    g = plane_bump(2, radius=0.3)
    G = extend_V(g, 1.2)
    assert G.n == 3
    assert G.degree == 1.2
    pts = np.array([[0.05, 0.0, 0.5], [0.05, 0.0, -0.5], [0.05, 0.0, 0.0]])
    vals = G(pts)
    assert vals[0] == pytest.approx(0.5 ** 1.2 * g(np.array([[0.1, 0.0]]))[0])
    assert vals[1] == 0.0
    assert vals[2] == 0.0  # on the cone edge, below the height cushion


def test_radial_extend_dimension_inference():
    with pytest.raises(ValueError):
        radial_extend(ExtensionSpec(lambda P: np.ones(P.shape[0]), 0.0))
    F = radial_extend(ExtensionSpec(lambda P: np.ones(P.shape[0]), 0.0), n=2)
    assert F.n == 2
