import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radext.geometry import (
    CapChart,
    Domain,
    RngStream,
    ball_volume,
    cap_chart_build,
    chordal_to_plane,
    gnomonic,
    norm,
    north_pole,
    phi_map,
    plane_to_chordal,
    sample,
    sphere_area,
)


def test_surface_and_volume_constants():
    assert sphere_area(2) == pytest.approx(2.0 * math.pi, rel=1e-15)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert sphere_area(4) == pytest.approx(2.0 * math.pi ** 2, rel=1e-15)
    assert ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)
    for n in range(2, 8):
        # d/dr of r^n |B| at r = 1 is the surface area
        assert sphere_area(n) == pytest.approx(n * ball_volume(n), rel=1e-14)


def test_norm_kinds():
    v = np.array([[3.0, -4.0], [1.0, 1.0]])
    assert np.allclose(norm(v), [5.0, math.sqrt(2.0)])
    assert np.allclose(norm(v, "sup"), [4.0, 1.0])
    assert norm(np.array([3.0, -4.0])) == 5.0


def test_domain_measures():
    assert Domain.sphere(3).measure == pytest.approx(4.0 * math.pi)
    assert Domain.ball(2).measure == pytest.approx(math.pi)
    assert Domain.cube(3).measure == 8.0
    assert Domain.cube_boundary(3).measure == 24.0
    assert Domain.cube_boundary(2).measure == 8.0
    a1 = Domain.annulus(2, 0)
    assert a1.measure == pytest.approx(math.pi * (1.0 - 0.25))
    # each level shrinks the shell volume by 2^n
    assert Domain.annulus(2, 3).measure == pytest.approx(a1.measure / 2.0 ** 6)
    assert Domain.plane_disk(3, 2.0).measure == pytest.approx(math.pi * 4.0)


def test_domain_dims():
    assert Domain.plane_disk(3, 1.0).point_dim == 2
    assert Domain.sphere(3).point_dim == 3
    assert Domain.sphere(3).intrinsic_dim == 2
    assert Domain.cube_boundary(3).intrinsic_dim == 2
    assert Domain.ball(3).intrinsic_dim == 3
    assert Domain.cube(2).diameter == pytest.approx(2.0 * math.sqrt(2.0))


KINDS = [
    Domain.sphere(2), Domain.sphere(3),
    Domain.ball(2), Domain.ball(3),
    Domain.cube(2), Domain.cube(3),
    Domain.cube_boundary(2), Domain.cube_boundary(3),
    Domain.annulus(2, 0), Domain.annulus(3, 4),
    Domain.plane_disk(3, 1.5),
    Domain.halfspace_cone(3, 0.5),
]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, len(KINDS) - 1), st.integers(0, 2 ** 31 - 1))
def test_samples_belong_to_their_domain(idx, seed):
    d = KINDS[idx]
    pts = sample(d, RngStream(seed, 1), 64)
    assert pts.shape == (64, d.point_dim)
    assert np.all(d.contains(pts, tol=1e-12))


def test_cube_boundary_points_sit_on_the_shell():
    pts = sample(Domain.cube_boundary(3), RngStream(7, 0), 2000)
    assert np.max(np.abs(norm(pts, "sup") - 1.0)) <= 1e-12


def test_annulus_radii():
    d = Domain.annulus(2, 3)
    r = norm(sample(d, RngStream(0, 5), 5000))
    assert r.min() >= 2.0 ** -4
    assert r.max() <= 2.0 ** -3


def test_ball_sampling_second_moment():
    # E|X|^2 on the unit disk is 1/2
    pts = sample(Domain.ball(2), RngStream(3, 9), 40_000)
    m = float(np.mean(norm(pts) ** 2))
    assert abs(m - 0.5) < 4.0 * 0.3 / math.sqrt(40_000)


def test_sample_single_point_shape():
    p = sample(Domain.sphere(3), RngStream(0, 0))
    assert p.shape == (3,)


def test_low_dimension_rejected():
    with pytest.raises(ValueError):
        sample(Domain.sphere(1), RngStream(0, 0), 4)


def test_rng_stream_replays():
    s = RngStream(42, 7)
    a = s.generator().random(16)
    b = s.generator().random(16)
    assert np.array_equal(a, b)
    c = RngStream(42, 8).generator().random(16)
    assert not np.array_equal(a, c)


def test_rng_stream_chunks_are_independent_of_order():
    s = RngStream(1, 2)
    first = s.generator(chunk=0).random(8)
    second = s.generator(chunk=1).random(8)
    assert not np.array_equal(first, second)
    # re-reading a chunk gives the same numbers no matter what ran before
    assert np.array_equal(s.generator(chunk=0).random(8), first)
    assert s.shifted(3) == RngStream(1, 5)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2 ** 31 - 1))
def test_phi_map_round_trip(n, seed):
    pts = sample(Domain.ball(n), RngStream(seed, 11), 32)
    fwd = phi_map(pts, "forward")
    back = phi_map(fwd, "inverse")
    assert np.max(norm(back - pts)) < 1e-12


def test_phi_map_is_radial_and_matches_norms():
    # the cube-ball correspondence keeps directions and swaps the norms
    pts = sample(Domain.sphere(3), RngStream(0, 13), 500)
    cube_pts = phi_map(pts, "forward")
    assert np.max(np.abs(norm(cube_pts, "sup") - 1.0)) < 1e-12
    cross = np.cross(pts, cube_pts)
    assert np.max(np.abs(cross)) < 1e-12
    with pytest.raises(ValueError):
        phi_map(pts, "sideways")


def test_cap_chart_solution_is_frozen():
    # bisection on the outer-cap image radius; the solution for target 1/2
    # is dimension independent
    for n in (2, 3):
        ch = cap_chart_build(n)
        assert abs(ch.eps - 0.22975292054736118) < 1e-14
        assert abs(ch.residual) < 1e-14
        assert ch.radius == 0.5
    # a cap of chordal radius 0.1 projects the outer cap onto this disk
    ch = cap_chart_build(3, target_radius=0.20305866063400409)
    assert abs(ch.eps - 0.1) < 1e-13


def test_cap_chart_properties():
    ch = cap_chart_build(3)
    assert ch.outer_chordal == 2.0 * ch.eps
    assert ch.min_height == pytest.approx(1.0 - 2.0 * ch.eps ** 2, rel=1e-15)
    assert ch.inner_image_radius == pytest.approx(chordal_to_plane(ch.eps))
    assert ch.plane_domain().radius == 0.5
    pole = north_pole(3)
    assert ch.in_inner_cap(pole)[0]
    assert not ch.in_outer_cap(np.array([1.0, 0.0, 0.0]))[0]


def test_cap_chart_build_validation():
    with pytest.raises(ValueError):
        cap_chart_build(1)
    with pytest.raises(ValueError):
        cap_chart_build(3, target_radius=0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.35))
def test_chordal_plane_radius_inversion(delta):
    assert plane_to_chordal(chordal_to_plane(delta)) == pytest.approx(delta, abs=1e-12)


def test_gnomonic_round_trip(chart3):
    gen = RngStream(0, 17).generator()
    Y = gen.uniform(-0.3, 0.3, (1000, 2))
    X = gnomonic(chart3, Y, "lift")
    assert np.max(np.abs(norm(X) - 1.0)) < 1e-14
    back = gnomonic(chart3, X, "project")
    assert np.max(norm(back - Y)) < 1e-12


def test_gnomonic_pole_and_errors(chart3):
    assert np.allclose(gnomonic(chart3, north_pole(3), "project"), [0.0, 0.0])
    equator = np.array([1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        gnomonic(chart3, equator, "project")
    with pytest.raises(ValueError):
        gnomonic(chart3, np.zeros(2), "unproject")
