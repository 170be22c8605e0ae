import math

import numpy as np
import pytest

from metriclab.domains import (
    KINDS,
    DomainSpec,
    boundary_charts,
    boundary_distance,
    boundary_frame,
    boundary_mesh,
    contains,
    defining_function,
    direction_fan,
    ellipsoid_norm_closed_form,
    frame_fan,
    inradius,
    monomial_norm,
    parse_spec,
    sample_boundary,
    sample_interior,
    sample_strip,
)
from metriclab.errors import DomainError, DomainSpecError, FootPointAmbiguityError, SamplingError

CATALOG = ["disc", "ball:2", "polydisc:2", "ellipsoid:2", "reinhardt-quartic", "annulus:0.5", "burns-shnider"]


# =====================================================
# SPEC PARSING
# =====================================================
@pytest.mark.parametrize("text", CATALOG + ["ball:3*0.5", "annulus:0.3*2.0"])
def test_canonical_text_round_trips(text):
    spec = parse_spec(text)
    assert parse_spec(spec.canonical) == spec
    assert spec.kind in KINDS


@pytest.mark.parametrize("text", ["annulus:1.5", "annulus:0", "ellipsoid:1", "ellipsoid:2.5", "ball", "disc:2", "cube:3", ""])
def test_bad_specs_are_rejected(text):
    with pytest.raises(DomainSpecError):
        parse_spec(text)


def test_laurent_axes_and_allowed_exponents():
    assert parse_spec("annulus:0.5").allowed((-3,))
    assert parse_spec("burns-shnider").allowed((-2, 1))
    assert not parse_spec("burns-shnider").allowed((1, -1))
    assert not parse_spec("ball:2").allowed((-1, 0))
    assert not parse_spec("ball:2").allowed((1,))


# =====================================================
# MEMBERSHIP AND DISTANCE
# =====================================================
def test_contains_examples():
    assert contains(parse_spec("ball:2"), [0, 0])
    assert not contains(parse_spec("annulus:0.5"), 0.3)
    assert not contains(parse_spec("ellipsoid:2"), [0.9, 0.7])
    assert contains(parse_spec("burns-shnider"), [0.5, 0.1])
    assert not contains(parse_spec("burns-shnider"), [0.01, 0.0])


def test_contains_rejects_dimension_mismatch():
    with pytest.raises(DomainError):
        contains(parse_spec("ball:2"), [0.1])


def test_boundary_distance_examples():
    assert boundary_distance(parse_spec("ball:2"), [0, 0]) == pytest.approx(1.0)
    assert boundary_distance(parse_spec("annulus:0.5"), 0.75) == pytest.approx(0.25)
    assert boundary_distance(parse_spec("ellipsoid:2"), [0, 0]) == pytest.approx(1.0, abs=1e-9)
    assert boundary_distance(parse_spec("polydisc:2"), [0.5, 0.9j]) == pytest.approx(0.1)


def test_boundary_distance_scales():
    spec = parse_spec("ellipsoid:2")
    z = np.array([0.3, 0.6j])
    assert boundary_distance(spec.scaled(2.0), 2 * z) == pytest.approx(2 * boundary_distance(spec, z), rel=1e-9)


def test_boundary_distance_outside_raises():
    with pytest.raises(DomainError):
        boundary_distance(parse_spec("disc"), 1.2)


# =====================================================
# BOUNDARY FRAMES
# =====================================================
def test_ball_frame_splits_radial_and_tangent():
    frame = boundary_frame(parse_spec("ball:2"), [0.9, 0])
    v = np.array([2.0 + 1j, -0.5j])
    np.testing.assert_allclose(frame.foot, [1, 0], atol=1e-12)
    np.testing.assert_allclose(frame.tangential @ v, [0, v[1]], atol=1e-12)
    np.testing.assert_allclose(frame.normal @ v, [v[0], 0], atol=1e-12)
    assert frame.projection_residual() < 1e-12


def test_disc_frame_has_no_tangent_directions():
    frame = boundary_frame(parse_spec("disc"), 0.85)
    np.testing.assert_allclose(frame.foot, [1.0])
    np.testing.assert_allclose(frame.tangential, [[0.0]])
    np.testing.assert_allclose(frame.normal, [[1.0]])


def test_polydisc_frame_uses_nearest_face():
    frame = boundary_frame(parse_spec("polydisc:2"), [0.95, 0])
    np.testing.assert_allclose(frame.foot, [1, 0], atol=1e-12)
    np.testing.assert_allclose(frame.tangential @ np.array([1.0, 2.0]), [0, 2.0], atol=1e-12)


@pytest.mark.parametrize("text,z", [
    ("ellipsoid:2", [0.1, 0.9]),
    ("reinhardt-quartic", [0.6, 0.6]),
    ("annulus:0.5", 0.52),
])
def test_frames_are_complementary_projectors(text, z):
    frame = boundary_frame(parse_spec(text), z)
    assert frame.projection_residual() < 1e-10
    assert np.linalg.matrix_rank(frame.normal) == 1
    assert frame.distance > 0


def test_frame_far_from_boundary_is_rejected():
    with pytest.raises(DomainError):
        boundary_frame(parse_spec("ball:2"), [0.3, 0.2])


def test_frame_at_ball_centre_is_ambiguous():
    with pytest.raises(FootPointAmbiguityError):
        boundary_frame(parse_spec("ball:2"), [0, 0])


def test_frame_equidistant_polydisc_faces_is_ambiguous():
    with pytest.raises(FootPointAmbiguityError):
        boundary_frame(parse_spec("polydisc:2"), [0.9, 0.9j])


def test_frame_fan_sweeps_from_normal_to_tangent():
    frame = boundary_frame(parse_spec("ball:2"), [0.9, 0])
    fan = frame_fan(frame, 5)
    np.testing.assert_allclose(fan[0], frame.unit_normal)
    assert np.linalg.norm(frame.normal @ fan[-1]) < 1e-12
    assert all(abs(np.linalg.norm(v) - 1) < 1e-12 for v in fan)


# =====================================================
# SAMPLING
# =====================================================
def test_sample_interior_is_deterministic_and_inside():
    spec = parse_spec("ball:2")
    first = sample_interior(spec, 10, seed=7)
    second = sample_interior(spec, 10, seed=7)
    assert len(first) == 10
    assert all(np.linalg.norm(z) < 1 for z in first)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


def test_sample_interior_annulus_moduli():
    pts = sample_interior(parse_spec("annulus:0.5"), 5, seed=1)
    assert all(0.5 < abs(z[0]) < 1 for z in pts)


@pytest.mark.parametrize("text", CATALOG)
def test_sampled_points_have_positive_distance(text):
    spec = parse_spec(text)
    for z in sample_interior(spec, 4, seed=2):
        assert contains(spec, z)
        assert boundary_distance(spec, z) > 0


def test_sample_interior_budget_exhaustion():
    with pytest.raises(SamplingError):
        sample_interior(parse_spec("ball:2"), 3, seed=0, min_norm=0.999999, budget=5)


def test_sample_strip_stays_in_strip():
    spec = parse_spec("ellipsoid:2")
    for z in sample_strip(spec, 4, seed=3, width=0.2):
        assert boundary_distance(spec, z) < 0.2


@pytest.mark.parametrize("text", CATALOG)
def test_sample_boundary_lies_on_boundary(text):
    spec = parse_spec(text)
    for b in sample_boundary(spec, 16, seed=3):
        assert abs(defining_function(spec, b)) < 1e-12


def test_sample_boundary_annulus_radii():
    radii = {round(abs(b[0]), 12) for b in sample_boundary(parse_spec("annulus:0.5"), 8, seed=0)}
    assert radii <= {0.5, 1.0}


def test_invalid_counts():
    with pytest.raises(DomainError):
        sample_boundary(parse_spec("disc"), 0, seed=0)
    with pytest.raises(DomainError):
        direction_fan(2, 0, seed=0)


def test_direction_fan_starts_with_axes():
    fan = direction_fan(2, 8, seed=0)
    np.testing.assert_allclose(fan[0], [1, 0])
    np.testing.assert_allclose(fan[1], [0, 1])
    assert all(abs(np.linalg.norm(v) - 1) < 1e-12 for v in fan)


@pytest.mark.parametrize("text", [t for t in CATALOG if t != "burns-shnider"])
def test_boundary_mesh_lies_on_boundary(text):
    spec = parse_spec(text)
    mesh = boundary_mesh(spec, 64)
    assert mesh.shape[0] >= 64
    values = [defining_function(spec, b) for b in mesh]
    assert max(abs(v) for v in values) < 1e-9
    assert len(boundary_charts(spec)) >= 1


def test_burns_shnider_mesh_includes_corner_circles():
    mesh = boundary_mesh(parse_spec("burns-shnider"), 64)
    a1 = np.abs(mesh[:, 0])
    residual = np.sin(np.log(a1)) + np.abs(mesh[:, 1]) ** 2
    assert np.abs(residual).max() < 1e-9
    assert a1.min() == pytest.approx(math.exp(-math.pi))
    assert a1.max() == pytest.approx(1.0)


def test_inradius_values():
    assert inradius(parse_spec("annulus:0.5")) == pytest.approx(0.25)
    assert inradius(parse_spec("ball:2").scaled(2.0)) == pytest.approx(2.0)
    assert 0 < inradius(parse_spec("burns-shnider")) < 1


# =====================================================
# MONOMIAL NORMS
# =====================================================
def test_norm_examples():
    assert monomial_norm(parse_spec("disc"), (0,)) == pytest.approx(math.pi)
    assert monomial_norm(parse_spec("annulus:0.5"), (-1,)) == pytest.approx(2 * math.pi * math.log(2))
    assert monomial_norm(parse_spec("polydisc:2"), (1, 0)) == pytest.approx(math.pi / 2 * math.pi)


@pytest.mark.parametrize("text,alpha", [
    ("disc", (0,)), ("disc", (7,)),
    ("ball:2", (0, 0)), ("ball:2", (2, 3)), ("ball:3", (1, 0, 4)),
    ("polydisc:2", (3, 1)),
    ("annulus:0.5", (-3,)), ("annulus:0.5", (-1,)), ("annulus:0.5", (0,)), ("annulus:0.5", (4,)),
])
def test_quadrature_agrees_with_closed_form(text, alpha):
    spec = parse_spec(text)
    closed = monomial_norm(spec, alpha, method="closed")
    quad = monomial_norm(spec, alpha, method="quadrature")
    assert quad == pytest.approx(closed, rel=1e-9)


@pytest.mark.parametrize("alpha", [(0, 0), (1, 2), (3, 0), (0, 5)])
def test_ellipsoid_quadrature_matches_beta_formula(alpha):
    assert monomial_norm(parse_spec("ellipsoid:2"), alpha) == pytest.approx(
        ellipsoid_norm_closed_form(2, alpha), rel=1e-9
    )


def test_norms_decrease_in_each_exponent():
    spec = parse_spec("ball:2")
    for k in range(10):
        assert monomial_norm(spec, (k + 1, 2)) < monomial_norm(spec, (k, 2))


def test_norm_dilation_law():
    spec = parse_spec("polydisc:2")
    factor = 0.5
    alpha = (2, 1)
    expected = monomial_norm(spec, alpha) * factor ** (2 * sum(alpha) + 4)
    assert monomial_norm(spec.scaled(factor), alpha) == pytest.approx(expected, rel=1e-12)


def test_norm_rejects_disallowed_exponent():
    with pytest.raises(DomainError):
        monomial_norm(parse_spec("disc"), (-1,))


def test_burns_shnider_norms_are_positive():
    spec = DomainSpec("burns-shnider", 2)
    assert monomial_norm(spec, (-2, 0)) > 0
    assert monomial_norm(spec, (1, 1)) > 0
