import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpl.exceptions import DomainError
from vpl.geometry import (
    CRITICAL_OMEGA,
    RotationParams,
    greens,
    kr_landscape,
    kr_landscape_radial,
    kr_minimizer_radius,
    kr_minimizer_radius_scan,
    point_vortex_angular_velocity,
    regular_part,
    robin,
)


def interior_point():
    return st.tuples(st.floats(0.0, 0.97), st.floats(0.0, 2 * math.pi)).map(
        lambda p: (p[0] * math.cos(p[1]), p[0] * math.sin(p[1]))
    )


def test_greens_vanishes_on_circle():
    for a in np.linspace(0.0, 2 * math.pi, 17):
        assert abs(greens((math.cos(a), math.sin(a)), (0.3, 0.2))) < 1e-12


def test_greens_from_origin_is_free_space_kernel():
    for r in (0.1, 0.5, 0.9):
        assert greens((0.0, 0.0), (r, 0.0)) == pytest.approx(-math.log(r) / (2 * math.pi), abs=1e-14)


def test_greens_symmetric_example():
    assert greens((0.3, 0.0), (0.0, 0.5)) == pytest.approx(greens((0.0, 0.5), (0.3, 0.0)), abs=1e-15)


def test_greens_rejects_coincident_and_outside_points():
    with pytest.raises(DomainError):
        greens((0.2, 0.1), (0.2, 0.1))
    with pytest.raises(DomainError):
        greens((1.2, 0.0), (0.1, 0.0))


@settings(max_examples=200, deadline=None)
@given(interior_point(), interior_point())
def test_greens_symmetry_property(x, y):
    if math.dist(x, y) < 1e-6:
        return
    assert abs(greens(x, y) - greens(y, x)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(interior_point(), interior_point())
def test_regular_part_matches_image_form(x, y):
    ny = math.hypot(*y)
    if ny < 1e-3:
        return
    image = (y[0] / ny**2, y[1] / ny**2)
    ref = -math.log(ny) / (2 * math.pi) - math.log(math.dist(x, image)) / (2 * math.pi)
    assert regular_part(x, y) == pytest.approx(ref, abs=1e-10)


def test_regular_part_at_origin_is_zero():
    assert regular_part((0.4, -0.2), (0.0, 0.0)) == 0.0


def test_robin_examples():
    assert robin((0.0, 0.0)) == 0.0
    assert robin((0.6, 0.0)) == pytest.approx(-math.log(0.64) / (4 * math.pi), abs=1e-15)
    assert robin((0.6, 0.0)) == pytest.approx(0.035515, abs=1e-6)
    a, b = 0.3, -0.45
    assert robin((a, b)) == pytest.approx(robin((b, a)), abs=1e-16)
    assert robin((a, b)) == pytest.approx(robin((-a, b)), abs=1e-16)
    with pytest.raises(DomainError):
        robin((1.0, 0.0))


@settings(max_examples=100, deadline=None)
@given(interior_point())
def test_robin_is_half_regular_diagonal(x):
    assert abs(regular_part(x, x) - 2 * robin(x)) < 1e-10


def test_landscape_examples():
    assert kr_landscape((0.0, 0.0), 0.7) == 0.0
    exact = -math.log(0.64) / (4 * math.pi) - 0.36 / (2 * math.pi)
    assert kr_landscape((0.6, 0.0), 1 / math.pi) == pytest.approx(exact, abs=1e-15)
    # the quoted decimal -0.021775 is rounded from 0.035515 - 0.05730
    assert kr_landscape((0.6, 0.0), 1 / math.pi) == pytest.approx(-0.021775, abs=1e-5)
    p = np.array([0.3, 0.4])
    c, s = math.cos(1.1), math.sin(1.1)
    q = np.array([c * p[0] - s * p[1], s * p[0] + c * p[1]])
    assert kr_landscape(p, 0.4) == pytest.approx(kr_landscape(q, 0.4), abs=1e-15)


@pytest.mark.parametrize("omega", [0.05, 0.1, CRITICAL_OMEGA, 0.2, 1 / math.pi, 1.0, 3.0])
def test_minimizer_radius_matches_scan(omega):
    assert abs(kr_minimizer_radius(omega) - kr_minimizer_radius_scan(omega)) < 2e-6


def test_minimizer_radius_examples():
    assert kr_minimizer_radius(0.1) == 0.0
    assert kr_minimizer_radius(CRITICAL_OMEGA) == 0.0
    assert kr_minimizer_radius(1 / math.pi) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    with pytest.raises(DomainError):
        kr_minimizer_radius(0.0)


def test_minimizer_radius_monotone_and_continuous():
    omegas = np.linspace(0.01, 2.0, 400)
    radii = np.array([kr_minimizer_radius(o) for o in omegas])
    assert np.all(np.diff(radii) >= 0)
    assert kr_minimizer_radius(CRITICAL_OMEGA * (1 + 1e-12)) < 1e-5


@pytest.mark.parametrize("omega", [0.16, 0.2, 1 / math.pi, 1.0, 10.0])
def test_point_vortex_rate_closes_on_minimizer(omega):
    assert point_vortex_angular_velocity(kr_minimizer_radius(omega)) == pytest.approx(omega, abs=1e-10)


def test_point_vortex_rate_examples():
    assert point_vortex_angular_velocity(0.0) == pytest.approx(1 / (2 * math.pi))
    assert point_vortex_angular_velocity(math.sqrt(0.5)) == pytest.approx(1 / math.pi)
    with pytest.raises(DomainError):
        point_vortex_angular_velocity(1.0)


def test_radial_landscape_agrees_with_planar():
    r = np.linspace(0, 0.95, 20)
    pts = np.column_stack([r, np.zeros_like(r)])
    np.testing.assert_allclose(kr_landscape_radial(r, 0.3), kr_landscape(pts, 0.3), atol=1e-16)


def test_rotation_params_validation():
    p = RotationParams(1 / math.pi, 1e3)
    assert p.epsilon == pytest.approx(1 / math.sqrt(math.pi * 1e3))
    with pytest.raises(DomainError, match="K_λ"):
        RotationParams(0.3, 0.1)
    with pytest.raises(DomainError):
        RotationParams(-1.0, 10.0)
    assert RotationParams(0.0, 10.0).omega == 0.0
