import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfunc_rhp.contour import (
    ArcSegment,
    DegenerateArcError,
    GeometryError,
    LineSegment,
    LoopCollisionError,
    Path,
    QuadratureAccuracyError,
    QuadratureSpec,
    build_arc_chain,
    build_loop,
    integrate,
    integrate_detailed,
    mirrored_closed_loop,
    path_from_record,
)

TIGHT = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-13)


@pytest.fixture
def stadium():
    return build_loop(build_arc_chain([0, 1 + 0.5j, 2]), 0.3)


def test_loop_is_clockwise_and_closed(stadium):
    assert stadium.closed
    assert stadium.orientation == -1
    assert stadium.signed_area < 0


def test_cauchy_inside_and_outside(stadium):
    inside = integrate(lambda z: 1 / (z - (1 + 0.4j)), stadium, TIGHT)
    outside = integrate(lambda z: 1 / (z - 5j), stadium, TIGHT)
    assert abs(inside + 2j * math.pi) < 1e-12
    assert abs(outside) < 1e-12


def test_contains_matches_winding(stadium):
    pts = np.array([1 + 0.4j, 0.05 + 0.02j, 5j, -1.0, 2.2 + 0j])
    wind = np.array([integrate(lambda z, a=a: 1 / (z - a), stadium, TIGHT) for a in pts]) / (-2j * math.pi)
    assert np.allclose(wind.real, stadium.contains(pts).astype(float), atol=1e-10)


def test_reversed_path_flips_sign(stadium):
    F = lambda z: np.exp(z) / (z - 1.1 - 0.5j)  # noqa: E731
    assert np.isclose(integrate(F, stadium.reversed(), TIGHT), -integrate(F, stadium, TIGHT), atol=1e-12)
    assert stadium.reversed().orientation == 1


def test_circle_arc_geometry():
    arc = ArcSegment(0j, 2.0, 0.0, math.pi)
    assert np.isclose(arc.start, 2) and np.isclose(arc.end, -2)
    assert np.isclose(arc.length, 2 * math.pi)
    assert np.isclose(integrate(lambda z: np.ones_like(z), Path((arc,))), -4)
    assert np.allclose(arc.distance(np.array([0j, 3j])), [2, 1])


def test_line_segment_restrict_and_conj():
    s = LineSegment(1j, 2 + 3j)
    assert np.isclose(s.restrict(0.25, 0.75).start, s.point(0.25))
    assert np.isclose(s.conj().end, 2 - 3j)
    assert np.isclose(s.reversed().start, s.end)


def test_record_round_trip(stadium):
    back = path_from_record(stadium.to_record())
    zs = stadium.sample(4)
    assert np.allclose(back.sample(4), zs)


def test_mirrored_loop_is_closed():
    up = build_arc_chain([-1, 1j, 1])
    loop = mirrored_closed_loop(up)
    assert loop.closed
    assert np.isclose(integrate(lambda z: 1 / z, loop), -2j * math.pi)


def test_bad_paths():
    with pytest.raises(GeometryError):
        Path((LineSegment(0, 1), LineSegment(2, 3)))
    with pytest.raises(GeometryError):
        Path((LineSegment(0, 1),), closed=True)
    with pytest.raises(DegenerateArcError):
        build_arc_chain([1, 1])
    with pytest.raises(DegenerateArcError):
        build_loop(build_arc_chain([0, 1]), 0.0)


def test_loop_excluded_point_collision():
    with pytest.raises(LoopCollisionError):
        build_loop(build_arc_chain([0, 1]), 0.3, excluded=[0.5 + 0.3j])


def test_accuracy_error_reports_estimate():
    path = build_arc_chain([0, 1])
    with pytest.raises(QuadratureAccuracyError):
        integrate(lambda z: 1 / (z - 0.5 - 1e-6j), path, QuadratureSpec(abs_tol=1e-16, rel_tol=1e-16,
                                                                         max_subdivisions=2))


def test_vector_integrand_shape():
    res = integrate_detailed(lambda z: np.stack([z, z ** 2]), build_arc_chain([0, 1]))
    assert res.value.shape == (2,)
    assert np.allclose(res.value, [0.5, 1 / 3])


points = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@settings(max_examples=30, deadline=None)
@given(a=points, b=points, coeffs=st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False,
                                                                 allow_infinity=False), min_size=1, max_size=6))
def test_polynomial_over_closed_loop_vanishes(a, b, coeffs):
    if abs(a - b) < 0.1:
        return
    loop = build_loop(build_arc_chain([a, b]), 0.2)
    val = integrate(lambda z: np.polynomial.polynomial.polyval(z, coeffs), loop)
    scale = sum(abs(c) for c in coeffs) * (abs(a) + abs(b) + 1) ** len(coeffs)
    assert abs(val) <= 1e-10 * scale


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.05, 0.95), side=st.floats(-0.8, 0.8))
def test_residue_anywhere_inside(s, side):
    loop = build_loop(build_arc_chain([0, 2]), 0.25)
    pole = 2 * s + 0.25 * side * 1j
    assert abs(integrate(lambda z: 1 / (z - pole), loop, TIGHT) + 2j * math.pi) < 1e-9
