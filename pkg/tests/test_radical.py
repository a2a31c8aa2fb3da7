import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfunc_rhp.contour import build_arc_chain, build_loop
from gfunc_rhp.radical import (
    BranchPointSet,
    BranchTrackingError,
    DegeneracyError,
    OnCutError,
    RadicalBranch,
    RadicalError,
    eval_radical,
    eval_radical_side,
    radical_on_path,
)

GENUS1 = (0.2 + 1.0j, 0.8 + 0.6j, 0.8 - 0.6j, 0.2 - 1.0j)


@pytest.fixture
def genus1():
    return RadicalBranch(BranchPointSet(GENUS1))


def test_square_is_polynomial(genus1, rng):
    z = rng.normal(size=50) * 2 + 1j * rng.normal(size=50) * 2
    assert np.allclose(genus1(z) ** 2, genus1.polynomial(z), rtol=1e-13)


def test_normalization_at_infinity(genus1):
    for r in (1e3, 1e5):
        z = r * np.exp(1j * np.linspace(0.1, 6, 9))
        assert np.max(np.abs(genus1(z) / z ** 2 + 1)) < 5 / r


def test_one_sided_values_are_opposite(genus1):
    for arc in genus1.cut_arcs:
        z = arc.segments[0].point(np.linspace(0.1, 0.9, 9))
        rp, rm = eval_radical_side(z, "+", genus1), eval_radical_side(z, "-", genus1)
        assert np.allclose(rp, -rm)
        n = 1j * arc.segments[0].tangent(0.5)
        assert np.allclose(genus1(z + 1e-9 * n), rp, atol=1e-6)


def test_schwarz_symmetry(genus1, rng):
    z = rng.uniform(-2, 2, 100) + 1j * rng.uniform(-2, 2, 100)
    assert np.allclose(genus1(np.conj(z)), np.conj(genus1(z)), rtol=1e-13)


def test_curved_cut_moves_the_sign_flip():
    pts = BranchPointSet((1j, -1j))
    bent = build_arc_chain([1j, 0.8, -1j])
    straight = RadicalBranch(pts)
    curved = RadicalBranch(pts, (bent,))
    z = np.array([0.4 + 0j, 3 + 0j])
    # between the chord and the bent arc the two branches differ by sign
    assert np.isclose(curved(z[:1])[0], -straight(z[:1])[0])
    assert np.isclose(curved(z[1:])[0], straight(z[1:])[0])
    z_off = np.array([0.4 + 0.5j + 1e-7 * (0.5 + 0.4j), 0.4 + 0.5j - 1e-7 * (0.5 + 0.4j)])
    v = curved(z_off)
    assert abs(v[0] + v[1]) < 1e-5 * abs(v[0])


def test_errors(genus1):
    with pytest.raises(OnCutError):
        eval_radical(0.5 + 0.8j, genus1)
    with pytest.raises(DegeneracyError):
        BranchPointSet((1j, 1j + 1e-12, -1j, -1j - 1e-12))
    with pytest.raises(RadicalError):
        BranchPointSet((1j, -1j, 2))
    with pytest.raises(RadicalError):
        BranchPointSet((1j, 2j), schwarz_paired=True)
    with pytest.raises(RadicalError):
        eval_radical_side(3.0, "+", genus1)


def test_branch_tracking_flags_cut_crossing(genus1):
    crossing = build_arc_chain([0.5 + 0.2j, 0.5 + 1.4j])
    with pytest.raises(BranchTrackingError):
        radical_on_path(crossing, genus1)
    loop = build_loop(genus1.cut_arcs[0], 0.1)
    s = radical_on_path(loop, genus1)
    assert s.max_ratio_deviation < 0.5


def test_counts(genus1):
    assert genus1.genus_index == 1
    assert genus1.points.main_arcs == [(0, 1), (2, 3)]
    assert genus1.points.comp_arcs == [(1, 2)]
    assert genus1.points.schwarz_paired


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(0.1, 2)), min_size=1, max_size=3, unique=True))
def test_schwarz_pairs_hypothesis(upper):
    up = [complex(x, y) for x, y in upper]
    al = up + [np.conj(a) for a in up[::-1]]
    try:
        pts = BranchPointSet(al)
    except DegeneracyError:
        return
    R = RadicalBranch(pts)
    z = np.array([3 + 2j, -1.5 + 0.3j, 0.1 + 4j])
    z = z[R.cut_distance(z) > 1e-6]
    assert np.allclose(R(z) ** 2, R.polynomial(z), rtol=1e-12)
    assert np.allclose(R(np.conj(z)), np.conj(R(z)), rtol=1e-10)
