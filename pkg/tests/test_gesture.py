"""Tests for choreo.gesture: value types, normalization, distances and 2-cells.

Covered:
- skeleton, pose, curve and movement validation;
- equal-chord normalization (endpoints, equal chords, idempotence, dwell collapse);
- reparametrization-invariant curve distance;
- linear homotopies and endpoint-fixed smoothing;
- stance, linear and Bernstein constructors, diagram realization.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choreo.errors import GestureError, NotParallelError, NotAFunctorError
from choreo.gesture import (
    N_CMP,
    DEFAULT_EDGES,
    DEFAULT_KEYPOINTS,
    Pose,
    Curve,
    Movement,
    Skeleton,
    Tolerance,
    AbstractDiagram,
    stance_pose,
    curve_distance,
    normalize_curve,
    realize_diagram,
    smooth_movement,
    bezier_movement,
    linear_homotopy,
    linear_movement,
    bounding_diagonal,
    homotopy_distance,
)

from tests.conftest import POINT, polyline, point_move, point_pose

coords = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
polylines = st.lists(st.tuples(coords, coords), min_size=2, max_size=8)

# ---------- value types ----------


def test_default_skeleton_uses_default_keypoints_and_bones(body) -> None:
    """Without arguments a skeleton has the eight default keypoints and their bones."""
    assert body.keypoints == DEFAULT_KEYPOINTS
    assert body.edges == DEFAULT_EDGES
    assert body.dim == 16


def test_custom_skeleton_keeps_only_bones_between_its_keypoints() -> None:
    """Default bones are filtered down to the labels a custom skeleton declares."""
    s = Skeleton("upper", ("head", "torso", "left-hand"))
    assert s.edges == (("head", "torso"), ("torso", "left-hand"))


@pytest.mark.parametrize(
    "keypoints,edges,message",
    [
        ((), None, "has no keypoints"),
        (("a", "a"), None, "duplicate keypoint"),
        (("a", "b"), (("a", "c"),), "unknown keypoints: c"),
    ],
)
def test_invalid_skeletons_rejected(keypoints, edges, message) -> None:
    """Empty, duplicated or dangling skeleton definitions raise GestureError."""
    with pytest.raises(GestureError, match=message):
        Skeleton("s", keypoints, edges)


def test_pose_arity_checked(body) -> None:
    """A pose must give exactly one point per keypoint."""
    with pytest.raises(GestureError, match="expects 8"):
        Pose("p", body, [(0.0, 0.0)] * 3)


def test_pose_coordinates_are_read_only() -> None:
    """Pose coordinates cannot be modified in place."""
    p = point_pose("a", 1.0, 2.0)
    with pytest.raises(ValueError):
        p.coords[0] = 5.0


def test_pose_matching_ignores_names_but_not_skeletons() -> None:
    """Pose identity compares keypoint labels and configurations, never names."""
    a = point_pose("a", 1.0, 2.0)
    assert a.matches(point_pose("b", 1.0, 2.0 + 1e-12))
    assert not a.matches(point_pose("c", 1.0, 2.1))
    other = Pose("q", Skeleton("other", ("q",), ()), [(1.0, 2.0)])
    assert not a.matches(other)


def test_translated_and_mapped_poses(body) -> None:
    """translated shifts every keypoint; mapped applies a function to the (K, 2) array."""
    p = stance_pose("s", body, "standing")
    moved = p.translated((1.0, -0.5), "t")
    assert moved.name == "t"
    assert np.allclose(moved.points - p.points, [1.0, -0.5])
    doubled = p.mapped(lambda pts: 2.0 * pts)
    assert np.allclose(doubled.points, 2.0 * p.points)


@pytest.mark.parametrize(
    "samples,duration,times,message",
    [
        ([[0.0, 0.0]], 1.0, None, "at least 2 samples"),
        ([[0.0, 0.0], [1.0, 0.0]], 0.0, None, "duration must be > 0"),
        ([[0.0, 0.0], [1.0, 0.0]], 1.0, [0.0, 0.5], "must span"),
        ([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]], 1.0, [0.0, 0.7, 0.6], "nondecreasing"),
        ([[0.0, np.nan], [1.0, 0.0]], 1.0, None, "non-finite"),
    ],
)
def test_invalid_curves_rejected(samples, duration, times, message) -> None:
    """Curves need two finite samples, a positive duration and knot times spanning it."""
    with pytest.raises(GestureError, match=message):
        Curve(samples, duration, times)


def test_curve_evaluation_is_piecewise_linear_and_clipped() -> None:
    """at() interpolates between knots and clips outside [0, duration]."""
    c = Curve([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0]], 2.0)
    assert np.allclose(c.at(0.5), [1.0, 0.0])
    assert np.allclose(c.at(1.5), [2.0, 1.0])
    assert np.allclose(c.at(-1.0), [0.0, 0.0])
    assert np.allclose(c.at(5.0), [2.0, 2.0])
    assert np.allclose(c.velocity_at(0.5), [2.0, 0.0])


def test_curve_window_and_rescale() -> None:
    """window re-bases a restriction at 0; rescaled stretches knot times."""
    c = Curve([[0.0, 0.0], [4.0, 0.0]], 4.0)
    w = c.window(1.0, 3.0)
    assert w.duration == 2.0
    assert np.allclose(w.first, [1.0, 0.0]) and np.allclose(w.last, [3.0, 0.0])
    r = c.rescaled(8.0)
    assert r.duration == 8.0
    assert np.allclose(r.at(4.0), [2.0, 0.0])
    with pytest.raises(GestureError, match="outside curve span"):
        c.window(3.0, 5.0)


def test_movement_must_start_and_end_at_its_poses() -> None:
    """A curve that misses either endpoint pose is rejected."""
    a, b = point_pose("a", 0.0, 0.0), point_pose("b", 1.0, 0.0)
    with pytest.raises(GestureError, match="does not end at pose 'b'"):
        Movement(a, b, Curve([[0.0, 0.0], [0.9, 0.0]], 1.0))
    with pytest.raises(GestureError, match="does not start at pose 'a'"):
        Movement(a, b, Curve([[0.1, 0.0], [1.0, 0.0]], 1.0))


def test_movement_label_falls_back_to_endpoints() -> None:
    a, b = point_pose("a", 0.0, 0.0), point_pose("b", 1.0, 0.0)
    assert point_move(a, b).label == "a->b"
    assert point_move(a, b, name="slide").label == "slide"


# ---------- normalization ----------


def test_normalization_keeps_endpoints_and_equalizes_chords() -> None:
    """Normalized samples are equally spaced along the path and keep both ends exactly."""
    c = Curve([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [3.0, 1.0]], 2.0)
    n = normalize_curve(c, 9)
    assert n.n == 9
    assert np.array_equal(n.first, c.first) and np.array_equal(n.last, c.last)
    chords = np.linalg.norm(np.diff(n.samples, axis=0), axis=1)
    assert np.ptp(chords) < 1e-8
    assert n.duration == c.duration


def _no_doubling_back(points) -> bool:
    """Rejects paths that turn straight back along their last step, and near-zero steps."""
    steps = np.diff(np.asarray(points, dtype=float), axis=0)
    lengths = np.linalg.norm(steps, axis=1)
    if np.any((lengths > 0) & (lengths < 1e-3)):
        return False
    moving = lengths > 0
    unit = steps[moving] / lengths[moving][:, None]
    return bool(np.all(np.einsum("ij,ij->i", unit[:-1], unit[1:]) > -0.999))


@settings(max_examples=60, deadline=None)
@given(points=polylines.filter(_no_doubling_back), n=st.integers(min_value=2, max_value=N_CMP))
def test_normalization_is_idempotent(points, n) -> None:
    """Normalizing twice moves no sample by more than eps."""
    once = normalize_curve(Curve(points, 1.0), n)
    twice = normalize_curve(once, n)
    eps = Tolerance().eps_cv(bounding_diagonal(once.samples))
    assert float(np.max(np.linalg.norm(twice.samples - once.samples, axis=1))) <= eps


@settings(max_examples=40, deadline=None)
@given(points=polylines.filter(_no_doubling_back))
def test_normalized_chords_are_equal(points) -> None:
    s = normalize_curve(Curve(points, 1.0), 17).samples
    chords = np.linalg.norm(np.diff(s, axis=0), axis=1)
    assert float(np.ptp(chords)) <= 1e-9 * max(1.0, float(chords.sum()))


def test_normalization_of_a_hairpin() -> None:
    """A path folding back almost onto itself: the middle sample sits on the way back, equally far from both ends."""
    c = Curve([[0.0, 0.0], [10.0, 0.0], [0.0, 0.1]], 1.0)
    once = normalize_curve(c, 3)
    mid = once.samples[1]
    assert np.linalg.norm(mid - c.first) == pytest.approx(np.linalg.norm(c.last - mid), abs=1e-9)
    assert mid[0] == pytest.approx(5.0, abs=1e-3) and mid[1] > 0.0
    assert np.allclose(normalize_curve(once, 3).samples, once.samples, atol=1e-9)


def test_normalization_matches_arc_length_on_an_l_path() -> None:
    """Equal chords coincide with equal arc length when the corner falls on a sample."""
    c = Curve([[0.0, 0.0], [0.3, 0.0], [1.0, 0.0], [1.0, 1.0]], 1.0)
    expected = [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 0.5], [1.0, 1.0]]
    assert np.allclose(normalize_curve(c, 5).samples, expected, atol=1e-12)


def test_normalization_collapses_dwells() -> None:
    """Repeated samples (standing still) do not change the normalized path."""
    moving = Curve([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], 1.0)
    dwelling = Curve([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 1.0]], 1.0)
    assert np.allclose(normalize_curve(moving, 11).samples, normalize_curve(dwelling, 11).samples, atol=1e-9)


def test_degenerate_curve_normalizes_to_copies() -> None:
    """A constant curve yields n copies of its configuration."""
    c = Curve([[2.0, 3.0], [2.0, 3.0], [2.0, 3.0]], 1.0)
    assert np.array_equal(normalize_curve(c, 5).samples, np.tile([2.0, 3.0], (5, 1)))


def test_normalization_needs_two_samples() -> None:
    with pytest.raises(GestureError, match="n >= 2"):
        normalize_curve(Curve([[0.0, 0.0], [1.0, 0.0]], 1.0), 1)


# ---------- distances ----------


def test_curve_distance_ignores_timing() -> None:
    """The same path traversed at a different speed is at distance 0."""
    fast_start = Curve([[0.0, 0.0], [0.9, 0.0], [1.0, 0.0], [1.0, 1.0]], 1.0)
    slow_start = Curve([[0.0, 0.0], [0.1, 0.0], [1.0, 0.0], [1.0, 1.0]], 3.0)
    assert curve_distance(fast_start, slow_start) < 1e-9


def test_curve_distance_sees_different_paths() -> None:
    """Two paths with the same ends but different shapes are apart."""
    straight = Curve([[0.0, 0.0], [2.0, 0.0]], 1.0)
    bent = Curve([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], 1.0)
    assert curve_distance(straight, bent) > 0.5


def test_curve_distance_dimension_mismatch() -> None:
    with pytest.raises(GestureError, match="dimension mismatch"):
        curve_distance(Curve([[0.0, 0.0], [1.0, 0.0]], 1.0), Curve([[0.0] * 4, [1.0] * 4], 1.0))


@settings(max_examples=40, deadline=None)
@given(points=polylines)
def test_curve_distance_symmetric_and_zero_on_self(points) -> None:
    """d(a, a) = 0 and d(a, b) = d(b, a) for random polylines."""
    a = Curve(points, 1.0)
    b = Curve(list(reversed(points)), 2.0)
    assert curve_distance(a, a) == 0.0
    assert curve_distance(a, b) == pytest.approx(curve_distance(b, a))


def test_bounding_diagonal() -> None:
    """Diagonal of the planar box over flat configurations and point lists alike."""
    assert bounding_diagonal([0.0, 0.0, 3.0, 4.0]) == pytest.approx(5.0)
    assert bounding_diagonal([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(5.0)
    assert bounding_diagonal() == 0.0


def test_tolerance_scales_with_diagonal_unless_overridden() -> None:
    """eps and eta are fractions of the diagonal, or absolute overrides."""
    t = Tolerance()
    assert t.eps_cv(10.0) == pytest.approx(1e-5)
    assert t.eta_abs(10.0) == pytest.approx(0.5)
    assert t.eps_cv(0.0) == pytest.approx(1e-6)
    fixed = Tolerance(eps=0.01, eta=0.2)
    assert fixed.eps_cv(10.0) == 0.01 and fixed.eta_abs(10.0) == 0.2


# ---------- 2-cells ----------


def test_linear_homotopy_rows_run_from_source_to_target() -> None:
    """Row 0 is the source movement, the last row the target, endpoints stay fixed."""
    f = polyline([(0.0, 0.0), (2.0, 0.0)], name="f")
    g = Movement(f.source, f.target, Curve([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], 2.0), "g")
    h = linear_homotopy(f, g, steps=5, samples=9)
    assert h.grid.shape == (5, 9, 2)
    assert np.allclose(h.grid[:, 0], [0.0, 0.0]) and np.allclose(h.grid[:, -1], [2.0, 0.0])
    assert np.allclose(h.durations, np.linspace(1.0, 2.0, 5))
    assert not h.is_identity(1e-9)
    assert h.row_movement(2).duration == pytest.approx(1.5)


def test_linear_homotopy_requires_parallel_movements() -> None:
    """Movements with different endpoints cannot be joined by a 2-cell."""
    a, b, c = point_pose("a", 0.0, 0.0), point_pose("b", 1.0, 0.0), point_pose("c", 0.0, 1.0)
    with pytest.raises(NotParallelError):
        linear_homotopy(point_move(a, b), point_move(a, c), 2)


def test_homotopy_distance_ignores_parameter_speed() -> None:
    """A 2-cell and the same deformation sampled with more rows are at distance ~0."""
    f = polyline([(0.0, 0.0), (2.0, 0.0)], name="f")
    g = Movement(f.source, f.target, Curve([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], 1.0), "g")
    coarse = linear_homotopy(f, g, steps=2, samples=9)
    fine = linear_homotopy(f, g, steps=7, samples=9)
    assert homotopy_distance(coarse, fine, 16) < 1e-9


def test_smoothing_keeps_endpoints_and_shortens() -> None:
    """Smoothing never moves the endpoints and never lengthens the path."""
    zigzag = polyline([(0, 0), (1, 1), (2, -1), (3, 1), (4, 0)], 2.0, "zz")
    smoothed, cell = smooth_movement(zigzag, 0.5, passes=3, samples=16)
    assert np.array_equal(smoothed.curve.first, zigzag.curve.first)
    assert np.array_equal(smoothed.curve.last, zigzag.curve.last)
    assert smoothed.curve.arc_length() < zigzag.curve.arc_length()
    assert smoothed.duration == zigzag.duration
    assert cell.steps == 2 and cell.samples == 16


def test_smoothing_witness_joins_both_movements() -> None:
    """Renormalizing the 2-cell boundary rows gives back the original and the smoothed movement."""
    zigzag = polyline([(0, 0), (1, 1), (2, -1), (3, 1), (4, 0)], 2.0, "zz")
    smoothed, cell = smooth_movement(zigzag, 0.5, passes=3)
    eps = Tolerance().eps_cv(bounding_diagonal(zigzag.curve.samples))
    assert curve_distance(cell.source.curve, zigzag.curve) <= eps
    assert curve_distance(cell.target.curve, smoothed.curve) <= eps


def test_zero_strength_smoothing_is_identity() -> None:
    m = polyline([(0, 0), (1, 1), (2, 0)], name="m")
    smoothed, cell = smooth_movement(m, 0.0, passes=4, samples=8)
    assert np.array_equal(smoothed.curve.samples, m.curve.samples)
    assert cell.is_identity(1e-12)


@pytest.mark.parametrize("strength,passes", [(-0.1, 1), (1.5, 1), (0.5, -1)])
def test_smoothing_arguments_checked(strength, passes) -> None:
    with pytest.raises(GestureError):
        smooth_movement(polyline([(0, 0), (1, 1), (2, 0)]), strength, passes)


@settings(max_examples=40, deadline=None)
@given(points=polylines, strength=st.floats(min_value=0.0, max_value=1.0), passes=st.integers(0, 4))
def test_smoothing_never_lengthens(points, strength, passes) -> None:
    """Arc length after smoothing is at most the original, for any polyline."""
    m = polyline(points)
    smoothed, _ = smooth_movement(m, strength, passes, samples=8)
    assert smoothed.curve.arc_length() <= m.curve.arc_length() * (1 + 1e-12) + 1e-12


# ---------- constructors ----------


def test_stance_pose_places_the_stance(body) -> None:
    """A stance placed `at` an offset keeps its shape."""
    here = stance_pose("s", body, "plie")
    there = stance_pose("t", body, "plie", (2.0, 0.0))
    assert np.allclose(there.points - here.points, [2.0, 0.0])


def test_stance_pose_rejects_unknown_stances_and_labels() -> None:
    with pytest.raises(GestureError, match="unknown stance 'moonwalk'"):
        stance_pose("s", Skeleton("body"), "moonwalk")
    with pytest.raises(GestureError, match="no position for keypoints: wing"):
        stance_pose("s", Skeleton("bird", ("head", "wing")), "standing")


def test_linear_and_bezier_movements_hit_their_endpoints(body) -> None:
    """Constructed movements start and end exactly at their poses."""
    a = stance_pose("a", body, "standing")
    b = stance_pose("b", body, "arms-up")
    c = b.translated((0.5, 0.5), "c")
    lin = linear_movement(a, b, 2.0, 5, "lin")
    bez = bezier_movement(a, b, [c], 2.0, 24, "bez")
    for m in (lin, bez):
        assert np.array_equal(m.curve.first, a.coords)
        assert np.array_equal(m.curve.last, b.coords)
    assert lin.curve.n == 5 and bez.curve.n == 24
    # the control pose pulls the curve off the straight line
    assert curve_distance(lin.curve, bez.curve) > 0.1


def test_movement_constructors_need_two_samples() -> None:
    a, b = point_pose("a", 0.0, 0.0), point_pose("b", 1.0, 0.0)
    with pytest.raises(GestureError):
        linear_movement(a, b, 1.0, 1)
    with pytest.raises(GestureError):
        bezier_movement(a, b, [], 1.0, 1)


# ---------- diagram realization ----------


def test_realize_diagram_accepts_matching_images() -> None:
    """Vertex and arrow images that fit together are returned unchanged."""
    d = AbstractDiagram(("x", "y"), (("x", "y", "f"),))
    a, b = point_pose("a", 0.0, 0.0), point_pose("b", 1.0, 0.0)
    r = realize_diagram(d, {"x": a, "y": b}, {"f": point_move(a, b)})
    assert r.vertex_map["x"] is a and r.arrow_map["f"].target is b


def test_realize_diagram_rejects_mismatches() -> None:
    """A missing vertex image is a GestureError; a misplaced arrow is NotAFunctorError."""
    d = AbstractDiagram(("x", "y"), (("x", "y", "f"),))
    a, b, c = point_pose("a", 0.0, 0.0), point_pose("b", 1.0, 0.0), point_pose("c", 5.0, 0.0)
    with pytest.raises(GestureError, match="not total"):
        realize_diagram(d, {"x": a}, {"f": point_move(a, b)})
    with pytest.raises(NotAFunctorError, match="arrow 'f' ends at 'b'"):
        realize_diagram(d, {"x": a, "y": c}, {"f": point_move(a, b)})
    with pytest.raises(NotAFunctorError, match="has no image"):
        realize_diagram(d, {"x": a, "y": b}, {})


def test_abstract_diagram_validation() -> None:
    with pytest.raises(GestureError, match="unique"):
        AbstractDiagram(("x",), (("x", "x", "f"), ("x", "x", "f")))
    with pytest.raises(GestureError, match="undeclared vertex"):
        AbstractDiagram(("x",), (("x", "z", "f"),))


def test_point_skeleton_helper() -> None:
    assert POINT.dim == 2
