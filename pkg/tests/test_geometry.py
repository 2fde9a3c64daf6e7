import math
import random

import pytest
from shapely.geometry import Point, Polygon

import oracles
from g3.geometry import (BINARY, FeatureError, base_feature_vector, catalog,
                         contact, feature, feature_kind, impose_axes, supports)
from g3.world import Grounding, Pose, Prism, Trajectory

BBOX = ((-10.0, -10.0), (10.0, 10.0))
DIAG = math.hypot(20.0, 20.0)


def fig(points, z=0.0):
    return Grounding("f", Prism.box(0, 0, 0.1, 0.5), set(),
                     Trajectory([Pose(float(i), x, y, z)
                                 for i, (x, y) in enumerate(points)]))


def square_landmark(half=1.0, height=1.0):
    return Grounding("lm", Prism.box(0, 0, half, height),
                     set(), Trajectory.single(Pose(0.0, 0.0, 0.0)))


# --- imposed axes -----------------------------------------------------------------


def test_axes_analytic_fixture():
    """Horizontal line through the unit square: chord (+-1, 0), origin (0,0),
    minor chord (0, +-1)."""
    axes = impose_axes(fig([(-3.0, 0.0), (3.0, 0.0)]), square_landmark())
    assert axes is not None
    assert axes.origin == pytest.approx((0.0, 0.0), abs=1e-12)
    (a, b) = sorted(axes.major)
    assert a == pytest.approx((-1.0, 0.0), abs=1e-12)
    assert b == pytest.approx((1.0, 0.0), abs=1e-12)
    assert axes.major_length == pytest.approx(2.0, abs=1e-12)
    (c, d) = sorted(axes.minor)
    assert c == pytest.approx((0.0, -1.0), abs=1e-12)
    assert d == pytest.approx((0.0, 1.0), abs=1e-12)


def test_axes_absent_when_line_misses_landmark():
    assert impose_axes(fig([(-3.0, 5.0), (3.0, 5.0)]), square_landmark()) is None


def test_axes_absent_for_degenerate_figure():
    assert impose_axes(fig([(2.0, 2.0)]), square_landmark()) is None
    assert impose_axes(fig([(2.0, 2.0), (2.0, 2.0)]), square_landmark()) is None


def test_axes_endpoints_lie_on_boundary():
    rng = random.Random(11)
    hits = 0
    for _ in range(200):
        figure, landmark, _ = oracles.random_scene(rng)
        axes = impose_axes(figure, landmark)
        if axes is None:
            continue
        hits += 1
        poly = landmark.footprint()
        for pt in axes.major + (axes.minor or ()):
            assert poly.exterior.distance(Point(pt)) <= 1e-9
        # the origin is the major chord's midpoint
        (x1, y1), (x2, y2) = axes.major
        assert axes.origin == pytest.approx(((x1 + x2) / 2, (y1 + y2) / 2))
    assert hits > 50


# --- individual features -----------------------------------------------------------


def test_displacement_closed_form():
    f = fig([(5.0, 0.0), (2.0, 0.0)])
    v = feature("displacementFromLandmark", f, square_landmark(), BBOX)
    assert v == pytest.approx((4.0 - 1.0) / DIAG, abs=1e-12)


def test_displacement_zero_for_constant_distance():
    f = fig([(5.0, 1.0), (5.0, -1.0)])
    v = feature("displacementFromLandmark", f, square_landmark(), BBOX)
    assert v == pytest.approx(0.0, abs=1e-12)


def test_distance_features_normalized_by_diagonal():
    f = fig([(5.0, 0.0), (2.0, 0.0)])
    lm = square_landmark()
    assert feature("distFigureStartToLandmark", f, lm, BBOX) == \
        pytest.approx(4.0 / DIAG)
    assert feature("distFigureEndToLandmark", f, lm, BBOX) == \
        pytest.approx(1.0 / DIAG)
    assert feature("averageDistStartEndLandmarkBoundary", f, lm, BBOX) == \
        pytest.approx(2.5 / DIAG)
    assert feature("pastAxesLength", f, lm, BBOX) == pytest.approx(1.0 / DIAG)


def test_eigen_axes_ratio_rectangle_and_disk():
    rect = Grounding("r", Prism([(-2, -1), (2, -1), (2, 1), (-2, 1)], 1.0),
                     set(), Trajectory.single(Pose(0.0, 0, 0)))
    v = feature("eigenAxesRatio", fig([(5, 0), (4, 0)]), rect, BBOX)
    assert v == pytest.approx(0.5, abs=1e-9)
    n = 64
    disk = Grounding("d", Prism([(math.cos(2 * math.pi * k / n),
                                  math.sin(2 * math.pi * k / n))
                                 for k in range(n)], 1.0),
                     set(), Trajectory.single(Pose(0.0, 0, 0)))
    v = feature("eigenAxesRatio", fig([(5, 0), (4, 0)]), disk, BBOX)
    assert v == pytest.approx(1.0, abs=0.01)


def test_ratio_figure_to_axes():
    f = fig([(-3.0, 0.0), (3.0, 0.0)])
    v = feature("ratioFigureToAxes", f, square_landmark(), BBOX)
    assert v == pytest.approx(6.0 / 2.0, abs=1e-12)


def test_absent_features_are_missing_not_zero():
    f = fig([(-3.0, 5.0), (3.0, 5.0)])  # line misses the landmark
    vec = base_feature_vector(f, square_landmark(), BBOX)
    for name in ("figureCenterOfMassToAxesOrigin", "ratioFigureToAxes",
                 "peakDistToAxes", "stdDevToAxes", "distAlongLandmarkBtwnAxes"):
        assert name not in vec
    assert "distFigureEndToLandmark" in vec
    assert all(math.isfinite(v) for v in vec.values())
    assert list(vec) == sorted(vec)


def test_unregistered_feature_rejected():
    with pytest.raises(FeatureError):
        feature("nope", fig([(0, 5), (1, 5)]), square_landmark(), BBOX)
    with pytest.raises(FeatureError):
        feature_kind("nope")


def test_tag_features_are_binary():
    assert feature_kind("tag_pallet") == BINARY


def test_catalog_is_sorted_and_complete():
    names = [d.name for d in catalog()]
    assert names == sorted(names)
    assert len(names) == 19


# --- support and contact -------------------------------------------------------------


def test_supports_examples():
    lm = square_landmark(half=1.0, height=1.0)
    resting = fig([(0.0, 0.0)], z=1.0)
    floating = fig([(0.0, 0.0)], z=2.0)
    beside = fig([(5.0, 0.0)], z=1.0)
    assert supports(resting, lm) == 1
    assert supports(floating, lm) == 0
    assert supports(beside, lm) == 0


def test_contact_examples():
    lm = square_landmark(half=1.0, height=1.0)
    touching = fig([(1.05, 0.0)], z=0.0)   # footprint gap 0 within eps
    apart = fig([(3.0, 0.0)], z=0.0)
    above = fig([(0.0, 0.0)], z=5.0)
    assert contact(touching, lm) == 1
    assert contact(apart, lm) == 0
    assert contact(above, lm) == 0


def test_supports_matches_interval_oracle():
    rng = random.Random(12)
    lm = square_landmark(half=1.0, height=1.0)
    for _ in range(200):
        x = rng.uniform(-3, 3)
        z = rng.choice([1.0, 0.0, rng.uniform(1.5, 4.0)])
        f = fig([(x, 0.0)], z=z)
        overlap = f.footprint().intersection(lm.footprint()).area > 0
        want = int(overlap and abs(z - 1.0) <= 0.05)
        assert supports(f, lm) == want


# --- invariance (spot check; the full sweep lives in the acceptance suite) -----------


def test_features_invariant_under_rigid_motion_spot_check():
    rng = random.Random(13)
    for _ in range(20):
        figure, landmark, bbox = oracles.random_scene(rng)
        before = base_feature_vector(figure, landmark, bbox)
        ang, tx, ty = rng.uniform(0, 2 * math.pi), rng.uniform(-5, 5), 3.0
        after = base_feature_vector(
            oracles.transform_grounding(figure, ang, tx, ty),
            oracles.transform_grounding(landmark, ang, tx, ty),
            oracles.transform_bbox(bbox, ang, tx, ty))
        assert set(before) == set(after)
        for name in before:
            assert after[name] == pytest.approx(before[name], abs=1e-9), name
