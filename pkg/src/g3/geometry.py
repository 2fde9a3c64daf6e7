"""Geometric base features over (figure, landmark) grounding pairs.

Figures are trajectories (a static object contributes its single pose);
landmarks are prisms.  Distance-valued features are normalized by the scene
bounding-box diagonal so the learned relations stay scale invariant.  A
feature that is undefined for a given pair (e.g. axis features when the
figure's chord misses the landmark) is reported as absent, never as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from shapely.geometry import LineString, Point, Polygon
from shapely.ops import nearest_points

from .world import Grounding, wrap_angle

SUPPORT_EPS = 0.05  # meters: vertical tolerance for "resting on"
CONTACT_EPS = 0.05  # meters: footprint gap tolerance for contact

DISTANCE = "distance"
SIGNED_DISTANCE = "signed_distance"
ANGLE = "angle"
RATIO = "ratio"
BINARY = "binary"


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class Axes:
    """Axes the figure's chord imposes on the landmark."""
    origin: tuple[float, float]
    major: tuple[tuple[float, float], tuple[float, float]]
    minor: tuple[tuple[float, float], tuple[float, float]] | None

    @property
    def major_length(self) -> float:
        (x1, y1), (x2, y2) = self.major
        return math.hypot(x2 - x1, y2 - y1)


def _figure_points(figure: Grounding) -> list[tuple[float, float]]:
    return figure.path.xy_points


def _boundary_distance(pt: tuple[float, float], poly: Polygon) -> float:
    """Distance to the polygon boundary; 0 for points inside."""
    return float(poly.distance(Point(pt)))


def _principal_direction(points: list[tuple[float, float]]) -> tuple[float, float] | None:
    """Unit direction of the least-squares (total) line fit; None if degenerate."""
    arr = np.asarray(points, dtype=float)
    if len(arr) < 2:
        return None
    centered = arr - arr.mean(axis=0)
    cov = centered.T @ centered
    if np.allclose(cov, 0.0, atol=1e-18):
        return None
    w, v = np.linalg.eigh(cov)
    d = v[:, int(np.argmax(w))]
    return (float(d[0]), float(d[1]))


def _line_angle(d1: tuple[float, float], d2: tuple[float, float]) -> float:
    """Angle between two undirected lines, folded to [0, pi/2]."""
    a = abs(wrap_angle(math.atan2(d1[1], d1[0]) - math.atan2(d2[1], d2[0])))
    if a > math.pi / 2:
        a = math.pi - a
    return a


def _line_polygon_chord(p0, direction, poly: Polygon):
    """Extreme intersections of the infinite line p0 + t*direction with the
    polygon boundary, or None when the line misses it."""
    minx, miny, maxx, maxy = poly.bounds
    reach = math.hypot(maxx - minx, maxy - miny) + math.hypot(p0[0] - (minx + maxx) / 2,
                                                              p0[1] - (miny + maxy) / 2) + 1.0
    a = (p0[0] - reach * direction[0], p0[1] - reach * direction[1])
    b = (p0[0] + reach * direction[0], p0[1] + reach * direction[1])
    inter = LineString([a, b]).intersection(poly.exterior)
    if inter.is_empty:
        return None
    pts: list[tuple[float, float]] = []
    geoms = getattr(inter, "geoms", [inter])
    for g in geoms:
        pts.extend((x, y) for x, y in g.coords)
    ts = [((x - p0[0]) * direction[0] + (y - p0[1]) * direction[1], (x, y)) for x, y in pts]
    ts.sort(key=lambda t: t[0])
    if len(ts) < 2 or abs(ts[-1][0] - ts[0][0]) < 1e-12:
        return None
    return ts[0][1], ts[-1][1]


def impose_axes(figure, landmark) -> Axes | None:
    """Axes from the line through the first and last figure points, extended
    to its two landmark-boundary intersections; None when the figure is
    degenerate or the line misses the landmark."""
    pts = _figure_points(figure) if isinstance(figure, Grounding) else list(figure)
    poly = landmark.footprint() if isinstance(landmark, Grounding) else landmark
    if len(pts) < 2:
        return None
    (x1, y1), (x2, y2) = pts[0], pts[-1]
    dx, dy = x2 - x1, y2 - y1
    norm = math.hypot(dx, dy)
    if norm < 1e-12:
        return None
    d = (dx / norm, dy / norm)
    chord = _line_polygon_chord((x1, y1), d, poly)
    if chord is None:
        return None
    (ax, ay), (bx, by) = chord
    origin = ((ax + bx) / 2, (ay + by) / 2)
    perp = (-d[1], d[0])
    minor = _line_polygon_chord(origin, perp, poly)
    return Axes(origin, ((ax, ay), (bx, by)), minor)


# --- individual feature functions -------------------------------------------
# Each takes (figure points, landmark polygon, figure grounding, landmark
# grounding) and returns a raw value or None (absent).

def _f_displacement(pts, poly, fig, lm):
    return _boundary_distance(pts[0], poly) - _boundary_distance(pts[-1], poly)


def _f_avg_start_end(pts, poly, fig, lm):
    return 0.5 * (_boundary_distance(pts[0], poly) + _boundary_distance(pts[-1], poly))


def _f_dist_start(pts, poly, fig, lm):
    return _boundary_distance(pts[0], poly)


def _f_dist_end(pts, poly, fig, lm):
    return _boundary_distance(pts[-1], poly)


def _f_com_to_centroid(pts, poly, fig, lm):
    arr = np.asarray(pts, dtype=float)
    com = arr.mean(axis=0)
    c = poly.centroid
    return math.hypot(com[0] - c.x, com[1] - c.y)


def _f_past_axes_length(pts, poly, fig, lm):
    return min(_boundary_distance(p, poly) for p in pts)


def _f_angle_linearized(pts, poly, fig, lm):
    d1 = _principal_direction(pts)
    d2 = _principal_direction(list(poly.exterior.coords)[:-1])
    if d1 is None or d2 is None:
        return None
    return _line_angle(d1, d2)


def _f_angle_to_past_axes(pts, poly, fig, lm):
    d1 = _principal_direction(pts)
    if d1 is None:
        return None
    closest = min(pts, key=lambda p: _boundary_distance(p, poly))
    if _boundary_distance(closest, poly) < 1e-12:
        return None  # figure touches the landmark: approach line undefined
    near = nearest_points(Point(closest), poly)[1]
    d2 = (near.x - closest[0], near.y - closest[1])
    return _line_angle(d1, d2)


def _f_eigen_axes_ratio(pts, poly, fig, lm):
    cov = _polygon_covariance(poly)
    w = np.linalg.eigvalsh(cov)
    if w[1] <= 0:
        return None
    return float(math.sqrt(max(w[0], 0.0) / w[1]))


def _f_com_to_axes_origin(pts, poly, fig, lm):
    axes = impose_axes(pts, poly)
    if axes is None:
        return None
    arr = np.asarray(pts, dtype=float)
    com = arr.mean(axis=0)
    return math.hypot(com[0] - axes.origin[0], com[1] - axes.origin[1])


def _point_line_distance(p, a, d):
    # d is a unit direction; perpendicular distance of p from line through a
    vx, vy = p[0] - a[0], p[1] - a[1]
    return abs(vx * d[1] - vy * d[0])


def _axes_direction(axes: Axes) -> tuple[float, float]:
    (x1, y1), (x2, y2) = axes.major
    n = math.hypot(x2 - x1, y2 - y1)
    return ((x2 - x1) / n, (y2 - y1) / n)


def _f_peak_dist_to_axes(pts, poly, fig, lm):
    axes = impose_axes(pts, poly)
    if axes is None:
        return None
    inside = [p for p in pts if poly.covers(Point(p))]
    if not inside:
        return None
    d = _axes_direction(axes)
    return max(_point_line_distance(p, axes.origin, d) for p in inside)


def _f_std_dev_to_axes(pts, poly, fig, lm):
    axes = impose_axes(pts, poly)
    if axes is None:
        return None
    d = _axes_direction(axes)
    dists = [_point_line_distance(p, axes.origin, d) for p in pts]
    return float(np.std(dists))


def _f_ratio_figure_to_axes(pts, poly, fig, lm):
    axes = impose_axes(pts, poly)
    if axes is None or axes.major_length < 1e-12:
        return None
    chord = math.hypot(pts[-1][0] - pts[0][0], pts[-1][1] - pts[0][1])
    return chord / axes.major_length


def _f_dist_along_landmark(pts, poly, fig, lm):
    axes = impose_axes(pts, poly)
    if axes is None or axes.minor is None:
        return None
    ext = poly.exterior
    s1 = ext.project(Point(axes.minor[0]))
    s2 = ext.project(Point(axes.minor[1]))
    d = abs(s1 - s2)
    return min(d, ext.length - d)


def _polygon_covariance(poly: Polygon) -> np.ndarray:
    """Covariance of the uniform distribution over the polygon (analytic)."""
    coords = list(poly.exterior.coords)
    a = sxx = syy = sxy = cx = cy = 0.0
    for (x1, y1), (x2, y2) in zip(coords, coords[1:]):
        cross = x1 * y2 - x2 * y1
        a += cross
        cx += (x1 + x2) * cross
        cy += (y1 + y2) * cross
        sxx += (x1 * x1 + x1 * x2 + x2 * x2) * cross
        syy += (y1 * y1 + y1 * y2 + y2 * y2) * cross
        sxy += (x1 * y2 + 2 * x1 * y1 + 2 * x2 * y2 + x2 * y1) * cross
    a *= 0.5
    cx /= 6 * a
    cy /= 6 * a
    exx = sxx / (12 * a)
    eyy = syy / (12 * a)
    exy = sxy / (24 * a)
    return np.array([[exx - cx * cx, exy - cx * cy],
                     [exy - cx * cy, eyy - cy * cy]])


def supports(figure: Grounding, landmark: Grounding) -> int:
    """1 iff the figure's footprint overlaps the landmark's and the figure's
    base sits at the landmark's top within SUPPORT_EPS."""
    if figure.footprint().intersection(landmark.footprint()).area <= 0:
        return 0
    return int(abs(figure.base_z - landmark.top_z) <= SUPPORT_EPS)


def contact(figure: Grounding, landmark: Grounding) -> int:
    """1 iff footprints are within CONTACT_EPS and vertical extents overlap."""
    if figure.footprint().distance(landmark.footprint()) > CONTACT_EPS:
        return 0
    lo = max(figure.base_z, landmark.base_z)
    hi = min(figure.top_z, landmark.top_z)
    return int(hi - lo >= -CONTACT_EPS)


def _f_supports(pts, poly, fig, lm):
    if fig is None or lm is None:
        return None
    return float(supports(fig, lm))


def _f_contact(pts, poly, fig, lm):
    if fig is None or lm is None:
        return None
    return float(contact(fig, lm))


def _f_inside(pts, poly, fig, lm):
    if fig is None:
        return None
    return float(poly.covers(fig.footprint()))


def _f_overlaps(pts, poly, fig, lm):
    if fig is None:
        return None
    return float(poly.intersection(fig.footprint()).area > 0)


@dataclass(frozen=True)
class FeatureDef:
    name: str
    kind: str
    arity: int
    description: str
    func: object


_CATALOG: dict[str, FeatureDef] = {}


def _register(name, kind, description, func, arity=2):
    _CATALOG[name] = FeatureDef(name, kind, arity, description, func)


_register("angleBtwnLinearizedObjects", ANGLE,
          "angle between line fits to the figure points and the landmark boundary",
          _f_angle_linearized)
_register("angleFigureToPastAxes", ANGLE,
          "angle between the figure's line fit and the closest-approach line to the landmark",
          _f_angle_to_past_axes)
_register("averageDistStartEndLandmarkBoundary", DISTANCE,
          "mean of start and end distances to the landmark boundary",
          _f_avg_start_end)
_register("displacementFromLandmark", SIGNED_DISTANCE,
          "start distance minus end distance to the landmark",
          _f_displacement)
_register("distAlongLandmarkBtwnAxes", DISTANCE,
          "perimeter distance between the minor-axis endpoints",
          _f_dist_along_landmark)
_register("distStartLandmarkBoundary", DISTANCE,
          "distance from the figure start to the landmark boundary",
          _f_dist_start)
_register("distFigureEndToLandmark", DISTANCE,
          "distance from the figure end to the landmark",
          _f_dist_end)
_register("distFigureStartToLandmark", DISTANCE,
          "distance from the figure start to the landmark",
          _f_dist_start)
_register("eigenAxesRatio", RATIO,
          "ratio of the landmark shape's principal standard deviations",
          _f_eigen_axes_ratio, arity=1)
_register("figureCenterOfMassToAxesOrigin", DISTANCE,
          "distance from the figure's center of mass to the imposed-axes origin",
          _f_com_to_axes_origin)
_register("figureCenterOfMassToLandmarkCentroid", DISTANCE,
          "distance from the figure's center of mass to the landmark centroid",
          _f_com_to_centroid)
_register("pastAxesLength", DISTANCE,
          "closest-approach distance between figure and landmark",
          _f_past_axes_length)
_register("peakDistToAxes", DISTANCE,
          "max distance from in-landmark figure points to the major axis",
          _f_peak_dist_to_axes)
_register("ratioFigureToAxes", RATIO,
          "figure chord length over major-axis length",
          _f_ratio_figure_to_axes)
_register("stdDevToAxes", DISTANCE,
          "std dev of figure point distances to the major axis",
          _f_std_dev_to_axes)
_register("supports", BINARY,
          "figure rests on top of the landmark",
          _f_supports)
_register("contact", BINARY,
          "figure and landmark touch",
          _f_contact)
_register("figureInsideLandmark", BINARY,
          "figure footprint lies within the landmark footprint",
          _f_inside)
_register("figureOverlapsLandmark", BINARY,
          "figure and landmark footprints overlap",
          _f_overlaps)


def catalog() -> list[FeatureDef]:
    return [d for _, d in sorted(_CATALOG.items())]


def feature_kind(name: str) -> str:
    if name.startswith("tag_"):
        return BINARY
    if name not in _CATALOG:
        raise FeatureError(f"unregistered feature {name!r}")
    return _CATALOG[name].kind


def _bbox_diag(scene_bbox) -> float:
    (xmin, ymin), (xmax, ymax) = scene_bbox
    return math.hypot(xmax - xmin, ymax - ymin)


def feature(name: str, figure: Grounding, landmark: Grounding, scene_bbox) -> float | None:
    """A single normalized base feature; None means absent (undefined)."""
    if name not in _CATALOG:
        raise FeatureError(f"unregistered feature {name!r}")
    d = _CATALOG[name]
    pts = _figure_points(figure)
    poly = landmark.footprint()
    raw = d.func(pts, poly, figure, landmark)
    if raw is None:
        return None
    if d.kind in (DISTANCE, SIGNED_DISTANCE):
        return raw / _bbox_diag(scene_bbox)
    return float(raw)


def base_feature_vector(figure: Grounding, landmark: Grounding, scene_bbox) -> dict[str, float]:
    """All defined base features for a (figure, landmark) pair."""
    out = {}
    for name in sorted(_CATALOG):
        v = feature(name, figure, landmark, scene_bbox)
        if v is not None and math.isfinite(v):
            out[name] = v
    return out
