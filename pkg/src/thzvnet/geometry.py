"""2D geometry primitives: points, segments, quadrilateral obstacles, and the
line-of-sight blockage test used by every link in the simulator.

A straight path between two vehicles is considered blocked when it crosses a
diagonal of any obstacle quadrilateral (not the four edges -- a segment that
clips a corner without touching a diagonal still counts as clear).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Absolute collinearity tolerance for orientation tests, in m^2.
# Meter-scale coordinates keep cross products far above this for any
# non-degenerate configuration.
EPS = 1e-9


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def dist(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Obstacle:
    """Convex quadrilateral footprint of a building or tree.

    Vertices are ordered around the boundary; the two diagonals are
    (v0, v2) and (v1, v3).
    """

    vertices: tuple[Point2D, Point2D, Point2D, Point2D]

    def __post_init__(self):
        v = self.vertices
        if len(v) != 4:
            raise ValueError("obstacle needs exactly 4 vertices")
        for i in range(4):
            for j in range(i + 1, 4):
                if v[i].dist(v[j]) < 1e-12:
                    raise ValueError("obstacle vertices must be distinct")
        # Convexity and non-degeneracy: consecutive edge cross products all
        # strictly one sign.
        signs = []
        for i in range(4):
            a, b, c = v[i], v[(i + 1) % 4], v[(i + 2) % 4]
            s = _cross(a, b, c)
            if abs(s) <= EPS:
                raise ValueError("degenerate obstacle (collinear vertices)")
            signs.append(s > 0)
        if len(set(signs)) != 1:
            raise ValueError("obstacle quadrilateral must be convex")

    @property
    def diagonals(self) -> tuple[tuple[Point2D, Point2D], tuple[Point2D, Point2D]]:
        v = self.vertices
        return ((v[0], v[2]), (v[1], v[3]))

    def area(self) -> float:
        v = self.vertices
        s = 0.0
        for i in range(4):
            a, b = v[i], v[(i + 1) % 4]
            s += a.x * b.y - b.x * a.y
        return abs(s) / 2.0

    def contains(self, p: Point2D) -> bool:
        """Strict interior test (boundary points are not contained)."""
        v = self.vertices
        ref = _cross(v[0], v[1], v[2])
        for i in range(4):
            s = _cross(v[i], v[(i + 1) % 4], p)
            if s * ref <= EPS:
                return False
        return True


def axis_aligned_obstacle(x0: float, y0: float, x1: float, y1: float) -> Obstacle:
    """Rectangle with corners (x0,y0) and (x1,y1), counter-clockwise."""
    xa, xb = min(x0, x1), max(x0, x1)
    ya, yb = min(y0, y1), max(y0, y1)
    return Obstacle((Point2D(xa, ya), Point2D(xb, ya), Point2D(xb, yb), Point2D(xa, yb)))


def _cross(o: Point2D, a: Point2D, b: Point2D) -> float:
    """Cross product of (a-o) x (b-o)."""
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)


def _orient(a: Point2D, b: Point2D, c: Point2D) -> int:
    """Sign of the orientation of (a, b, c); 0 within EPS of collinear."""
    s = _cross(a, b, c)
    if s > EPS:
        return 1
    if s < -EPS:
        return -1
    return 0


def _on_segment(a: Point2D, b: Point2D, p: Point2D) -> bool:
    """True when p lies on segment (a, b), assuming a, b, p collinear."""
    return (min(a.x, b.x) - EPS <= p.x <= max(a.x, b.x) + EPS
            and min(a.y, b.y) - EPS <= p.y <= max(a.y, b.y) + EPS)


def point_on_segment(a: Point2D, b: Point2D, p: Point2D) -> bool:
    """True when p lies on segment (a, b), endpoints included."""
    return _orient(a, b, p) == 0 and _on_segment(a, b, p)


def segments_intersect(a1: Point2D, a2: Point2D, b1: Point2D, b2: Point2D) -> bool:
    """True iff segments (a1,a2) and (b1,b2) share at least one point.

    Touching at an endpoint counts as intersecting. Zero-length segments
    degrade to point-on-segment tests rather than raising.
    """
    a_degenerate = a1.dist(a2) < 1e-12
    b_degenerate = b1.dist(b2) < 1e-12
    if a_degenerate and b_degenerate:
        return a1.dist(b1) < 1e-12
    if a_degenerate:
        return point_on_segment(b1, b2, a1)
    if b_degenerate:
        return point_on_segment(a1, a2, b1)

    o1 = _orient(a1, a2, b1)
    o2 = _orient(a1, a2, b2)
    o3 = _orient(b1, b2, a1)
    o4 = _orient(b1, b2, a2)

    # Covers proper crossings and endpoint touching in one stroke as long as
    # neither segment is collinear with the other's supporting line.
    if o1 != o2 and o3 != o4 and (o1 or o2) and (o3 or o4):
        return True

    # Collinear overlap / touching cases.
    if o1 == 0 and _on_segment(a1, a2, b1):
        return True
    if o2 == 0 and _on_segment(a1, a2, b2):
        return True
    if o3 == 0 and _on_segment(b1, b2, a1):
        return True
    if o4 == 0 and _on_segment(b1, b2, a2):
        return True
    return False


def blockage_indicator(a: Point2D, b: Point2D, obstacles: list[Obstacle]) -> int:
    """Line-of-sight indicator between positions a and b.

    Returns 0 (blocked) iff the segment (a, b) intersects at least one
    diagonal of at least one obstacle; 1 (clear) otherwise. Grazing a
    diagonal at a single point already blocks.
    """
    if a.dist(b) < 1e-12:
        raise ValueError("blockage test requires two distinct positions")
    for obs in obstacles:
        for d1, d2 in obs.diagonals:
            if segments_intersect(a, b, d1, d2):
                return 0
    return 1
