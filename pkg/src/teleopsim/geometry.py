"""Flat 2D geometry: angles, convex polygons, polylines with lateral frames.

Conventions: headings are radians CCW from +x, normalized to [-pi, pi).
Polygons are CCW vertex lists. Lateral offsets are signed, positive to the
left of the direction of travel. Boundary contact counts as intersection
(closed-set convention) everywhere.
"""
from __future__ import annotations

import math
from typing import List, Sequence, Tuple

Point = Tuple[float, float]

_TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    a = math.fmod(a + math.pi, _TWO_PI)
    if a < 0.0:
        a += _TWO_PI
    return a - math.pi


def angle_diff(a: float, b: float) -> float:
    """Smallest signed difference a - b."""
    return normalize_angle(a - b)


def dist(p: Point, q: Point) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def rect_corners(cx: float, cy: float, heading: float,
                 length: float, width: float) -> List[Point]:
    """CCW corners of an oriented rectangle centered at (cx, cy)."""
    c = math.cos(heading)
    s = math.sin(heading)
    hl = 0.5 * length
    hw = 0.5 * width
    out = []
    for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        out.append((cx + dx * c - dy * s, cy + dx * s + dy * c))
    return out


def polygon_signed_area(poly: Sequence[Point]) -> float:
    a = 0.0
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        a += x1 * y2 - x2 * y1
    return 0.5 * a


def ensure_ccw(poly: Sequence[Point]) -> List[Point]:
    pts = [tuple(map(float, p)) for p in poly]
    if polygon_signed_area(pts) < 0.0:
        pts.reverse()
    return pts


def is_convex(poly: Sequence[Point], tol: float = 1e-9) -> bool:
    n = len(poly)
    if n < 3:
        return False
    sign = 0
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        cx, cy = poly[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if abs(cross) <= tol:
            continue
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def polygon_centroid(poly: Sequence[Point]) -> Point:
    x = sum(p[0] for p in poly) / len(poly)
    y = sum(p[1] for p in poly) / len(poly)
    return (x, y)


def convex_contains(poly: Sequence[Point], p: Point, tol: float = 1e-9) -> bool:
    """Point-in-convex-polygon, boundary inclusive. Polygon must be CCW."""
    x, y = p
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        if (bx - ax) * (y - ay) - (by - ay) * (x - ax) < -tol:
            return False
    return True


def _project(poly: Sequence[Point], ax: float, ay: float) -> Tuple[float, float]:
    lo = hi = poly[0][0] * ax + poly[0][1] * ay
    for x, y in poly[1:]:
        d = x * ax + y * ay
        if d < lo:
            lo = d
        elif d > hi:
            hi = d
    return lo, hi


def convex_intersects(a: Sequence[Point], b: Sequence[Point]) -> bool:
    """Separating-axis test for two convex polygons; touching counts as hit."""
    for poly in (a, b):
        n = len(poly)
        for i in range(n):
            x1, y1 = poly[i]
            x2, y2 = poly[(i + 1) % n]
            # outward normal of the edge
            ax, ay = y2 - y1, x1 - x2
            lo_a, hi_a = _project(a, ax, ay)
            lo_b, hi_b = _project(b, ax, ay)
            if hi_a < lo_b or hi_b < lo_a:
                return False
    return True


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 <= 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / L2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def point_polygon_distance(p: Point, poly: Sequence[Point]) -> float:
    """Distance from a point to a convex polygon; 0 when inside or on it."""
    if convex_contains(poly, p):
        return 0.0
    n = len(poly)
    return min(point_segment_distance(p, poly[i], poly[(i + 1) % n])
               for i in range(n))


def polygon_distance(a: Sequence[Point], b: Sequence[Point]) -> float:
    """Distance between two convex polygons; 0 when they intersect."""
    if convex_intersects(a, b):
        return 0.0
    best = math.inf
    na, nb = len(a), len(b)
    for i in range(na):
        for j in range(nb):
            d = point_segment_distance(a[i], b[j], b[(j + 1) % nb])
            if d < best:
                best = d
            d = point_segment_distance(b[j], a[i], a[(i + 1) % na])
            if d < best:
                best = d
    return best


class Polyline:
    """Piecewise-linear curve with an arc-length frame.

    Supports projection to (s, d) where s is arc length along the curve and
    d is the signed lateral offset (positive left).
    """

    def __init__(self, points: Sequence[Point]):
        if len(points) < 2:
            raise ValueError("polyline needs at least 2 points")
        self.points: List[Point] = [tuple(map(float, p)) for p in points]
        self._s = [0.0]
        for i in range(1, len(self.points)):
            self._s.append(self._s[-1] + dist(self.points[i - 1], self.points[i]))
        if self._s[-1] <= 0.0:
            raise ValueError("degenerate polyline")

    @property
    def length(self) -> float:
        return self._s[-1]

    def _segment(self, s: float) -> int:
        """Index i of segment [points[i], points[i+1]] containing arc s."""
        s = min(max(s, 0.0), self.length)
        lo, hi = 0, len(self._s) - 1
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if self._s[mid] <= s:
                lo = mid
            else:
                hi = mid
        return lo

    def point_at(self, s: float) -> Point:
        s = min(max(s, 0.0), self.length)
        i = self._segment(s)
        a = self.points[i]
        b = self.points[i + 1]
        seg = self._s[i + 1] - self._s[i]
        t = 0.0 if seg <= 0.0 else (s - self._s[i]) / seg
        return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))

    def heading_at(self, s: float) -> float:
        i = self._segment(min(max(s, 0.0), self.length))
        a = self.points[i]
        b = self.points[i + 1]
        return math.atan2(b[1] - a[1], b[0] - a[0])

    def offset_point(self, s: float, d: float) -> Point:
        x, y = self.point_at(s)
        h = self.heading_at(s)
        return (x - d * math.sin(h), y + d * math.cos(h))

    def project(self, p: Point) -> Tuple[float, float]:
        """Return (s, d) of the closest point on the curve."""
        best = (math.inf, 0.0, 0.0)
        px, py = p
        for i in range(len(self.points) - 1):
            ax, ay = self.points[i]
            bx, by = self.points[i + 1]
            dx, dy = bx - ax, by - ay
            L2 = dx * dx + dy * dy
            if L2 <= 0.0:
                continue
            t = ((px - ax) * dx + (py - ay) * dy) / L2
            t = min(1.0, max(0.0, t))
            qx, qy = ax + t * dx, ay + t * dy
            dd = math.hypot(px - qx, py - qy)
            if dd < best[0]:
                seg = self._s[i + 1] - self._s[i]
                s = self._s[i] + t * seg
                # signed: positive if p is left of segment direction
                cross = dx * (py - ay) - dy * (px - ax)
                side = 1.0 if cross >= 0.0 else -1.0
                best = (dd, s, side * dd)
        return best[1], best[2]

    def lateral_of(self, p: Point) -> float:
        return self.project(p)[1]
