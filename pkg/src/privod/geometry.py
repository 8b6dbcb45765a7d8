"""Oriented rectangles, convex polygon clipping and exact rotated IoU.

Coordinates are image pixels with the y axis pointing down. A box's ``theta``
rotates its width axis from the image x axis using the standard rotation
matrix, so the width axis is ``(cos theta, sin theta)``. Rectangles repeat
every pi radians; ``theta`` is stored in ``[-pi/2, pi/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

Point = tuple[float, float]
Polygon = list[Point]

# Points this close to a clip edge count as inside.
CLIP_EPS = 1e-9
# Below this area a box is treated as empty when computing IoU.
AREA_EPS = 1e-12


def normalize_angle(theta: float) -> float:
    """Map an angle onto ``[-pi/2, pi/2)``."""
    t = math.fmod(theta + math.pi / 2, math.pi)
    if t < 0:
        t += math.pi
    t -= math.pi / 2
    # fmod can land exactly on the excluded upper end after the shift
    if t >= math.pi / 2:
        t -= math.pi
    return t


@dataclass(frozen=True)
class OrientedBox:
    """Rotated rectangle given by center, size and rotation.

    Raises:
        ValueError: if ``w`` or ``h`` is not strictly positive or any field is
            not finite.
    """

    cx: float
    cy: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h", "theta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"OrientedBox.{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"OrientedBox needs w > 0 and h > 0, got w={self.w}, h={self.h}")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def area(self) -> float:
        return self.w * self.h

    def translated(self, dx: float, dy: float) -> OrientedBox:
        return OrientedBox(self.cx + dx, self.cy + dy, self.w, self.h, self.theta)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h, self.theta)

    def axis_bounds(self) -> tuple[float, float, float, float]:
        """Axis-aligned bounding rectangle as ``(xmin, ymin, xmax, ymax)``."""
        c, s = abs(math.cos(self.theta)), abs(math.sin(self.theta))
        half_x = 0.5 * (self.w * c + self.h * s)
        half_y = 0.5 * (self.w * s + self.h * c)
        return (self.cx - half_x, self.cy - half_y, self.cx + half_x, self.cy + half_y)

    def contains(self, x, y, eps: float = 0.0):
        """Point-in-rectangle test. Works elementwise on numpy arrays."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = x - self.cx
        dy = y - self.cy
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (abs(u) <= self.w / 2 + eps) & (abs(v) <= self.h / 2 + eps)

    @classmethod
    def from_corners(cls, poly: Sequence[Point]) -> OrientedBox:
        """Fit a box to the 4 corners of a rectangle, in traversal order.

        This is the inverse of :func:`corners`; it is not a minimum-area fit of
        arbitrary points.
        """
        if len(poly) != 4:
            raise ValueError(f"expected 4 corners, got {len(poly)}")
        (x0, y0), (x1, y1), (x2, y2), _ = poly
        cx = sum(p[0] for p in poly) / 4
        cy = sum(p[1] for p in poly) / 4
        w = math.hypot(x1 - x0, y1 - y0)
        h = math.hypot(x2 - x1, y2 - y1)
        theta = math.atan2(y1 - y0, x1 - x0)
        return cls(cx, cy, w, h, theta)


def corners(box: OrientedBox) -> Polygon:
    """Return the 4 corners of ``box`` in counter-clockwise order.

    Counter-clockwise here means positive signed (shoelace) area in the pixel
    coordinate frame.
    """
    c, s = math.cos(box.theta), math.sin(box.theta)
    hw, hh = box.w / 2, box.h / 2
    out = []
    for u, v in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
        out.append((box.cx + u * c - v * s, box.cy + u * s + v * c))
    return out


def signed_area(poly: Sequence[Point]) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return acc / 2


def area(poly: Sequence[Point]) -> float:
    """Shoelace area; zero for fewer than 3 vertices."""
    return abs(signed_area(poly))


def _intersect(p: Point, q: Point, a: Point, b: Point) -> Point:
    # Segment p->q against the infinite line through a->b.
    ex, ey = b[0] - a[0], b[1] - a[1]
    dp = ex * (p[1] - a[1]) - ey * (p[0] - a[0])
    dq = ex * (q[1] - a[1]) - ey * (q[0] - a[0])
    denom = dp - dq
    if denom == 0.0:
        return q
    t = dp / denom
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def clip(subject: Sequence[Point], clipper: Sequence[Point]) -> Polygon:
    """Intersect two convex polygons (Sutherland-Hodgman).

    Both inputs must be convex. ``clipper`` may be in either orientation; the
    result keeps the subject's vertex order convention. Empty when disjoint.
    """
    if len(subject) < 3 or len(clipper) < 3:
        return []
    orient = 1.0 if signed_area(clipper) >= 0 else -1.0
    output = list(subject)
    n = len(clipper)
    for i in range(n):
        if not output:
            break
        a = clipper[i]
        b = clipper[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]
        length = math.hypot(ex, ey)
        if length == 0.0:
            continue
        tol = CLIP_EPS * length

        def inside(p: Point) -> bool:
            return orient * (ex * (p[1] - a[1]) - ey * (p[0] - a[0])) >= -tol

        inputs = output
        output = []
        prev = inputs[-1]
        prev_in = inside(prev)
        for cur in inputs:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    output.append(_intersect(prev, cur, a, b))
                output.append(cur)
            elif prev_in:
                output.append(_intersect(prev, cur, a, b))
            prev, prev_in = cur, cur_in
    return output


def intersection_area(a: OrientedBox, b: OrientedBox) -> float:
    reach = 0.5 * (math.hypot(a.w, a.h) + math.hypot(b.w, b.h))
    if math.hypot(a.cx - b.cx, a.cy - b.cy) > reach:
        return 0.0
    return area(clip(corners(a), corners(b)))


def iou(a: OrientedBox, b: OrientedBox) -> float:
    """Exact intersection-over-union of two oriented boxes.

    Symmetric in its arguments: the polygon with the smaller tuple is always
    used as the clip subject so ``iou(a, b) == iou(b, a)`` bit for bit.
    """
    area_a, area_b = a.area, b.area
    if area_a < AREA_EPS and area_b < AREA_EPS:
        return 0.0
    if b.as_tuple() < a.as_tuple():
        a, b = b, a
        area_a, area_b = area_b, area_a
    inter = intersection_area(a, b)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))
