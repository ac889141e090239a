"""Planar polygon helpers shared by map import and mesh generation."""

import math


def signed_area(polygon):
    # shoelace; positive for counter-clockwise
    area = 0.0
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return area / 2.0


def orientation(a, b, c):
    value = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if value > 0:
        return 1
    if value < 0:
        return -1
    return 0


def _on_segment(a, b, p):
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segments_intersect(p1, p2, q1, q2):
    """True when closed segments p1p2 and q1q2 share at least one point."""
    o1 = orientation(p1, p2, q1)
    o2 = orientation(p1, p2, q2)
    o3 = orientation(q1, q2, p1)
    o4 = orientation(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(p1, p2, q1):
        return True
    if o2 == 0 and _on_segment(p1, p2, q2):
        return True
    if o3 == 0 and _on_segment(q1, q2, p1):
        return True
    if o4 == 0 and _on_segment(q1, q2, p2):
        return True
    return False


def is_simple(polygon):
    """Brute-force all-pairs edge test; the polygon is given without its closing point."""
    n = len(polygon)
    if n < 3:
        return False
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a, b = edges[i]
        if a == b:
            return False
        for j in range(i + 1, n):
            c, d = edges[j]
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                # shared vertex; only a fold-back along the same line is a crossing
                shared, far_a, far_c = (b, a, d) if j == i + 1 else (a, b, c)
                if orientation(far_a, shared, far_c) == 0:
                    ux, uy = shared[0] - far_a[0], shared[1] - far_a[1]
                    vx, vy = far_c[0] - shared[0], far_c[1] - shared[1]
                    if ux * vx + uy * vy < 0:
                        return False
                continue
            if segments_intersect(a, b, c, d):
                return False
    return True


def ensure_ccw(polygon):
    polygon = list(polygon)
    if signed_area(polygon) < 0:
        polygon.reverse()
    return polygon


def polyline_length(points):
    return sum(math.dist(points[i], points[i + 1]) for i in range(len(points) - 1))


def dedupe_consecutive(points):
    out = []
    for p in points:
        if not out or out[-1] != p:
            out.append(p)
    return out
