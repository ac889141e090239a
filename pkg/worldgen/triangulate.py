"""Ear-clipping triangulation of simple counter-clockwise polygons.

Yields n - 2 triangles for an n-gon without collinear vertices; collinear
vertices are clipped without emitting a (zero-area) triangle.
"""

from mapio.geometry import signed_area

from .exceptions import TriangulationFailure


def _cross(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _inside_or_on(p, a, b, c):
    return _cross(a, b, p) >= 0 and _cross(b, c, p) >= 0 and _cross(c, a, p) >= 0


def _is_ear(polygon, ring, k):
    i, j, l = ring[k - 1], ring[k], ring[(k + 1) % len(ring)]
    a, b, c = polygon[i], polygon[j], polygon[l]
    if _cross(a, b, c) <= 0:
        return False
    for m in ring:
        if m in (i, j, l):
            continue
        p = polygon[m]
        if p in (a, b, c):
            continue
        if _inside_or_on(p, a, b, c):
            return False
    return True


def earclip(polygon):
    """Triangulate polygon (list of (x, y)), returning index triples wound CCW."""
    if len(polygon) < 3:
        raise TriangulationFailure("polygon needs at least 3 vertices")
    if signed_area(polygon) <= 0:
        raise TriangulationFailure("polygon must be counter-clockwise with positive area")

    ring = list(range(len(polygon)))
    triangles = []
    while len(ring) > 3:
        for k in range(len(ring)):
            i, j, l = ring[k - 1], ring[k], ring[(k + 1) % len(ring)]
            if _cross(polygon[i], polygon[j], polygon[l]) == 0:
                # collinear or spike vertex; drop it
                del ring[k]
                break
            if _is_ear(polygon, ring, k):
                triangles.append((i, j, l))
                del ring[k]
                break
        else:
            raise TriangulationFailure("no ear found; polygon is not simple")
    i, j, l = ring
    if _cross(polygon[i], polygon[j], polygon[l]) > 0:
        triangles.append((i, j, l))
    return triangles
