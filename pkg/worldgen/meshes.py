"""Mesh construction: building extrusion, road strips, vehicles, props.

Every mesh is wound so that (b - a) x (c - a) points out of the solid; the
renderer relies on this for back-face rejection.
"""

import math
from dataclasses import dataclass

import numpy as np

from mapio import geometry

from .exceptions import TriangulationFailure
from .triangulate import earclip

# (length, width, height) in meters
VEHICLE_DIMENSIONS = {
    'car': (4.5, 1.8, 1.5),
    'bus': (12.0, 2.5, 3.0),
    'truck': (8.0, 2.5, 3.2),
}
GROUND_CLEARANCE = 0.2
GROUND_LEVEL = -0.05

# outward winding for the 8-corner hull returned by _hull_corners
_HULL_FACES = np.array([
    (4, 5, 6), (4, 6, 7),   # top
    (0, 3, 2), (0, 2, 1),   # bottom
    (0, 1, 5), (0, 5, 4),   # -y
    (1, 2, 6), (1, 6, 5),   # +x
    (2, 3, 7), (2, 7, 6),   # +y
    (3, 0, 4), (3, 4, 7),   # -x
], dtype=np.int32)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    class_id: int = 0
    instance_id: int = 0

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise ValueError("triangle index out of range")
        # drop zero-area triangles
        if triangles.size:
            a, b, c = (vertices[triangles[:, k]] for k in range(3))
            triangles = triangles[np.linalg.norm(np.cross(b - a, c - a), axis=1) > 0]
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'triangles', triangles)

    def __len__(self):
        return len(self.triangles)

    def with_ids(self, class_id, instance_id):
        return Mesh(self.vertices, self.triangles, class_id, instance_id)

    def triangle_areas(self):
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def concat(meshes, class_id=0, instance_id=0):
    vertices, triangles, offset = [], [], 0
    for mesh in meshes:
        vertices.append(mesh.vertices)
        triangles.append(mesh.triangles + offset)
        offset += len(mesh.vertices)
    return Mesh(np.concatenate(vertices), np.concatenate(triangles), class_id, instance_id)


def extrude_footprint(fp, height):
    """Prism over a CCW footprint: two triangles per wall plus an ear-clipped roof."""
    polygon = list(fp.polygon)
    if height <= 0:
        raise ValueError("height must be positive")
    if not geometry.is_simple(polygon) or geometry.signed_area(polygon) <= 0:
        raise TriangulationFailure("footprint must be simple and counter-clockwise")
    n = len(polygon)
    xy = np.asarray(polygon, dtype=np.float64)
    bottom = np.column_stack([xy, np.zeros(n)])
    top = np.column_stack([xy, np.full(n, float(height))])
    vertices = np.vstack([bottom, top])

    triangles = []
    for i in range(n):
        j = (i + 1) % n
        triangles.append((i, j, n + j))
        triangles.append((i, n + j, n + i))
    triangles.extend((n + a, n + b, n + c) for a, b, c in earclip(polygon))
    return Mesh(vertices, triangles)


def tessellate_road(road):
    """Quad strip of the road width around the centerline, miter-joined, at z = 0."""
    points = np.asarray(road.centerline, dtype=np.float64)
    half = road.width / 2.0
    seg = np.diff(points, axis=0)
    seg /= np.linalg.norm(seg, axis=1)[:, None]
    normals = np.column_stack([-seg[:, 1], seg[:, 0]])   # left of travel

    n = len(points)
    left = np.empty((n, 2))
    right = np.empty((n, 2))
    for i in range(n):
        if i == 0:
            miter, scale = normals[0], half
        elif i == n - 1:
            miter, scale = normals[-1], half
        else:
            miter = normals[i - 1] + normals[i]
            norm = np.linalg.norm(miter)
            if norm < 1e-12:
                # full reversal; fall back to the incoming normal
                miter, scale = normals[i - 1], half
            else:
                miter = miter / norm
                scale = half / float(np.dot(miter, normals[i]))
        left[i] = points[i] + miter * scale
        right[i] = points[i] - miter * scale

    vertices = np.vstack([np.column_stack([right, np.zeros(n)]),
                          np.column_stack([left, np.zeros(n)])])
    triangles = []
    for i in range(n - 1):
        r0, r1, l0, l1 = i, i + 1, n + i, n + i + 1
        triangles.append((r0, r1, l1))
        triangles.append((r0, l1, l0))
    return Mesh(vertices, triangles)


def _hull_corners(x0, x1, y0, y1, z0, z1, top_inset=(0.0, 0.0, 0.0, 0.0)):
    # top_inset shrinks the top face: (front, back, left, right)
    front, back, left, right = top_inset
    return np.array([
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0 + back, y0 + right, z1), (x1 - front, y0 + right, z1),
        (x1 - front, y1 - left, z1), (x0 + back, y1 - left, z1),
    ], dtype=np.float64)


def box(center, size, z0=0.0):
    """Axis-aligned box with its base at z0; size = (length, width, height)."""
    cx, cy = center[0], center[1]
    lx, ly, lz = size
    return Mesh(_hull_corners(cx - lx / 2, cx + lx / 2, cy - ly / 2, cy + ly / 2, z0, z0 + lz), _HULL_FACES)


def rotated_box(center, size, yaw, z0=0.0):
    mesh = box((0.0, 0.0), size, z0)
    c, s = math.cos(yaw), math.sin(yaw)
    v = mesh.vertices.copy()
    v[:, :2] = v[:, :2] @ np.array([[c, s], [-s, c]]) + np.asarray(center[:2])
    return Mesh(v, mesh.triangles)


def vehicle_lods(vehicle_class):
    """Meshes for LOD 0, 1 and 2, in vehicle-local coordinates (forward = +x)."""
    length, width, height = VEHICLE_DIMENSIONS[vehicle_class]
    z0 = GROUND_CLEARANCE
    x0, x1 = -length / 2, length / 2
    y0, y1 = -width / 2, width / 2
    if vehicle_class == 'car':
        body_top = z0 + 0.7
        detail = concat([
            box((0.0, 0.0), (length, width, body_top - z0), z0),
            box((-0.05 * length, 0.0), (0.5 * length, 0.9 * width, height - body_top), body_top),
        ])
        inset = (0.3 * length, 0.2 * length, 0.05 * width, 0.05 * width)
    elif vehicle_class == 'bus':
        detail = concat([
            box((0.0, 0.0), (length, width, height - 0.3 - z0), z0),
            box((-0.05 * length, 0.0), (0.8 * length, 0.9 * width, 0.3), height - 0.3),
        ])
        inset = (0.05 * length, 0.05 * length, 0.02 * width, 0.02 * width)
    else:
        chassis_top = z0 + 0.9
        detail = concat([
            box((0.0, 0.0), (length, width, chassis_top - z0), z0),
            box((-0.13 * length, 0.0), (0.72 * length, width, height - chassis_top), chassis_top),
            box((0.37 * length, 0.0), (0.24 * length, 0.95 * width, 2.6 - chassis_top), chassis_top),
        ])
        inset = (0.0, 0.0, 0.0, 0.0)
    hull = Mesh(_hull_corners(x0, x1, y0, y1, z0, height, inset), _HULL_FACES)
    bbox = Mesh(_hull_corners(x0, x1, y0, y1, z0, height), _HULL_FACES)
    return detail, hull, bbox


def prop_mesh(kind, position, yaw):
    """Roadside props; yaw is the direction of the road at the prop."""
    if kind == 'vegetation':
        return concat([
            box(position, (0.3, 0.3, 2.0)),
            box(position, (2.5, 2.5, 2.5), 2.0),
        ])
    if kind == 'traffic_sign':
        return concat([
            box(position, (0.1, 0.1, 2.2)),
            rotated_box(position, (0.05, 0.8, 0.6), yaw, 2.2),
        ])
    if kind == 'traffic_light':
        return concat([
            box(position, (0.15, 0.15, 3.0)),
            rotated_box(position, (0.3, 0.4, 1.0), yaw, 3.0),
        ])
    if kind == 'fence':
        return rotated_box(position, (4.0, 0.1, 1.0), yaw)
    raise ValueError(f"unknown prop kind: {kind}")


def ground_slab(bounds, tile=40.0):
    """Upward-facing tiled ground plane slightly below the road surface."""
    x0, y0, x1, y1 = bounds
    nx = max(1, math.ceil((x1 - x0) / tile))
    ny = max(1, math.ceil((y1 - y0) / tile))
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing='ij')
    vertices = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, GROUND_LEVEL)])
    triangles = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = (i + 1) * (ny + 1) + j
            triangles.append((a, b, b + 1))
            triangles.append((a, b + 1, a + 1))
    return Mesh(vertices, triangles)
