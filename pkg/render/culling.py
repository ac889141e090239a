"""Bounding-sphere frustum culling and distance-based level of detail."""

import math

import numpy as np

from .camera import transform_points, world_to_camera

# spheres are grown slightly so round-off never culls a contributing entity
SLACK = 1e-6


def bounding_sphere(points):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    center = (points.min(axis=0) + points.max(axis=0)) / 2.0
    return center, float(np.sqrt(((points - center) ** 2).sum(axis=1).max()))


def entity_sphere(entity, level=0):
    mesh = entity.mesh_for_lod(level)
    return bounding_sphere(transform_points(entity.pose_matrix(), mesh.vertices))


def spheres_in_view(centers_cam, radii, K, draw_distance):
    """Mask of spheres that may touch the frustum between near and draw_distance.

    The four side planes pass through the camera centre and the image edges.
    """
    centers_cam = np.asarray(centers_cam, dtype=np.float64).reshape(-1, 3)
    r = np.asarray(radii, dtype=np.float64) * (1.0 + SLACK) + SLACK
    x, y, z = centers_cam[:, 0], centers_cam[:, 1], centers_cam[:, 2]
    keep = (z + r >= K.near) & (z - r <= draw_distance)
    planes = (
        (K.fx, 0.0, K.cx),                       # left,   u >= 0
        (-K.fx, 0.0, K.width - K.cx),            # right,  u <= W
        (0.0, K.fy, K.cy),                       # top,    v >= 0
        (0.0, -K.fy, K.height - K.cy),           # bottom, v <= H
    )
    for a, b, c in planes:
        norm = math.sqrt(a * a + b * b + c * c)
        keep &= (a * x + b * y + c * z) / norm >= -r
    return keep


def frustum_cull(world, camera, K, draw_distance, lod_distances=None):
    """Entities whose bounding spheres may reach the view volume."""
    view = world_to_camera(camera)
    entities = [e for e in world.entities if e.visible]
    if not entities:
        return []
    eye = np.asarray(camera)[:3, 3]
    spheres = []
    for entity in entities:
        level = 0
        if lod_distances is not None and entity.lods is not None:
            level = select_lod(float(np.linalg.norm(np.asarray(entity.position) - eye)), lod_distances)
        spheres.append(entity_sphere(entity, level))
    centers = transform_points(view, np.array([c for c, _ in spheres]))
    keep = spheres_in_view(centers, [r for _, r in spheres], K, draw_distance)
    return [e for e, k in zip(entities, keep) if k]


def select_lod(distance, lod_distances):
    if distance < 0:
        raise ValueError("distance must be non-negative")
    d1, d2 = lod_distances
    if distance < d1:
        return 0
    if distance < d2:
        return 1
    return 2
