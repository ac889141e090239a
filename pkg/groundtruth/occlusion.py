"""Occlusion by dual rendering, and the truncation flag.

An instance's occlusion rate is the fraction of its in-frame pixels that
other geometry hides: the frame is rendered once as is and once with the
instance alone, at the same camera and LOD settings. Both counts are taken
inside the image, so truncation does not count as occlusion.
"""

import numpy as np

from render.camera import project_points, transform_points, world_to_camera
from render.culling import select_lod
from render.raster import rasterize

from .exceptions import FullyOutOfView
from .masks import instance_masks


def solo_extent(world, camera, K, settings, instance_id):
    """MaskExtent of the instance rendered with nothing else in the world, or None."""
    bufs = rasterize(world.isolate(instance_id), camera, K, settings)
    return instance_masks(bufs).get(instance_id)


def occlusion_rate(world, camera, K, settings, instance, visible_pixels=None):
    """1 - visible / solo pixel count; raises FullyOutOfView when the solo render is empty."""
    if visible_pixels is None:
        bufs = rasterize(world, camera, K, settings)
        visible_pixels = int(np.count_nonzero(bufs.instance == instance))
    solo = solo_extent(world, camera, K, settings, instance)
    if solo is None:
        raise FullyOutOfView(instance)
    return rate_from_counts(visible_pixels, solo.count)


def rate_from_counts(visible_pixels, solo_pixels):
    if solo_pixels <= 0:
        raise ValueError("solo pixel count must be positive")
    return min(1.0, max(0.0, 1.0 - visible_pixels / solo_pixels))


def truncation_flag(world, camera, K, instance, settings=None):
    """True when the instance is cut by the image border or the near plane.

    A vertex at z >= near is inside the image iff its projection lies within
    the outermost pixel centres.
    """
    entity = world.entity(instance)
    level = 0
    if settings is not None and settings.lod and entity.lods:
        eye = np.asarray(camera)[:3, 3]
        level = select_lod(float(np.linalg.norm(np.asarray(entity.position) - eye)), settings.lod_distances)
    mesh = entity.mesh_for_lod(level)
    points = transform_points(world_to_camera(camera), transform_points(entity.pose_matrix(), mesh.vertices))
    front = points[:, 2] >= K.near
    if not front.any():
        return False
    if not front.all():
        # some triangle crosses the near plane and gets clipped
        return True
    uv = project_points(K, points)
    u, v = uv[:, 0], uv[:, 1]
    inside = (u >= 0.5) & (u <= K.width - 0.5) & (v >= 0.5) & (v <= K.height - 0.5)
    return not bool(inside.all())
