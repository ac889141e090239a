"""Dense optical flow from depth, instance ids and rigid entity motion.

Flow is reported at frame t: each hit pixel is lifted to the world through
its depth, carried back one frame by its entity's rigid motion and projected
through the previous camera. flow = p - p_prev, p the pixel centre.
"""

import logging
from dataclasses import dataclass

import numpy as np

from render.camera import pixel_rays, project_points, transform_points, world_to_camera

from .exceptions import MissingPreviousPose

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FlowField:
    u: np.ndarray       # (H, W) float32 pixels per frame
    v: np.ndarray
    valid: np.ndarray   # (H, W) bool

    @property
    def shape(self):
        return self.valid.shape

    @classmethod
    def invalid(cls, width, height):
        zeros = np.zeros((height, width), dtype=np.float32)
        return cls(zeros, zeros.copy(), np.zeros((height, width), dtype=bool))


def backward_motion(entity_id, world, world_prev):
    """4x4 world transform taking the entity's surface at t to where it was at t - 1."""
    static_ids = {e.id for e in world.static}
    if entity_id in static_ids:
        return np.eye(4)
    previous = {e.id: e for e in world_prev.vehicles}
    if entity_id not in previous:
        raise MissingPreviousPose(entity_id)
    current = world.entity(entity_id)
    return previous[entity_id].pose_matrix() @ np.linalg.inv(current.pose_matrix())


def compute_flow(world, world_prev, camera, camera_prev, K, bufs):
    height, width = bufs.shape
    flow = FlowField.invalid(width, height)
    hit = (bufs.instance != 0) & np.isfinite(bufs.depth)
    if not hit.any():
        return flow
    rows, cols = np.nonzero(hit)
    depth = bufs.depth[rows, cols].astype(np.float64)
    ids = bufs.instance[rows, cols].astype(np.int64)
    points = transform_points(camera, pixel_rays(K)[rows, cols] * depth[:, None])

    moved = np.empty_like(points)
    known = np.ones(len(ids), dtype=bool)
    for entity_id in np.unique(ids):
        sel = ids == entity_id
        try:
            moved[sel] = transform_points(backward_motion(int(entity_id), world, world_prev), points[sel])
        except MissingPreviousPose as exc:
            logger.debug("%s; its pixels get no flow", exc)
            known[sel] = False

    previous = transform_points(world_to_camera(camera_prev), moved)
    z = previous[:, 2]
    in_front = known & (z >= K.near)
    uv = np.full((len(z), 2), np.nan)
    uv[in_front] = project_points(K, previous[in_front])
    u_prev, v_prev = uv[:, 0], uv[:, 1]
    with np.errstate(invalid='ignore'):
        on_image = in_front & (u_prev >= 0) & (u_prev <= width) & (v_prev >= 0) & (v_prev <= height)

    rows, cols = rows[on_image], cols[on_image]
    flow.u[rows, cols] = cols + 0.5 - u_prev[on_image]
    flow.v[rows, cols] = rows + 0.5 - v_prev[on_image]
    flow.valid[rows, cols] = True
    return flow


def warp_consistency(flow, inst_t, inst_prev):
    """Fraction of valid pixels whose source position in frame t - 1 shows the same instance.

    A pixel counts as consistent when any of the four pixel centres around its
    source position carries its id. Returns 1.0 when no pixel is valid.
    """
    rows, cols = np.nonzero(flow.valid)
    if not len(rows):
        return 1.0
    height, width = flow.shape
    src_u = cols + 0.5 - flow.u[rows, cols]
    src_v = rows + 0.5 - flow.v[rows, cols]
    want = inst_t[rows, cols]
    col0 = np.floor(src_u - 0.5).astype(np.int64)
    row0 = np.floor(src_v - 0.5).astype(np.int64)
    consistent = np.zeros(len(rows), dtype=bool)
    for dr in (0, 1):
        for dc in (0, 1):
            r = np.clip(row0 + dr, 0, height - 1)
            c = np.clip(col0 + dc, 0, width - 1)
            consistent |= inst_prev[r, c] == want
    return float(consistent.mean())
