"""Pinhole camera model.

Camera frame: x right, y down, z forward. Image origin is the top-left
corner and pixel (col, row) has its centre at (col + 0.5, row + 0.5).
"""

import math
from dataclasses import dataclass

import numpy as np

from paralleleye.conf import pe_settings

from .exceptions import BehindCamera


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.5

    @property
    def size(self):
        return self.width, self.height


def intrinsics_from_fov(fov_h, width, height, near=None):
    if not 0 < fov_h < 180:
        raise ValueError(f"horizontal field of view must be in (0, 180) degrees, got {fov_h}")
    near = pe_settings.NEAR if near is None else near
    if near <= 0:
        raise ValueError("near plane must be positive")
    fx = (width / 2.0) / math.tan(math.radians(fov_h) / 2.0)
    return Intrinsics(fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0,
                      width=int(width), height=int(height), near=float(near))


def project_point(K, p_cam):
    x, y, z = p_cam
    if z < K.near:
        raise BehindCamera(z, K.near)
    return K.cx + K.fx * x / z, K.cy + K.fy * y / z


def unproject_point(K, uv, z):
    u, v = uv
    return (u - K.cx) * z / K.fx, (v - K.cy) * z / K.fy, z


def project_points(K, points):
    """Vectorised projection of (..., 3) camera-space points; no near test."""
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    return np.stack([K.cx + K.fx * points[..., 0] / z, K.cy + K.fy * points[..., 1] / z], axis=-1)


def pixel_rays(K):
    """(H, W, 3) camera-space points at depth 1 through every pixel centre."""
    u = (np.arange(K.width) + 0.5 - K.cx) / K.fx
    v = (np.arange(K.height) + 0.5 - K.cy) / K.fy
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv, np.ones_like(uu)], axis=-1)


def world_to_camera(camera):
    """Invert a rigid camera-to-world transform."""
    camera = np.asarray(camera, dtype=np.float64)
    rotation = camera[:3, :3]
    view = np.eye(4)
    view[:3, :3] = rotation.T
    view[:3, 3] = -rotation.T @ camera[:3, 3]
    return view


def transform_points(matrix, points):
    points = np.asarray(points, dtype=np.float64)
    return points @ matrix[:3, :3].T + matrix[:3, 3]
