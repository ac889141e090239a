"""Deterministic software z-buffer.

Every covered (triangle, pixel) pair yields one 64-bit key

    float32 depth bits << 32 | instance id << 16 | triangle index in its mesh

and each pixel keeps the smallest key. Positive float32 values order like
their bit patterns, so the minimum is the nearest surface, with exact-depth
ties going to the lower instance id. Depth is compared at float32 precision:
surfaces of different instances within one float32 step of each other also
tie and go to the lower id. The result does not depend on the order
triangles are submitted in, on culling, or on how the image is split into
bands.
"""

import datetime
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pytz

from paralleleye.conf import pe_settings
from worldgen.classes import SKY_COLOR

from .camera import project_points, transform_points, world_to_camera
from .culling import bounding_sphere, select_lod, spheres_in_view
from .exceptions import InvalidRenderSettings
from .shading import AMBIENT, lambert
from .sun import capture_datetime, ephemeris_direction, sun_direction

logger = logging.getLogger(__name__)

WEATHERS = ('sunny', 'cloudy', 'rainy', 'foggy')
SUN_MODELS = ('simple', 'ephemeris')

BACKGROUND = np.uint64(0xFFFFFFFFFFFFFFFF)
MAX_MESH_TRIANGLES = 1 << 16
# candidate pixels and triangle rows per vectorised pass
CHUNK = 1 << 19
ROW_CHUNK = 1 << 16
# flatter edges bound no span
SLOPE_EPS = 1e-6


@dataclass(frozen=True)
class RenderSettings:
    weather: str = 'sunny'
    time_of_day: float = 12.0
    fog_beta: float = None
    draw_distance: float = 150.0
    culling: bool = True
    lod: bool = False
    lod_distances: tuple = None
    # per-frame seed for the rain overlay
    seed: int = 0
    sun_model: str = 'simple'
    latitude: float = 39.98
    longitude: float = 116.31
    capture_date: datetime.date = datetime.date(2017, 6, 21)
    timezone: str = 'Asia/Shanghai'
    bands: int = None

    def __post_init__(self):
        if self.fog_beta is None:
            object.__setattr__(self, 'fog_beta', float(pe_settings.FOG_BETA))
        if self.lod_distances is None:
            object.__setattr__(self, 'lod_distances', tuple(pe_settings.LOD_DISTANCES))
        if self.bands is None:
            object.__setattr__(self, 'bands', int(pe_settings.RENDER_BANDS))
        if self.weather not in WEATHERS:
            raise InvalidRenderSettings(f"unknown weather {self.weather!r}")
        if not 0 <= self.time_of_day < 24:
            raise InvalidRenderSettings(f"time of day {self.time_of_day} outside [0, 24)")
        if self.fog_beta < 0:
            raise InvalidRenderSettings("fog_beta must be non-negative")
        if self.draw_distance <= 0:
            raise InvalidRenderSettings("draw_distance must be positive")
        d1, d2 = self.lod_distances
        if not 0 <= d1 < d2:
            raise InvalidRenderSettings(f"LOD distances must satisfy 0 <= d1 < d2, got {self.lod_distances}")
        if self.bands < 1:
            raise InvalidRenderSettings("bands must be at least 1")
        if self.sun_model not in SUN_MODELS:
            raise InvalidRenderSettings(f"unknown sun model {self.sun_model!r}")
        if self.timezone not in pytz.all_timezones_set:
            raise InvalidRenderSettings(f"unknown timezone {self.timezone!r}")

    def sun(self):
        if self.sun_model == 'ephemeris':
            when = capture_datetime(self.capture_date, self.time_of_day, self.timezone)
            return ephemeris_direction(when, self.latitude, self.longitude)
        return sun_direction(self.time_of_day)


@dataclass(frozen=True, eq=False)
class FrameBuffers:
    rgb: np.ndarray        # (H, W, 3) uint8
    depth: np.ndarray      # (H, W) float32 meters, inf where nothing was hit
    instance: np.ndarray   # (H, W) uint32, 0 = background
    classes: np.ndarray    # (H, W) uint16

    @property
    def shape(self):
        return self.depth.shape

    @classmethod
    def empty(cls, width, height):
        rgb = np.empty((height, width, 3), dtype=np.uint8)
        rgb[:] = SKY_COLOR
        return cls(rgb, np.full((height, width), np.inf, dtype=np.float32),
                   np.zeros((height, width), dtype=np.uint32), np.zeros((height, width), dtype=np.uint16))


@dataclass(frozen=True, eq=False)
class PackedGeometry:
    """World-space triangles of a set of entities, in entity order."""
    triangles: np.ndarray   # (T, 3, 3)
    instance: np.ndarray    # (T,) uint64
    class_id: np.ndarray    # (T,) uint16
    local: np.ndarray       # (T,) uint64, index within the entity's mesh
    base: np.ndarray        # (T, 3) float64 colour
    normals: np.ndarray     # (T, 3) unit world normals
    entity_ids: np.ndarray  # (E,)
    counts: np.ndarray      # (E,) triangles per entity
    centers: np.ndarray     # (E, 3) bounding spheres
    radii: np.ndarray       # (E,)

    def __len__(self):
        return len(self.instance)

    @classmethod
    def empty(cls):
        return cls(np.empty((0, 3, 3)), np.empty(0, np.uint64), np.empty(0, np.uint16),
                   np.empty(0, np.uint64), np.empty((0, 3)), np.empty((0, 3)),
                   np.empty(0, np.int64), np.empty(0, np.int64), np.empty((0, 3)), np.empty(0))


def pack_entities(entities, levels=None):
    levels = levels or [0] * len(entities)
    parts = []
    for entity, level in zip(entities, levels):
        mesh = entity.mesh_for_lod(level)
        count = len(mesh.triangles)
        if count == 0:
            continue
        if count > MAX_MESH_TRIANGLES:
            raise ValueError(f"entity {entity.id} has {count} triangles; at most {MAX_MESH_TRIANGLES} fit a key")
        if tuple(entity.position) == (0.0, 0.0, 0.0) and entity.yaw == 0.0:
            vertices = mesh.vertices
        else:
            vertices = transform_points(entity.pose_matrix(), mesh.vertices)
        parts.append((entity, vertices[mesh.triangles], count, bounding_sphere(vertices)))
    if not parts:
        return PackedGeometry.empty()

    triangles = np.concatenate([p[1] for p in parts])
    counts = np.array([p[2] for p in parts], dtype=np.int64)
    normals = np.cross(triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0])
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    return PackedGeometry(
        triangles=triangles,
        instance=np.repeat(np.array([p[0].id for p in parts], dtype=np.uint64), counts),
        class_id=np.repeat(np.array([p[0].class_id for p in parts], dtype=np.uint16), counts),
        local=np.concatenate([np.arange(c, dtype=np.uint64) for c in counts]),
        base=np.repeat(np.array([p[0].color for p in parts], dtype=np.float64), counts, axis=0),
        normals=normals,
        entity_ids=np.array([p[0].id for p in parts], dtype=np.int64),
        counts=counts,
        centers=np.array([p[3][0] for p in parts]),
        radii=np.array([p[3][1] for p in parts]),
    )


def concat_packed(*packs):
    packs = [p for p in packs if len(p)]
    if not packs:
        return PackedGeometry.empty()
    if len(packs) == 1:
        return packs[0]
    return PackedGeometry(**{
        name: np.concatenate([getattr(p, name) for p in packs])
        for name in PackedGeometry.__dataclass_fields__
    })


def lod_levels(vehicles, eye, lod_distances):
    return [
        select_lod(float(np.linalg.norm(np.asarray(v.position) - eye)), lod_distances) if v.lods else 0
        for v in vehicles
    ]


def scene_geometry(world, camera, settings):
    """Packed geometry of every visible entity; static geometry is packed once per world."""
    static = world.cache.get('static')
    if static is None:
        static = world.cache['static'] = pack_entities([e for e in world.static if e.visible])
    vehicles = [e for e in world.vehicles if e.visible]
    levels = lod_levels(vehicles, np.asarray(camera)[:3, 3], settings.lod_distances) if settings.lod else None
    return concat_packed(static, pack_entities(vehicles, levels))


def clip_near(triangle, near):
    """Clip a camera-space triangle to z >= near; returns a fan of triangles."""
    polygon = []
    for i in range(3):
        p, q = triangle[i], triangle[(i + 1) % 3]
        p_in, q_in = p[2] >= near, q[2] >= near
        if p_in:
            polygon.append(p)
        if p_in != q_in:
            t = (near - p[2]) / (q[2] - p[2])
            r = p + t * (q - p)
            r[2] = near
            polygon.append(r)
    return [(polygon[0], polygon[k], polygon[k + 1]) for k in range(1, len(polygon) - 1)]


@dataclass(frozen=True, eq=False)
class ScreenTriangles:
    u: np.ndarray       # (n, 3) vertex columns, positive screen area
    v: np.ndarray
    inv_z: np.ndarray   # (n, 3)
    area: np.ndarray    # (n,)
    top_left: np.ndarray  # (n, 3) for edges b->c, c->a, a->b
    x0: np.ndarray      # pixel bounding boxes, inclusive
    x1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    instance: np.ndarray
    local: np.ndarray

    def __len__(self):
        return len(self.area)


def setup_triangles(packed, rows, view, K, far):
    """Camera transform, back-face rejection, near clipping and projection."""
    tri = transform_points(view, packed.triangles[rows])
    if len(tri):
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
        front = np.einsum('ij,ij->i', np.cross(b - a, c - a), a) < 0
        z = tri[:, :, 2]
        keep = front & (z.max(axis=1) >= K.near) & (z.min(axis=1) <= far)
        tri, rows = tri[keep], rows[keep]

    straddle = tri[:, :, 2].min(axis=1) < K.near if len(tri) else np.zeros(0, bool)
    if straddle.any():
        pieces, parents = [], []
        for triangle, row in zip(tri[straddle], rows[straddle]):
            for piece in clip_near(triangle.copy(), K.near):
                pieces.append(piece)
                parents.append(row)
        tri = np.concatenate([tri[~straddle], np.array(pieces, dtype=np.float64).reshape(-1, 3, 3)])
        rows = np.concatenate([rows[~straddle], np.array(parents, dtype=rows.dtype)])

    uv = project_points(K, tri) if len(tri) else np.empty((0, 3, 2))
    u, v = uv[..., 0], uv[..., 1]
    inv_z = 1.0 / tri[:, :, 2] if len(tri) else np.empty((0, 3))
    area = (u[:, 1] - u[:, 0]) * (v[:, 2] - v[:, 0]) - (v[:, 1] - v[:, 0]) * (u[:, 2] - u[:, 0])
    # orient every triangle to positive screen area
    flip = area < 0
    for arr in (u, v, inv_z):
        arr[flip, 1], arr[flip, 2] = arr[flip, 2], arr[flip, 1].copy()
    area = np.abs(area)

    x0 = np.clip(np.ceil(u.min(axis=1) - 0.5), 0, K.width)
    x1 = np.clip(np.floor(u.max(axis=1) - 0.5), -1, K.width - 1)
    y0 = np.clip(np.ceil(v.min(axis=1) - 0.5), 0, K.height)
    y1 = np.clip(np.floor(v.max(axis=1) - 0.5), -1, K.height - 1)
    keep = (area > 0) & (x0 <= x1) & (y0 <= y1)

    u, v, inv_z, area, rows = u[keep], v[keep], inv_z[keep], area[keep], rows[keep]
    dx = u[:, [2, 0, 1]] - u[:, [1, 2, 0]]
    dy = v[:, [2, 0, 1]] - v[:, [1, 2, 0]]
    return ScreenTriangles(
        u=u, v=v, inv_z=inv_z, area=area,
        top_left=((dy == 0) & (dx > 0)) | (dy < 0),
        x0=x0[keep].astype(np.int64), x1=x1[keep].astype(np.int64),
        y0=y0[keep].astype(np.int64), y1=y1[keep].astype(np.int64),
        instance=packed.instance[rows], local=packed.local[rows],
    )


def _edge(x0, y0, x1, y1, px, py):
    return (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)


def _expand(counts):
    """Owner and offset of every item when owner k has counts[k] items."""
    which = np.repeat(np.arange(len(counts)), counts)
    offset = np.arange(len(which)) - np.repeat(np.cumsum(counts) - counts, counts)
    return which, offset


def _chunks(counts, limit):
    """Consecutive slices of counts whose sums stay near limit (a single count may exceed it)."""
    cumulative = np.cumsum(counts)
    start = 0
    while start < len(counts):
        before = cumulative[start] - counts[start]
        stop = max(int(np.searchsorted(cumulative, before + limit, side='right')), start + 1)
        yield slice(start, stop)
        start = stop


def row_spans(s, idx, y0, y1):
    """Candidate pixel spans of triangles idx over rows y0..y1.

    Each span covers the pixel centres of one row inside all three edge
    half-planes, widened by one pixel on both sides and clipped to the
    triangle's bounding box; the exact inside test runs later.
    """
    which, offset = _expand(y1 - y0 + 1)
    t = idx[which]
    py = y0[which] + offset
    fy = (py + 0.5)[:, None]
    # edges b->c, c->a, a->b as e(fx) = c + m * fx
    xs, ys = s.u[t][:, [1, 2, 0]], s.v[t][:, [1, 2, 0]]
    xe, ye = s.u[t][:, [2, 0, 1]], s.v[t][:, [2, 0, 1]]
    m = ys - ye
    c = (xe - xs) * (fy - ys) - m * xs
    steep = np.abs(m) > SLOPE_EPS
    with np.errstate(divide='ignore', invalid='ignore'):
        root = -c / m
    lo = np.where(steep & (m > 0), root, -np.inf).max(axis=1)
    hi = np.where(steep & (m < 0), root, np.inf).min(axis=1)
    x0 = np.clip(np.ceil(lo - 0.5) - 1, s.x0[t], s.x1[t] + 1).astype(np.int64)
    x1 = np.clip(np.floor(hi - 0.5) + 1, s.x0[t] - 1, s.x1[t]).astype(np.int64)
    widths = x1 - x0 + 1
    keep = widths > 0
    return t[keep], py[keep], x0[keep], widths[keep]


def _fill(keys, s, t, py, x0, widths, row0, width, far):
    which, offset = _expand(widths)
    px = x0[which] + offset
    py = py[which]
    t = t[which]
    fx, fy = px + 0.5, py + 0.5

    au, bu, cu = s.u[t, 0], s.u[t, 1], s.u[t, 2]
    av, bv, cv = s.v[t, 0], s.v[t, 1], s.v[t, 2]
    e0 = _edge(bu, bv, cu, cv, fx, fy)
    e1 = _edge(cu, cv, au, av, fx, fy)
    e2 = _edge(au, av, bu, bv, fx, fy)
    tl = s.top_left[t]
    inside = (((e0 > 0) | ((e0 == 0) & tl[:, 0]))
              & ((e1 > 0) | ((e1 == 0) & tl[:, 1]))
              & ((e2 > 0) | ((e2 == 0) & tl[:, 2])))
    if not inside.any():
        return
    t, px, py = t[inside], px[inside], py[inside]
    e0, e1, e2 = e0[inside], e1[inside], e2[inside]

    # 1/z is affine in screen space
    inv_z = (e0 * s.inv_z[t, 0] + e1 * s.inv_z[t, 1] + e2 * s.inv_z[t, 2]) / s.area[t]
    z = 1.0 / inv_z
    near_enough = z <= far
    t, px, py, z = t[near_enough], px[near_enough], py[near_enough], z[near_enough]

    depth_bits = z.astype(np.float32).view(np.uint32).astype(np.uint64)
    key = (depth_bits << np.uint64(32)) | (s.instance[t] << np.uint64(16)) | s.local[t]
    np.minimum.at(keys, (py - row0) * width + px, key)


def raster_band(s, row0, row1, width, far):
    """Resolve the z-buffer keys of image rows [row0, row1)."""
    keys = np.full((row1 - row0) * width, BACKGROUND, dtype=np.uint64)
    y0 = np.maximum(s.y0, row0)
    y1 = np.minimum(s.y1, row1 - 1)
    idx = np.nonzero(y0 <= y1)[0]
    if not len(idx):
        return keys
    y0, y1 = y0[idx], y1[idx]
    for rows in _chunks(y1 - y0 + 1, ROW_CHUNK):
        t, py, x0, widths = row_spans(s, idx[rows], y0[rows], y1[rows])
        for spans in _chunks(widths, CHUNK):
            _fill(keys, s, t[spans], py[spans], x0[spans], widths[spans], row0, width, far)
    return keys


def resolve_keys(s, K, far, bands=1):
    ranges = [(r[0], r[-1] + 1) for r in np.array_split(np.arange(K.height), min(bands, K.height)) if len(r)]
    if len(ranges) == 1:
        keys = raster_band(s, 0, K.height, K.width, far)
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            parts = list(pool.map(lambda r: raster_band(s, r[0], r[1], K.width, far), ranges))
        keys = np.concatenate(parts)
    return keys.reshape(K.height, K.width)


def decode(keys, packed, settings):
    buffers = FrameBuffers.empty(keys.shape[1], keys.shape[0])
    hit = keys != BACKGROUND
    if not hit.any():
        return buffers
    winners = keys[hit]
    buffers.depth[hit] = (winners >> np.uint64(32)).astype(np.uint32).view(np.float32)
    instance = ((winners >> np.uint64(16)) & np.uint64(0xFFFF)).astype(np.int64)
    buffers.instance[hit] = instance

    starts = np.cumsum(packed.counts) - packed.counts
    lookup = np.zeros(int(packed.entity_ids.max()) + 1, dtype=np.int64)
    lookup[packed.entity_ids] = starts
    rows = lookup[instance] + (winners & np.uint64(0xFFFF)).astype(np.int64)
    buffers.classes[hit] = packed.class_id[rows]

    unique, inverse = np.unique(rows, return_inverse=True)
    if settings.weather == 'cloudy':
        # overcast: ambient term only
        colors = np.clip(np.rint(AMBIENT * packed.base[unique]), 0, 255).astype(np.uint8)
    else:
        colors = lambert(packed.base[unique], packed.normals[unique], settings.sun())
    buffers.rgb[hit] = colors[inverse.reshape(-1)]
    return buffers


def rasterize(world, camera, K, settings, bands=None):
    """Render RGB, depth, instance and class buffers of world seen from camera.

    camera is the 4x4 camera-to-world transform.
    """
    camera = np.asarray(camera, dtype=np.float64)
    bands = settings.bands if bands is None else bands
    far = settings.draw_distance
    packed = scene_geometry(world, camera, settings)
    view = world_to_camera(camera)
    rows = np.arange(len(packed))
    if settings.culling and len(packed):
        keep = spheres_in_view(transform_points(view, packed.centers), packed.radii, K, far)
        rows = rows[np.repeat(keep, packed.counts)]
    screen = setup_triangles(packed, rows, view, K, far)
    logger.debug("frame %s: %d of %d triangles reach the screen", world.frame, len(screen), len(packed))
    return decode(resolve_keys(screen, K, far, bands), packed, settings)
