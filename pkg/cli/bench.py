"""Rendering throughput on a synthetic city."""

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from mapio.synthetic import synthetic_grid
from paralleleye import seeds
from paralleleye.conf import pe_settings
from render.camera import intrinsics_from_fov
from render.raster import RenderSettings, rasterize
from worldgen.scenario import get_preset
from worldgen.world import build_world, camera_pose, step

logger = logging.getLogger(__name__)

BUFFERS = ('rgb', 'depth', 'instance', 'classes')


@dataclass(frozen=True)
class BenchConfig:
    preset: str = 'PE01'
    seed: int = None
    frames: int = 20
    resolution: tuple = None
    blocks: int = 4
    culling: bool = True
    lod: bool = True
    verify: bool = False
    bands: int = None

    @classmethod
    def from_form(cls, cleaned):
        given = {k: v for k, v in cleaned.items() if v is not None and v != ''}
        return cls(**given)


def same_buffers(a, b):
    return all(np.array_equal(getattr(a, name), getattr(b, name)) for name in BUFFERS)


def run_bench(config):
    """Frames per second of rasterize() over a moving ego camera; with verify, culled vs unculled buffers."""
    seed = pe_settings.SEED if config.seed is None else config.seed
    preset = get_preset(config.preset)
    layout = synthetic_grid(config.blocks, config.blocks, seed=seeds.derive(seed, 'map'))
    overrides = {'resolution': config.resolution} if config.resolution else {}
    world = build_world(layout, preset, seed=seed, rig_overrides=overrides)
    width, height = world.rig.resolution
    K = intrinsics_from_fov(world.rig.fov_h, width, height)
    settings = RenderSettings(draw_distance=preset.draw_distance, culling=config.culling, lod=config.lod,
                              bands=config.bands)

    snapshots = []
    for frame in range(config.frames):
        world = step(world)
        snapshots.append((world, camera_pose(world.rig, world, frame % preset.sequence_count)))

    started = time.perf_counter()
    for snapshot, camera in snapshots:
        rasterize(snapshot, camera, K, settings)
    elapsed = time.perf_counter() - started

    invariant = None
    if config.verify:
        culled = replace(settings, culling=True, lod=False)
        unculled = replace(settings, culling=False, lod=False)
        invariant = all(
            same_buffers(rasterize(snapshot, camera, K, culled), rasterize(snapshot, camera, K, unculled))
            for snapshot, camera in snapshots
        )
        if not invariant:
            logger.warning("culled and unculled renders differ")

    report = {
        'frames_per_second': round(config.frames / elapsed, 3) if elapsed > 0 else None,
        'frames': config.frames,
        'entities': len(world.static) + len(world.vehicles),
        'resolution': [width, height],
        'culling': config.culling,
        'lod': config.lod,
        'culling_invariant': invariant,
    }
    logger.info("bench: %(frames)d frames at %(frames_per_second)s frames/s", report)
    return report
