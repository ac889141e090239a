"""Dataset generation: map -> world -> per-frame rendering, ground truth and files.

Each yaw offset of the scenario is its own sequence, a separate pass over
the trajectory that starts from the same initial world and simulates one
leading step, so every exported frame has a predecessor for optical flow.
Frame ids are ``{sequence:02d}{frame:05d}``.

Frames are independent once their two world snapshots exist. Snapshots are
stepped in order, frames are rendered on a thread pool, and results are
collected in submission order, so the output does not depend on --jobs.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from dataset.frames import FramePaths, make_layout, write_frame_outputs
from dataset.index import DatasetIndex
from dataset.stats import compute_stats
from dataset.voc import VocRecord, object_from_observation
from groundtruth.annotate import annotate
from groundtruth.classify import ClassThresholds
from groundtruth.flow import compute_flow
from mapio.layout import extract_layout, load_layout_json
from mapio.osm import parse_osm
from mapio.synthetic import synthetic_grid
from paralleleye import seeds
from paralleleye.conf import pe_settings
from paralleleye.exceptions import IoFailure
from render.camera import intrinsics_from_fov
from render.raster import RenderSettings, rasterize
from render.weather import apply_weather
from worldgen.scenario import scenario_from_config
from worldgen.world import build_world, camera_pose, step, world_manifest

logger = logging.getLogger(__name__)

DEFAULT_FRAMES = 100
DEFAULT_BLOCKS = 3
SPLIT_NAME = 'trainval'


def _first(*values):
    return next((v for v in values if v is not None), None)


@dataclass(frozen=True)
class RunConfig:
    """One generate run. camera_height, fov_h, weather and time_of_day override every sequence when set."""
    out: Path
    scenario: object
    map_path: Path = None
    seed: int = None
    frames: int = DEFAULT_FRAMES
    # rig defaults from the scenario config: height, fov_h, resolution
    rig: dict = field(default_factory=dict)
    camera_height: float = None
    fov_h: float = None
    weather: str = None
    time_of_day: float = None
    sun_model: str = 'simple'
    blocks: int = DEFAULT_BLOCKS
    culling: bool = True
    jobs: int = None
    bands: int = None

    def __post_init__(self):
        if self.seed is None:
            object.__setattr__(self, 'seed', int(pe_settings.SEED))
        if self.jobs is None:
            object.__setattr__(self, 'jobs', int(pe_settings.JOBS))
        if self.bands is None:
            object.__setattr__(self, 'bands', int(pe_settings.RENDER_BANDS))

    @classmethod
    def from_form(cls, cleaned):
        scenario = cleaned['scenario']
        rig = {
            'height': scenario.get('camera_height'),
            'fov_h': scenario.get('fov_h'),
            'resolution': _first(cleaned.get('resolution'), scenario.get('resolution')),
        }
        return cls(
            out=Path(cleaned['out']),
            scenario=scenario_from_config(scenario),
            map_path=Path(cleaned['map']) if cleaned.get('map') else None,
            seed=cleaned.get('seed'),
            frames=_first(cleaned.get('frames'), DEFAULT_FRAMES),
            rig={k: v for k, v in rig.items() if v is not None},
            camera_height=cleaned.get('height'),
            fov_h=cleaned.get('fov'),
            weather=cleaned.get('weather') or None,
            time_of_day=cleaned.get('time_of_day'),
            sun_model=cleaned.get('sun_model') or 'simple',
            blocks=_first(cleaned.get('blocks'), DEFAULT_BLOCKS),
            culling=_first(cleaned.get('culling'), True),
            jobs=cleaned.get('jobs'),
            bands=cleaned.get('bands'),
        )

    def echo(self):
        """Everything that decides the generated content; out, jobs and bands do not."""
        scenario = asdict(self.scenario)
        scenario['yaw_offsets'] = [round(math.degrees(y), 9) for y in self.scenario.yaw_offsets]
        return {
            'scenario': scenario,
            'map': str(self.map_path) if self.map_path else None,
            'seed': self.seed,
            'frames': self.frames,
            'rig': {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.rig.items())},
            'camera_height': self.camera_height,
            'fov_h': self.fov_h,
            'weather': self.weather,
            'time_of_day': self.time_of_day,
            'sun_model': self.sun_model,
            'blocks': None if self.map_path else self.blocks,
            'culling': self.culling,
        }


@dataclass(frozen=True)
class SequencePlan:
    index: int
    frames: int
    weather: str
    time_of_day: float
    camera_height: float
    fov_h: float

    def image_id(self, frame):
        return f"{self.index:02d}{frame:05d}"


@dataclass(frozen=True, eq=False)
class FrameJob:
    image_id: str
    sequence: int
    world: object
    world_prev: object
    rig: object
    K: object
    settings: RenderSettings
    thresholds: ClassThresholds
    out: Path


def load_layout(map_path, seed, blocks=DEFAULT_BLOCKS):
    """Layout from an OSM XML or layout JSON file, or a synthetic grid city when map_path is None."""
    if map_path is None:
        return synthetic_grid(blocks, blocks, seed=seeds.derive(seed, 'map'))
    path = Path(map_path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise IoFailure(f"cannot read map {path}: {exc}") from exc
    if path.suffix.lower() == '.json':
        return load_layout_json(text)
    return extract_layout(parse_osm(text))


def frame_counts(total, sequences):
    """total frames spread over sequences, earlier sequences taking the remainder."""
    base, extra = divmod(total, sequences)
    return [base + (1 if s < extra else 0) for s in range(sequences)]


def plan_sequences(config, rig):
    plans = []
    counts = frame_counts(config.frames, config.scenario.sequence_count)
    for index, frames in enumerate(counts):
        weather, time_of_day, height, fov = config.scenario.sequence_conditions(index)
        plans.append(SequencePlan(
            index=index,
            frames=frames,
            weather=_first(config.weather, weather),
            time_of_day=_first(config.time_of_day, time_of_day),
            camera_height=_first(config.camera_height, height, rig.height),
            fov_h=_first(config.fov_h, fov, rig.fov_h),
        ))
    return plans


def sequence_jobs(config, world0, plan, thresholds):
    rig = replace(world0.rig, height=plan.camera_height, fov_h=plan.fov_h)
    width, height = rig.resolution
    K = intrinsics_from_fov(rig.fov_h, width, height)
    world_prev, world = world0, step(world0)
    for frame in range(plan.frames):
        settings = RenderSettings(
            weather=plan.weather,
            time_of_day=plan.time_of_day,
            draw_distance=rig.draw_distance,
            culling=config.culling,
            seed=seeds.derive(config.seed, 'frame', plan.index, frame),
            sun_model=config.sun_model,
            bands=config.bands,
        )
        yield FrameJob(plan.image_id(frame), plan.index, world, world_prev, rig, K, settings, thresholds, config.out)
        world_prev, world = world, step(world)


def render_frame(job):
    """Render, annotate and write one frame; returns its VOC record and annotation."""
    camera = camera_pose(job.rig, job.world, job.sequence)
    camera_prev = camera_pose(job.rig, job.world_prev, job.sequence)
    bufs = rasterize(job.world, camera, job.K, job.settings)
    flow = compute_flow(job.world, job.world_prev, camera, camera_prev, job.K, bufs)
    annotation = annotate(job.world, camera, job.K, job.settings, bufs, thresholds=job.thresholds)
    width, height = job.rig.resolution
    record = VocRecord(job.image_id, width, height, tuple(object_from_observation(o) for o in annotation.observations))
    write_frame_outputs(apply_weather(bufs, job.settings), flow, record, FramePaths(job.out, job.image_id))
    return record, annotation


def _render_all(jobs, workers):
    if workers <= 1:
        return [render_frame(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(render_frame, jobs))


def run_generate(config):
    """Generate a dataset under config.out; returns the manifest written to manifest.json."""
    started = time.perf_counter()
    layout = load_layout(config.map_path, config.seed, config.blocks)
    world0 = build_world(layout, config.scenario, seed=config.seed, rig_overrides=config.rig)
    plans = plan_sequences(config, world0.rig)
    thresholds = ClassThresholds.from_settings()
    make_layout(config.out)

    records, filtered = [], 0
    for plan in plans:
        logger.info("sequence %d: %d frames, %s at %.1f h", plan.index, plan.frames, plan.weather, plan.time_of_day)
        for record, annotation in _render_all(sequence_jobs(config, world0, plan, thresholds), config.jobs):
            records.append(record)
            filtered += annotation.filtered

    ids = tuple(r.image_id for r in records)
    provenance = {'source': 'generated', 'name': config.scenario.name, 'seed': config.seed}
    index = DatasetIndex.from_records(records, splits={SPLIT_NAME: ids}, provenance=provenance, root=config.out)
    elapsed = time.perf_counter() - started
    manifest = {
        'frame_count': len(records),
        'seed': config.seed,
        'config': config.echo(),
        'sequences': [asdict(p) for p in plans],
        'world': world_manifest(world0),
        'layout_warnings': list(layout.warnings),
        'stats': compute_stats(index, thresholds).to_dict(),
        'filtered_instances': filtered,
        # wall clock; the only part of the manifest that differs between reruns
        'timing': {
            'seconds': round(elapsed, 3),
            'frames_per_second': round(len(records) / elapsed, 3) if elapsed > 0 else None,
            'jobs': config.jobs,
            'bands': config.bands,
        },
    }
    index.save(config.out, manifest)
    logger.info("generated %d frames under %s in %.1f s", len(records), config.out, elapsed)
    return {'provenance': provenance, 'counts': index.to_dict(), **manifest}
