"""The simulated world: static city, vehicles, ego car and camera rig."""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from mapio.layout import layout_bounds
from paralleleye import seeds
from paralleleye.conf import pe_settings

from . import meshes
from .classes import BASE_COLORS, CLASS_IDS
from .exceptions import ScenarioError, TriangulationFailure
from .scenario import make_rig
from .traffic import FOLLOW_LANE, ROTATE_IN_PLACE, LaneGeometry, VehicleAgent, place_vehicles

logger = logging.getLogger(__name__)

MAX_INSTANCE_ID = 0xFFFF
PROP_SPACING = 20.0
PROP_JITTER = 3.0
EGO_HEADWAY = 15.0
PROP_KINDS = (('vegetation', 0.5), ('fence', 0.2), ('traffic_sign', 0.2), ('traffic_light', 0.1))


@dataclass(frozen=True, eq=False)
class Entity:
    id: int
    cls: str
    mesh: meshes.Mesh
    position: tuple = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    color: tuple = (128, 128, 128)
    # coarser meshes for LOD 1 and 2; None means the entity has no LOD
    lods: tuple = None
    visible: bool = True

    @property
    def class_id(self):
        return CLASS_IDS[self.cls]

    def mesh_for_lod(self, level):
        if level == 0 or self.lods is None:
            return self.mesh
        return self.lods[level - 1]

    def pose_matrix(self):
        """4x4 local-to-world rigid transform."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        m = np.eye(4)
        m[:3, :3] = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
        m[:3, 3] = self.position
        return m


@dataclass(frozen=True, eq=False)
class World:
    static: tuple
    vehicles: tuple
    agents: tuple
    roads: tuple
    rig: object
    preset: object
    seed: int
    frame: int = 0
    dt: float = 0.1
    ego_speed: float = 8.0
    # renderer-owned caches of static geometry, shared between snapshots
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def entities(self):
        return self.static + self.vehicles

    def entity(self, entity_id):
        for entity in self.entities:
            if entity.id == entity_id:
                return entity
        raise KeyError(entity_id)

    def poses(self):
        return {e.id: e.pose_matrix() for e in self.vehicles}

    def isolate(self, entity_id):
        """Snapshot holding a single entity and nothing else."""
        entity = self.entity(entity_id)
        if entity in self.vehicles:
            return replace(self, static=(), vehicles=(entity,), cache={})
        return replace(self, static=(entity,), vehicles=(), cache={})

    def without(self, entity_ids):
        drop = set(entity_ids)
        return replace(
            self,
            static=tuple(e for e in self.static if e.id not in drop),
            vehicles=tuple(e for e in self.vehicles if e.id not in drop),
            cache={},
        )


def building_height(tags, seed):
    try:
        levels = int(tags.get('building:levels', ''))
    except ValueError:
        levels = 0
    if levels >= 1:
        return 3.0 * levels
    return float(seeds.rng(seed).uniform(6.0, 30.0))


def _jitter_color(base, rand, spread=12):
    return tuple(int(np.clip(c + rand.integers(-spread, spread + 1), 0, 255)) for c in base)


def _vehicle_color(seed, entity_id):
    rand = seeds.rng(seeds.derive(seed, 'color', entity_id))
    return tuple(int(c) for c in rand.integers(0, 256, size=3))


def _distance_to_polyline(point, points):
    px, py = point
    best = math.inf
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        dx, dy = x1 - x0, y1 - y0
        t = ((px - x0) * dx + (py - y0) * dy) / (dx * dx + dy * dy)
        t = min(1.0, max(0.0, t))
        best = min(best, math.hypot(px - (x0 + t * dx), py - (y0 + t * dy)))
    return best


def _place_props(roads, seed):
    """(kind, position, yaw) along both road edges, every PROP_SPACING meters."""
    props = []
    for road_index, road in enumerate(roads):
        lane = LaneGeometry(road)
        rand = seeds.rng(seeds.derive(seed, 'props', road_index))
        count = int(lane.length // PROP_SPACING)
        for k in range(count):
            for side in (1, -1):
                s = (k + 0.5) * PROP_SPACING + float(rand.uniform(-PROP_JITTER, PROP_JITTER))
                s = min(max(s, 0.0), lane.length - 1e-6)
                (x, y), (tx, ty) = lane.point(0, s)
                # lane.point already applied lane 0's offset; measure from the centerline
                offset = side * (road.width / 2.0 + 1.5) - lane.lane_offset(0)
                position = (x - ty * offset, y + tx * offset)
                u = rand.random()
                acc, kind = 0.0, PROP_KINDS[-1][0]
                for name, weight in PROP_KINDS:
                    acc += weight
                    if u < acc:
                        kind = name
                        break
                # keep props off every carriageway
                if any(_distance_to_polyline(position, r.centerline) < r.width / 2.0 + 0.5 for r in roads):
                    continue
                props.append((kind, position, math.atan2(ty, tx)))
    return props


def build_world(layout, preset, seed=None, rig_overrides=None):
    """Static city + traffic + ego rig for a layout and scenario preset."""
    seed = pe_settings.SEED if seed is None else seed
    rig_overrides = rig_overrides or {}
    if not layout.roads:
        raise ScenarioError("layout has no roads; the ego car needs a lane")
    next_id = 1
    static = []

    def add_static(cls, mesh, color):
        nonlocal next_id
        static.append(Entity(next_id, cls, mesh.with_ids(CLASS_IDS[cls], next_id), color=color))
        next_id += 1

    rand = seeds.rng(seeds.derive(seed, 'static-colors'))
    add_static('ground', meshes.ground_slab(layout_bounds(layout, margin=preset.draw_distance)), BASE_COLORS['ground'])
    for road in layout.roads:
        add_static('road', meshes.tessellate_road(road), _jitter_color(BASE_COLORS['road'], rand, 4))
    for index, fp in enumerate(layout.footprints):
        height = fp.height if fp.height else building_height(fp.tags, seeds.derive(seed, 'height', index))
        try:
            mesh = meshes.extrude_footprint(fp, height)
        except TriangulationFailure as exc:
            logger.warning("building %s skipped: %s", fp.way_id, exc)
            continue
        add_static('building', mesh, _jitter_color(BASE_COLORS['building'], rand))
    for kind, position, yaw in _place_props(layout.roads, seed):
        add_static(kind, meshes.prop_mesh(kind, position, yaw), _jitter_color(BASE_COLORS[kind], rand))

    behavior = ROTATE_IN_PLACE if preset.rotate_vehicles else FOLLOW_LANE
    agents = place_vehicles(layout.roads, preset.traffic_density, seeds.derive(seed, 'traffic'),
                            behavior=behavior, first_id=next_id)

    # ego drives lane 0 of the longest road; the rest of that lane moves with it,
    # keeping EGO_HEADWAY clear in front of the camera
    lanes = [LaneGeometry(r) for r in layout.roads]
    ego_road = max(range(len(lanes)), key=lambda i: (lanes[i].length, -i))
    ego_speed = pe_settings.EGO_SPEED
    ego_lane = [a for a in agents if a.road == ego_road and a.lane == 0]
    others = [a for a in agents if not (a.road == ego_road and a.lane == 0)]
    if behavior == FOLLOW_LANE and ego_lane:
        ego = replace(ego_lane[0], vehicle_class='car', speed=ego_speed)
        followers = [replace(a, speed=ego_speed) for a in ego_lane[1:]
                     if a.arc_position - ego.arc_position > EGO_HEADWAY]
    else:
        ego = None
        followers = []
    agents = others + followers
    if ego is None:
        ego_id = max([a.entity_id for a in agents], default=next_id - 1) + 1
        ego = _ego_agent(ego_id, ego_road, ego_speed)
    agents.append(ego)
    agents.sort(key=lambda a: a.entity_id)
    if agents and agents[-1].entity_id > MAX_INSTANCE_ID:
        raise ScenarioError(f"scene has more than {MAX_INSTANCE_ID} entities")

    vehicles = []
    for agent in agents:
        lods = meshes.vehicle_lods(agent.vehicle_class)
        detail = lods[0].with_ids(CLASS_IDS[agent.vehicle_class], agent.entity_id)
        entity = Entity(agent.entity_id, agent.vehicle_class, detail,
                        color=_vehicle_color(seed, agent.entity_id), lods=lods[1:],
                        visible=agent is not ego)
        vehicles.append(_pose_from_agent(entity, agent, lanes[agent.road], yaw=None))

    rig = make_rig(preset, ego.entity_id, **rig_overrides)
    world = World(
        static=tuple(static), vehicles=tuple(vehicles), agents=tuple(agents),
        roads=tuple(layout.roads), rig=rig, preset=preset, seed=seed,
        dt=pe_settings.DT, ego_speed=ego_speed,
    )
    logger.info("world built: %d static entities, %d vehicles, preset %s",
                len(static), len(vehicles), preset.name)
    return world


def _ego_agent(entity_id, road, speed):
    return VehicleAgent(entity_id, 'car', road, 0, 0.0, speed, FOLLOW_LANE)


def _pose_from_agent(entity, agent, lane, yaw):
    (x, y), (tx, ty) = lane.point(agent.lane, agent.arc_position)
    if yaw is None:
        yaw = math.atan2(ty, tx)
    return replace(entity, position=(x, y, 0.0), yaw=yaw)


def step(world, dt=None):
    """Advance every agent by dt seconds; returns a new snapshot."""
    dt = world.dt if dt is None else dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    lanes = {}
    frame = world.frame + 1
    recolor = world.preset.per_frame_color_change
    rand = seeds.rng(seeds.frame_seed(world.seed, frame)) if recolor else None

    agents, vehicles = [], []
    by_id = {e.id: e for e in world.vehicles}
    for agent in world.agents:
        lane = lanes.setdefault(agent.road, LaneGeometry(world.roads[agent.road]))
        entity = by_id[agent.entity_id]
        if agent.behavior == ROTATE_IN_PLACE:
            entity = replace(entity, yaw=entity.yaw + agent.spin_rate * dt)
        else:
            agent = replace(agent, arc_position=math.fmod(agent.arc_position + agent.speed * dt, lane.length))
            entity = _pose_from_agent(entity, agent, lane, yaw=None)
        if recolor and entity.visible:
            entity = replace(entity, color=tuple(int(c) for c in rand.integers(0, 256, size=3)))
        agents.append(agent)
        vehicles.append(entity)
    return replace(world, agents=tuple(agents), vehicles=tuple(vehicles), frame=frame)


def camera_pose(rig, world, yaw_offset_index):
    """4x4 camera-to-world transform; camera frame is x right, y down, z forward."""
    if not 0 <= yaw_offset_index < len(rig.yaw_offsets):
        raise IndexError(f"yaw offset index {yaw_offset_index} out of range")
    ego = world.entity(rig.ego_id)
    psi = ego.yaw + rig.yaw_offsets[yaw_offset_index]
    c, s = math.cos(psi), math.sin(psi)
    m = np.eye(4)
    m[:3, 0] = (s, -c, 0.0)     # right
    m[:3, 1] = (0.0, 0.0, -1.0)  # down
    m[:3, 2] = (c, s, 0.0)      # forward
    m[:3, 3] = (ego.position[0], ego.position[1], ego.position[2] + rig.height)
    return m


def world_manifest(world):
    counts = Counter(e.cls for e in world.entities if e.visible)
    lane_length = sum(LaneGeometry(r).length * r.lane_count for r in world.roads)
    return {
        'preset': world.preset.name,
        'seed': world.seed,
        'frame': world.frame,
        'entities': dict(sorted(counts.items())),
        'entity_count': sum(counts.values()),
        'agents': len(world.agents) - 1,
        'total_lane_length': round(lane_length, 3),
    }
