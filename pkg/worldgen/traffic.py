"""Vehicle placement and constant-speed lane following."""

import bisect
import logging
import math
from dataclasses import dataclass

from paralleleye import seeds

from .exceptions import NoRoadSpace
from .meshes import VEHICLE_DIMENSIONS

logger = logging.getLogger(__name__)

FOLLOW_LANE = 'follow_lane'
ROTATE_IN_PLACE = 'rotate_in_place'

SPARSE_GAP = (8.0, 30.0)
DENSE_GAP = (0.5, 2.0)
SPEED_RANGE = (5.0, 15.0)
SPIN_RANGE = (0.3, 1.2)
# car:bus:truck = 3:1:1
CLASS_MIX = (('car', 0.6), ('bus', 0.2), ('truck', 0.2))


@dataclass(frozen=True)
class VehicleAgent:
    entity_id: int
    vehicle_class: str
    road: int
    lane: int
    arc_position: float
    speed: float
    behavior: str = FOLLOW_LANE
    spin_rate: float = 0.0


class LaneGeometry:
    """Arc-length parametrisation of a road centerline."""

    def __init__(self, road):
        self.road = road
        self.points = [tuple(p) for p in road.centerline]
        self.cumulative = [0.0]
        for a, b in zip(self.points, self.points[1:]):
            self.cumulative.append(self.cumulative[-1] + math.dist(a, b))
        self.length = self.cumulative[-1]

    def lane_offset(self, lane_index):
        spacing = self.road.width / self.road.lane_count
        return (lane_index - (self.road.lane_count - 1) / 2.0) * spacing

    def point(self, lane_index, s):
        s = math.fmod(s, self.length)
        if s < 0:
            s += self.length
        k = min(bisect.bisect_right(self.cumulative, s) - 1, len(self.points) - 2)
        (x0, y0), (x1, y1) = self.points[k], self.points[k + 1]
        seg = self.cumulative[k + 1] - self.cumulative[k]
        tx, ty = (x1 - x0) / seg, (y1 - y0) / seg
        t = s - self.cumulative[k]
        offset = self.lane_offset(lane_index)
        # left normal is (-ty, tx)
        return (x0 + tx * t - ty * offset, y0 + ty * t + tx * offset), (tx, ty)


def lane_point(road, lane_index, s):
    """Position and unit tangent at arc length s of a lane; s wraps modulo the lane length."""
    return LaneGeometry(road).point(lane_index, s)


def _draw_class(rand):
    u = rand.random()
    acc = 0.0
    for name, weight in CLASS_MIX:
        acc += weight
        if u < acc:
            return name
    return CLASS_MIX[-1][0]


def _fill_lane(length, gap_range, rand):
    """Centre arc positions and classes for one lane; gaps hold across the wrap too."""
    min_gap = gap_range[0]
    shortest = min(d[0] for d in VEHICLE_DIMENSIONS.values())
    if length < shortest + min_gap:
        raise NoRoadSpace(f"lane of {length:.1f} m cannot hold a vehicle")
    placed = []
    start = 0.0
    while True:
        vehicle_class = _draw_class(rand)
        vehicle_length = VEHICLE_DIMENSIONS[vehicle_class][0]
        if start + vehicle_length + min_gap > length:
            break
        placed.append((start + vehicle_length / 2.0, vehicle_class))
        start += vehicle_length + float(rand.uniform(*gap_range))
    if not placed:
        raise NoRoadSpace(f"lane of {length:.1f} m cannot hold the drawn vehicle")
    return placed


def place_vehicles(roads, density, seed, behavior=FOLLOW_LANE, first_id=1):
    if density not in ('sparse', 'dense'):
        raise ValueError(f"density must be sparse or dense, got {density!r}")
    gap_range = SPARSE_GAP if density == 'sparse' else DENSE_GAP
    agents = []
    next_id = first_id
    for road_index, road in enumerate(roads):
        lane_length = LaneGeometry(road).length
        for lane in range(road.lane_count):
            rand = seeds.rng(seeds.derive(seed, 'placement', road_index, lane))
            try:
                placed = _fill_lane(lane_length, gap_range, rand)
            except NoRoadSpace as exc:
                logger.warning("road %d lane %d skipped: %s", road_index, lane, exc)
                continue
            speed = float(rand.uniform(*SPEED_RANGE))
            for arc, vehicle_class in placed:
                if behavior == ROTATE_IN_PLACE:
                    spin = float(rand.uniform(*SPIN_RANGE)) * (1 if rand.random() < 0.5 else -1)
                    agent = VehicleAgent(next_id, vehicle_class, road_index, lane, arc, 0.0, behavior, spin)
                else:
                    agent = VehicleAgent(next_id, vehicle_class, road_index, lane, arc, speed, behavior)
                agents.append(agent)
                next_id += 1
    logger.debug("placed %d vehicles (%s)", len(agents), density)
    return agents
