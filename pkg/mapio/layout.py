"""Roads and building footprints in the local metric frame."""

import json
import logging
import math
from dataclasses import dataclass, field

from . import geometry
from .exceptions import DegenerateGeometry, LayoutError
from .osm import project_local

logger = logging.getLogger(__name__)

# meters; the lane count falls back to width / 3
ROAD_WIDTHS = {
    'motorway': 12.0,
    'primary': 9.0,
    'residential': 6.0,
}
DEFAULT_ROAD_WIDTH = 6.0


@dataclass(frozen=True)
class RoadSpec:
    centerline: tuple
    width: float
    lane_count: int
    way_id: int = None

    @property
    def length(self):
        return geometry.polyline_length(self.centerline)


@dataclass(frozen=True)
class FootprintSpec:
    polygon: tuple
    tags: dict = field(default_factory=dict)
    height: float = None
    way_id: int = None

    @property
    def area(self):
        return geometry.signed_area(self.polygon)


@dataclass
class Layout:
    roads: list
    footprints: list
    warnings: list = field(default_factory=list)


def road_width(tags):
    return ROAD_WIDTHS.get(tags.get('highway'), DEFAULT_ROAD_WIDTH)


def lane_count(tags, width):
    try:
        lanes = int(tags['lanes'])
    except (KeyError, ValueError):
        lanes = round(width / 3.0)
    return max(1, lanes)


def make_road(points, width, lanes, way_id=None):
    points = geometry.dedupe_consecutive([tuple(map(float, p)) for p in points])
    if len(points) < 2 or geometry.polyline_length(points) <= 0:
        raise DegenerateGeometry(way_id, 'road centerline has zero length')
    if width <= 0:
        raise DegenerateGeometry(way_id, 'road width must be positive')
    return RoadSpec(tuple(points), float(width), max(1, int(lanes)), way_id)


def make_footprint(points, tags=None, height=None, way_id=None):
    polygon = geometry.dedupe_consecutive([tuple(map(float, p)) for p in points])
    if len(polygon) > 1 and polygon[0] == polygon[-1]:
        polygon.pop()
    if len(polygon) < 3 or geometry.signed_area(polygon) == 0:
        raise DegenerateGeometry(way_id, 'footprint has zero area')
    if not geometry.is_simple(polygon):
        raise DegenerateGeometry(way_id, 'footprint self-intersects')
    return FootprintSpec(tuple(geometry.ensure_ccw(polygon)), dict(tags or {}), height, way_id)


def _skip(layout, exc):
    logger.warning("skipped entity: %s", exc)
    layout.warnings.append(str(exc))


def extract_layout(doc):
    layout = Layout(roads=[], footprints=[])
    for way in doc.ways:
        points = [project_local(*doc.nodes[ref], doc.origin) for ref in way.refs]
        try:
            if 'highway' in way.tags:
                width = road_width(way.tags)
                layout.roads.append(make_road(points, width, lane_count(way.tags, width), way.id))
            elif way.closed and 'building' in way.tags:
                layout.footprints.append(make_footprint(points, way.tags, way_id=way.id))
        except DegenerateGeometry as exc:
            _skip(layout, exc)
    logger.info("layout: %d roads, %d footprints, %d skipped",
                len(layout.roads), len(layout.footprints), len(layout.warnings))
    return layout


# native JSON layout:
# {"roads": [{"points": [[x, y], ...], "width": 6.0, "lanes": 2}],
#  "footprints": [{"points": [[x, y], ...], "height": 12.0, "tags": {...}}]}

def load_layout_json(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutError(f"invalid layout JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise LayoutError("layout JSON must be an object")
    layout = Layout(roads=[], footprints=[])
    try:
        for i, road in enumerate(data.get('roads', [])):
            width = float(road.get('width', DEFAULT_ROAD_WIDTH))
            lanes = road.get('lanes') or max(1, round(width / 3.0))
            try:
                layout.roads.append(make_road(road['points'], width, lanes, way_id=i))
            except DegenerateGeometry as exc:
                _skip(layout, exc)
        for i, fp in enumerate(data.get('footprints', [])):
            height = fp.get('height')
            try:
                layout.footprints.append(make_footprint(
                    fp['points'], fp.get('tags', {}),
                    float(height) if height is not None else None, way_id=i))
            except DegenerateGeometry as exc:
                _skip(layout, exc)
    except (KeyError, TypeError, ValueError) as exc:
        raise LayoutError(f"invalid layout JSON entry: {exc!r}") from exc
    return layout


def dump_layout_json(layout):
    data = {
        'roads': [
            {'points': [list(p) for p in r.centerline], 'width': r.width, 'lanes': r.lane_count}
            for r in layout.roads
        ],
        'footprints': [
            {'points': [list(p) for p in f.polygon], 'height': f.height, 'tags': f.tags}
            for f in layout.footprints
        ],
    }
    return json.dumps(data, indent=2)


def layout_bounds(layout, margin=0.0):
    xs, ys = [], []
    for road in layout.roads:
        xs.extend(p[0] for p in road.centerline)
        ys.extend(p[1] for p in road.centerline)
    for fp in layout.footprints:
        xs.extend(p[0] for p in fp.polygon)
        ys.extend(p[1] for p in fp.polygon)
    if not xs:
        return (-margin, -margin, margin, margin)
    return (min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin)


def total_road_length(layout):
    return math.fsum(r.length for r in layout.roads)
