"""Scenario presets and the ego-mounted camera rig."""

import math
from dataclasses import dataclass, replace

from paralleleye.conf import pe_settings

from .exceptions import ScenarioError

WEATHERS = ('sunny', 'cloudy', 'rainy', 'foggy')


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    yaw_offsets: tuple          # radians
    traffic_density: str        # 'sparse' | 'dense'
    per_frame_color_change: bool
    rotate_vehicles: bool
    draw_distance: float
    # cycled over sequences
    weathers: tuple = ('sunny',)
    times_of_day: tuple = (12.0,)
    heights: tuple = ()
    fovs: tuple = ()

    def __post_init__(self):
        if self.traffic_density not in ('sparse', 'dense'):
            raise ScenarioError(f"traffic_density must be sparse or dense, got {self.traffic_density!r}")
        if not self.yaw_offsets:
            raise ScenarioError("at least one yaw offset is required")
        if self.draw_distance <= 0:
            raise ScenarioError("draw_distance must be positive")
        for weather in self.weathers:
            if weather not in WEATHERS:
                raise ScenarioError(f"unknown weather {weather!r}")
        for t in self.times_of_day:
            if not 0 <= t < 24:
                raise ScenarioError(f"time of day {t} outside [0, 24)")

    @property
    def sequence_count(self):
        return len(self.yaw_offsets)

    def sequence_conditions(self, sequence):
        """(weather, time_of_day, height or None, fov or None) of one sequence."""
        def pick(values):
            return values[sequence % len(values)] if values else None
        return pick(self.weathers), pick(self.times_of_day), pick(self.heights), pick(self.fovs)


def _deg(*values):
    return tuple(math.radians(v) for v in values)


PRESETS = {
    # multi-direction, long sight distance: many small objects
    'PE01': ScenarioPreset(
        name='PE01', yaw_offsets=_deg(0, 15, -15, 30, -30), traffic_density='sparse',
        per_frame_color_change=False, rotate_vehicles=False, draw_distance=300.0,
        weathers=('sunny', 'cloudy', 'foggy', 'rainy'), times_of_day=(12.0, 9.0, 15.0, 7.0, 17.0),
    ),
    # side-looking, rotating vehicles, no deliberate occlusion
    'PE02': ScenarioPreset(
        name='PE02', yaw_offsets=_deg(90, -90), traffic_density='sparse',
        per_frame_color_change=False, rotate_vehicles=True, draw_distance=150.0,
        weathers=('sunny', 'cloudy'), times_of_day=(10.0, 14.0),
    ),
    # forward-looking, crowded, colours change every frame
    'PE03': ScenarioPreset(
        name='PE03', yaw_offsets=_deg(0), traffic_density='dense',
        per_frame_color_change=True, rotate_vehicles=False, draw_distance=150.0,
        weathers=('sunny',), times_of_day=(12.0,),
    ),
}


@dataclass(frozen=True)
class CameraRig:
    ego_id: int
    height: float
    yaw_offsets: tuple
    fov_h: float
    resolution: tuple
    draw_distance: float

    def __post_init__(self):
        if not 0 < self.fov_h < 180:
            raise ScenarioError(f"fov_h must be in (0, 180), got {self.fov_h}")
        width, height = self.resolution
        if width < 16 or height < 16:
            raise ScenarioError(f"resolution must be at least 16x16, got {width}x{height}")
        if self.draw_distance <= 0:
            raise ScenarioError("draw_distance must be positive")


def make_rig(preset, ego_id, height=None, fov_h=None, resolution=None):
    return CameraRig(
        ego_id=ego_id,
        height=pe_settings.CAMERA_HEIGHT if height is None else height,
        yaw_offsets=preset.yaw_offsets,
        fov_h=pe_settings.FOV_H if fov_h is None else fov_h,
        resolution=tuple(resolution or pe_settings.RESOLUTION),
        draw_distance=preset.draw_distance,
    )


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def scenario_from_config(data):
    """Build a preset from a cleaned scenario config (see worldgen.forms.ScenarioForm).

    A "preset" key starts from that preset; every other key overrides it.
    Angles in the config are degrees.
    """
    base = get_preset(data['preset']) if data.get('preset') else None
    fields = {}
    if data.get('yaw_offsets') is not None:
        fields['yaw_offsets'] = _deg(*data['yaw_offsets'])
    for key in ('traffic_density', 'per_frame_color_change', 'rotate_vehicles', 'draw_distance'):
        # optional choice fields clean to ''
        if data.get(key) not in (None, ''):
            fields[key] = data[key]
    for key in ('weathers', 'times_of_day', 'heights', 'fovs'):
        if data.get(key) is not None:
            fields[key] = tuple(data[key])
    if base is not None:
        name = 'custom' if fields else base.name
        return replace(base, name=name, **fields)
    missing = {'yaw_offsets', 'traffic_density', 'draw_distance'} - fields.keys()
    if missing:
        raise ScenarioError(f"custom scenario is missing {', '.join(sorted(missing))}")
    fields.setdefault('per_frame_color_change', False)
    fields.setdefault('rotate_vehicles', False)
    return ScenarioPreset(name='custom', **fields)
