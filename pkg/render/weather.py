"""Weather post-effects on the RGB buffer only."""

import numpy as np

from paralleleye import seeds

from .raster import FrameBuffers

FOG_GRAY = 200.0
RAIN_COLOR = (200.0, 200.0, 210.0)
RAIN_BRIGHTNESS = 0.8
CLOUDY_BRIGHTNESS = 0.7
# one streak per this many pixels
RAIN_DENSITY = 1500


def fog_factor(depth, fog_beta, draw_distance):
    """Blend weight towards the fog colour; background pixels count as draw_distance away."""
    distance = np.where(np.isfinite(depth), depth, draw_distance).astype(np.float64)
    return 1.0 - np.exp(-fog_beta * distance)


def _rain(rgb, seed):
    height, width = rgb.shape[:2]
    rand = seeds.rng(seeds.derive(seed, 'rain'))
    out = rgb * RAIN_BRIGHTNESS
    count = max(1, width * height // RAIN_DENSITY)
    cols = rand.integers(0, width, size=count)
    tops = rand.integers(-20, height, size=count)
    lengths = rand.integers(8, 21, size=count)
    mask = np.zeros((height, width), dtype=bool)
    for col, top, length in zip(cols, tops, lengths):
        mask[max(top, 0):max(top + length, 0), col] = True
    out[mask] = 0.5 * out[mask] + 0.5 * np.asarray(RAIN_COLOR)
    return out


def apply_weather(buffers, settings):
    """New buffers with the weather applied to rgb; depth, instance and class arrays are shared, never written."""
    weather = settings.weather
    if weather == 'sunny':
        return buffers
    rgb = buffers.rgb.astype(np.float64)
    if weather == 'foggy':
        f = fog_factor(buffers.depth, settings.fog_beta, settings.draw_distance)[..., None]
        rgb = rgb * (1.0 - f) + FOG_GRAY * f
    elif weather == 'rainy':
        rgb = _rain(rgb, settings.seed)
    elif weather == 'cloudy':
        rgb = rgb * CLOUDY_BRIGHTNESS
    rgb = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    return FrameBuffers(rgb=rgb, depth=buffers.depth, instance=buffers.instance, classes=buffers.classes)
