"""Sun direction for Lambert shading.

Two models: the declared sunrise-to-sunset arc (``sun_direction``), and an
ephemeris model giving the real solar position over the map for a local
capture date and time. Directions are unit vectors in the world frame
(x east, y north, z up), pointing from the ground towards the sun.
"""

import datetime
import math

import numpy as np
import pytz

SUNRISE = 6.0
SUNSET = 18.0


def sun_direction(time_of_day):
    """Sun arc with its zenith at noon; night is treated as horizon light."""
    if not 0 <= time_of_day < 24:
        raise ValueError(f"time of day must be in [0, 24), got {time_of_day}")
    t = min(max(time_of_day, SUNRISE), SUNSET)
    phase = math.pi * (t - SUNRISE) / 12.0
    elevation = math.radians(90.0 * math.sin(phase)) if SUNRISE <= time_of_day <= SUNSET else 0.0
    # east at sunrise, south at noon, west at sunset
    hx, hy = math.cos(phase), -math.sin(phase)
    return np.array([math.cos(elevation) * hx, math.cos(elevation) * hy, math.sin(elevation)])


def elevation_degrees(direction):
    return math.degrees(math.asin(max(-1.0, min(1.0, float(direction[2])))))


# ---------------------- ephemeris model ----------------------------

def _sin(d): return math.sin(math.radians(d))
def _cos(d): return math.cos(math.radians(d))
def _arcsin(x): return math.degrees(math.asin(x))
def _arctan2(y, x): return math.degrees(math.atan2(y, x))


def _fix(a, mode):
    a = a - mode * (math.floor(a / mode))
    return a + mode if a < 0 else a


def julian(year, month, day):
    """Julian day at 0h UT of a Gregorian date (Meeus)."""
    if month <= 2:
        year -= 1
        month += 12
    a = math.floor(year / 100)
    b = 2 - a + math.floor(a / 4)
    return math.floor(365.25 * (year + 4716)) + math.floor(30.6001 * (month + 1)) + day + b - 1524.5


def sun_position(jd):
    """Declination (degrees) and equation of time (hours) at a Julian day.

    Low-precision almanac formulas, good to about a minute of arc.
    """
    d = jd - 2451545.0
    g = _fix(357.529 + 0.98560028 * d, 360.0)
    q = _fix(280.459 + 0.98564736 * d, 360.0)
    ecliptic_lon = _fix(q + 1.915 * _sin(g) + 0.020 * _sin(2 * g), 360.0)
    obliquity = 23.439 - 0.00000036 * d

    right_ascension = _arctan2(_cos(obliquity) * _sin(ecliptic_lon), _cos(ecliptic_lon)) / 15.0
    eqt = q / 15.0 - _fix(right_ascension, 24.0)
    decl = _arcsin(_sin(obliquity) * _sin(ecliptic_lon))
    # eqt wraps around 24h
    if eqt > 12:
        eqt -= 24.0
    elif eqt < -12:
        eqt += 24.0
    return decl, eqt


def capture_datetime(date, time_of_day, timezone):
    """Aware datetime for a local wall-clock time of day on date."""
    tz = pytz.timezone(timezone)
    seconds = round(time_of_day * 3600)
    naive = datetime.datetime.combine(date, datetime.time()) + datetime.timedelta(seconds=seconds)
    return tz.localize(naive)


def ephemeris_direction(when, latitude, longitude):
    """Solar direction over (latitude, longitude) at an aware datetime."""
    if when.tzinfo is None:
        raise ValueError("capture datetime must be timezone-aware")
    utc = when.astimezone(pytz.utc)
    hours = utc.hour + utc.minute / 60.0 + utc.second / 3600.0
    jd = julian(utc.year, utc.month, utc.day) + hours / 24.0
    decl, eqt = sun_position(jd)
    hour_angle = 15.0 * (hours + longitude / 15.0 + eqt - 12.0)

    east = -_cos(decl) * _sin(hour_angle)
    north = _cos(latitude) * _sin(decl) - _sin(latitude) * _cos(decl) * _cos(hour_angle)
    up = _sin(latitude) * _sin(decl) + _cos(latitude) * _cos(decl) * _cos(hour_angle)
    if up < 0:
        # below the horizon: keep the azimuth, light from the horizon
        horizontal = math.hypot(east, north)
        return np.array([east / horizontal, north / horizontal, 0.0])
    return np.array([east, north, up])
