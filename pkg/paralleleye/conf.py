"""Access to the PARALLELEYE settings namespace with built-in fallbacks."""

from django.conf import settings

DEFAULTS = {
    'SEED': 20170924,
    'RESOLUTION': (640, 480),
    'FOV_H': 60.0,
    'CAMERA_HEIGHT': 1.5,
    'EGO_SPEED': 8.0,
    'DT': 0.1,
    'NEAR': 0.5,
    'FOG_BETA': 0.008,
    'LOD_DISTANCES': (50.0, 120.0),
    'CLASS_THRESHOLDS': (1024, 9216, 0.1, 0.35),
    'MIN_VISIBLE_PIXELS': 20,
    'MIN_BOX_SIDE': 2,
    'JOBS': 1,
    'RENDER_BANDS': 1,
}


class PipelineSettings:
    # read on every access so override_settings() in tests takes effect
    def __getattr__(self, name):
        if name not in DEFAULTS:
            raise AttributeError(f"unknown PARALLELEYE setting: {name}")
        user = getattr(settings, 'PARALLELEYE', None) or {}
        return user.get(name, DEFAULTS[name])


pe_settings = PipelineSettings()
