from dataclasses import dataclass

from paralleleye.conf import pe_settings
from paralleleye.exceptions import ConfigError

from .masks import box_area

AREA_CLASSES = ('Small', 'Medium', 'Large')
OCCLUSION_CLASSES = ('Slightly', 'Partly', 'Largely')


@dataclass(frozen=True)
class ClassThresholds:
    small_area: int = 1024
    large_area: int = 9216
    occ_low: float = 0.1
    occ_high: float = 0.35

    def __post_init__(self):
        if not self.small_area < self.large_area:
            raise ConfigError("small_area must be below large_area")
        if not self.occ_low < self.occ_high:
            raise ConfigError("occ_low must be below occ_high")

    @classmethod
    def from_settings(cls):
        return cls(*pe_settings.CLASS_THRESHOLDS)


# boundary values fall to the middle class: the thresholds are strict

def classify_area(box, th=None):
    th = th or ClassThresholds.from_settings()
    area = box_area(box)
    if area < th.small_area:
        return 'Small'
    if area > th.large_area:
        return 'Large'
    return 'Medium'


def classify_occlusion(rate, th=None):
    th = th or ClassThresholds.from_settings()
    if rate < th.occ_low:
        return 'Slightly'
    if rate > th.occ_high:
        return 'Largely'
    return 'Partly'
