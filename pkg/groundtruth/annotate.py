import logging
from dataclasses import dataclass, field

import numpy as np

from paralleleye.conf import pe_settings
from worldgen.classes import CLASS_NAMES, VEHICLE_CLASSES

from .classify import ClassThresholds, classify_area, classify_occlusion
from .exceptions import FullyOutOfView
from .masks import box_size, instance_masks, tight_bbox
from .occlusion import rate_from_counts, solo_extent, truncation_flag

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InstanceObservation:
    instance_id: int
    cls: str
    visible_pixels: int
    solo_pixels: int
    bbox_visible: tuple
    bbox_full: tuple
    occlusion_rate: float
    truncated: bool
    area_class: str
    occlusion_class: str


@dataclass(frozen=True)
class FrameAnnotation:
    """Box annotations of one frame plus per-class segmentation pixel counts."""
    observations: tuple
    class_pixels: dict = field(default_factory=dict)
    # vehicle instances seen but dropped by the inclusion filter
    filtered: int = 0

    def by_class(self):
        counts = {}
        for obs in self.observations:
            counts[obs.cls] = counts.get(obs.cls, 0) + 1
        return counts


def passes_filter(extent, min_visible=None, min_side=None):
    min_visible = pe_settings.MIN_VISIBLE_PIXELS if min_visible is None else min_visible
    min_side = pe_settings.MIN_BOX_SIDE if min_side is None else min_side
    width, height = box_size(tight_bbox(extent))
    return extent.count >= min_visible and width >= min_side and height >= min_side


def annotate(world, camera, K, settings, bufs, thresholds=None, min_visible=None, min_side=None):
    th = thresholds or ClassThresholds.from_settings()
    masks = instance_masks(bufs)
    observations, filtered = [], 0
    for instance_id in sorted(masks):
        entity = world.entity(instance_id)
        if entity.cls not in VEHICLE_CLASSES:
            continue
        extent = masks[instance_id]
        if not passes_filter(extent, min_visible, min_side):
            filtered += 1
            continue
        solo = solo_extent(world, camera, K, settings, instance_id)
        if solo is None:
            # cannot happen for an instance visible in the full render
            logger.warning("%s; annotation skipped", FullyOutOfView(instance_id))
            continue
        rate = rate_from_counts(extent.count, solo.count)
        box = tight_bbox(extent)
        observations.append(InstanceObservation(
            instance_id=instance_id,
            cls=entity.cls,
            visible_pixels=extent.count,
            solo_pixels=solo.count,
            bbox_visible=box,
            bbox_full=tight_bbox(solo),
            occlusion_rate=rate,
            truncated=truncation_flag(world, camera, K, instance_id, settings),
            area_class=classify_area(box, th),
            occlusion_class=classify_occlusion(rate, th),
        ))
    classes, counts = np.unique(bufs.classes[bufs.classes != 0], return_counts=True)
    class_pixels = {CLASS_NAMES[int(c)]: int(n) for c, n in zip(classes, counts)}
    if filtered:
        logger.debug("frame %s: %d vehicles below the inclusion filter", world.frame, filtered)
    return FrameAnnotation(tuple(observations), class_pixels, filtered)


def annotate_frame(world, camera, K, settings, bufs, **kwargs):
    """Observations of every vehicle instance passing the inclusion filter, by instance id."""
    return list(annotate(world, camera, K, settings, bufs, **kwargs).observations)
