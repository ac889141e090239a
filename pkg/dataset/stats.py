from collections import Counter
from dataclasses import dataclass, field

from groundtruth.classify import AREA_CLASSES, OCCLUSION_CLASSES, ClassThresholds, classify_area, classify_occlusion


@dataclass(frozen=True)
class DatasetStats:
    image_count: int = 0
    class_counts: dict = field(default_factory=dict)
    # objects per image -> number of images
    instances_per_image: dict = field(default_factory=dict)
    area_classes: dict = field(default_factory=lambda: dict.fromkeys(AREA_CLASSES, 0))
    # None when some object carries no occ_rate
    occlusion_classes: dict = field(default_factory=lambda: dict.fromkeys(OCCLUSION_CLASSES, 0))

    @property
    def object_count(self):
        return sum(self.class_counts.values())

    def fraction(self, histogram, label):
        values = getattr(self, histogram)
        total = sum(values.values()) if values else 0
        return values[label] / total if total else 0.0

    @property
    def mean_instances(self):
        return self.object_count / self.image_count if self.image_count else 0.0

    def __add__(self, other):
        def add(a, b):
            return dict(sorted((Counter(a) + Counter(b)).items()))

        if self.occlusion_classes is None or other.occlusion_classes is None:
            occlusion = None
        else:
            occlusion = {k: self.occlusion_classes[k] + other.occlusion_classes[k] for k in OCCLUSION_CLASSES}
        return DatasetStats(
            image_count=self.image_count + other.image_count,
            class_counts=add(self.class_counts, other.class_counts),
            instances_per_image=add(self.instances_per_image, other.instances_per_image),
            area_classes={k: self.area_classes[k] + other.area_classes[k] for k in AREA_CLASSES},
            occlusion_classes=occlusion,
        )

    def to_dict(self):
        return {
            'images': self.image_count,
            'objects': self.object_count,
            'classes': self.class_counts,
            'instances_per_image': {str(k): v for k, v in self.instances_per_image.items()},
            'area': self.area_classes,
            'occlusion': self.occlusion_classes,
            'mean_instances_per_image': self.mean_instances,
        }


def compute_stats(index, thresholds=None):
    th = thresholds or ClassThresholds.from_settings()
    classes, per_image = Counter(), Counter()
    area = dict.fromkeys(AREA_CLASSES, 0)
    occlusion = dict.fromkeys(OCCLUSION_CLASSES, 0)
    for record in index.records.values():
        per_image[len(record.objects)] += 1
        for obj in record.objects:
            classes[obj.name] += 1
            area[classify_area(obj.bndbox, th)] += 1
            if occlusion is not None:
                if obj.occ_rate is None:
                    occlusion = None
                else:
                    occlusion[classify_occlusion(obj.occ_rate, th)] += 1
    return DatasetStats(
        image_count=len(index),
        class_counts=dict(sorted(classes.items())),
        instances_per_image=dict(sorted(per_image.items())),
        area_classes=area,
        occlusion_classes=occlusion,
    )
