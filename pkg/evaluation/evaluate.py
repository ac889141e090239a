import logging
from dataclasses import dataclass

from worldgen.classes import VEHICLE_CLASSES

from .exceptions import UnknownClass
from .metrics import TP, average_precision, match_detections

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassResult:
    cls: str
    ap: float           # None when the class has no ground truth
    npos: int
    detections: int
    true_positives: int

    def to_dict(self):
        return {'ap': self.ap, 'npos': self.npos, 'detections': self.detections, 'tp': self.true_positives}


def ground_truth(index, cls):
    return {
        image_id: [obj for obj in record.objects if obj.name == cls]
        for image_id, record in index.records.items()
    }


def evaluate(index, detections, config, classes=VEHICLE_CLASSES):
    """{class: ClassResult} over classes; a class without ground truth gets ap None."""
    known = set(classes) | {obj.name for r in index.records.values() for obj in r.objects}
    for det in detections:
        if det.cls not in known:
            raise UnknownClass(det.cls, known)

    results = {}
    for cls in classes:
        dets = [d for d in detections if d.cls == cls]
        match = match_detections(dets, ground_truth(index, cls), config)
        ap = average_precision(match.flags, match.npos, config) if match.npos else None
        results[cls] = ClassResult(cls, ap, match.npos, len(dets), match.flags.count(TP))
        if ap is None:
            logger.info("class %s has no ground truth; AP undefined", cls)
    return results


def mean_ap(results):
    aps = [r.ap for r in results.values() if r.ap is not None]
    return sum(aps) / len(aps) if aps else None


def format_ap_table(results):
    """Aligned plain-text table: class, AP (percent), positives, detections."""
    rows = [('class', 'AP', 'npos', 'dets')]
    for cls, res in results.items():
        rows.append((cls, '-' if res.ap is None else f"{100 * res.ap:.1f}", str(res.npos), str(res.detections)))
    mean = mean_ap(results)
    rows.append(('mean', '-' if mean is None else f"{100 * mean:.1f}", '', ''))
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = [
        '  '.join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))).rstrip()
        for row in rows
    ]
    return '\n'.join(lines) + '\n'
