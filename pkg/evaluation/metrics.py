"""PASCAL VOC detection metrics.

Boxes are 1-based inclusive pixels, so a box covers
(xmax - xmin + 1) * (ymax - ymin + 1) pixels.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from paralleleye.exceptions import ConfigError

logger = logging.getLogger(__name__)

AP_MODES = ('voc2007_11pt', 'continuous')
RECALL_POINTS = np.arange(11) / 10.0

TP, FP, IGNORED = 'tp', 'fp', 'ignored'


@dataclass(frozen=True)
class Detection:
    image_id: str
    cls: str
    box: tuple
    confidence: float

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.box
        if not (xmin <= xmax and ymin <= ymax):
            raise ValueError(f"inverted box {tuple(self.box)}")
        if not math.isfinite(self.confidence):
            raise ValueError("confidence must be finite")


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    ap_mode: str = 'voc2007_11pt'
    ignore_difficult: bool = True

    def __post_init__(self):
        if not 0 < self.iou_threshold <= 1:
            raise ConfigError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if self.ap_mode not in AP_MODES:
            raise ConfigError(f"ap_mode must be one of {', '.join(AP_MODES)}")


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float


@dataclass(frozen=True, eq=False)
class MatchResult:
    flags: tuple        # TP / FP / IGNORED, in ranked order
    order: tuple        # indices into the input detections, ranked
    npos: int


def iou(a, b):
    ixmin, iymin = max(a[0], b[0]), max(a[1], b[1])
    ixmax, iymax = min(a[2], b[2]), min(a[3], b[3])
    iw, ih = ixmax - ixmin + 1, iymax - iymin + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0] + 1) * (a[3] - a[1] + 1) + (b[2] - b[0] + 1) * (b[3] - b[1] + 1) - inter
    return inter / union


def rank(detections):
    """Indices by confidence descending, then image id, then input order."""
    return sorted(range(len(detections)), key=lambda k: (-detections[k].confidence, detections[k].image_id, k))


def match_detections(dets, gts, config):
    """Greedy VOC matching of one class.

    gts maps image id to that image's ground-truth objects (anything with
    ``bndbox`` and ``difficult``). A detection takes the unmatched GT of
    highest IoU; difficult GTs are never consumed and their detections are
    ignored.
    """
    order = rank(dets)
    matched = {image_id: [False] * len(objs) for image_id, objs in gts.items()}
    flags = []
    for k in order:
        det = dets[k]
        objects = gts.get(det.image_id, ())
        best, best_iou = None, 0.0
        for j, obj in enumerate(objects):
            if matched[det.image_id][j]:
                continue
            overlap = iou(det.box, obj.bndbox)
            if overlap > best_iou:
                best, best_iou = j, overlap
        if best is None or best_iou < config.iou_threshold:
            flags.append(FP)
        elif config.ignore_difficult and objects[best].difficult:
            flags.append(IGNORED)
        else:
            matched[det.image_id][best] = True
            flags.append(TP)
    npos = sum(
        1 for objs in gts.values() for obj in objs
        if not (config.ignore_difficult and obj.difficult)
    )
    return MatchResult(tuple(flags), tuple(order), npos)


def pr_curve(flags, npos):
    """Cumulative (recall, precision) after each counted detection."""
    counted = [f for f in flags if f != IGNORED]
    tp = np.cumsum([f == TP for f in counted], dtype=np.float64)
    fp = np.cumsum([f == FP for f in counted], dtype=np.float64)
    if not len(counted) or npos == 0:
        return np.zeros(len(counted)), np.zeros(len(counted))
    recall = tp / npos
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
    return recall, precision


def pr_points(flags, npos):
    return [PRPoint(float(r), float(p)) for r, p in zip(*pr_curve(flags, npos))]


def average_precision(flags, npos, config):
    """AP of ranked TP/FP flags; booleans are read as TP (True) / FP (False)."""
    flags = [(TP if f else FP) if isinstance(f, (bool, np.bool_)) else f for f in flags]
    if npos == 0:
        logger.warning("no positive ground truth; AP reported as 0")
        return 0.0
    recall, precision = pr_curve(flags, npos)
    if config.ap_mode == 'voc2007_11pt':
        total = 0.0
        for t in RECALL_POINTS:
            reached = precision[recall >= t]
            total += reached.max() if reached.size else 0.0
        return float(total / len(RECALL_POINTS))

    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    # precision envelope
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))
