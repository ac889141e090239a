"""Per-instance pixel counts and extents over an instance buffer."""

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyMask


@dataclass(frozen=True)
class MaskExtent:
    count: int
    row_min: int
    row_max: int
    col_min: int
    col_max: int


def instance_masks(buffers):
    """{instance id: MaskExtent} for every non-background id.

    Accepts FrameBuffers or a bare (H, W) instance array.
    """
    instance = np.asarray(getattr(buffers, 'instance', buffers))
    rows, cols = np.nonzero(instance)
    if not len(rows):
        return {}
    ids, inverse, counts = np.unique(instance[rows, cols], return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    n = len(ids)
    row_min = np.full(n, instance.shape[0], dtype=np.int64)
    col_min = np.full(n, instance.shape[1], dtype=np.int64)
    row_max = np.full(n, -1, dtype=np.int64)
    col_max = np.full(n, -1, dtype=np.int64)
    np.minimum.at(row_min, inverse, rows)
    np.maximum.at(row_max, inverse, rows)
    np.minimum.at(col_min, inverse, cols)
    np.maximum.at(col_max, inverse, cols)
    return {
        int(ids[k]): MaskExtent(int(counts[k]), int(row_min[k]), int(row_max[k]), int(col_min[k]), int(col_max[k]))
        for k in range(n)
    }


def tight_bbox(extent):
    """VOC box (xmin, ymin, xmax, ymax), 1-based and inclusive."""
    if extent is None or extent.count <= 0:
        raise EmptyMask("cannot box an empty mask")
    return extent.col_min + 1, extent.row_min + 1, extent.col_max + 1, extent.row_max + 1


def box_size(box):
    xmin, ymin, xmax, ymax = box
    return xmax - xmin + 1, ymax - ymin + 1


def box_area(box):
    width, height = box_size(box)
    return width * height
