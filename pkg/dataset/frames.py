"""Per-frame files: RGB, class, instance and depth PNGs, flow binaries, VOC XML.

Flow files are ``PEFL`` followed by width and height as little-endian
uint32, the u plane and the v plane as row-major little-endian float32, and
one validity byte per pixel.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from groundtruth.flow import FlowField
from worldgen.classes import SEGMENTATION_PALETTE

from .exceptions import IoFailure
from .voc import write_voc_xml

logger = logging.getLogger(__name__)

FLOW_MAGIC = b'PEFL'
DEPTH_SCALE = 100.0   # centimeters
DEPTH_MAX = 65535

# kind -> (directory, suffix)
LAYOUT = {
    'rgb': ('JPEGImages', '.png'),
    'annotation': ('Annotations', '.xml'),
    'depth': ('Depth', '.png'),
    'instance': ('Instance', '.png'),
    'class': ('Class', '.png'),
    'flow': ('Flow', '.pefl'),
}
SPLIT_DIR = Path('ImageSets') / 'Main'


@dataclass(frozen=True)
class FramePaths:
    root: Path
    image_id: str

    def __getitem__(self, kind):
        directory, suffix = LAYOUT[kind]
        return Path(self.root) / directory / f"{self.image_id}{suffix}"

    def items(self):
        return [(kind, self[kind]) for kind in LAYOUT]


def make_layout(root):
    try:
        for directory, _ in LAYOUT.values():
            (Path(root) / directory).mkdir(parents=True, exist_ok=True)
        (Path(root) / SPLIT_DIR).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create dataset tree under {root}: {exc}") from exc


def depth_to_cm(depth):
    """uint16 centimeters, floored and saturating at 65535; 0 marks pixels with no hit."""
    depth = np.asarray(depth, dtype=np.float64)
    hit = np.isfinite(depth)
    cm = np.zeros(depth.shape, dtype=np.uint16)
    cm[hit] = np.minimum(np.floor(depth[hit] * DEPTH_SCALE), DEPTH_MAX).astype(np.uint16)
    return cm


def _palette():
    flat = [c for rgb in SEGMENTATION_PALETTE for c in rgb]
    return flat + [0] * (768 - len(flat))


def write_flow(path, flow):
    height, width = flow.shape
    payload = b''.join([
        FLOW_MAGIC,
        np.array([width, height], dtype='<u4').tobytes(),
        np.ascontiguousarray(flow.u, dtype='<f4').tobytes(),
        np.ascontiguousarray(flow.v, dtype='<f4').tobytes(),
        np.ascontiguousarray(flow.valid, dtype=np.uint8).tobytes(),
    ])
    Path(path).write_bytes(payload)


def read_flow(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read flow file {path}: {exc}") from exc
    if data[:4] != FLOW_MAGIC or len(data) < 12:
        raise IoFailure(f"{path} is not a flow file")
    width, height = (int(x) for x in np.frombuffer(data, dtype='<u4', count=2, offset=4))
    n = width * height
    if len(data) != 12 + 9 * n:
        raise IoFailure(f"{path}: expected {12 + 9 * n} bytes for {width}x{height}, found {len(data)}")
    u = np.frombuffer(data, dtype='<f4', count=n, offset=12).reshape(height, width)
    v = np.frombuffer(data, dtype='<f4', count=n, offset=12 + 4 * n).reshape(height, width)
    valid = np.frombuffer(data, dtype=np.uint8, count=n, offset=12 + 8 * n).reshape(height, width)
    return FlowField(u.astype(np.float32), v.astype(np.float32), valid.astype(bool))


def read_png(path):
    try:
        with Image.open(path) as img:
            return np.asarray(img)
    except OSError as exc:
        raise IoFailure(f"cannot read image {path}: {exc}") from exc


def read_depth_png(path):
    """Depth in meters; inf where nothing was hit."""
    cm = read_png(path).astype(np.float64)
    return np.where(cm == 0, np.inf, cm / DEPTH_SCALE)


def write_frame_outputs(bufs, flow, record, paths):
    """Write every file of one frame; flow may be None when the frame has no predecessor."""
    height, width = bufs.shape
    if (record.width, record.height) != (width, height):
        raise ValueError(f"record is {record.width}x{record.height}, buffers are {width}x{height}")
    if flow is not None and flow.shape != bufs.shape:
        raise ValueError("flow and buffers differ in size")
    try:
        Image.fromarray(bufs.rgb).save(paths['rgb'])
        classes = Image.fromarray(bufs.classes.astype(np.uint8), mode='P')
        classes.putpalette(_palette())
        classes.save(paths['class'])
        Image.fromarray(bufs.instance.astype(np.uint16)).save(paths['instance'])
        Image.fromarray(depth_to_cm(bufs.depth)).save(paths['depth'])
        if flow is not None:
            write_flow(paths['flow'], flow)
        else:
            paths['flow'].unlink(missing_ok=True)
        paths['annotation'].write_text(write_voc_xml(record), encoding='utf-8')
    except OSError as exc:
        raise IoFailure(f"cannot write frame {paths.image_id}: {exc}") from exc
    logger.debug("frame %s written with %d objects", paths.image_id, len(record.objects))
