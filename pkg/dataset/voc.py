"""PASCAL VOC annotation files.

Boxes are 1-based and inclusive. ``occ_rate`` is an extension element that
standard VOC readers skip; it is optional on read.
"""

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import PurePath

from groundtruth.masks import box_area

from .exceptions import BoxOutOfBounds, MalformedXml

FOLDER = 'ParallelEye'
IMAGE_SUFFIX = '.png'


@dataclass(frozen=True)
class VocObject:
    name: str
    bndbox: tuple
    truncated: int = 0
    difficult: int = 0
    occ_rate: float = None

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bndbox
        object.__setattr__(self, 'bndbox', (int(xmin), int(ymin), int(xmax), int(ymax)))
        if not (xmin <= xmax and ymin <= ymax):
            raise ValueError(f"inverted box {self.bndbox}")
        if self.truncated not in (0, 1) or self.difficult not in (0, 1):
            raise ValueError("truncated and difficult must be 0 or 1")
        if self.occ_rate is not None and not 0.0 <= self.occ_rate <= 1.0:
            raise ValueError(f"occ_rate {self.occ_rate} outside [0, 1]")

    @property
    def area(self):
        return box_area(self.bndbox)


@dataclass(frozen=True)
class VocRecord:
    image_id: str
    width: int
    height: int
    objects: tuple = ()
    folder: str = FOLDER

    def __post_init__(self):
        object.__setattr__(self, 'objects', tuple(self.objects))
        for obj in self.objects:
            xmin, ymin, xmax, ymax = obj.bndbox
            if xmin < 1 or ymin < 1 or xmax > self.width or ymax > self.height:
                raise BoxOutOfBounds(obj.bndbox, self.width, self.height)

    @property
    def filename(self):
        return f"{self.image_id}{IMAGE_SUFFIX}"

    def with_objects(self, objects):
        return VocRecord(self.image_id, self.width, self.height, tuple(objects), self.folder)

    def renamed(self, image_id):
        return VocRecord(image_id, self.width, self.height, self.objects, self.folder)


def object_from_observation(obs):
    return VocObject(
        name=obs.cls,
        bndbox=obs.bbox_visible,
        truncated=int(obs.truncated),
        difficult=0,
        occ_rate=float(obs.occlusion_rate),
    )


def _text(parent, tag, value):
    ET.SubElement(parent, tag).text = str(value)


def write_voc_xml(record):
    root = ET.Element('annotation')
    _text(root, 'folder', record.folder)
    _text(root, 'filename', record.filename)
    size = ET.SubElement(root, 'size')
    _text(size, 'width', record.width)
    _text(size, 'height', record.height)
    _text(size, 'depth', 3)
    for obj in record.objects:
        elem = ET.SubElement(root, 'object')
        _text(elem, 'name', obj.name)
        _text(elem, 'pose', 'Unspecified')
        _text(elem, 'truncated', obj.truncated)
        _text(elem, 'difficult', obj.difficult)
        box = ET.SubElement(elem, 'bndbox')
        for tag, value in zip(('xmin', 'ymin', 'xmax', 'ymax'), obj.bndbox):
            _text(box, tag, value)
        if obj.occ_rate is not None:
            _text(elem, 'occ_rate', repr(float(obj.occ_rate)))
    ET.indent(root)
    return ET.tostring(root, encoding='unicode') + '\n'


def _required(parent, path, convert=str):
    elem = parent.find(path)
    if elem is None or elem.text is None:
        raise MalformedXml(f"<{parent.tag}> is missing <{path}>")
    try:
        return convert(elem.text.strip())
    except ValueError:
        raise MalformedXml(f"<{path}> has invalid value {elem.text!r}")


def _coordinate(text):
    # some VOC writers emit "12.0"
    value = float(text)
    if not math.isfinite(value) or value != int(value):
        raise ValueError(text)
    return int(value)


def parse_voc_xml(xml_text):
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise MalformedXml("invalid VOC XML", line, column) from exc
    if root.tag != 'annotation':
        raise MalformedXml(f"root element is <{root.tag}>, expected <annotation>")

    filename = _required(root, 'filename')
    width = _required(root, 'size/width', int)
    height = _required(root, 'size/height', int)
    folder_elem = root.find('folder')
    folder = folder_elem.text.strip() if folder_elem is not None and folder_elem.text else FOLDER

    objects = []
    for elem in root.findall('object'):
        box = tuple(_required(elem, f'bndbox/{tag}', _coordinate) for tag in ('xmin', 'ymin', 'xmax', 'ymax'))
        occ = elem.find('occ_rate')
        try:
            objects.append(VocObject(
                name=_required(elem, 'name'),
                bndbox=box,
                truncated=_optional_flag(elem, 'truncated'),
                difficult=_optional_flag(elem, 'difficult'),
                occ_rate=float(occ.text) if occ is not None and occ.text else None,
            ))
        except ValueError as exc:
            raise MalformedXml(f"object in {filename}: {exc}") from exc
    return VocRecord(PurePath(filename).stem, width, height, tuple(objects), folder)


def _optional_flag(elem, tag):
    child = elem.find(tag)
    if child is None or not child.text:
        return 0
    return int(child.text.strip())
