"""OpenStreetMap XML (v0.6) import.

Only node, way and tag elements are read; relations are ignored.
"""

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DanglingNodeRef, MalformedXml

logger = logging.getLogger(__name__)

EARTH_RADIUS = 6371000.0


@dataclass(frozen=True)
class Way:
    id: int
    refs: tuple
    tags: dict = field(default_factory=dict)

    @property
    def closed(self):
        return len(self.refs) >= 4 and self.refs[0] == self.refs[-1]


@dataclass(frozen=True)
class MapDocument:
    nodes: dict
    ways: list
    origin: tuple


def project_local(lat, lon, origin):
    """Equirectangular projection onto the tangent plane at origin, in meters."""
    lat0, lon0 = origin
    x = EARTH_RADIUS * np.radians(np.asarray(lon) - lon0) * np.cos(np.radians(lat0))
    y = EARTH_RADIUS * np.radians(np.asarray(lat) - lat0)
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def _int_attr(elem, name):
    try:
        return int(elem.attrib[name])
    except (KeyError, ValueError):
        raise MalformedXml(f"<{elem.tag}> has missing or invalid '{name}'")


def _float_attr(elem, name):
    try:
        return float(elem.attrib[name])
    except (KeyError, ValueError):
        raise MalformedXml(f"<{elem.tag} id={elem.attrib.get('id')}> has missing or invalid '{name}'")


def parse_osm(xml_text):
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise MalformedXml("invalid OSM XML", line, column) from exc
    if root.tag != 'osm':
        raise MalformedXml(f"root element is <{root.tag}>, expected <osm>")

    nodes = {}
    for elem in root.iter('node'):
        nodes[_int_attr(elem, 'id')] = (_float_attr(elem, 'lat'), _float_attr(elem, 'lon'))

    ways = []
    for elem in root.iter('way'):
        way_id = _int_attr(elem, 'id')
        refs = []
        for nd in elem.findall('nd'):
            ref = _int_attr(nd, 'ref')
            if ref not in nodes:
                raise DanglingNodeRef(ref, way_id)
            # duplicate consecutive refs collapse silently
            if not refs or refs[-1] != ref:
                refs.append(ref)
        tags = {t.attrib['k']: t.attrib.get('v', '') for t in elem.findall('tag') if 'k' in t.attrib}
        if len(refs) < 2 or (refs[0] == refs[-1] and len(refs) < 4):
            logger.warning("way %s dropped: %d usable node refs", way_id, len(refs))
            continue
        ways.append(Way(way_id, tuple(refs), tags))

    if nodes:
        lats = [lat for lat, _ in nodes.values()]
        lons = [lon for _, lon in nodes.values()]
        origin = (sum(lats) / len(lats), sum(lons) / len(lons))
    else:
        origin = (0.0, 0.0)
    logger.debug("parsed %d nodes, %d ways", len(nodes), len(ways))
    return MapDocument(nodes=nodes, ways=ways, origin=origin)


def serialize_osm(doc):
    root = ET.Element('osm', version='0.6', generator='paralleleye')
    for node_id, (lat, lon) in doc.nodes.items():
        ET.SubElement(root, 'node', id=str(node_id), lat=repr(lat), lon=repr(lon))
    for way in doc.ways:
        elem = ET.SubElement(root, 'way', id=str(way.id))
        for ref in way.refs:
            ET.SubElement(elem, 'nd', ref=str(ref))
        for k, v in way.tags.items():
            ET.SubElement(elem, 'tag', k=k, v=v)
    ET.indent(root)
    return ET.tostring(root, encoding='unicode', xml_declaration=True)
