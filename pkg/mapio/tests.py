import math

from django.test import SimpleTestCase

from . import geometry
from .exceptions import DanglingNodeRef, DegenerateGeometry, LayoutError, MalformedXml
from .layout import dump_layout_json, extract_layout, lane_count, load_layout_json, make_footprint, road_width
from .osm import parse_osm, project_local, serialize_osm
from .synthetic import synthetic_grid


def osm(nodes, ways):
    """Tiny OSM document builder: nodes {id: (lat, lon)}, ways [(id, refs, tags)]."""
    parts = ['<?xml version="1.0"?>', '<osm version="0.6">']
    for node_id, (lat, lon) in nodes.items():
        parts.append(f'<node id="{node_id}" lat="{lat}" lon="{lon}"/>')
    for way_id, refs, tags in ways:
        parts.append(f'<way id="{way_id}">')
        parts.extend(f'<nd ref="{r}"/>' for r in refs)
        parts.extend(f'<tag k="{k}" v="{v}"/>' for k, v in tags.items())
        parts.append('</way>')
    parts.append('</osm>')
    return '\n'.join(parts)


SQUARE_NODES = {
    1: (39.98, 116.30),
    2: (39.98, 116.3001),
    3: (39.9801, 116.3001),
    4: (39.9801, 116.30),
}


class ParseOsmTests(SimpleTestCase):

    def test_minimal_document(self):
        doc = parse_osm(osm({1: (39.98, 116.30), 2: (39.981, 116.30)},
                            [(10, [1, 2], {'highway': 'residential'})]))
        self.assertEqual(len(doc.nodes), 2)
        self.assertEqual(len(doc.ways), 1)
        self.assertEqual(doc.ways[0].tags, {'highway': 'residential'})
        self.assertAlmostEqual(doc.origin[0], 39.9805)
        self.assertAlmostEqual(doc.origin[1], 116.30)

    def test_dangling_node_ref(self):
        with self.assertRaises(DanglingNodeRef) as ctx:
            parse_osm(osm({1: (0.0, 0.0)}, [(10, [1, 99], {'highway': 'primary'})]))
        self.assertEqual(ctx.exception.node_id, 99)
        self.assertEqual(ctx.exception.way_id, 10)

    def test_closed_way(self):
        doc = parse_osm(osm(SQUARE_NODES, [(20, [1, 2, 3, 4, 1], {'building': 'yes'})]))
        way = doc.ways[0]
        self.assertTrue(way.closed)
        self.assertEqual(way.refs[0], way.refs[-1])

    def test_malformed_xml_reports_position(self):
        with self.assertRaises(MalformedXml) as ctx:
            parse_osm('<osm><node id="1" lat="0" lon="0"></osm>')
        self.assertEqual(ctx.exception.line, 1)

    def test_unknown_tags_preserved_and_duplicate_refs_collapsed(self):
        doc = parse_osm(osm(SQUARE_NODES, [(5, [1, 1, 2, 2, 3], {'highway': 'x', 'name:zh': 'abc'})]))
        self.assertEqual(doc.ways[0].refs, (1, 2, 3))
        self.assertEqual(doc.ways[0].tags['name:zh'], 'abc')

    def test_relations_ignored(self):
        text = osm(SQUARE_NODES, []).replace('</osm>', '<relation id="7"><member ref="1"/></relation></osm>')
        doc = parse_osm(text)
        self.assertEqual(doc.ways, [])

    def test_serialize_parse_fixpoint(self):
        doc = parse_osm(osm(SQUARE_NODES, [
            (20, [1, 2, 3, 4, 1], {'building': 'yes', 'building:levels': '3'}),
            (21, [1, 3], {'highway': 'primary', 'lanes': '2'}),
        ]))
        again = parse_osm(serialize_osm(doc))
        self.assertEqual(again, doc)
        self.assertEqual(parse_osm(serialize_osm(again)), doc)


class ProjectLocalTests(SimpleTestCase):

    def test_origin_maps_to_origin(self):
        self.assertEqual(project_local(39.9, 116.3, (39.9, 116.3)), (0.0, 0.0))

    def test_latitude_step(self):
        x, y = project_local(40.001, 116.3, (40.0, 116.3))
        self.assertAlmostEqual(x, 0.0)
        self.assertAlmostEqual(y, 111.19, delta=0.01)

    def test_longitude_step_at_equator(self):
        x, y = project_local(0.0, 10.001, (0.0, 10.0))
        self.assertAlmostEqual(x, 111.19, delta=0.01)
        self.assertAlmostEqual(y, 0.0)


class ExtractLayoutTests(SimpleTestCase):

    def test_tag_routing(self):
        doc = parse_osm(osm(SQUARE_NODES, [
            (20, [1, 2, 3, 4, 1], {'building': 'yes'}),
            (21, [1, 3], {'highway': 'motorway'}),
            (22, [2, 4], {'waterway': 'river'}),
        ]))
        layout = extract_layout(doc)
        self.assertEqual(len(layout.roads), 1)
        self.assertEqual(len(layout.footprints), 1)
        self.assertEqual(layout.roads[0].width, 12.0)
        self.assertEqual(layout.roads[0].lane_count, 4)

    def test_clockwise_footprint_is_reversed(self):
        # 1 -> 4 -> 3 -> 2 runs clockwise in the local frame
        doc = parse_osm(osm(SQUARE_NODES, [(20, [1, 4, 3, 2, 1], {'building': 'yes'})]))
        fp = extract_layout(doc).footprints[0]
        self.assertGreater(geometry.signed_area(fp.polygon), 0)

    def test_bow_tie_skipped_with_warning(self):
        # 1 -> 3 -> 2 -> 4 crosses itself
        doc = parse_osm(osm(SQUARE_NODES, [(20, [1, 3, 2, 4, 1], {'building': 'yes'})]))
        layout = extract_layout(doc)
        self.assertEqual(layout.footprints, [])
        self.assertEqual(len(layout.warnings), 1)

    def test_order_preserved(self):
        ways = [(30 + i, [1, 2] if i % 2 else [4, 3], {'highway': 'residential'}) for i in range(6)]
        layout = extract_layout(parse_osm(osm(SQUARE_NODES, ways)))
        self.assertEqual([r.way_id for r in layout.roads], list(range(30, 36)))
        self.assertEqual(layout, extract_layout(parse_osm(osm(SQUARE_NODES, ways))))

    def test_width_table_and_lanes(self):
        self.assertEqual(road_width({'highway': 'primary'}), 9.0)
        self.assertEqual(road_width({'highway': 'service'}), 6.0)
        self.assertEqual(lane_count({'lanes': '3'}, 6.0), 3)
        self.assertEqual(lane_count({'lanes': 'many'}, 9.0), 3)
        self.assertEqual(lane_count({}, 1.0), 1)


class GeometryTests(SimpleTestCase):

    def test_simple_polygons(self):
        self.assertTrue(geometry.is_simple([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]))
        self.assertFalse(geometry.is_simple([(0, 0), (1, 1), (1, 0), (0, 1)]))
        # spike folding back onto its own edge
        self.assertFalse(geometry.is_simple([(0, 0), (2, 0), (1, 0), (1, 1)]))

    def test_make_footprint_rejects_zero_area(self):
        with self.assertRaises(DegenerateGeometry):
            make_footprint([(0, 0), (1, 0), (2, 0)])


class LayoutJsonTests(SimpleTestCase):

    def test_round_trip(self):
        text = '''{"roads": [{"points": [[0, 0], [100, 0]], "width": 9, "lanes": 2}],
                   "footprints": [{"points": [[0, 10], [0, 20], [10, 20], [10, 10]], "height": 12}]}'''
        layout = load_layout_json(text)
        self.assertEqual(layout.roads[0].lane_count, 2)
        self.assertEqual(layout.footprints[0].height, 12.0)
        self.assertGreater(layout.footprints[0].area, 0)
        self.assertEqual(load_layout_json(dump_layout_json(layout)), layout)

    def test_invalid_json(self):
        with self.assertRaises(LayoutError):
            load_layout_json('{"roads": [')
        with self.assertRaises(LayoutError):
            load_layout_json('{"roads": [{"width": 3}]}')


class SyntheticGridTests(SimpleTestCase):

    def test_grid_shape(self):
        layout = synthetic_grid(blocks_x=2, blocks_y=3, seed=4)
        self.assertEqual(len(layout.roads), 3 + 4)
        self.assertGreaterEqual(len(layout.footprints), 2 * 3 * 2)
        for fp in layout.footprints:
            self.assertTrue(geometry.is_simple(list(fp.polygon)))
            self.assertGreater(fp.area, 0)

    def test_deterministic(self):
        self.assertEqual(synthetic_grid(seed=9), synthetic_grid(seed=9))
        self.assertNotEqual(synthetic_grid(seed=9).footprints, synthetic_grid(seed=10).footprints)

    def test_road_length(self):
        layout = synthetic_grid(blocks_x=1, blocks_y=1, block_size=80.0)
        self.assertTrue(all(math.isclose(r.length, 89.0) for r in layout.roads))
