import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from groundtruth.flow import FlowField
from mapio.exceptions import MalformedXml
from paralleleye.exceptions import ConfigError
from render.camera import intrinsics_from_fov
from render.raster import RenderSettings, rasterize
from render.tests import quad, scene

from .exceptions import BoxOutOfBounds, DuplicateNamespace, IoFailure, MissingOcclusionData, SampleTooLarge
from .frames import FramePaths, depth_to_cm, make_layout, read_depth_png, read_flow, read_png, write_flow, write_frame_outputs
from .index import DatasetIndex
from .stats import DatasetStats, compute_stats
from .surgery import filter_fully_visible, filter_min_area, mix, sample, split, split_sizes, with_split
from .voc import VocObject, VocRecord, parse_voc_xml, write_voc_xml

PLAIN_VOC = """<annotation>
  <folder>VOC2007</folder>
  <filename>000005.jpg</filename>
  <source><database>The VOC2007 Database</database></source>
  <size><width>500</width><height>375</height><depth>3</depth></size>
  <segmented>0</segmented>
  <object>
    <name>car</name>
    <pose>Left</pose>
    <truncated>1</truncated>
    <difficult>0</difficult>
    <bndbox><xmin>263</xmin><ymin>211</ymin><xmax>324</xmax><ymax>339</ymax></bndbox>
  </object>
  <object>
    <name>bus</name>
    <bndbox><xmin>5.0</xmin><ymin>6</ymin><xmax>70</xmax><ymax>80</ymax></bndbox>
  </object>
</annotation>
"""


def box(x, y, w, h):
    return (x, y, x + w - 1, y + h - 1)


def record(image_id, *boxes, occ=0.0, truncated=0, name='car', width=640, height=480):
    return VocRecord(image_id, width, height, tuple(
        VocObject(name, b, truncated=truncated, occ_rate=occ) for b in boxes
    ))


def fixture(*records, **kwargs):
    return DatasetIndex.from_records(records, **kwargs)


def numbered(n, prefix=''):
    return fixture(*(record(f"{prefix}{k:05d}", box(1, 1, 40, 40)) for k in range(n)), provenance={'name': prefix or 'n'})


class VocTests(SimpleTestCase):

    def test_round_trip(self):
        rec = VocRecord('0000001', 640, 480, (VocObject('car', (10, 20, 110, 220), occ_rate=0.25),))
        text = write_voc_xml(rec)
        self.assertIn('<pose>Unspecified</pose>', text)
        self.assertIn('<depth>3</depth>', text)
        self.assertIn('<filename>0000001.png</filename>', text)
        self.assertEqual(parse_voc_xml(text), rec)

    def test_occ_rate_optional(self):
        rec = VocRecord('a', 640, 480, (VocObject('car', (10, 20, 110, 220)),))
        text = write_voc_xml(rec)
        self.assertNotIn('occ_rate', text)
        self.assertIsNone(parse_voc_xml(text).objects[0].occ_rate)

    def test_box_out_of_bounds(self):
        text = write_voc_xml(VocRecord('a', 640, 480, (VocObject('car', (10, 20, 110, 220)),)))
        with self.assertRaises(BoxOutOfBounds):
            parse_voc_xml(text.replace('<xmax>110</xmax>', '<xmax>641</xmax>'))
        with self.assertRaises(BoxOutOfBounds):
            VocRecord('a', 640, 480, (VocObject('car', (0, 20, 110, 220)),))

    def test_malformed(self):
        with self.assertRaises(MalformedXml):
            parse_voc_xml('<annotation><size>')
        with self.assertRaises(MalformedXml):
            parse_voc_xml('<annotation><filename>x.png</filename></annotation>')
        with self.assertRaises(MalformedXml):
            parse_voc_xml('<osm/>')
        with self.assertRaises(MalformedXml):
            parse_voc_xml(PLAIN_VOC.replace('<xmin>263</xmin>', '<xmin>abc</xmin>'))

    def test_plain_voc_file(self):
        rec = parse_voc_xml(PLAIN_VOC)
        self.assertEqual((rec.image_id, rec.width, rec.height, rec.folder), ('000005', 500, 375, 'VOC2007'))
        car, bus = rec.objects
        self.assertEqual((car.name, car.bndbox, car.truncated, car.difficult), ('car', (263, 211, 324, 339), 1, 0))
        self.assertEqual((bus.bndbox, bus.truncated, bus.occ_rate), ((5, 6, 70, 80), 0, None))

    def test_random_round_trips(self):
        rand = np.random.default_rng(0)
        for k in range(1000):
            width, height = int(rand.integers(1, 2000)), int(rand.integers(1, 2000))
            objects = []
            for _ in range(int(rand.integers(0, 6))):
                x0, x1 = sorted(rand.integers(1, width + 1, size=2))
                y0, y1 = sorted(rand.integers(1, height + 1, size=2))
                occ = None if rand.random() < 0.3 else float(rand.random())
                objects.append(VocObject(str(rand.choice(['car', 'bus', 'truck'])), (x0, y0, x1, y1),
                                         int(rand.integers(0, 2)), int(rand.integers(0, 2)), occ))
            rec = VocRecord(f"{k:07d}", width, height, tuple(objects))
            self.assertEqual(parse_voc_xml(write_voc_xml(rec)), rec)

    def test_object_validation(self):
        with self.assertRaises(ValueError):
            VocObject('car', (10, 10, 5, 20))
        with self.assertRaises(ValueError):
            VocObject('car', (1, 1, 5, 5), occ_rate=1.5)


class FrameFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_depth_quantisation(self):
        cm = depth_to_cm(np.array([1.234, 700.0, np.inf, 0.5], dtype=np.float32))
        self.assertEqual(cm.tolist(), [123, 65535, 0, 50])
        self.assertEqual(cm.dtype, np.uint16)

    def test_flow_round_trip(self):
        rand = np.random.default_rng(4)
        flow = FlowField(
            rand.normal(0, 20, (7, 11)).astype(np.float32),
            rand.normal(0, 20, (7, 11)).astype(np.float32),
            rand.random((7, 11)) < 0.8,
        )
        path = self.root / 'f.pefl'
        write_flow(path, flow)
        data = path.read_bytes()
        self.assertEqual(data[:4], b'PEFL')
        self.assertEqual(len(data), 12 + 9 * 77)
        self.assertEqual(int.from_bytes(data[4:8], 'little'), 11)
        self.assertEqual(int.from_bytes(data[8:12], 'little'), 7)
        back = read_flow(path)
        self.assertEqual(back.u.tobytes(), flow.u.tobytes())
        self.assertEqual(back.v.tobytes(), flow.v.tobytes())
        np.testing.assert_array_equal(back.valid, flow.valid)

    def test_bad_flow_file(self):
        path = self.root / 'bad.pefl'
        path.write_bytes(b'NOPE' + bytes(20))
        with self.assertRaises(IoFailure):
            read_flow(path)
        path.write_bytes(b'PEFL' + (3).to_bytes(4, 'little') + (3).to_bytes(4, 'little'))
        with self.assertRaises(IoFailure):
            read_flow(path)
        with self.assertRaises(IoFailure):
            read_flow(self.root / 'missing.pefl')

    def test_frame_outputs(self):
        K = intrinsics_from_fov(90, 64, 48)
        bufs = rasterize(scene(quad(-20, 20, -20, 20, 30.0), quad(-2, 2, -2, 2, 10.0)), np.eye(4), K,
                         RenderSettings(draw_distance=100.0))
        flow = FlowField.invalid(64, 48)
        rec = record('0000001', box(3, 4, 10, 10), width=64, height=48)
        make_layout(self.root)
        paths = FramePaths(self.root, '0000001')
        write_frame_outputs(bufs, flow, rec, paths)

        np.testing.assert_array_equal(read_png(paths['rgb']), bufs.rgb)
        np.testing.assert_array_equal(read_png(paths['instance']).astype(np.uint32), bufs.instance)
        np.testing.assert_array_equal(read_png(paths['class']), bufs.classes)
        depth = read_depth_png(paths['depth'])
        np.testing.assert_allclose(depth[bufs.instance == 2], 10.0)
        np.testing.assert_allclose(depth[bufs.instance == 1], 30.0)
        self.assertEqual(parse_voc_xml(paths['annotation'].read_text()), rec)
        self.assertFalse(read_flow(paths['flow']).valid.any())

        write_frame_outputs(bufs, None, rec, paths)
        self.assertFalse(paths['flow'].exists())

    def test_size_mismatch(self):
        bufs = rasterize(scene(), np.eye(4), intrinsics_from_fov(90, 64, 48), RenderSettings())
        with self.assertRaises(ValueError):
            write_frame_outputs(bufs, None, record('x', width=32, height=48), FramePaths(self.root, 'x'))

    def test_unwritable_root(self):
        blocker = self.root / 'file'
        blocker.write_text('')
        bufs = rasterize(scene(), np.eye(4), intrinsics_from_fov(90, 8, 8), RenderSettings())
        with self.assertRaises(IoFailure):
            write_frame_outputs(bufs, None, record('x', width=8, height=8), FramePaths(blocker, 'x'))


class IndexTests(SimpleTestCase):

    def test_save_and_load(self):
        index = fixture(record('a', box(1, 1, 10, 10), occ=0.5), record('b'), splits={'train': ('a',)},
                        provenance={'name': 'fx'})
        with tempfile.TemporaryDirectory() as tmp:
            index.save(tmp, manifest={'seed': 3})
            self.assertEqual((Path(tmp) / 'ImageSets' / 'Main' / 'train.txt').read_text(), 'a\n')
            manifest = json.loads((Path(tmp) / 'manifest.json').read_text())
            self.assertEqual(manifest['seed'], 3)
            self.assertEqual(manifest['counts'], {'images': 2, 'objects': 1, 'splits': {'train': 1}})
            loaded = DatasetIndex.load(tmp)
        self.assertEqual(loaded.records, index.records)
        self.assertEqual(loaded.splits, {'train': ('a',)})
        self.assertEqual(loaded.provenance, {'name': 'fx'})

    def test_invariants(self):
        with self.assertRaises(ValueError):
            fixture(record('a'), record('a'))
        with self.assertRaises(ValueError):
            fixture(record('a'), splits={'test': ('b',)})

    def test_missing_root(self):
        with self.assertRaises(IoFailure):
            DatasetIndex.load('/nonexistent/dataset')

    def test_copies_frame_files(self):
        with tempfile.TemporaryDirectory() as src, tempfile.TemporaryDirectory() as dst:
            make_layout(src)
            FramePaths(src, 'a')['rgb'].write_bytes(b'png')
            fixture(record('a'), record('b')).save(src)
            loaded = DatasetIndex.load(src)
            mixed = mix(loaded, namespaces=['x'])
            mixed.save(dst)
            self.assertEqual(FramePaths(dst, 'x_a')['rgb'].read_bytes(), b'png')
            self.assertFalse(FramePaths(dst, 'x_b')['rgb'].exists())

    def test_filter_in_place(self):
        with tempfile.TemporaryDirectory() as tmp:
            make_layout(tmp)
            for image_id in ('a', 'b'):
                FramePaths(tmp, image_id)['rgb'].write_bytes(image_id.encode())
            fixture(record('a', box(1, 1, 10, 10)), record('b', box(1, 1, 100, 100)),
                    splits={'train': ('a',), 'test': ('b',)}).save(tmp)
            filter_min_area(DatasetIndex.load(tmp), 3600).save(tmp)
            loaded = DatasetIndex.load(tmp)
            self.assertEqual(loaded.ids, ['b'])
            self.assertEqual(loaded.splits, {'test': ('b',), 'train': ()})
            self.assertFalse(FramePaths(tmp, 'a')['rgb'].exists())
            self.assertFalse(FramePaths(tmp, 'a')['annotation'].exists())
            self.assertEqual(FramePaths(tmp, 'b')['rgb'].read_bytes(), b'b')

    def test_reused_root_drops_stale_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            numbered(5).save(tmp)
            (Path(tmp) / 'ImageSets' / 'Main' / 'old.txt').write_text('00000\n')
            numbered(2).save(tmp)
            loaded = DatasetIndex.load(tmp)
            self.assertEqual(loaded.ids, ['00000', '00001'])
            self.assertEqual(loaded.splits, {})

    def test_mix_into_source_root(self):
        with tempfile.TemporaryDirectory() as tmp:
            make_layout(tmp)
            FramePaths(tmp, 'a')['rgb'].write_bytes(b'png')
            fixture(record('a')).save(tmp)
            mix(DatasetIndex.load(tmp), namespaces=['x']).save(tmp)
            self.assertEqual(DatasetIndex.load(tmp).ids, ['x_a'])
            self.assertEqual(FramePaths(tmp, 'x_a')['rgb'].read_bytes(), b'png')
            self.assertFalse(FramePaths(tmp, 'a')['rgb'].exists())


class StatsTests(SimpleTestCase):

    def test_empty(self):
        stats = compute_stats(fixture())
        self.assertEqual(stats, DatasetStats())
        self.assertEqual(stats.object_count, 0)
        self.assertEqual(stats.mean_instances, 0.0)

    def test_two_cars(self):
        stats = compute_stats(fixture(record('a', box(1, 1, 30, 30), box(1, 1, 100, 100), occ=0.5)))
        self.assertEqual(stats.area_classes, {'Small': 1, 'Medium': 0, 'Large': 1})
        self.assertEqual(stats.instances_per_image, {2: 1})
        self.assertEqual(stats.occlusion_classes, {'Slightly': 0, 'Partly': 0, 'Largely': 2})
        self.assertEqual(stats.class_counts, {'car': 2})

    def test_occlusion_unavailable(self):
        stats = compute_stats(fixture(record('a', box(1, 1, 30, 30), occ=None)))
        self.assertIsNone(stats.occlusion_classes)
        self.assertEqual(stats.to_dict()['occlusion'], None)

    def test_bins_sum_to_objects(self):
        rand = np.random.default_rng(8)
        records = []
        for k in range(30):
            boxes = [box(1, 1, int(rand.integers(1, 200)), int(rand.integers(1, 200))) for _ in range(int(rand.integers(0, 6)))]
            records.append(record(f"{k}", *boxes, occ=float(rand.random())))
        stats = compute_stats(fixture(*records))
        self.assertEqual(sum(stats.area_classes.values()), stats.object_count)
        self.assertEqual(sum(stats.occlusion_classes.values()), stats.object_count)
        self.assertEqual(sum(stats.instances_per_image.values()), 30)


class SurgeryTests(SimpleTestCase):

    def setUp(self):
        self.index = fixture(
            record('1', box(1, 1, 60, 60), box(100, 100, 10, 10)),
            record('2', box(1, 1, 50, 50)),
            record('3', box(1, 1, 100, 100)),
        )

    def test_min_area(self):
        large = filter_min_area(self.index, 3600)
        self.assertEqual(large.ids, ['1', '3'])
        self.assertEqual(large.records['1'].objects, (VocObject('car', box(1, 1, 60, 60), occ_rate=0.0),))
        self.assertEqual((len(large), large.object_count), (2, 2))
        self.assertEqual(self.index.object_count, 4)

    def test_min_area_matches_scan(self):
        rand = np.random.default_rng(9)
        records = [record(str(k), *(box(1, 1, int(rand.integers(1, 120)), int(rand.integers(1, 120)))
                                    for _ in range(int(rand.integers(1, 5))))) for k in range(40)]
        index = fixture(*records)
        result = filter_min_area(index, 3600)
        expected = {}
        for rec in records:
            kept = [o for o in rec.objects if (o.bndbox[2] - o.bndbox[0] + 1) * (o.bndbox[3] - o.bndbox[1] + 1) >= 3600]
            if kept:
                expected[rec.image_id] = tuple(kept)
        self.assertEqual({i: r.objects for i, r in result.records.items()}, expected)
        self.assertEqual(filter_min_area(result, 3600).records, result.records)

    def test_min_area_validation(self):
        with self.assertRaises(ConfigError):
            filter_min_area(self.index, 0)

    def test_fully_visible(self):
        self.assertEqual(filter_fully_visible(self.index).records, self.index.records)
        occluded = fixture(record('1', box(1, 1, 9, 9), occ=0.2), record('2', box(1, 1, 9, 9), occ=1.0))
        self.assertEqual(len(filter_fully_visible(occluded)), 0)
        mixed = fixture(
            record('1', box(1, 1, 9, 9), occ=0.0),
            record('2', box(1, 1, 9, 9), occ=0.0, truncated=1),
            VocRecord('3', 640, 480, (VocObject('car', box(1, 1, 9, 9), occ_rate=0.3),
                                      VocObject('bus', box(5, 5, 9, 9), occ_rate=0.0))),
        )
        visible = filter_fully_visible(mixed)
        self.assertEqual(visible.ids, ['1', '3'])
        self.assertEqual([o.name for o in visible.records['3'].objects], ['bus'])
        self.assertEqual(filter_fully_visible(visible).records, visible.records)

    def test_fully_visible_needs_occlusion(self):
        with self.assertRaises(MissingOcclusionData):
            filter_fully_visible(fixture(record('1', box(1, 1, 9, 9), occ=None)))

    def test_split_sizes(self):
        self.assertEqual(split_sizes(100, (3, 1)), (75, 25))
        self.assertEqual(split_sizes(101, (1, 1)), (51, 50))
        with self.assertRaises(ConfigError):
            split_sizes(10, (0, 1))

    def test_split(self):
        train, test = split(numbered(100), (3, 1), seed=1)
        self.assertEqual((len(train), len(test)), (75, 25))
        again, _ = split(numbered(100), (3, 1), seed=1)
        other, _ = split(numbered(100), (3, 1), seed=2)
        self.assertEqual(train.ids, again.ids)
        self.assertNotEqual(train.ids, other.ids)

    def test_split_partition(self):
        index = numbered(37)
        for seed in range(10):
            for ratio in ((1, 1), (3, 1), (1, 4), (7, 2)):
                train, test = split(index, ratio, seed)
                self.assertFalse(set(train.ids) & set(test.ids))
                self.assertEqual(sorted(train.ids + test.ids), index.ids)

    def test_with_split(self):
        index = with_split(numbered(100), (3, 1), seed=5)
        self.assertEqual(len(index), 100)
        self.assertEqual((len(index.splits['train']), len(index.splits['test'])), (75, 25))

    def test_mix(self):
        a, b = numbered(3, 'a'), numbered(4, 'b')
        single = mix(a)
        self.assertEqual(single.ids, ['a_a00000', 'a_a00001', 'a_a00002'])
        both = mix(a, b)
        self.assertEqual((len(both), both.object_count), (7, 7))
        self.assertEqual(compute_stats(both), compute_stats(a) + compute_stats(b))
        with self.assertRaises(DuplicateNamespace):
            mix(a, a)
        self.assertEqual(len(mix(a, a, namespaces=['x', 'y'])), 6)

    def test_mix_stats_sum(self):
        a = fixture(record('1', box(1, 1, 30, 30), occ=0.0), provenance={'name': 'a'})
        b = fixture(record('1', box(1, 1, 100, 100), box(1, 1, 50, 50), name='bus', occ=0.5), provenance={'name': 'b'})
        self.assertEqual(compute_stats(mix(a, b)), compute_stats(a) + compute_stats(b))

    def test_sample(self):
        index = numbered(20)
        self.assertEqual(sample(index, 20, seed=0).ids, index.ids)
        self.assertEqual(len(sample(index, 0, seed=0)), 0)
        self.assertEqual(sample(index, 7, seed=3).ids, sample(index, 7, seed=3).ids)
        self.assertEqual(len(sample(index, 7, seed=3)), 7)
        with self.assertRaises(SampleTooLarge):
            sample(index, 21, seed=0)
