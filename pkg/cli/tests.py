import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag

from dataset.index import DatasetIndex
from dataset.voc import VocObject, VocRecord
from mapio.layout import dump_layout_json
from mapio.synthetic import synthetic_grid
from paralleleye.exceptions import ConfigError, IoFailure
from worldgen.scenario import get_preset

from .bench import BenchConfig, run_bench
from .config import load_config, merge_options
from .forms import EvalForm, FilterForm, GenerateForm
from .pipeline import RunConfig, frame_counts, plan_sequences, run_generate

TINY = {'resolution': '64x48', 'blocks': 1}


def tree(root):
    """Relative path -> bytes of every file, with the manifest's wall-clock timing dropped."""
    files = {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob('*')) if p.is_file()}
    manifest = json.loads(files.pop('manifest.json'))
    manifest.pop('timing')
    return files, manifest


def run(*args, **options):
    out = StringIO()
    call_command(*args, stdout=out, **options)
    return out.getvalue()


def fixture_index(n=100, seed=0, name='fixture'):
    rand = np.random.default_rng(seed)
    records = []
    for k in range(n):
        objects = []
        for _ in range(int(rand.integers(1, 5))):
            x0, y0 = int(rand.integers(1, 500)), int(rand.integers(1, 380))
            w, h = int(rand.integers(2, 140)), int(rand.integers(2, 100))
            objects.append(VocObject(
                str(rand.choice(['car', 'bus', 'truck'])), (x0, y0, x0 + w - 1, y0 + h - 1),
                truncated=int(rand.random() < 0.2), occ_rate=float(rand.choice([0.0, 0.0, 0.2, 0.6])),
            ))
        records.append(VocRecord(f"{k:07d}", 640, 480, tuple(objects)))
    return DatasetIndex.from_records(records, provenance={'source': 'fixture', 'name': name})


class ConfigTests(SimpleTestCase):

    def test_json_and_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / 'run.json').write_text('{"frames": 4, "time-of-day": 9.5}')
            (Path(tmp) / 'run.yaml').write_text('frames: 4\ntime_of_day: 9.5\n')
            expected = {'frames': 4, 'time_of_day': 9.5}
            self.assertEqual(load_config(Path(tmp) / 'run.json'), expected)
            self.assertEqual(load_config(Path(tmp) / 'run.yaml'), expected)

    def test_bad_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.json'
            path.write_text('[1, 2]')
            with self.assertRaises(ConfigError):
                load_config(path)
            path.write_text('{oops')
            with self.assertRaises(ConfigError):
                load_config(path)
        with self.assertRaises(IoFailure):
            load_config('/nonexistent/run.json')

    def test_flags_override_file(self):
        merged = merge_options({'frames': 4, 'seed': 1}, {'frames': 9, 'seed': None, 'verbosity': 1}, ['frames', 'seed'])
        self.assertEqual(merged, {'frames': 9, 'seed': 1})


class FormTests(SimpleTestCase):

    def test_generate_defaults_to_a_preset(self):
        form = GenerateForm(data={'out': '/tmp/x'})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data['scenario']['preset'], 'PE01')

    def test_generate_scenario_overrides(self):
        form = GenerateForm(data={'out': '/tmp/x', 'preset': 'PE03', 'resolution': [128, 96],
                                  'scenario': {'weathers': ['foggy'], 'preset': 'PE02'}})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data['resolution'], (128, 96))
        config = RunConfig.from_form(form.cleaned_data)
        self.assertEqual(config.scenario.traffic_density, 'dense')
        self.assertEqual(config.scenario.weathers, ('foggy',))
        self.assertEqual(config.rig, {'resolution': (128, 96)})

    def test_generate_rejects(self):
        for data in ({'out': 'x', 'resolution': '64by48'}, {'out': 'x', 'time_of_day': 24},
                     {'out': 'x', 'scenario': {'weathers': ['snowy']}}, {'out': 'x', 'frames': 0}, {}):
            self.assertFalse(GenerateForm(data=data).is_valid(), data)

    def test_filter_needs_one_mode(self):
        self.assertFalse(FilterForm(data={'dataset': 'a', 'out': 'b'}).is_valid())
        self.assertFalse(FilterForm(data={'dataset': 'a', 'out': 'b', 'min_area': 10, 'fully_visible': True}).is_valid())
        self.assertTrue(FilterForm(data={'dataset': 'a', 'out': 'b', 'min_area': 10}).is_valid())

    def test_eval_modes(self):
        self.assertFalse(EvalForm(data={'dataset': 'a'}).is_valid())
        self.assertFalse(EvalForm(data={'detections': 'd.jsonl'}).is_valid())
        self.assertFalse(EvalForm(data={'measured': 'm.json'}).is_valid())
        self.assertTrue(EvalForm(data={'measured': 'm.json', 'reference': 'r.json'}).is_valid())


class PlanTests(SimpleTestCase):

    def test_frame_counts(self):
        self.assertEqual(frame_counts(12, 5), [3, 3, 2, 2, 2])
        self.assertEqual(frame_counts(2, 5), [1, 1, 0, 0, 0])
        self.assertEqual(sum(frame_counts(200, 2)), 200)

    def test_sequence_conditions(self):
        config = RunConfig(out=Path('/tmp/x'), scenario=get_preset('PE01'), frames=10, fov_h=70.0)
        rig = type('Rig', (), {'height': 1.5, 'fov_h': 60.0})()
        plans = plan_sequences(config, rig)
        self.assertEqual([p.weather for p in plans], ['sunny', 'cloudy', 'foggy', 'rainy', 'sunny'])
        self.assertEqual([p.fov_h for p in plans], [70.0] * 5)
        self.assertEqual([p.camera_height for p in plans], [1.5] * 5)
        self.assertEqual(plans[3].image_id(12), '0300012')

    def test_echo_leaves_out_run_details(self):
        a = RunConfig(out=Path('/tmp/a'), scenario=get_preset('PE02'), jobs=1)
        b = RunConfig(out=Path('/tmp/b'), scenario=get_preset('PE02'), jobs=4)
        self.assertEqual(a.echo(), b.echo())
        self.assertEqual(a.echo()['scenario']['yaw_offsets'], [90.0, -90.0])


class GenerateTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def generate(self, name, **options):
        output = run('generate', out=str(self.root / name), **{**TINY, **options})
        return json.loads(output)

    def test_layout_and_manifest(self):
        manifest = self.generate('pe03', preset='PE03', frames=3, seed=11)
        self.assertEqual(manifest['frame_count'], 3)
        self.assertEqual(manifest['seed'], 11)
        root = self.root / 'pe03'
        ids = ['0000000', '0000001', '0000002']
        self.assertEqual((root / 'ImageSets/Main/trainval.txt').read_text().split(), ids)
        for directory, suffix in (('JPEGImages', 'png'), ('Annotations', 'xml'), ('Depth', 'png'),
                                  ('Instance', 'png'), ('Class', 'png'), ('Flow', 'pefl')):
            self.assertEqual(sorted(p.stem for p in (root / directory).glob(f'*.{suffix}')), ids)
        index = DatasetIndex.load(root)
        self.assertEqual(index.provenance['name'], 'PE03')
        self.assertEqual(manifest['counts']['objects'], index.object_count)
        self.assertIn('frames_per_second', json.loads((root / 'manifest.json').read_text())['timing'])

    def test_rerun_is_identical(self):
        self.generate('a', preset='PE03', frames=3)
        self.generate('b', preset='PE03', frames=3)
        self.assertEqual(tree(self.root / 'a'), tree(self.root / 'b'))

    def test_regenerate_into_same_root(self):
        self.generate('fresh', preset='PE03', frames=2)
        self.generate('reused', preset='PE03', frames=4)
        self.generate('reused', preset='PE03', frames=2)
        self.assertEqual(tree(self.root / 'fresh'), tree(self.root / 'reused'))
        self.assertEqual(DatasetIndex.load(self.root / 'reused').ids, ['0000000', '0000001'])

    def test_jobs_do_not_change_output(self):
        self.generate('serial', preset='PE02', frames=4, jobs=1)
        self.generate('parallel', preset='PE02', frames=4, jobs=3, bands=2)
        self.assertEqual(tree(self.root / 'serial'), tree(self.root / 'parallel'))

    def test_sequences_follow_yaw_offsets(self):
        manifest = self.generate('pe01', preset='PE01', frames=7)
        self.assertEqual([s['frames'] for s in manifest['sequences']], [2, 2, 1, 1, 1])
        ids = (self.root / 'pe01/ImageSets/Main/trainval.txt').read_text().split()
        self.assertEqual(ids, ['0000000', '0000001', '0100000', '0100001', '0200000', '0300000', '0400000'])

    def test_config_file_and_flags(self):
        config = self.root / 'run.yaml'
        config.write_text('preset: PE03\nframes: 3\nresolution: 64x48\nblocks: 1\n')
        output = run('generate', config=str(config), out=str(self.root / 'cfg'), frames=1)
        self.assertEqual(json.loads(output)['frame_count'], 1)

    def test_map_file(self):
        layout = self.root / 'city.json'
        layout.write_text(dump_layout_json(synthetic_grid(1, 1, seed=3)))
        manifest = self.generate('mapped', preset='PE03', frames=1, map=str(layout))
        self.assertEqual(manifest['config']['map'], str(layout))
        self.assertEqual(manifest['frame_count'], 1)

    def test_missing_map(self):
        with self.assertRaises(CommandError) as ctx:
            self.generate('missing', map=str(self.root / 'nowhere.osm'), frames=1)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse((self.root / 'missing').exists())

    def test_bad_config(self):
        with self.assertRaises(CommandError) as ctx:
            self.generate('bad', preset='PE09')
        self.assertEqual(ctx.exception.returncode, 1)
        config = self.root / 'run.json'
        config.write_text('{"frams": 3}')
        with self.assertRaises(CommandError) as ctx:
            run('generate', config=str(config), out=str(self.root / 'bad'))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_run_generate_directly(self):
        config = RunConfig(out=self.root / 'direct', scenario=get_preset('PE03'), frames=2, seed=5,
                           rig={'resolution': (64, 48)}, blocks=1, weather='foggy')
        manifest = run_generate(config)
        self.assertEqual(manifest['frame_count'], 2)
        self.assertEqual({s['weather'] for s in manifest['sequences']}, {'foggy'})


class SurgeryCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.index = fixture_index()
        self.index.save(self.root / 'fixture')

    def path(self, name):
        return str(self.root / name)

    def test_stats(self):
        report = json.loads(run('stats', self.path('fixture')))
        self.assertEqual(report['images'], 100)
        self.assertEqual(report['objects'], self.index.object_count)

    def test_split(self):
        report = json.loads(run('split', self.path('fixture'), out=self.path('split'), ratio='3:1', seed=5))
        self.assertEqual(report['splits'], {'train': 75, 'test': 25})
        train = (self.root / 'split/ImageSets/Main/train.txt').read_text().split()
        test = (self.root / 'split/ImageSets/Main/test.txt').read_text().split()
        self.assertEqual((len(train), len(test)), (75, 25))
        self.assertEqual(sorted(train + test), self.index.ids)

    def test_filter_min_area(self):
        run('filter', self.path('fixture'), out=self.path('large'), min_area=3600)
        result = DatasetIndex.load(self.root / 'large')
        expected = {}
        for image_id, record in self.index.records.items():
            kept = tuple(o for o in record.objects
                         if (o.bndbox[2] - o.bndbox[0] + 1) * (o.bndbox[3] - o.bndbox[1] + 1) >= 3600)
            if kept:
                expected[image_id] = kept
        self.assertEqual({i: r.objects for i, r in result.records.items()}, expected)
        self.assertLess(len(result), len(self.index))

        run('filter', self.path('large'), out=self.path('again'), min_area=3600)
        again = DatasetIndex.load(self.root / 'again')
        self.assertEqual({i: r.objects for i, r in again.records.items()}, expected)

    def test_filter_fully_visible(self):
        run('filter', self.path('fixture'), out=self.path('visible'), fully_visible=True)
        result = DatasetIndex.load(self.root / 'visible')
        for record in result.records.values():
            self.assertTrue(record.objects)
            for obj in record.objects:
                self.assertEqual((obj.occ_rate, obj.truncated), (0.0, 0))

    def test_mix_and_sample(self):
        fixture_index(10, seed=1, name='other').save(self.root / 'other')
        report = json.loads(run('mix', self.path('fixture'), self.path('other'), out=self.path('mixed')))
        self.assertEqual(report['images'], 110)
        mixed = DatasetIndex.load(self.root / 'mixed')
        self.assertIn('other_0000003', mixed.records)
        self.assertIn('fixture_0000099', mixed.records)

        report = json.loads(run('sample', self.path('mixed'), out=self.path('sampled'), n=20, seed=3))
        self.assertEqual(report['images'], 20)
        with self.assertRaises(CommandError) as ctx:
            run('sample', self.path('mixed'), out=self.path('too_many'), n=111)
        self.assertEqual(ctx.exception.returncode, 1)

    def test_duplicate_namespaces(self):
        with self.assertRaises(CommandError) as ctx:
            run('mix', self.path('fixture'), self.path('fixture'), out=self.path('mixed'))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_missing_dataset(self):
        with self.assertRaises(CommandError) as ctx:
            run('stats', self.path('nowhere'))
        self.assertEqual(ctx.exception.returncode, 2)


class EvalCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def write(self, name, data):
        path = self.root / name
        path.write_text(json.dumps(data))
        return str(path)

    def test_descent_report(self):
        reference = self.write('reference.json', {'01': 0.485, '02': 0.570, '03': 0.585})
        measured = self.write('measured.json', {'01': 0.256, '02': 0.508, '03': 0.467})
        report = self.root / 'report.json'
        output = run('eval', measured=measured, reference=reference, report=str(report))
        self.assertEqual(output, 'rate of descent\n01: 47.2%\n02: 10.9%\n03: 20.2%\n')
        descent = json.loads(report.read_text())['descent']
        self.assertAlmostEqual(descent['01'], 0.472, delta=1e-3)

    def test_detections(self):
        index = fixture_index(20, seed=4)
        index.save(self.root / 'data')
        lines = [
            json.dumps({'image_id': image_id, 'class': obj.name, 'bbox': list(obj.bndbox), 'score': 1.0})
            for image_id, record in index.records.items() for obj in record.objects
        ]
        detections = self.root / 'dets.jsonl'
        detections.write_text('\n'.join(lines) + '\n')
        report = self.root / 'report.json'
        output = run('eval', str(self.root / 'data'), detections=str(detections), report=str(report))
        self.assertEqual(output.splitlines()[1].split()[:2], ['car', '100.0'])
        self.assertEqual(json.loads(report.read_text())['mean'], 1.0)

    def test_errors(self):
        with self.assertRaises(CommandError) as ctx:
            run('eval', measured=self.write('m.json', {'car': 0.5}), reference=self.write('r.json', {'car': 0.0}))
        self.assertEqual(ctx.exception.returncode, 1)
        with self.assertRaises(CommandError) as ctx:
            run('eval', measured=str(self.root / 'absent.json'), reference=self.write('r.json', {'car': 0.5}))
        self.assertEqual(ctx.exception.returncode, 2)
        with self.assertRaises(CommandError) as ctx:
            run('eval', measured=self.write('m.json', {'car': 0.5}), reference=self.write('r.json', {'car': 0.5}),
                iou_threshold=1.5)
        self.assertEqual(ctx.exception.returncode, 1)


class BenchCommandTests(SimpleTestCase):

    def test_report(self):
        report = json.loads(run('bench', frames=2, resolution='64x48', blocks=1, verify=True))
        self.assertEqual(report['frames'], 2)
        self.assertEqual(report['resolution'], [64, 48])
        self.assertTrue(report['culling'])
        self.assertTrue(report['lod'])
        self.assertIs(report['culling_invariant'], True)
        self.assertGreater(report['entities'], 0)
        self.assertGreater(report['frames_per_second'], 0)

    def test_lod_can_be_switched_off(self):
        report = json.loads(run('bench', frames=1, resolution='64x48', blocks=1, lod=False))
        self.assertFalse(report['lod'])

    @tag('slow')
    def test_throughput_at_full_resolution(self):
        report = run_bench(BenchConfig(frames=10, resolution=(640, 480), blocks=4))
        self.assertGreaterEqual(report['entities'], 200)
        self.assertTrue(report['lod'])
        self.assertGreaterEqual(report['frames_per_second'], 8.0)


@tag('slow')
class PresetShapeTests(SimpleTestCase):
    """Generated preset datasets differ as intended: PE01 smaller objects, PE03 more occlusion, PE02 least crowded."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.stats = {}
        for preset in ('PE01', 'PE02', 'PE03'):
            config = RunConfig(out=Path(cls.tmp.name) / preset, scenario=get_preset(preset), frames=200, seed=2017)
            cls.stats[preset] = run_generate(config)['stats']

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def fraction(self, preset, histogram, label):
        values = self.stats[preset][histogram]
        return values[label] / sum(values.values())

    def test_pe01_has_more_small_objects(self):
        self.assertGreater(self.fraction('PE01', 'area', 'Small'), self.fraction('PE02', 'area', 'Small'))

    def test_pe03_is_more_occluded(self):
        self.assertGreater(self.fraction('PE03', 'occlusion', 'Largely'), self.fraction('PE02', 'occlusion', 'Largely'))

    def test_pe02_is_least_crowded(self):
        mean = {p: s['mean_instances_per_image'] for p, s in self.stats.items()}
        self.assertLess(mean['PE02'], mean['PE01'])
        self.assertLess(mean['PE02'], mean['PE03'])
