import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from dataset.index import DatasetIndex
from dataset.voc import VocObject, VocRecord
from paralleleye.exceptions import ConfigError, IoFailure

from .descent import descent_table, format_descent, rate_of_descent
from .evaluate import evaluate, format_ap_table, mean_ap
from .exceptions import UnknownClass, ZeroReference
from .files import parse_detections, read_ap_file, read_detections_jsonl
from .metrics import FP, IGNORED, TP, Detection, EvalConfig, average_precision, iou, match_detections, pr_points

ELEVEN = EvalConfig(ap_mode='voc2007_11pt')
CONTINUOUS = EvalConfig(ap_mode='continuous')

# (reference AP, measured AP, rate of descent to three places)
DESCENT_ROWS = [
    (0.485, 0.256, 0.472), (0.570, 0.508, 0.109), (0.585, 0.467, 0.202),
    (0.485, 0.348, 0.282), (0.570, 0.433, 0.240), (0.585, 0.396, 0.323),
]


def gt(*boxes, difficult=0):
    return [VocObject('car', b, difficult=difficult) for b in boxes]


def det(box, confidence, image_id='1', cls='car'):
    return Detection(image_id, cls, box, confidence)


def brute_force_ap(flags, npos):
    """Cumulative PR by explicit loops; continuous AP as a sum over recall steps."""
    counted = [f for f in flags if f != IGNORED]
    precisions, recalls, tp = [], [], 0
    for i, flag in enumerate(counted, start=1):
        tp += flag == TP
        precisions.append(tp / i)
        recalls.append(tp / npos)
    eleven = 0.0
    for k in range(11):
        t = k / 10
        eleven += max([p for p, r in zip(precisions, recalls) if r >= t], default=0.0)
    continuous = 0.0
    for i, flag in enumerate(counted):
        if flag == TP:
            continuous += max(precisions[i:]) / npos
    return eleven / 11, continuous


def brute_force_match(dets, objects, threshold):
    """Greedy matching over a precomputed IoU matrix."""
    order = sorted(range(len(dets)), key=lambda k: (-dets[k].confidence, dets[k].image_id, k))
    overlaps = np.array([[iou(d.box, o.bndbox) for o in objects] for d in dets]).reshape(len(dets), len(objects))
    taken = np.zeros(len(objects), dtype=bool)
    flags = []
    for k in order:
        row = np.where(taken, -1.0, overlaps[k])
        if not len(row) or row.max() < threshold or row.max() <= 0:
            flags.append(FP)
            continue
        j = int(np.argmax(row))
        if objects[j].difficult:
            flags.append(IGNORED)
        else:
            taken[j] = True
            flags.append(TP)
    return flags


def random_box(rand, size=60):
    x0, y0 = (int(v) for v in rand.integers(1, size, size=2))
    return (x0, y0, x0 + int(rand.integers(5, 40)), y0 + int(rand.integers(5, 40)))


def index_of(*records):
    return DatasetIndex.from_records(records)


class IouTests(SimpleTestCase):

    def test_identical(self):
        self.assertEqual(iou((1, 1, 10, 10), (1, 1, 10, 10)), 1.0)

    def test_disjoint(self):
        self.assertEqual(iou((1, 1, 10, 10), (11, 1, 20, 10)), 0.0)

    def test_inclusive_areas(self):
        self.assertAlmostEqual(iou((1, 1, 10, 10), (6, 1, 15, 10)), 50 / 150, delta=1e-6)
        # single shared pixel column
        self.assertAlmostEqual(iou((1, 1, 10, 10), (10, 1, 19, 10)), 10 / 190)

    def test_symmetric(self):
        rand = np.random.default_rng(1)
        for _ in range(100):
            a, b = random_box(rand), random_box(rand)
            self.assertEqual(iou(a, b), iou(b, a))
            self.assertTrue(0.0 <= iou(a, b) <= 1.0)


class MatchTests(SimpleTestCase):

    def test_single_match(self):
        match = match_detections([det((1, 1, 100, 80), 0.9)], {'1': gt((1, 1, 100, 100))}, EvalConfig(0.7))
        self.assertEqual(match.flags, (TP,))
        self.assertEqual(match.npos, 1)

    def test_below_threshold(self):
        match = match_detections([det((1, 1, 100, 60), 0.9)], {'1': gt((1, 1, 100, 100))}, EvalConfig(0.7))
        self.assertEqual(match.flags, (FP,))

    def test_duplicate_detection(self):
        dets = [det((1, 1, 100, 95), 0.6), det((1, 1, 100, 98), 0.9)]
        match = match_detections(dets, {'1': gt((1, 1, 100, 100))}, EvalConfig(0.7))
        self.assertEqual(match.order, (1, 0))
        self.assertEqual(match.flags, (TP, FP))

    def test_other_image_does_not_match(self):
        match = match_detections([det((1, 1, 100, 100), 0.9, image_id='2')], {'1': gt((1, 1, 100, 100))}, ELEVEN)
        self.assertEqual(match.flags, (FP,))

    def test_difficult_never_consumed(self):
        objects = {'1': gt((1, 1, 100, 100), difficult=1)}
        dets = [det((1, 1, 100, 100), 0.9), det((1, 1, 100, 99), 0.8)]
        match = match_detections(dets, objects, ELEVEN)
        self.assertEqual(match.flags, (IGNORED, IGNORED))
        self.assertEqual(match.npos, 0)
        counted = match_detections(dets, objects, EvalConfig(ignore_difficult=False))
        self.assertEqual(counted.flags, (TP, FP))
        self.assertEqual(counted.npos, 1)

    def test_tie_break(self):
        dets = [det((1, 1, 10, 10), 0.5, image_id='b'), det((1, 1, 10, 10), 0.5, image_id='a'),
                det((1, 1, 10, 10), 0.5, image_id='a')]
        match = match_detections(dets, {'a': gt((1, 1, 10, 10))}, ELEVEN)
        self.assertEqual(match.order, (1, 2, 0))
        self.assertEqual(match.flags, (TP, FP, FP))

    def test_matches_brute_force(self):
        rand = np.random.default_rng(11)
        for _ in range(300):
            objects = [VocObject('car', random_box(rand), difficult=int(rand.random() < 0.2)) for _ in range(3)]
            dets = [det(random_box(rand), float(rand.random())) for _ in range(5)]
            threshold = float(rand.choice([0.3, 0.5, 0.7]))
            match = match_detections(dets, {'1': objects}, EvalConfig(threshold))
            self.assertEqual(list(match.flags), brute_force_match(dets, objects, threshold))

    def test_order_invariance(self):
        rand = np.random.default_rng(12)
        objects = {'1': [VocObject('car', random_box(rand)) for _ in range(4)]}
        dets = [det(random_box(rand), float(c)) for c in rand.permutation(10) / 10]
        flags = match_detections(dets, objects, ELEVEN).flags
        for _ in range(5):
            shuffled = [dets[k] for k in rand.permutation(len(dets))]
            self.assertEqual(match_detections(shuffled, objects, ELEVEN).flags, flags)


class AveragePrecisionTests(SimpleTestCase):

    def test_single_tp(self):
        self.assertEqual(average_precision([True], 1, ELEVEN), 1.0)
        self.assertEqual(average_precision([True], 1, CONTINUOUS), 1.0)

    def test_all_fp(self):
        self.assertEqual(average_precision([False, False], 3, ELEVEN), 0.0)
        self.assertEqual(average_precision([False, False], 3, CONTINUOUS), 0.0)

    def test_tp_fp_tp(self):
        self.assertAlmostEqual(average_precision([TP, FP, TP], 2, ELEVEN), (6 + 5 * 2 / 3) / 11, delta=1e-4)
        self.assertAlmostEqual(average_precision([TP, FP, TP], 2, ELEVEN), 0.8485, delta=1e-4)
        self.assertAlmostEqual(average_precision([TP, FP, TP], 2, CONTINUOUS), 0.5 + 0.5 * 2 / 3)

    def test_no_positives(self):
        with self.assertLogs('evaluation.metrics', 'WARNING'):
            self.assertEqual(average_precision([False], 0, ELEVEN), 0.0)

    def test_ignored_flags_skipped(self):
        self.assertEqual(average_precision([TP, IGNORED, TP], 2, CONTINUOUS), 1.0)

    def test_matches_brute_force(self):
        rand = np.random.default_rng(5)
        for _ in range(500):
            flags = [TP if rand.random() < 0.5 else FP for _ in range(int(rand.integers(0, 21)))]
            npos = max(1, flags.count(TP) + int(rand.integers(0, 5)))
            eleven, continuous = brute_force_ap(flags, npos)
            self.assertAlmostEqual(average_precision(flags, npos, ELEVEN), eleven, delta=1e-9)
            self.assertAlmostEqual(average_precision(flags, npos, CONTINUOUS), continuous, delta=1e-9)

    def test_monotonicity(self):
        rand = np.random.default_rng(6)
        for _ in range(200):
            flags = [TP if rand.random() < 0.5 else FP for _ in range(int(rand.integers(1, 15)))]
            npos = flags.count(TP) + 2
            for config in (ELEVEN, CONTINUOUS):
                ap = average_precision(flags, npos, config)
                self.assertTrue(0.0 <= ap <= 1.0)
                self.assertLessEqual(average_precision(flags + [FP], npos, config), ap + 1e-12)
                self.assertGreaterEqual(average_precision([TP] + flags, npos + 1, config), ap - 1e-12)

    def test_continuous_above_riemann_sum(self):
        rand = np.random.default_rng(7)
        for _ in range(100):
            flags = [TP if rand.random() < 0.6 else FP for _ in range(30)]
            npos = flags.count(TP) + 3
            points = pr_points(flags, npos)

            def envelope(r):
                return max([p.precision for p in points if p.recall >= r], default=0.0)

            n = 400
            riemann = sum(envelope(i / n) for i in range(1, n + 1)) / n
            self.assertGreaterEqual(average_precision(flags, npos, CONTINUOUS), riemann - 1e-12)

    def test_modes_agree_on_long_curves(self):
        flags = [TP, FP] * 50
        eleven = average_precision(flags, 50, ELEVEN)
        continuous = average_precision(flags, 50, CONTINUOUS)
        self.assertLess(abs(eleven - continuous), 0.05)
        self.assertAlmostEqual(average_precision([TP] * 50, 50, ELEVEN), average_precision([TP] * 50, 50, CONTINUOUS))

    def test_recall_non_decreasing(self):
        points = pr_points([TP, FP, TP, FP, FP, TP], 4)
        recalls = [p.recall for p in points]
        self.assertEqual(recalls, sorted(recalls))

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            EvalConfig(iou_threshold=0.0)
        with self.assertRaises(ConfigError):
            EvalConfig(ap_mode='coco')


class EvaluateTests(SimpleTestCase):

    def setUp(self):
        self.index = index_of(
            VocRecord('1', 640, 480, (VocObject('car', (10, 10, 110, 90)), VocObject('bus', (200, 50, 400, 250)))),
            VocRecord('2', 640, 480, (VocObject('car', (300, 300, 360, 350)), VocObject('car', (20, 200, 80, 260)))),
        )

    def echo(self, shift=0):
        return [
            Detection(image_id, obj.name, tuple(v + shift for v in obj.bndbox), 1.0)
            for image_id, record in self.index.records.items() for obj in record.objects
        ]

    def test_perfect_detections(self):
        results = evaluate(self.index, self.echo(), ELEVEN)
        self.assertEqual(results['car'].ap, 1.0)
        self.assertEqual(results['bus'].ap, 1.0)
        self.assertIsNone(results['truck'].ap)
        self.assertEqual(mean_ap(results), 1.0)

    def test_empty_detections(self):
        results = evaluate(self.index, [], CONTINUOUS)
        self.assertEqual((results['car'].ap, results['bus'].ap, results['truck'].ap), (0.0, 0.0, None))
        self.assertEqual(results['car'].npos, 3)

    def test_unknown_class(self):
        with self.assertRaises(UnknownClass):
            evaluate(self.index, [Detection('1', 'person', (1, 1, 5, 5), 0.5)], ELEVEN)

    def test_jitter_threshold_monotone(self):
        loose = evaluate(self.index, self.echo(shift=2), EvalConfig(0.5))
        strict = evaluate(self.index, self.echo(shift=2), EvalConfig(0.95))
        for cls in ('car', 'bus'):
            self.assertGreaterEqual(loose[cls].ap, strict[cls].ap)
        self.assertEqual(loose['car'].ap, 1.0)
        self.assertEqual(strict['car'].ap, 0.0)

    def test_table(self):
        text = format_ap_table(evaluate(self.index, self.echo(), ELEVEN))
        lines = text.splitlines()
        self.assertEqual(lines[0].split(), ['class', 'AP', 'npos', 'dets'])
        self.assertEqual(lines[1].split(), ['car', '100.0', '3', '3'])
        self.assertEqual(lines[3].split(), ['truck', '-', '0', '0'])
        self.assertEqual(lines[4].split(), ['mean', '100.0'])


class DescentTests(SimpleTestCase):

    def test_reference_rates(self):
        for ref, measured, expected in DESCENT_ROWS:
            self.assertAlmostEqual(rate_of_descent(ref, measured), expected, delta=1e-3)

    def test_no_change(self):
        self.assertEqual(rate_of_descent(0.42, 0.42), 0.0)

    def test_zero_reference(self):
        with self.assertRaises(ZeroReference):
            rate_of_descent(0.0, 0.3)
        with self.assertRaises(ZeroReference):
            descent_table({'car': 0.0}, {'car': 0.1})

    def test_table(self):
        table = descent_table({'01': 0.485, '02': 0.570, '03': 0.585, 'x': 0.5}, {'01': 0.256, '02': 0.508, '03': 0.467})
        self.assertEqual(list(table), ['01', '02', '03'])
        self.assertEqual(format_descent(table), '01: 47.2%\n02: 10.9%\n03: 20.2%\n')


class FileTests(SimpleTestCase):

    def test_detections(self):
        text = '\n'.join([
            json.dumps({'image_id': '0000001', 'class': 'car', 'bbox': [1, 2, 30, 40], 'score': 0.9}),
            '',
            json.dumps({'image_id': 7, 'class': 'bus', 'bbox': [5, 5, 9, 9], 'score': 0.1}),
        ])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'dets.jsonl'
            path.write_text(text)
            dets = read_detections_jsonl(path)
        self.assertEqual(dets[0], Detection('0000001', 'car', (1.0, 2.0, 30.0, 40.0), 0.9))
        self.assertEqual(dets[1].image_id, '7')

    def test_bad_detections(self):
        with self.assertRaises(IoFailure):
            parse_detections('{"image_id": "1", "class": "car", "bbox": [1, 2, 3], "score": 1}')
        with self.assertRaises(IoFailure):
            parse_detections('not json')
        with self.assertRaises(IoFailure):
            parse_detections('{"image_id": "1", "class": "car", "bbox": [9, 2, 3, 4], "score": 1}')
        with self.assertRaises(IoFailure):
            read_detections_jsonl('/nonexistent.jsonl')

    def test_ap_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            plain = Path(tmp) / 'ap.json'
            plain.write_text(json.dumps({'car': 0.5, 'bus': None}))
            wrapped = Path(tmp) / 'report.json'
            wrapped.write_text(json.dumps({'ap': {'car': 0.25}, 'mean': 0.25}))
            self.assertEqual(read_ap_file(plain), {'car': 0.5, 'bus': None})
            self.assertEqual(read_ap_file(wrapped), {'car': 0.25})
            plain.write_text('[1, 2]')
            with self.assertRaises(IoFailure):
                read_ap_file(plain)
