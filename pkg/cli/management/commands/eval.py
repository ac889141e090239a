from dataclasses import asdict
from pathlib import Path

from cli.base import PipelineCommand, as_json
from cli.forms import EvalForm
from dataset.index import DatasetIndex
from evaluation.descent import descent_table, format_descent
from evaluation.evaluate import evaluate, format_ap_table, mean_ap
from evaluation.files import read_ap_file, read_detections_jsonl
from evaluation.metrics import EvalConfig
from paralleleye.exceptions import IoFailure
from worldgen.classes import VEHICLE_CLASSES


class Command(PipelineCommand):
    help = ("Per-class VOC AP of detections against a dataset, and the rate of descent "
            "against reference AP values.")
    form_class = EvalForm

    def add_options(self, parser):
        parser.add_argument('dataset', nargs='?')
        parser.add_argument('--detections', help="JSON lines: image_id, class, bbox, score")
        parser.add_argument('--measured', help="JSON object of AP values, instead of detections")
        parser.add_argument('--reference', help="JSON object of reference AP values")
        parser.add_argument('--report', help="write the JSON report to this file")
        parser.add_argument('--iou', type=float, dest='iou_threshold')
        parser.add_argument('--ap-mode', dest='ap_mode', help="voc2007_11pt or continuous")
        parser.add_argument('--keep-difficult', action='store_false', dest='ignore_difficult', default=None)
        parser.add_argument('--classes', help="comma separated class names")

    def run(self, cleaned):
        config = EvalConfig(
            iou_threshold=0.5 if cleaned.get('iou_threshold') is None else cleaned['iou_threshold'],
            ap_mode=cleaned.get('ap_mode') or 'voc2007_11pt',
            ignore_difficult=cleaned.get('ignore_difficult') is not False,
        )
        text = ''
        if cleaned.get('detections'):
            index = DatasetIndex.load(cleaned['dataset'])
            results = evaluate(index, read_detections_jsonl(cleaned['detections']), config,
                               classes=cleaned.get('classes') or VEHICLE_CLASSES)
            measured = {cls: result.ap for cls, result in results.items()}
            report = {
                'ap': measured,
                'mean': mean_ap(results),
                'classes': {cls: result.to_dict() for cls, result in results.items()},
                'config': asdict(config),
            }
            text = format_ap_table(results)
        else:
            measured = read_ap_file(cleaned['measured'])
            report = {'ap': measured}

        if cleaned.get('reference'):
            report['descent'] = descent_table(read_ap_file(cleaned['reference']), measured)
            if text:
                text += '\n'
            text += 'rate of descent\n' + format_descent(report['descent'])

        if cleaned.get('report'):
            path = Path(cleaned['report'])
            try:
                path.write_text(as_json(report) + '\n', encoding='utf-8')
            except OSError as exc:
                raise IoFailure(f"cannot write report {path}: {exc}") from exc
        return text
