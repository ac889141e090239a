"""Detection and AP files.

Detections are JSON lines: {"image_id", "class", "bbox": [xmin, ymin, xmax, ymax], "score"}.
AP files are a JSON object of name -> AP, or {"ap": {...}} as written by the eval command.
"""

import json
from pathlib import Path

from paralleleye.exceptions import IoFailure

from .metrics import Detection


def _read(path):
    try:
        return Path(path).read_text(encoding='utf-8')
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def parse_detections(text, source='<detections>'):
    detections = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            detections.append(Detection(
                image_id=str(data['image_id']),
                cls=str(data['class']),
                box=tuple(float(v) for v in data['bbox']),
                confidence=float(data['score']),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise IoFailure(f"{source}:{lineno}: invalid detection ({exc})") from exc
    return detections


def read_detections_jsonl(path):
    return parse_detections(_read(path), str(path))


def read_ap_file(path):
    try:
        data = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise IoFailure(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(data, dict) and isinstance(data.get('ap'), dict):
        data = data['ap']
    if not isinstance(data, dict):
        raise IoFailure(f"{path}: expected an object of name -> AP")
    try:
        return {str(k): None if v is None else float(v) for k, v in data.items()}
    except (TypeError, ValueError) as exc:
        raise IoFailure(f"{path}: AP values must be numbers") from exc
