"""Run configuration files.

``--config FILE`` loads a JSON object, or YAML when the file ends in .yaml
or .yml. Keys may be spelled with dashes or underscores. Flags given on the
command line win over the file.
"""

import json
from pathlib import Path

import yaml

from paralleleye.exceptions import ConfigError, IoFailure

YAML_SUFFIXES = ('.yaml', '.yml')


def _normalize(data):
    return {str(key).replace('-', '_'): value for key, value in data.items()}


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) if path.suffix.lower() in YAML_SUFFIXES else json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold an object of settings")
    return _normalize(data)


def merge_options(file_values, options, keys):
    """file_values overridden by every option in keys that was actually given."""
    merged = dict(file_values)
    for key in keys:
        if options.get(key) is not None:
            merged[key] = options[key]
    return merged
