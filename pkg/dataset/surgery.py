"""Dataset surgery: area and visibility filters, splits, mixing and sampling.

Every operation returns a new index and leaves its input untouched. Images
left without objects by a filter are dropped.
"""

import logging

from paralleleye import seeds
from paralleleye.exceptions import ConfigError

from .exceptions import DuplicateNamespace, MissingOcclusionData, SampleTooLarge
from .index import DatasetIndex

logger = logging.getLogger(__name__)


def _filter_objects(index, keep, label):
    records = []
    for record in index.records.values():
        objects = [obj for obj in record.objects if keep(obj)]
        if objects:
            records.append(record.with_objects(objects))
    provenance = dict(index.provenance)
    provenance['derived'] = list(provenance.get('derived', [])) + [label]
    result = index.derive(records, provenance)
    logger.info("%s: %d -> %d images, %d -> %d objects", label,
                len(index), len(result), index.object_count, result.object_count)
    return result


def filter_min_area(index, min_area):
    if min_area <= 0:
        raise ConfigError("min_area must be positive")
    return _filter_objects(index, lambda obj: obj.area >= min_area, f"min_area={min_area}")


def filter_fully_visible(index):
    for record in index.records.values():
        if any(obj.occ_rate is None for obj in record.objects):
            raise MissingOcclusionData(record.image_id)
    return _filter_objects(index, lambda obj: obj.occ_rate == 0 and obj.truncated == 0, 'fully_visible')


def split_sizes(n, ratio):
    a, b = ratio
    if a < 1 or b < 1:
        raise ConfigError(f"ratio parts must be at least 1, got {a}:{b}")
    # round half up, in integers
    train = (2 * n * a + a + b) // (2 * (a + b))
    return train, n - train


def split(index, ratio, seed):
    """(train, test) image-level partition with a seeded shuffle."""
    ids = index.ids
    n_train, _ = split_sizes(len(ids), ratio)
    order = seeds.rng(seeds.derive(seed, 'split')).permutation(len(ids))
    chosen = set(order[:n_train].tolist())
    train = [index.records[i] for k, i in enumerate(ids) if k in chosen]
    test = [index.records[i] for k, i in enumerate(ids) if k not in chosen]
    return index.derive(train), index.derive(test)


def with_split(index, ratio, seed, names=('train', 'test')):
    """The whole index with the partition recorded as two named splits."""
    train, test = split(index, ratio, seed)
    splits = dict(index.splits)
    splits[names[0]] = tuple(train.ids)
    splits[names[1]] = tuple(test.ids)
    return index.derive(index.records.values(), splits=splits)


def namespace_of(index, position):
    return index.provenance.get('name') or f"d{position}"


def mix(*indexes, namespaces=None):
    """Union of datasets; image ids become ``{namespace}_{id}``."""
    if not indexes:
        raise ConfigError("mix needs at least one dataset")
    namespaces = list(namespaces) if namespaces else [namespace_of(ix, k) for k, ix in enumerate(indexes)]
    if len(namespaces) != len(indexes):
        raise ConfigError("one namespace per dataset is required")
    if len(set(namespaces)) != len(namespaces):
        raise DuplicateNamespace(f"namespaces must be distinct, got {namespaces}")

    records, splits, sources = {}, {}, {}
    for ns, index in zip(namespaces, indexes):
        for image_id, record in index.records.items():
            new_id = f"{ns}_{image_id}"
            records[new_id] = record.renamed(new_id)
            sources[new_id] = index.source_of(image_id)
        for name, ids in index.splits.items():
            splits[name] = splits.get(name, ()) + tuple(f"{ns}_{i}" for i in ids)
    provenance = {'source': 'mix', 'parts': [
        {'namespace': ns, 'provenance': index.provenance} for ns, index in zip(namespaces, indexes)
    ]}
    return DatasetIndex(records, splits, provenance, sources=sources)


def sample(index, n, seed):
    if n < 0:
        raise ConfigError("sample size must be non-negative")
    if n > len(index):
        raise SampleTooLarge(n, len(index))
    ids = index.ids
    chosen = set(seeds.rng(seeds.derive(seed, 'sample')).choice(len(ids), size=n, replace=False).tolist())
    provenance = dict(index.provenance)
    provenance['derived'] = list(provenance.get('derived', [])) + [f"sample={n}"]
    return index.derive([index.records[i] for k, i in enumerate(ids) if k in chosen], provenance)
