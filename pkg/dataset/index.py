import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import IoFailure
from .frames import LAYOUT, SPLIT_DIR, FramePaths, make_layout
from .voc import parse_voc_xml, write_voc_xml

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'


@dataclass(frozen=True, eq=False)
class DatasetIndex:
    """Image records in id order, named splits and provenance of one dataset.

    ``sources`` maps each image id to the (root, id) its frame files live
    under, so derived indexes can copy files after ids were namespaced.
    """
    records: dict
    splits: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    root: Path = None
    sources: dict = field(default_factory=dict)

    def __post_init__(self):
        for record_id, record in self.records.items():
            if record.image_id != record_id:
                raise ValueError(f"record {record.image_id} filed under id {record_id}")
        for name, ids in self.splits.items():
            missing = [i for i in ids if i not in self.records]
            if missing:
                raise ValueError(f"split {name!r} references unknown images {missing[:3]}")

    @classmethod
    def from_records(cls, records, **kwargs):
        records = list(records)
        index = {r.image_id: r for r in records}
        if len(index) != len(records):
            raise ValueError("image ids must be unique")
        return cls(index, **kwargs)

    def __len__(self):
        return len(self.records)

    @property
    def ids(self):
        return list(self.records)

    @property
    def object_count(self):
        return sum(len(r.objects) for r in self.records.values())

    def derive(self, records, provenance=None, splits=None):
        """New index over records (a subset of this one's, possibly with fewer objects)."""
        records = {r.image_id: r for r in records}
        if splits is None:
            splits = {name: tuple(i for i in ids if i in records) for name, ids in self.splits.items()}
        return DatasetIndex(
            records=records,
            splits=splits,
            provenance=provenance if provenance is not None else dict(self.provenance),
            root=self.root,
            sources={i: self.source_of(i) for i in records},
        )

    def source_of(self, image_id):
        return self.sources.get(image_id) or ((self.root, image_id) if self.root is not None else None)

    def to_dict(self):
        return {
            'images': len(self.records),
            'objects': self.object_count,
            'splits': {name: len(ids) for name, ids in self.splits.items()},
        }

    @classmethod
    def load(cls, root):
        root = Path(root)
        annotations = root / LAYOUT['annotation'][0]
        if not annotations.is_dir():
            raise IoFailure(f"{root} has no {LAYOUT['annotation'][0]} directory")
        records = []
        for path in sorted(annotations.glob('*.xml')):
            try:
                records.append(parse_voc_xml(path.read_text(encoding='utf-8')))
            except OSError as exc:
                raise IoFailure(f"cannot read {path}: {exc}") from exc
        splits = {}
        for path in sorted((root / SPLIT_DIR).glob('*.txt')):
            splits[path.stem] = tuple(line.strip() for line in path.read_text().splitlines() if line.strip())
        manifest = root / MANIFEST
        if manifest.exists():
            try:
                provenance = json.loads(manifest.read_text()).get('provenance', {})
            except json.JSONDecodeError as exc:
                raise IoFailure(f"invalid {manifest}: {exc}") from exc
        else:
            provenance = {'source': 'imported', 'path': str(root)}
        try:
            index = cls.from_records(records, splits=splits, provenance=provenance, root=root)
        except ValueError as exc:
            raise IoFailure(f"inconsistent dataset {root}: {exc}") from exc
        logger.info("loaded %s: %d images, %d objects", root, len(index), index.object_count)
        return index

    def save(self, root, manifest=None):
        """Write annotations, split lists and manifest.json under root, copying frame files when available."""
        root = Path(root)
        make_layout(root)
        try:
            for record in self.records.values():
                paths = FramePaths(root, record.image_id)
                paths['annotation'].write_text(write_voc_xml(record), encoding='utf-8')
                copy_frames(self.source_of(record.image_id), paths)
            for name, ids in self.splits.items():
                (root / SPLIT_DIR / f"{name}.txt").write_text(''.join(f"{i}\n" for i in ids))
            data = {'provenance': self.provenance, 'counts': self.to_dict()}
            data.update(manifest or {})
            (root / MANIFEST).write_text(json.dumps(data, indent=2, sort_keys=True) + '\n')
            removed = prune(root, self.records, self.splits)
        except OSError as exc:
            raise IoFailure(f"cannot write dataset under {root}: {exc}") from exc
        if removed:
            logger.info("removed %d stale files under %s", removed, root)
        logger.info("wrote %s: %d images, %d objects", root, len(self), self.object_count)
        return DatasetIndex(self.records, self.splits, self.provenance, root)


def copy_frames(source, paths):
    """Copy the non-annotation frame files of source (root, image id) to paths.

    A frame file the source lacks is removed from paths too.
    """
    if source is None:
        return
    src_root, src_id = source
    src = FramePaths(src_root, src_id)
    if Path(src_root).resolve() == Path(paths.root).resolve() and src_id == paths.image_id:
        return
    for kind, target in paths.items():
        if kind == 'annotation':
            continue
        if src[kind].exists():
            shutil.copyfile(src[kind], target)
        else:
            target.unlink(missing_ok=True)


def prune(root, ids, split_names):
    """Delete frame files of images not in ids and split lists not in split_names; returns the count removed.

    Runs after the new files are written, so sources inside root are still there while copying.
    """
    root = Path(root)
    removed = 0
    for directory, suffix in LAYOUT.values():
        for path in (root / directory).glob(f"*{suffix}"):
            if path.stem not in ids:
                path.unlink()
                removed += 1
    for path in (root / SPLIT_DIR).glob('*.txt'):
        if path.stem not in split_names:
            path.unlink()
            removed += 1
    return removed
