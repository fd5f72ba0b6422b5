"""Dataset manifests: plain-text image-id to class-id tables.

The on-disk format is one record per line, ``<image_id> <class_num>``, as used
by the standard ImageNet-style layout (``meta/train.txt`` / ``meta/val.txt``).
Reads accept any whitespace run as the separator plus blank lines and
``#`` comments; writes emit a single space and one trailing newline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicateImageId, EmptyInput, EmptyManifest, MalformedLine

SPLITS = ("train", "val")


@dataclass(frozen=True)
class DatasetManifest:
    """All (image_id, class_id) records of one dataset split."""

    dataset_name: str
    split: str
    entries: tuple[tuple[str, int], ...]
    class_universe: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        universe = self.class_universe or tuple(sorted({c for _, c in self.entries}))
        object.__setattr__(self, "class_universe", universe)
        if not universe:
            raise EmptyInput("manifest has no classes")
        seen = set(universe)
        ids = set()
        for image_id, class_id in self.entries:
            if class_id not in seen:
                raise ValueError(f"class {class_id} not in class_universe")
            if image_id in ids:
                raise DuplicateImageId(image_id)
            ids.add(image_id)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def num_classes(self) -> int:
        return len(self.class_universe)


@dataclass(frozen=True)
class ClassIndex:
    """The instances of one class, in canonical (lexicographic) order."""

    class_id: int
    instance_ids: tuple[str, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.instance_ids))
        object.__setattr__(self, "instance_ids", ordered)

    @property
    def cardinality(self) -> int:
        return len(self.instance_ids)


def parse_manifest(path: Path | str, dataset_name: str, split: str) -> DatasetManifest:
    """Parse a manifest text file.

    Raises MalformedLine on a bad record, DuplicateImageId on repeated ids,
    EmptyManifest when no records remain after skipping blanks and comments.
    """
    path = Path(path)
    entries: list[tuple[str, int]] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise MalformedLine(line_no, f"expected 2 tokens, got {len(tokens)}")
            image_id, class_token = tokens
            try:
                class_id = int(class_token)
            except ValueError:
                raise MalformedLine(line_no, f"class {class_token!r} is not an integer") from None
            if class_id < 0:
                raise MalformedLine(line_no, f"class {class_id} is negative")
            if image_id in seen:
                raise DuplicateImageId(image_id)
            seen.add(image_id)
            entries.append((image_id, class_id))
    if not entries:
        raise EmptyManifest(str(path))
    return DatasetManifest(dataset_name=dataset_name, split=split, entries=tuple(entries))


def serialize_manifest(manifest: DatasetManifest) -> str:
    return "".join(f"{image_id} {class_id}\n" for image_id, class_id in manifest.entries)


def write_manifest(manifest: DatasetManifest, path: Path | str) -> Path:
    from .util import atomic_write_text

    return atomic_write_text(path, serialize_manifest(manifest))


def synthesize_split(
    items: Sequence[tuple[str, int]], dataset_name: str
) -> tuple[DatasetManifest, DatasetManifest]:
    """Deterministic train/val split for datasets without an official one.

    Items are assigned sequential IDs 0.. in the given order; an item whose ID
    satisfies ID % 5 == 0 goes to the validation set, everything else to the
    training set. The assignment order is caller-provided and should itself be
    deterministic (e.g. sorted file names).
    """
    if not items:
        raise EmptyInput("cannot split an empty item list")
    train: list[tuple[str, int]] = []
    val: list[tuple[str, int]] = []
    for seq_id, item in enumerate(items):
        (val if seq_id % 5 == 0 else train).append(item)
    universe = tuple(sorted({c for _, c in items}))

    # A tiny input can leave train empty; keep the full universe on both sides
    # so downstream class bookkeeping stays consistent.
    def make(split: str, rows: list[tuple[str, int]]) -> DatasetManifest:
        return DatasetManifest(
            dataset_name=dataset_name,
            split=split,
            entries=tuple(rows),
            class_universe=universe,
        )

    return make("train", train), make("val", val)


def build_class_index(manifest: DatasetManifest) -> dict[int, ClassIndex]:
    """Partition manifest entries by class, instances sorted lexicographically."""
    grouped: dict[int, list[str]] = {c: [] for c in manifest.class_universe}
    for image_id, class_id in manifest.entries:
        grouped[class_id].append(image_id)
    return {
        class_id: ClassIndex(class_id=class_id, instance_ids=tuple(ids))
        for class_id, ids in sorted(grouped.items())
        if ids
    }


def load_class_names(path: Path | str) -> dict[int, str]:
    """Optional sidecar mapping class ids to human-readable labels."""
    with Path(path).open("r", encoding="utf-8") as handle:
        raw = json.load(handle)
    return {int(k): str(v) for k, v in raw.items()}
