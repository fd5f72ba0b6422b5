"""Seeded few-class subset overlays.

A subset never copies any data: it is a sorted list of selected class ids plus
the parameters that produced it, stored as one small JSON file named
``<dataset>_ncl<N>_seed<S>.json``. Sampling runs SplitMix64-driven
Fisher-Yates over the sorted class universe, so the same (universe, n_cl,
seed) triple yields byte-identical spec files on any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ClassNotInManifest, NClOutOfRange
from .manifest import DatasetManifest
from .util import SplitMix64, atomic_write_text, sample_without_replacement

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_NCL = (2, 3, 4, 5, 10, 100)


@dataclass(frozen=True)
class SubsetSpec:
    """One seeded few-class selection over a dataset's class universe."""

    dataset_name: str
    n_cl: int
    seed: int
    selected_classes: tuple[int, ...]
    source_class_count: int

    def __post_init__(self):
        if self.n_cl < 2:
            raise NClOutOfRange(self.n_cl, self.source_class_count)
        if self.n_cl > self.source_class_count:
            raise NClOutOfRange(self.n_cl, self.source_class_count)
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if len(self.selected_classes) != self.n_cl:
            raise ValueError("selected_classes length must equal n_cl")
        if any(b <= a for a, b in zip(self.selected_classes, self.selected_classes[1:])):
            raise ValueError("selected_classes must be strictly ascending")
        if self.selected_classes and self.selected_classes[0] < 0:
            raise ValueError("class ids must be non-negative")

    @property
    def filename(self) -> str:
        return f"{self.dataset_name}_ncl{self.n_cl}_seed{self.seed}.json"

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "n_cl": self.n_cl,
            "seed": self.seed,
            "selected_classes": list(self.selected_classes),
            "source_class_count": self.source_class_count,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SubsetSpec":
        return cls(
            dataset_name=str(raw["dataset_name"]),
            n_cl=int(raw["n_cl"]),
            seed=int(raw["seed"]),
            selected_classes=tuple(int(c) for c in raw["selected_classes"]),
            source_class_count=int(raw["source_class_count"]),
        )


@dataclass(frozen=True)
class SubsetPlan:
    """A grid of subsets to generate: every n_cl crossed with every seed."""

    dataset_name: str
    n_cl_list: tuple[int, ...]
    seeds: tuple[int, ...] = DEFAULT_SEEDS


def sample_subset(
    class_universe: Sequence[int], n_cl: int, seed: int, dataset_name: str = "dataset"
) -> SubsetSpec:
    """Pick n_cl classes uniformly without replacement, deterministically in seed."""
    universe = sorted(set(class_universe))
    if not 2 <= n_cl <= len(universe):
        raise NClOutOfRange(n_cl, len(universe))
    picked = sample_without_replacement(universe, n_cl, SplitMix64(seed))
    return SubsetSpec(
        dataset_name=dataset_name,
        n_cl=n_cl,
        seed=seed,
        selected_classes=tuple(sorted(picked)),
        source_class_count=len(universe),
    )


def expand_plan(plan: SubsetPlan, class_universe: Sequence[int]) -> list[SubsetSpec]:
    """All specs of the plan, ordered by (n_cl, seed)."""
    specs = []
    for n_cl in sorted(set(plan.n_cl_list)):
        for seed in sorted(set(plan.seeds)):
            specs.append(sample_subset(class_universe, n_cl, seed, plan.dataset_name))
    return specs


def filter_manifest(manifest: DatasetManifest, spec: SubsetSpec) -> DatasetManifest:
    """View of `manifest` restricted to the spec's classes; no data is copied."""
    universe = set(manifest.class_universe)
    for class_id in spec.selected_classes:
        if class_id not in universe:
            raise ClassNotInManifest(class_id)
    keep = set(spec.selected_classes)
    return DatasetManifest(
        dataset_name=manifest.dataset_name,
        split=manifest.split,
        entries=tuple(e for e in manifest.entries if e[1] in keep),
        class_universe=tuple(spec.selected_classes),
    )


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def save_spec(spec: SubsetSpec, out_dir: Path | str) -> Path:
    return atomic_write_text(Path(out_dir) / spec.filename, _canonical_json(spec.to_dict()))


def load_spec(path: Path | str) -> SubsetSpec:
    with Path(path).open("r", encoding="utf-8") as handle:
        return SubsetSpec.from_dict(json.load(handle))


def save_plan(specs: Iterable[SubsetSpec], out_dir: Path | str) -> list[Path]:
    """Write one file per spec plus an index listing them all; returns all paths."""
    out_dir = Path(out_dir)
    specs = sorted(specs, key=lambda s: (s.dataset_name, s.n_cl, s.seed))
    paths = [save_spec(spec, out_dir) for spec in specs]
    index = {
        "specs": [
            {"file": spec.filename, "n_cl": spec.n_cl, "seed": spec.seed}
            for spec in specs
        ],
    }
    paths.append(atomic_write_text(out_dir / "index.json", _canonical_json(index)))
    return paths
