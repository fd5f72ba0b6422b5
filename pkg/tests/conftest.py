from __future__ import annotations

import numpy as np
import pytest

from fca.embedstore import make_view, read_store, view_from_arrays, write_store
from fca.manifest import DatasetManifest


def make_gaussian_case(
    seed: int,
    n_classes: int | None = None,
    dim: int | None = None,
    min_size: int = 3,
    max_size: int = 20,
    spread: float = 1.0,
):
    """Seeded Gaussian mixture: (ids, labels, raw_vectors, class_rows)."""
    rng = np.random.default_rng(seed)
    n_classes = n_classes or int(rng.integers(2, 11))
    dim = dim or int(rng.integers(2, 65))
    ids, labels, chunks = [], [], []
    class_rows: dict[int, list[int]] = {}
    row = 0
    for class_id in range(n_classes):
        size = int(rng.integers(min_size, max_size + 1))
        center = rng.normal(size=dim) * spread
        chunks.append(center + 0.5 * rng.normal(size=(size, dim)))
        for k in range(size):
            ids.append(f"c{class_id:02d}_{k:03d}.jpeg")
            labels.append(class_id)
        class_rows[class_id] = list(range(row, row + size))
        row += size
    return ids, labels, np.concatenate(chunks), class_rows


def gaussian_view(seed: int, **kwargs):
    ids, labels, x, class_rows = make_gaussian_case(seed, **kwargs)
    return view_from_arrays(ids, labels, x), x, class_rows


def store_backed_view(tmp_path, ids, labels, x, tag="test-encoder"):
    """Round-trip the same data through a store file and a manifest."""
    store_path = tmp_path / "vectors.fcae"
    write_store(zip(ids, x), tag, store_path)
    manifest = DatasetManifest(
        dataset_name="synthetic",
        split="train",
        entries=tuple(zip(ids, labels)),
    )
    return make_view(read_store(store_path), manifest)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
