from __future__ import annotations

import numpy as np
import pytest
from PIL import Image


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    """20 noise JPEGs across 4 classes, plus the matching manifest."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(2024)
    lines = []
    for k in range(20):
        image_id = f"img{k:03d}.jpeg"
        pixels = rng.integers(0, 256, size=(48, 48, 3), dtype=np.uint8)
        Image.fromarray(pixels, "RGB").save(root / image_id, quality=95)
        lines.append(f"{image_id} {k % 4}")
    manifest = root / "train.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest, root
