"""Writer for the FCAE embedding-store format (version 1).

Layout, little-endian throughout:

    magic "FCAE" | version u32 | count u64 | dim u32 | tag_len u16 | tag
    then per record: id_len u16 | id utf-8 | dim * f32

Vectors are L2-normalized before serialization. This is an independent
implementation of the published format so the output is consumable by any
conforming reader.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

_MAGIC = b"FCAE"
_VERSION = 1
_HEADER = struct.Struct("<4sIQIH")
_ID_LEN = struct.Struct("<H")


class StoreWriter:
    """Streams records to a temp file; commit() makes the store visible atomically."""

    def __init__(self, path: Path | str, encoder_tag: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._tmp = self.path.with_name(f".{self.path.name}.partial")
        self._tag = encoder_tag.encode("utf-8")
        self._handle = self._tmp.open("wb")
        self._handle.write(_HEADER.pack(_MAGIC, _VERSION, 0, 0, len(self._tag)))
        self._handle.write(self._tag)
        self._count = 0
        self._dim: int | None = None
        self._seen: set[str] = set()

    def add(self, image_id: str, vector: np.ndarray) -> None:
        if image_id in self._seen:
            raise DataError(f"duplicate image id {image_id!r}")
        vec = np.asarray(vector, dtype=np.float64).reshape(-1)
        if self._dim is None:
            self._dim = int(vec.shape[0])
        elif vec.shape[0] != self._dim:
            raise DataError(
                f"vector for {image_id!r} has dim {vec.shape[0]}, expected {self._dim}"
            )
        norm = float(np.linalg.norm(vec))
        if norm == 0.0 or not np.isfinite(norm):
            raise DataError(f"zero or non-finite vector for {image_id!r}")
        unit = (vec / norm).astype("<f4")
        id_bytes = image_id.encode("utf-8")
        self._handle.write(_ID_LEN.pack(len(id_bytes)))
        self._handle.write(id_bytes)
        self._handle.write(unit.tobytes())
        self._seen.add(image_id)
        self._count += 1

    @property
    def count(self) -> int:
        return self._count

    @property
    def dim(self) -> int | None:
        return self._dim

    def commit(self) -> Path:
        if self._count == 0:
            self.abort()
            raise DataError("no records written")
        self._handle.seek(0)
        self._handle.write(_HEADER.pack(_MAGIC, _VERSION, self._count, self._dim, len(self._tag)))
        self._handle.close()
        os.replace(self._tmp, self.path)
        return self.path

    def abort(self) -> None:
        if not self._handle.closed:
            self._handle.close()
        self._tmp.unlink(missing_ok=True)
