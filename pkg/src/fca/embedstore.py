"""Binary container for unit-normalized embedding vectors.

File layout, all integers little-endian:

    magic    4 bytes   b"FCAE"
    version  u32       currently 1
    count    u64       number of records
    dim      u32       vector width
    tag_len  u16       byte length of the encoder tag
    tag      tag_len bytes, UTF-8

followed by ``count`` records::

    id_len   u16
    id       id_len bytes, UTF-8
    vector   dim * f32

Vectors are L2-normalized at write time so cosine similarity downstream is a
plain dot product. The format carries no timestamps: writing the same records
twice yields byte-identical files. Bytes after the last record are ignored,
which keeps the format open to additive extensions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateImageId,
    EmptyClassAfterFilter,
    EmptyInput,
    MissingEmbedding,
    TruncatedFile,
    UnsupportedVersion,
    ZeroVector,
)
from .manifest import ClassIndex, DatasetManifest, build_class_index
from .subset import SubsetSpec, filter_manifest

MAGIC = b"FCAE"
VERSION = 1
_HEADER = struct.Struct("<4sIQIH")  # magic, version, count, dim, tag_len
_ID_LEN = struct.Struct("<H")


@dataclass(frozen=True)
class StoreSummary:
    count: int
    dim: int


def write_store(
    records: Iterable[tuple[str, Sequence[float]]],
    encoder_tag: str,
    path: Path | str,
) -> StoreSummary:
    """Normalize and serialize `records` in input order; atomic on failure.

    Raises ZeroVector for unnormalizable inputs and DimensionMismatch when a
    vector's width differs from the first record's.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tag_bytes = encoder_tag.encode("utf-8")
    count = 0
    dim: int | None = None
    seen: set[str] = set()
    try:
        with tmp.open("wb") as out:
            out.write(_HEADER.pack(MAGIC, VERSION, 0, 0, len(tag_bytes)))
            out.write(tag_bytes)
            for image_id, raw in records:
                if image_id in seen:
                    raise DuplicateImageId(image_id)
                seen.add(image_id)
                vec = np.asarray(raw, dtype=np.float64).reshape(-1)
                if dim is None:
                    dim = int(vec.shape[0])
                elif vec.shape[0] != dim:
                    raise DimensionMismatch(dim, int(vec.shape[0]), image_id)
                norm = float(np.linalg.norm(vec))
                if norm == 0.0 or not np.isfinite(norm):
                    raise ZeroVector(image_id)
                unit = (vec / norm).astype("<f4")
                id_bytes = image_id.encode("utf-8")
                if len(id_bytes) > 0xFFFF:
                    raise ValueError(f"image id too long: {image_id[:40]}...")
                out.write(_ID_LEN.pack(len(id_bytes)))
                out.write(id_bytes)
                out.write(unit.tobytes())
                count += 1
            if count == 0:
                raise EmptyInput("no records to store")
            # Backfill count and dim now that the stream is exhausted.
            out.seek(0)
            out.write(_HEADER.pack(MAGIC, VERSION, count, dim, len(tag_bytes)))
        tmp.replace(path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    return StoreSummary(count=count, dim=dim or 0)


@dataclass
class EmbeddingStore:
    """Read handle over a store file; vectors are loaded lazily via mmap."""

    path: Path
    version: int
    count: int
    dim: int
    encoder_tag: str
    ids: tuple[str, ...]
    _offsets: np.ndarray = field(repr=False)  # byte offset of each vector payload
    _index: dict[str, int] = field(repr=False)
    _mmap: np.ndarray | None = field(default=None, repr=False)

    def _raw(self) -> np.ndarray:
        if self._mmap is None:
            self._mmap = np.memmap(self.path, dtype=np.uint8, mode="r")
        return self._mmap

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._index

    def vector(self, image_id: str) -> np.ndarray:
        """The stored float32 unit vector for one id (a copy)."""
        try:
            off = int(self._offsets[self._index[image_id]])
        except KeyError:
            raise MissingEmbedding(image_id) from None
        raw = self._raw()[off : off + 4 * self.dim]
        return np.frombuffer(raw.tobytes(), dtype="<f4").copy()

    def matrix_for(self, image_ids: Sequence[str]) -> np.ndarray:
        """Rows gathered in the given id order, shape (len(ids), dim), float32."""
        out = np.empty((len(image_ids), self.dim), dtype=np.float32)
        raw = self._raw()
        for row, image_id in enumerate(image_ids):
            try:
                off = int(self._offsets[self._index[image_id]])
            except KeyError:
                raise MissingEmbedding(image_id) from None
            out[row] = np.frombuffer(raw[off : off + 4 * self.dim].tobytes(), dtype="<f4")
        return out

    def iter_records(self) -> Iterator[tuple[str, np.ndarray]]:
        for image_id in self.ids:
            yield image_id, self.vector(image_id)


def read_store(path: Path | str) -> EmbeddingStore:
    """Open a store: parses the header, indexes record offsets, loads no vectors.

    Raises BadMagic / UnsupportedVersion on a foreign file and TruncatedFile
    (with the failing byte offset) when the record table ends early.
    """
    path = Path(path)
    size = path.stat().st_size
    with path.open("rb") as handle:
        header = handle.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise TruncatedFile(len(header))
        magic, version, count, dim, tag_len = _HEADER.unpack(header)
        if magic != MAGIC:
            raise BadMagic(magic)
        if version != VERSION:
            raise UnsupportedVersion(version)
        tag_bytes = handle.read(tag_len)
        if len(tag_bytes) < tag_len:
            raise TruncatedFile(_HEADER.size + len(tag_bytes))
        encoder_tag = tag_bytes.decode("utf-8")

        ids: list[str] = []
        offsets = np.empty(count, dtype=np.int64)
        pos = _HEADER.size + tag_len
        vec_bytes = 4 * dim
        for record in range(count):
            id_len_raw = handle.read(_ID_LEN.size)
            if len(id_len_raw) < _ID_LEN.size:
                raise TruncatedFile(pos)
            (id_len,) = _ID_LEN.unpack(id_len_raw)
            id_bytes = handle.read(id_len)
            if len(id_bytes) < id_len:
                raise TruncatedFile(pos + _ID_LEN.size)
            pos += _ID_LEN.size + id_len
            if pos + vec_bytes > size:
                raise TruncatedFile(pos)
            ids.append(id_bytes.decode("utf-8"))
            offsets[record] = pos
            handle.seek(vec_bytes, 1)
            pos += vec_bytes

    index = {image_id: row for row, image_id in enumerate(ids)}
    if len(index) != len(ids):
        dupes = [i for i in index if ids.count(i) > 1]
        raise DuplicateImageId(dupes[0])
    return EmbeddingStore(
        path=path,
        version=version,
        count=count,
        dim=dim,
        encoder_tag=encoder_tag,
        ids=tuple(ids),
        _offsets=offsets,
        _index=index,
    )


@dataclass
class EmbeddingView:
    """A class-structured, read-only window over embeddings.

    Instances are laid out contiguously per class: ``ids`` concatenates every
    class's canonical instance list in ascending class-id order, and
    ``class_slices[k]`` is the [start, end) range of class ``class_ids[k]``.
    """

    ids: tuple[str, ...]
    class_ids: tuple[int, ...]
    class_slices: tuple[tuple[int, int], ...]
    classes: tuple[ClassIndex, ...]
    class_of: dict[str, int]
    encoder_tag: str
    store: EmbeddingStore | None = None
    subset: SubsetSpec | None = None
    _vectors: np.ndarray | None = field(default=None, repr=False)
    _matrix: np.ndarray | None = field(default=None, repr=False)
    _row_index: dict[str, int] | None = field(default=None, repr=False)

    @property
    def num_instances(self) -> int:
        return len(self.ids)

    @property
    def num_classes(self) -> int:
        return len(self.class_ids)

    def class_size(self, class_id: int) -> int:
        start, end = self.class_slices[self.class_ids.index(class_id)]
        return end - start

    def row_of(self, image_id: str) -> int:
        if self._row_index is None:
            self._row_index = {iid: row for row, iid in enumerate(self.ids)}
        try:
            return self._row_index[image_id]
        except KeyError:
            raise MissingEmbedding(image_id) from None

    def matrix(self) -> np.ndarray:
        """All vectors as float64 rows in view order (cached)."""
        if self._matrix is None:
            if self._vectors is not None:
                src = self._vectors
            elif self.store is not None:
                src = self.store.matrix_for(list(self.ids))
            else:
                raise ValueError("view has neither a store nor in-memory vectors")
            self._matrix = np.ascontiguousarray(src, dtype=np.float64)
        return self._matrix

    def restrict(self, keep: set[str]) -> "EmbeddingView":
        """Sub-view containing only ids in `keep`; class structure recomputed."""
        classes = []
        for index in self.classes:
            kept = tuple(i for i in index.instance_ids if i in keep)
            if kept:
                classes.append(ClassIndex(class_id=index.class_id, instance_ids=kept))
        vectors = None
        if self._vectors is not None or self._matrix is not None:
            rows = [
                self.row_of(i)
                for index in classes
                for i in index.instance_ids
            ]
            source = self._vectors if self._vectors is not None else self._matrix
            vectors = source[rows]
        return _assemble_view(
            classes,
            encoder_tag=self.encoder_tag,
            store=self.store,
            subset=self.subset,
            vectors=vectors,
        )


def _assemble_view(
    classes: Sequence[ClassIndex],
    *,
    encoder_tag: str,
    store: EmbeddingStore | None,
    subset: SubsetSpec | None,
    vectors: np.ndarray | None,
) -> EmbeddingView:
    classes = tuple(sorted(classes, key=lambda c: c.class_id))
    ids: list[str] = []
    slices: list[tuple[int, int]] = []
    class_of: dict[str, int] = {}
    for index in classes:
        start = len(ids)
        ids.extend(index.instance_ids)
        slices.append((start, len(ids)))
        for image_id in index.instance_ids:
            class_of[image_id] = index.class_id
    return EmbeddingView(
        ids=tuple(ids),
        class_ids=tuple(c.class_id for c in classes),
        class_slices=tuple(slices),
        classes=classes,
        class_of=class_of,
        encoder_tag=encoder_tag,
        store=store,
        subset=subset,
        _vectors=vectors,
    )


def make_view(
    store: EmbeddingStore,
    manifest: DatasetManifest,
    spec: SubsetSpec | None = None,
) -> EmbeddingView:
    """Join a store with a manifest (optionally filtered through a subset spec).

    Every selected manifest entry must have an embedding (MissingEmbedding
    otherwise); a selected class with no instances raises EmptyClassAfterFilter.
    """
    scoped = filter_manifest(manifest, spec) if spec is not None else manifest
    index = build_class_index(scoped)
    for class_id in scoped.class_universe:
        if class_id not in index:
            raise EmptyClassAfterFilter(class_id)
    for class_index in index.values():
        for image_id in class_index.instance_ids:
            if image_id not in store:
                raise MissingEmbedding(image_id)
    return _assemble_view(
        list(index.values()),
        encoder_tag=store.encoder_tag,
        store=store,
        subset=spec,
        vectors=None,
    )


def view_from_arrays(
    ids: Sequence[str],
    labels: Sequence[int],
    vectors: np.ndarray,
    *,
    encoder_tag: str = "in-memory",
    normalize: bool = True,
) -> EmbeddingView:
    """Build a view straight from arrays, bypassing any store file.

    Useful for users who already hold embeddings in memory and for float64
    exactness in numerical tests. Rows are L2-normalized unless the caller
    guarantees unit norm.
    """
    if len(ids) != len(labels) or len(ids) != vectors.shape[0]:
        raise ValueError("ids, labels and vector rows must align")
    if len(set(ids)) != len(ids):
        raise DuplicateImageId(sorted(i for i in ids if list(ids).count(i) > 1)[0])
    data = np.asarray(vectors, dtype=np.float64)
    if normalize:
        norms = np.linalg.norm(data, axis=1)
        bad = np.flatnonzero(~np.isfinite(norms) | (norms == 0.0))
        if bad.size:
            raise ZeroVector(ids[int(bad[0])])
        data = data / norms[:, None]
    by_class: dict[int, list[str]] = {}
    for image_id, class_id in zip(ids, labels):
        by_class.setdefault(int(class_id), []).append(image_id)
    classes = [
        ClassIndex(class_id=class_id, instance_ids=tuple(members))
        for class_id, members in by_class.items()
    ]
    row_of = {image_id: row for row, image_id in enumerate(ids)}
    view = _assemble_view(
        classes, encoder_tag=encoder_tag, store=None, subset=None, vectors=None
    )
    ordered = data[[row_of[i] for i in view.ids]]
    view._vectors = ordered
    return view
