"""Batch extraction: manifest in, FCAE embedding store out.

Images are processed strictly in manifest order through a single writer, so
record order never depends on batch size. Unreadable images are skipped and
reported in the summary unless strict mode is on, in which case the job
aborts and no store file appears.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .encoders import load_encoder
from .errors import DataError, MalformedManifest, UnreadableImage
from .store_writer import StoreWriter


@dataclass(frozen=True)
class ExtractorJob:
    manifest: Path
    image_root: Path
    encoder_tag: str
    out_store: Path
    batch_size: int = 16
    device: str = "cpu"
    strict: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ExtractSummary:
    count: int
    dim: int
    encoder_tag: str
    store: Path
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "dim": self.dim,
            "encoder_tag": self.encoder_tag,
            "store": str(self.store),
            "failures": self.failures,
        }


def read_manifest_ids(path: Path | str) -> list[str]:
    """Image ids in manifest order; the `<image_id> <class_num>` text format."""
    ids: list[str] = []
    seen: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise MalformedManifest(line_no, f"expected 2 tokens, got {len(tokens)}")
            if not tokens[1].lstrip("-").isdigit() or int(tokens[1]) < 0:
                raise MalformedManifest(line_no, f"bad class number {tokens[1]!r}")
            image_id = tokens[0]
            if image_id in seen:
                raise MalformedManifest(line_no, f"duplicate image id {image_id!r}")
            seen.add(image_id)
            ids.append(image_id)
    if not ids:
        raise DataError(f"no records in manifest {path}")
    return ids


def run_extract(job: ExtractorJob) -> ExtractSummary:
    """Encode every manifest image and write the store; returns the summary."""
    encoder = load_encoder(job.encoder_tag, job.device)
    ids = read_manifest_ids(job.manifest)
    writer = StoreWriter(job.out_store, encoder.tag)
    failures: list[dict] = []
    try:
        batch_ids: list[str] = []
        batch_images: list[Image.Image] = []

        def flush() -> None:
            if not batch_ids:
                return
            vectors = encoder.encode_batch(batch_images)
            for image_id, vector in zip(batch_ids, vectors):
                writer.add(image_id, vector)
            batch_ids.clear()
            batch_images.clear()

        for image_id in ids:
            path = job.image_root / image_id
            try:
                with Image.open(path) as handle:
                    image = handle.convert("RGB")
            except Exception as exc:
                if job.strict:
                    raise UnreadableImage(image_id, str(exc))
                failures.append({"image_id": image_id, "reason": str(exc)})
                continue
            batch_ids.append(image_id)
            batch_images.append(image)
            if len(batch_ids) >= job.batch_size:
                flush()
        flush()
        store = writer.commit()
    except BaseException:
        writer.abort()
        raise
    return ExtractSummary(
        count=writer.count,
        dim=writer.dim or 0,
        encoder_tag=encoder.tag,
        store=store,
        failures=failures,
    )
