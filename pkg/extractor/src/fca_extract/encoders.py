"""Image encoders behind one tiny interface.

An encoder exposes ``tag`` (recorded in the output store), ``dim``, and
``encode_batch(images) -> (B, dim) float array``. Two pretrained encoders are
wired in (the CLIP image tower and DINOv2, both loaded lazily so torch and
transformers stay optional), plus a dependency-free projection encoder used
for fixtures and smoke tests.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np
from PIL import Image

from .errors import ConfigError, EncoderLoadFailure


class Encoder(Protocol):
    tag: str
    dim: int

    def encode_batch(self, images: Sequence[Image.Image]) -> np.ndarray: ...


class PixelProjectionEncoder:
    """Grayscale 32x32 pixels pushed through one fixed random projection.

    Not a learned feature extractor: it exists so pipelines and fixtures can
    run without model weights. Deterministic across platforms.
    """

    tag = "pixelproj-64"
    dim = 64

    def __init__(self):
        rng = np.random.default_rng(64_64_64)
        self._projection = rng.standard_normal((1024, self.dim)) / 32.0

    def encode_batch(self, images: Sequence[Image.Image]) -> np.ndarray:
        rows = []
        for image in images:
            gray = image.convert("L").resize((32, 32), Image.BILINEAR)
            pixels = np.asarray(gray, dtype=np.float64).reshape(-1) / 255.0 - 0.5
            rows.append(pixels @ self._projection)
        return np.stack(rows)


class _TorchEncoder:
    """Shared wrapper: preprocessing + forward pass + pooling on a device."""

    def __init__(self, tag: str, dim: int, model, processor, pool, device: str):
        self.tag = tag
        self.dim = dim
        self._model = model
        self._processor = processor
        self._pool = pool
        self._device = device

    def encode_batch(self, images: Sequence[Image.Image]) -> np.ndarray:
        import torch

        inputs = self._processor(images=list(images), return_tensors="pt")
        inputs = {k: v.to(self._device) for k, v in inputs.items()}
        with torch.no_grad():
            outputs = self._model(**inputs)
        return self._pool(outputs).cpu().numpy().astype(np.float64)


def _load_clip(device: str) -> Encoder:
    checkpoint = "openai/clip-vit-base-patch32"
    try:
        from transformers import CLIPImageProcessor, CLIPVisionModelWithProjection
    except ImportError as exc:
        raise EncoderLoadFailure("clip-vit-b32", f"transformers unavailable: {exc}")
    try:
        # Image tower only: no text encoder is ever loaded.
        model = CLIPVisionModelWithProjection.from_pretrained(checkpoint).to(device).eval()
        processor = CLIPImageProcessor.from_pretrained(checkpoint)
    except Exception as exc:
        raise EncoderLoadFailure("clip-vit-b32", str(exc))
    return _TorchEncoder(
        tag=f"clip-vit-b32/{checkpoint}",
        dim=int(model.config.projection_dim),
        model=model,
        processor=processor,
        pool=lambda out: out.image_embeds,
        device=device,
    )


def _load_dinov2(device: str) -> Encoder:
    checkpoint = "facebook/dinov2-base"
    try:
        from transformers import AutoImageProcessor, AutoModel
    except ImportError as exc:
        raise EncoderLoadFailure("dinov2-vitb14", f"transformers unavailable: {exc}")
    try:
        model = AutoModel.from_pretrained(checkpoint).to(device).eval()
        processor = AutoImageProcessor.from_pretrained(checkpoint)
    except Exception as exc:
        raise EncoderLoadFailure("dinov2-vitb14", str(exc))
    return _TorchEncoder(
        tag=f"dinov2-vitb14/{checkpoint}",
        dim=int(model.config.hidden_size),
        model=model,
        processor=processor,
        pool=lambda out: out.last_hidden_state[:, 0],  # CLS token
        device=device,
    )


_LOADERS = {
    "pixelproj-64": lambda device: PixelProjectionEncoder(),
    "clip-vit-b32": _load_clip,
    "dinov2-vitb14": _load_dinov2,
}

SUPPORTED = tuple(sorted(_LOADERS))


def load_encoder(tag: str, device: str = "cpu") -> Encoder:
    try:
        loader = _LOADERS[tag]
    except KeyError:
        raise ConfigError(f"unknown encoder {tag!r}; supported: {', '.join(SUPPORTED)}") from None
    return loader(device)
