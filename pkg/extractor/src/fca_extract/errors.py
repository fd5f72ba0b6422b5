"""Extractor error types with CLI exit codes."""

from __future__ import annotations


class ExtractError(Exception):
    exit_code = 1


class ConfigError(ExtractError):
    """Unknown encoder, bad flags, bad paths."""

    exit_code = 2


class DataError(ExtractError):
    """Bad manifest or unreadable image in strict mode."""

    exit_code = 3


class EncoderLoadFailure(ExtractError):
    """The requested encoder (or its weights) could not be loaded."""

    exit_code = 4

    def __init__(self, tag: str, reason: str):
        super().__init__(f"cannot load encoder {tag!r}: {reason}")
        self.tag = tag
        self.reason = reason


class UnreadableImage(DataError):
    def __init__(self, image_id: str, reason: str):
        super().__init__(f"cannot read image {image_id!r}: {reason}")
        self.image_id = image_id
        self.reason = reason


class MalformedManifest(DataError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"manifest line {line_no}: {reason}")
        self.line_no = line_no
