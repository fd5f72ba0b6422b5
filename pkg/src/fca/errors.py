"""Exception hierarchy shared by all pipeline stages.

The CLI maps error categories to exit codes: config errors exit 2, data
errors exit 3, compute errors exit 4, anything unexpected exits 1.
"""

from __future__ import annotations


class FcaError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(FcaError):
    """Bad parameters, bad config file, or misused CLI flags."""

    exit_code = 2


class DataError(FcaError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class ComputeError(FcaError):
    """A computation whose result is undefined for the given input."""

    exit_code = 4


# --- manifest ---------------------------------------------------------


class MalformedLine(DataError):
    def __init__(self, line_no: int, reason: str = "expected '<image_id> <class_num>'"):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class DuplicateImageId(DataError):
    def __init__(self, image_id: str):
        super().__init__(f"duplicate image id {image_id!r}")
        self.image_id = image_id


class EmptyManifest(DataError):
    def __init__(self, path: str):
        super().__init__(f"no records in manifest {path}")
        self.path = path


class EmptyInput(DataError):
    pass


# --- subset -----------------------------------------------------------


class NClOutOfRange(ConfigError):
    def __init__(self, n_cl: int, universe_size: int):
        super().__init__(
            f"n_cl={n_cl} outside valid range [2, {universe_size}]"
        )
        self.n_cl = n_cl
        self.universe_size = universe_size


class ClassNotInManifest(DataError):
    def __init__(self, class_id: int):
        super().__init__(f"class {class_id} not present in manifest")
        self.class_id = class_id


# --- embedstore -------------------------------------------------------


class ZeroVector(DataError):
    def __init__(self, image_id: str):
        super().__init__(f"zero vector for {image_id!r}: norm undefined")
        self.image_id = image_id


class DimensionMismatch(DataError):
    def __init__(self, expected: int, got: int, image_id: str):
        super().__init__(
            f"vector for {image_id!r} has dim {got}, expected {expected}"
        )
        self.expected = expected
        self.got = got
        self.image_id = image_id


class BadMagic(DataError):
    def __init__(self, magic: bytes):
        super().__init__(f"not an embedding store (magic {magic!r})")
        self.magic = magic


class UnsupportedVersion(DataError):
    def __init__(self, version: int):
        super().__init__(f"unsupported store version {version}")
        self.version = version


class TruncatedFile(DataError):
    def __init__(self, offset: int):
        super().__init__(f"store truncated at byte offset {offset}")
        self.offset = offset


class MissingEmbedding(DataError):
    def __init__(self, image_id: str):
        super().__init__(f"no embedding stored for {image_id!r}")
        self.image_id = image_id


class EmptyClassAfterFilter(DataError):
    def __init__(self, class_id: int):
        super().__init__(f"class {class_id} has no instances after filtering")
        self.class_id = class_id


# --- simcore ----------------------------------------------------------


class EmptyPairSet(DataError):
    pass


class SingletonClass(DataError):
    def __init__(self, class_id: int):
        super().__init__(f"class {class_id} has a single instance")
        self.class_id = class_id


class SameClass(DataError):
    def __init__(self, class_id: int):
        super().__init__(f"inter-class similarity needs two distinct classes, got {class_id} twice")
        self.class_id = class_id


class EmptyClass(DataError):
    def __init__(self, class_id: int):
        super().__init__(f"class {class_id} is empty")
        self.class_id = class_id


# --- bench ------------------------------------------------------------


class MalformedRow(DataError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"row {line_no}: {reason}")
        self.line_no = line_no


class DuplicateKey(DataError):
    def __init__(self, key: tuple):
        super().__init__(f"duplicate result key {key}")
        self.key = key


class Top1OutOfRange(DataError):
    def __init__(self, value: float):
        super().__init__(f"top1={value} outside [0, 100]")
        self.value = value


class EmptyGroup(DataError):
    def __init__(self, key: tuple):
        super().__init__(f"no records in group {key}")
        self.key = key


class MissingModel(DataError):
    def __init__(self, models: list[str]):
        super().__init__(f"models without results: {', '.join(models)}")
        self.models = models


class NoData(DataError):
    def __init__(self, n_cl: int):
        super().__init__(f"no records for n_cl={n_cl}")
        self.n_cl = n_cl


class LengthMismatch(DataError):
    def __init__(self, len_x: int, len_y: int):
        super().__init__(f"sequence lengths differ or too short: {len_x} vs {len_y}")
        self.len_x = len_x
        self.len_y = len_y


class ConstantSequence(ComputeError):
    def __init__(self, which: str):
        super().__init__(f"{which} sequence is constant: correlation undefined")
        self.which = which


class JoinMiss(DataError):
    def __init__(self, keys: list[tuple]):
        shown = ", ".join(str(k) for k in keys[:5])
        more = "" if len(keys) <= 5 else f" (+{len(keys) - 5} more)"
        super().__init__(f"no similarity score for keys: {shown}{more}")
        self.keys = keys


# --- cli / config -----------------------------------------------------


class UnknownKey(ConfigError):
    def __init__(self, name: str):
        super().__init__(f"unknown config key {name!r}")
        self.name = name


class MissingRequired(ConfigError):
    def __init__(self, name: str):
        super().__init__(f"missing required config value {name!r}")
        self.name = name
