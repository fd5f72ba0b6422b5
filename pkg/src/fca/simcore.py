"""Similarity and silhouette-style difficulty scores over embedding views.

Every pairwise similarity is a normalized cosine: ``sim = (cos + 1) / 2``,
the affine map of [-1, 1] onto [0, 1]. On top of it this module computes, at
instance, class, and dataset level:

* intra-class similarity  - mean similarity over distinct same-class pairs;
* inter-class similarity  - mean similarity over cross pairs of two classes;
* nearest inter-class similarity - per instance, the highest mean similarity
  to any other class (the similarity analogue of the silhouette ``b`` term);
* the classic silhouette score on dissimilarities ``d = 1 - sim``;
* the similarity-based silhouette score
  ``(s_alpha(i) - s_beta'(i)) / max(s_alpha(i), s_beta'(i))``.

Dataset-level values are unweighted means of per-class values, which are in
turn means of per-instance values. Singleton-class instances score 0 (the
usual silhouette convention) and are counted in the report.

The full-report path computes everything from one pass of a cache-blocked
Gram kernel. Row blocks are distributed over a thread pool while BLAS is
pinned to one thread, and every partial sum is accumulated in a fixed order,
so results are bitwise identical at any thread count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .embedstore import EmbeddingView
from .errors import (
    EmptyClass,
    EmptyPairSet,
    SameClass,
    SingletonClass,
)
from .util import SplitMix64, atomic_write_text, sample_without_replacement

DEFAULT_BLOCK_SIZE = 256


@dataclass(frozen=True)
class SimilarityConfig:
    """Knobs for score computation.

    ``normalization`` is (scale, offset) with ``sim = scale * cos + offset``;
    the default maps [-1, 1] onto [0, 1]. ``max_instances_per_class`` turns on
    seeded per-class subsampling for very large classes. ``tolerance`` guards
    degenerate denominators: ratios whose denominator is at or below it are 0.
    """

    base_function: str = "provided-embeddings"
    normalization: tuple[float, float] = (0.5, 0.5)
    max_instances_per_class: int | None = None
    subsample_seed: int = 0
    tolerance: float = 1e-12

    def __post_init__(self):
        if self.base_function != "provided-embeddings":
            raise ValueError(f"unsupported base function {self.base_function!r}")
        if self.max_instances_per_class is not None and self.max_instances_per_class < 2:
            raise ValueError("max_instances_per_class must be >= 2")
        if self.subsample_seed < 0:
            raise ValueError("subsample_seed must be non-negative")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")

    def to_dict(self) -> dict:
        return {
            "base_function": self.base_function,
            "normalization": list(self.normalization),
            "max_instances_per_class": self.max_instances_per_class,
            "subsample_seed": self.subsample_seed,
            "tolerance": self.tolerance,
        }


DEFAULT_CONFIG = SimilarityConfig()


@dataclass(frozen=True)
class PairCounts:
    """Distinct-pair counts for a view: same-class, class-level, cross-class."""

    intra: int
    dataset_class_pairs: int
    inter: int


def pair_counts(view: EmbeddingView) -> PairCounts:
    sizes = [end - start for start, end in view.class_slices]
    total = sum(sizes)
    intra = sum(n * (n - 1) // 2 for n in sizes)
    class_pairs = len(sizes) * (len(sizes) - 1) // 2
    inter = (total * total - sum(n * n for n in sizes)) // 2
    return PairCounts(intra=intra, dataset_class_pairs=class_pairs, inter=inter)


class InstanceScore(NamedTuple):
    s_alpha: float | None
    s_beta_prime: float
    nearest_class_id: int
    simss: float
    ss: float


class ClassScore(NamedTuple):
    s_alpha: float | None
    s_beta_prime: float
    simss: float


class DatasetScore(NamedTuple):
    s_alpha: float | None
    s_beta: float
    s_beta_prime: float
    simss: float
    ss: float


@dataclass(frozen=True)
class SimilarityReport:
    """All scores for one view plus the provenance needed to reproduce them."""

    per_instance: dict[str, InstanceScore]
    per_class: dict[int, ClassScore]
    dataset: DatasetScore
    config: SimilarityConfig
    encoder_tag: str
    subset: dict | None
    singleton_classes: tuple[int, ...]
    subsampled: dict[int, int]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "encoder_tag": self.encoder_tag,
            "subset": self.subset,
            "config": self.config.to_dict(),
            "num_instances": len(self.per_instance),
            "num_classes": len(self.per_class),
            "singleton_classes": list(self.singleton_classes),
            "subsampled": {str(k): v for k, v in self.subsampled.items()},
            "dataset": dict(self.dataset._asdict()),
            "per_class": {
                str(class_id): dict(row._asdict())
                for class_id, row in self.per_class.items()
            },
            "per_instance": {
                image_id: dict(row._asdict())
                for image_id, row in self.per_instance.items()
            },
        }


def write_report_json(report: SimilarityReport, path: Path | str) -> Path:
    text = json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"
    return atomic_write_text(path, text)


def report_csv_text(report: SimilarityReport) -> str:
    """One row per dataset / class / instance, flagged by a `level` column."""
    def fmt(value) -> str:
        return "" if value is None else repr(float(value))

    lines = ["level,image_id,class_id,s_alpha,s_beta,s_beta_prime,nearest_class_id,simss,ss"]
    d = report.dataset
    lines.append(
        f"dataset,,,{fmt(d.s_alpha)},{fmt(d.s_beta)},{fmt(d.s_beta_prime)},,{fmt(d.simss)},{fmt(d.ss)}"
    )
    for class_id in sorted(report.per_class):
        row = report.per_class[class_id]
        lines.append(
            f"class,,{class_id},{fmt(row.s_alpha)},,{fmt(row.s_beta_prime)},,{fmt(row.simss)},"
        )
    for image_id, row in report.per_instance.items():
        lines.append(
            f"instance,{image_id},,{fmt(row.s_alpha)},,{fmt(row.s_beta_prime)},"
            f"{row.nearest_class_id},{fmt(row.simss)},{fmt(row.ss)}"
        )
    return "\n".join(lines) + "\n"


def write_report_csv(report: SimilarityReport, path: Path | str) -> Path:
    return atomic_write_text(path, report_csv_text(report))


# --- elementary operations ---------------------------------------------


def _to_sim(cos: np.ndarray | float, config: SimilarityConfig):
    # Dots of unit vectors can stray a few ulps outside [-1, 1]; clip so the
    # mapped similarities stay inside their documented range.
    scale, offset = config.normalization
    return scale * np.clip(cos, -1.0, 1.0) + offset


def _require_multiclass(view: EmbeddingView) -> None:
    if view.num_classes < 2:
        raise EmptyPairSet("need at least 2 classes")


def _class_slice(view: EmbeddingView, class_id: int) -> tuple[int, int]:
    try:
        k = view.class_ids.index(class_id)
    except ValueError:
        raise EmptyClass(class_id) from None
    return view.class_slices[k]


def pairwise_sim(
    view: EmbeddingView,
    ids_a: Sequence[str],
    ids_b: Sequence[str],
    config: SimilarityConfig = DEFAULT_CONFIG,
) -> float:
    """Mean normalized cosine over the designated pair set.

    Identical id sets mean "all distinct unordered pairs within the set";
    otherwise the full cross product is averaged. The two sets are put in a
    canonical order first, so the result is exactly symmetric in its
    arguments.
    """
    set_a, set_b = sorted(set(ids_a)), sorted(set(ids_b))
    if not set_a or not set_b:
        raise EmptyPairSet("empty instance set")
    x = view.matrix()
    if set_a == set_b:
        if len(set_a) < 2:
            raise EmptyPairSet("need two instances for within-set pairs")
        rows = x[[view.row_of(i) for i in set_a]]
        gram = rows @ rows.T
        total = (float(gram.sum()) - float(np.trace(gram))) / 2.0
        pairs = len(set_a) * (len(set_a) - 1) // 2
    else:
        if set_b < set_a:
            set_a, set_b = set_b, set_a
        rows_a = x[[view.row_of(i) for i in set_a]]
        rows_b = x[[view.row_of(i) for i in set_b]]
        total = float((rows_a @ rows_b.T).sum())
        pairs = len(set_a) * len(set_b)
    return float(_to_sim(total / pairs, config))


def intra_class_similarity(
    view: EmbeddingView, class_id: int, config: SimilarityConfig = DEFAULT_CONFIG
) -> float:
    """Mean similarity over all distinct pairs within one class."""
    start, end = _class_slice(view, class_id)
    n = end - start
    if n < 2:
        raise SingletonClass(class_id)
    x = view.matrix()[start:end]
    gram = x @ x.T
    total = (float(gram.sum()) - float(np.trace(gram))) / 2.0
    return float(_to_sim(total / (n * (n - 1) // 2), config))


def inter_class_similarity(
    view: EmbeddingView,
    class_a: int,
    class_b: int,
    config: SimilarityConfig = DEFAULT_CONFIG,
) -> float:
    """Mean similarity over all cross pairs of two distinct classes."""
    if class_a == class_b:
        raise SameClass(class_a)
    lo, hi = min(class_a, class_b), max(class_a, class_b)
    s0, e0 = _class_slice(view, lo)
    s1, e1 = _class_slice(view, hi)
    x = view.matrix()
    total = float((x[s0:e0] @ x[s1:e1].T).sum())
    return float(_to_sim(total / ((e0 - s0) * (e1 - s1)), config))


def dataset_intra(view: EmbeddingView, config: SimilarityConfig = DEFAULT_CONFIG) -> float:
    """Unweighted mean of per-class intra-class similarity."""
    _require_multiclass(view)
    values = [intra_class_similarity(view, c, config) for c in view.class_ids]
    return float(np.mean(values))


def dataset_inter(view: EmbeddingView, config: SimilarityConfig = DEFAULT_CONFIG) -> float:
    """Unweighted mean of inter-class similarity over all distinct class pairs."""
    _require_multiclass(view)
    values = [
        inter_class_similarity(view, a, b, config)
        for i, a in enumerate(view.class_ids)
        for b in view.class_ids[i + 1 :]
    ]
    return float(np.mean(values))


def _instance_class_means(view: EmbeddingView, image_id: str) -> tuple[float | None, np.ndarray]:
    """(own-class mean cosine or None if singleton, mean cosine to every class)."""
    x = view.matrix()
    row = view.row_of(image_id)
    sums = x @ x[row]
    means = np.empty(view.num_classes, dtype=np.float64)
    own_mean: float | None = None
    own_class = view.class_of[image_id]
    for k, (start, end) in enumerate(view.class_slices):
        total = float(sums[start:end].sum())
        n = end - start
        if view.class_ids[k] == own_class:
            if n > 1:
                own_mean = (total - float(np.dot(x[row], x[row]))) / (n - 1)
            means[k] = np.nan
        else:
            means[k] = total / n
    return own_mean, means


def nearest_class(
    view: EmbeddingView, image_id: str, config: SimilarityConfig = DEFAULT_CONFIG
) -> tuple[int, float]:
    """The other class with the highest mean similarity to this instance.

    Ties go to the smallest class id.
    """
    _require_multiclass(view)
    _, means = _instance_class_means(view, image_id)
    candidates = np.where(np.isnan(means), -np.inf, means)
    k = int(np.argmax(candidates))  # first max: class ids ascend, so smallest wins
    return view.class_ids[k], float(_to_sim(candidates[k], config))


def _ratio(numerator: float, denominator: float, tolerance: float) -> float:
    if denominator <= tolerance:
        return 0.0
    return numerator / denominator


def simss_instance(
    view: EmbeddingView, image_id: str, config: SimilarityConfig = DEFAULT_CONFIG
) -> float:
    """Similarity-based silhouette of one instance; 0 for singleton classes."""
    _require_multiclass(view)
    own_mean, _ = _instance_class_means(view, image_id)
    if own_mean is None:
        return 0.0
    s_alpha = float(_to_sim(own_mean, config))
    _, s_beta_prime = nearest_class(view, image_id, config)
    return _ratio(s_alpha - s_beta_prime, max(s_alpha, s_beta_prime), config.tolerance)


def silhouette_instance(
    view: EmbeddingView, image_id: str, config: SimilarityConfig = DEFAULT_CONFIG
) -> float:
    """Classic silhouette on dissimilarities d = 1 - sim; 0 for singletons."""
    _require_multiclass(view)
    own_mean, _ = _instance_class_means(view, image_id)
    if own_mean is None:
        return 0.0
    a = 1.0 - float(_to_sim(own_mean, config))
    _, s_beta_prime = nearest_class(view, image_id, config)
    b = 1.0 - s_beta_prime
    return _ratio(b - a, max(a, b), config.tolerance)


def simss_class(
    view: EmbeddingView, class_id: int, config: SimilarityConfig = DEFAULT_CONFIG
) -> float:
    """Mean similarity-based silhouette over a class's instances."""
    start, end = _class_slice(view, class_id)
    values = [simss_instance(view, view.ids[i], config) for i in range(start, end)]
    return float(np.mean(values))


def simss_dataset(view: EmbeddingView, config: SimilarityConfig = DEFAULT_CONFIG) -> float:
    """Unweighted mean of per-class similarity-based silhouettes."""
    _require_multiclass(view)
    values = [simss_class(view, c, config) for c in view.class_ids]
    return float(np.mean(values))


# --- subsampling --------------------------------------------------------


def subsample_view(
    view: EmbeddingView, config: SimilarityConfig
) -> tuple[EmbeddingView, dict[int, int]]:
    """Cap class sizes by seeded Fisher-Yates over canonical instance order.

    Returns the (possibly unchanged) view and a map of class id to kept count
    for every class that was actually reduced.
    """
    cap = config.max_instances_per_class
    if cap is None:
        return view, {}
    rng = SplitMix64(config.subsample_seed)
    keep: set[str] = set()
    reduced: dict[int, int] = {}
    for index in view.classes:
        if index.cardinality > cap:
            keep.update(sample_without_replacement(list(index.instance_ids), cap, rng))
            reduced[index.class_id] = cap
        else:
            keep.update(index.instance_ids)
    if not reduced:
        return view, {}
    return view.restrict(keep), reduced


# --- blocked kernel and the full report ---------------------------------


def _class_cosine_sums(
    x: np.ndarray,
    class_slices: Sequence[tuple[int, int]],
    *,
    threads: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> np.ndarray:
    """R[i, k] = sum of cos(z_i, z_j) over instances j of class k (self included).

    The Gram matrix is never materialized: tiles of `block_size` rows/columns
    are multiplied and immediately folded into per-class column sums. Column
    blocks are accumulated in ascending order and each row block writes a
    disjoint output slice, so any thread count produces identical bits. BLAS
    is pinned to one thread for the same reason (and so the pool, not BLAS,
    owns the parallelism).
    """
    if block_size < 1:
        raise ValueError("block_size must be positive")
    n = x.shape[0]
    n_classes = len(class_slices)
    out = np.empty((n, n_classes), dtype=np.float64)
    row_blocks = [(r, min(r + block_size, n)) for r in range(0, n, block_size)]
    col_blocks = [(c, min(c + block_size, n)) for c in range(0, n, block_size)]

    def fill(block: tuple[int, int]) -> None:
        r0, r1 = block
        rows = x[r0:r1]
        acc = np.zeros((r1 - r0, n_classes), dtype=np.float64)
        for c0, c1 in col_blocks:
            tile = rows @ x[c0:c1].T
            for k, (s0, s1) in enumerate(class_slices):
                lo, hi = max(s0, c0), min(s1, c1)
                if lo < hi:
                    acc[:, k] += tile[:, lo - c0 : hi - c0].sum(axis=1)
        out[r0:r1] = acc

    with threadpool_limits(limits=1):
        if threads <= 1:
            for block in row_blocks:
                fill(block)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(fill, row_blocks))
    return out


def full_report(
    view: EmbeddingView,
    config: SimilarityConfig = DEFAULT_CONFIG,
    *,
    threads: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> SimilarityReport:
    """Every instance, class, and dataset score in one blocked pass."""
    _require_multiclass(view)
    view, reduced = subsample_view(view, config)
    x = view.matrix()
    n = view.num_instances
    n_classes = view.num_classes
    sizes = np.array([end - start for start, end in view.class_slices], dtype=np.int64)
    labels = np.repeat(np.arange(n_classes), sizes)

    r = _class_cosine_sums(x, view.class_slices, threads=threads, block_size=block_size)
    self_dot = np.einsum("ij,ij->i", x, x)

    # Per-instance own-class and cross-class mean cosines.
    rows = np.arange(n)
    own_counts = sizes[labels] - 1
    singleton = own_counts == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        own_mean = (r[rows, labels] - self_dot) / own_counts
    cross_mean = r / sizes[None, :]
    cross_mean[rows, labels] = -np.inf  # exclude the own class from the argmax

    nearest_k = np.argmax(cross_mean, axis=1)  # first max -> smallest class id
    s_beta_prime_i = _to_sim(cross_mean[rows, nearest_k], config)
    s_alpha_i = _to_sim(own_mean, config)

    tol = config.tolerance
    with np.errstate(invalid="ignore", divide="ignore"):
        simss_den = np.maximum(s_alpha_i, s_beta_prime_i)
        simss_i = np.where(
            singleton | (simss_den <= tol),
            0.0,
            (s_alpha_i - s_beta_prime_i) / simss_den,
        )
        a_i = 1.0 - s_alpha_i
        b_i = 1.0 - s_beta_prime_i
        ss_den = np.maximum(a_i, b_i)
        ss_i = np.where(singleton | (ss_den <= tol), 0.0, (b_i - a_i) / ss_den)

    per_instance: dict[str, InstanceScore] = {}
    for i, image_id in enumerate(view.ids):
        per_instance[image_id] = InstanceScore(
            s_alpha=None if singleton[i] else float(s_alpha_i[i]),
            s_beta_prime=float(s_beta_prime_i[i]),
            nearest_class_id=view.class_ids[int(nearest_k[i])],
            simss=float(simss_i[i]),
            ss=float(ss_i[i]),
        )

    per_class: dict[int, ClassScore] = {}
    class_simss = np.empty(n_classes)
    class_ss = np.empty(n_classes)
    class_alpha: list[float | None] = []
    for k, class_id in enumerate(view.class_ids):
        start, end = view.class_slices[k]
        size = int(sizes[k])
        if size > 1:
            pair_sum = float(r[start:end, k].sum() - self_dot[start:end].sum())
            alpha = float(_to_sim(pair_sum / (size * (size - 1)), config))
        else:
            alpha = None
        class_alpha.append(alpha)
        class_simss[k] = float(np.mean(simss_i[start:end]))
        class_ss[k] = float(np.mean(ss_i[start:end]))
        per_class[class_id] = ClassScore(
            s_alpha=alpha,
            s_beta_prime=float(np.mean(s_beta_prime_i[start:end])),
            simss=float(class_simss[k]),
        )

    # Dataset-level inter-class similarity over distinct class pairs: the sum
    # of R over a class's rows and another class's column gives the cross-pair
    # cosine total; take pairs in ascending (a, b) order for determinism.
    pair_means = []
    for a in range(n_classes):
        sa, ea = view.class_slices[a]
        for b in range(a + 1, n_classes):
            total = float(r[sa:ea, b].sum())
            pair_means.append(_to_sim(total / (int(sizes[a]) * int(sizes[b])), config))

    alpha_values = [v for v in class_alpha if v is not None]
    dataset = DatasetScore(
        s_alpha=float(np.mean(alpha_values)) if alpha_values else None,
        s_beta=float(np.mean(pair_means)),
        s_beta_prime=float(np.mean([per_class[c].s_beta_prime for c in view.class_ids])),
        simss=float(np.mean(class_simss)),
        ss=float(np.mean(class_ss)),
    )

    return SimilarityReport(
        per_instance=per_instance,
        per_class=per_class,
        dataset=dataset,
        config=config,
        encoder_tag=view.encoder_tag,
        subset=view.subset.to_dict() if view.subset is not None else None,
        singleton_classes=tuple(
            view.class_ids[k] for k in range(n_classes) if sizes[k] == 1
        ),
        subsampled=reduced,
    )
