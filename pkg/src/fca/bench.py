"""Accuracy-record aggregation: DCN tables, rankings, curves, correlations.

Input records are per-run Top-1 accuracies (percent). A record's regime says
how the model was trained: ``full`` means on the dataset's original class
set, ``sub`` means on the same (n_cl, seed) subset it is evaluated on. The
DCN of a group is simply the best Top-1 any model achieved in it.

Accuracies stay percents everywhere; CSV emission renders them with two
decimals, JSON keeps full precision.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConstantSequence,
    DuplicateKey,
    EmptyGroup,
    JoinMiss,
    LengthMismatch,
    MalformedRow,
    MissingModel,
    NoData,
    Top1OutOfRange,
)
from .util import atomic_write_text

REGIMES = ("full", "sub")
RESULT_FIELDS = ("model", "dataset", "n_cl", "seed", "regime", "top1")

GroupKey = tuple[str, int, int | None, str]  # (dataset, n_cl, seed, regime)
JoinKey = tuple[str, int, int | None]  # (dataset, n_cl, seed)


@dataclass(frozen=True)
class ResultRecord:
    """One experiment outcome: a model's Top-1 accuracy on one (sub)dataset."""

    model: str
    dataset: str
    n_cl: int
    seed: int | None
    regime: str
    top1: float

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if not 0.0 <= self.top1 <= 100.0:
            raise Top1OutOfRange(self.top1)
        if self.n_cl < 1:
            raise ValueError(f"n_cl must be positive, got {self.n_cl}")

    @property
    def group_key(self) -> GroupKey:
        return (self.dataset, self.n_cl, self.seed, self.regime)

    @property
    def record_key(self) -> tuple:
        return (self.model,) + self.group_key


@dataclass(frozen=True)
class DcnRow:
    dcn: float
    best_model: str
    tie: bool


@dataclass(frozen=True)
class DcnTable:
    """Best Top-1 per (dataset, n_cl, seed, regime) group."""

    rows: dict[GroupKey, DcnRow]

    def __len__(self) -> int:
        return len(self.rows)

    def dcn(self, dataset: str, n_cl: int, seed: int | None, regime: str) -> float:
        return self.rows[(dataset, n_cl, seed, regime)].dcn


@dataclass(frozen=True)
class CurvePoint:
    n_cl: int
    mean: float
    std: float
    n_seeds: int

    def __post_init__(self):
        if self.std < 0 or self.n_seeds < 1:
            raise ValueError("std must be >= 0 and n_seeds >= 1")


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n_points: int
    x_label: str
    y_label: str

    def __post_init__(self):
        if abs(self.r) > 1.0:
            raise ValueError(f"|r| must be <= 1, got {self.r}")
        if self.n_points < 2:
            raise ValueError("a correlation needs at least 2 points")


def _parse_row(line_no: int, row: dict[str, str]) -> ResultRecord:
    try:
        seed_text = row["seed"].strip()
        return ResultRecord(
            model=row["model"].strip(),
            dataset=row["dataset"].strip(),
            n_cl=int(row["n_cl"]),
            seed=int(seed_text) if seed_text else None,
            regime=row["regime"].strip(),
            top1=float(row["top1"]),
        )
    except Top1OutOfRange:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedRow(line_no, str(exc)) from None


def load_results(path: Path | str) -> list[ResultRecord]:
    """Read a results CSV with header model,dataset,n_cl,seed,regime,top1."""
    path = Path(path)
    records: list[ResultRecord] = []
    seen: set[tuple] = set()
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(reader.fieldnames) != set(RESULT_FIELDS):
            raise MalformedRow(1, f"header must contain exactly {','.join(RESULT_FIELDS)}")
        for line_no, row in enumerate(reader, start=2):
            if any(v is None for v in row.values()) or None in row:
                raise MalformedRow(line_no, "wrong number of fields")
            record = _parse_row(line_no, row)
            if record.record_key in seen:
                raise DuplicateKey(record.record_key)
            seen.add(record.record_key)
            records.append(record)
    return records


def compute_dcn(records: Iterable[ResultRecord]) -> DcnTable:
    """Group records and keep each group's best accuracy and the model behind it.

    Ties are broken toward the lexicographically smallest model name and
    flagged in the row.
    """
    groups: dict[GroupKey, list[ResultRecord]] = {}
    for record in records:
        groups.setdefault(record.group_key, []).append(record)
    rows: dict[GroupKey, DcnRow] = {}
    for key in sorted(groups, key=group_sort_key):
        members = groups[key]
        if not members:
            raise EmptyGroup(key)
        best = max(members, key=lambda rec: (rec.top1, ))
        winners = sorted(rec.model for rec in members if rec.top1 == best.top1)
        rows[key] = DcnRow(dcn=best.top1, best_model=winners[0], tie=len(winners) > 1)
    return DcnTable(rows=rows)


def group_sort_key(key: GroupKey):
    dataset, n_cl, seed, regime = key
    return (dataset, n_cl, seed if seed is not None else -1, regime)


def rank_models(
    records: Iterable[ResultRecord],
    dataset: str,
    *,
    n_cl: int | None = None,
    seed: int | None = None,
    regime: str | None = None,
    models: Sequence[str] | None = None,
) -> dict[str, int]:
    """Competition ranking of models by Top-1 on one dataset.

    Rank 1 is the best score; tied models share the smaller rank and the
    following rank is skipped. Every model in `models` (default: all models
    seen anywhere in `records`) must have exactly one record after filtering.
    """
    records = list(records)
    universe = sorted(set(models)) if models is not None else sorted({r.model for r in records})
    scores: dict[str, float] = {}
    for record in records:
        if record.dataset != dataset:
            continue
        if n_cl is not None and record.n_cl != n_cl:
            continue
        if seed is not None and record.seed != seed:
            continue
        if regime is not None and record.regime != regime:
            continue
        if record.model in scores:
            raise DuplicateKey(record.record_key)
        scores[record.model] = record.top1
    missing = [m for m in universe if m not in scores]
    if missing:
        raise MissingModel(missing)
    ordered = sorted(universe, key=lambda m: (-scores[m], m))
    ranks: dict[str, int] = {}
    for position, model in enumerate(ordered, start=1):
        previous = ordered[position - 2] if position > 1 else None
        if previous is not None and scores[model] == scores[previous]:
            ranks[model] = ranks[previous]
        else:
            ranks[model] = position
    return ranks


def accuracy_curve(
    records: Iterable[ResultRecord],
    dataset: str,
    regime: str,
    model: str | None = None,
    *,
    n_cl_list: Sequence[int] | None = None,
) -> list[CurvePoint]:
    """Mean and population std across seeds, per n_cl.

    With `model` set the curve tracks that model's Top-1; without it each
    seed contributes its DCN (best Top-1 over all models). Seeds are the
    complete designed set, hence the population (not sample) deviation.
    """
    per_ncl: dict[int, dict[int | None, list[float]]] = {}
    for record in records:
        if record.dataset != dataset or record.regime != regime:
            continue
        if model is not None and record.model != model:
            continue
        per_ncl.setdefault(record.n_cl, {}).setdefault(record.seed, []).append(record.top1)
    wanted = sorted(set(n_cl_list)) if n_cl_list is not None else sorted(per_ncl)
    if not wanted:
        raise NoData(0)
    points = []
    for n_cl in wanted:
        if n_cl not in per_ncl:
            raise NoData(n_cl)
        per_seed = [max(tops) for _, tops in sorted(per_ncl[n_cl].items(), key=_seed_order)]
        values = np.asarray(per_seed, dtype=np.float64)
        points.append(
            CurvePoint(
                n_cl=n_cl,
                mean=float(values.mean()),
                std=float(values.std(ddof=0)),
                n_seeds=len(values),
            )
        )
    return points


def _seed_order(item):
    seed, _ = item
    return -1 if seed is None else seed


def pearson(
    xs: Sequence[float],
    ys: Sequence[float],
    *,
    x_label: str = "x",
    y_label: str = "y",
) -> CorrelationResult:
    """Sample Pearson correlation coefficient of two equal-length sequences."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise LengthMismatch(len(xs), len(ys))
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0:
        raise ConstantSequence(x_label)
    if sy == 0.0:
        raise ConstantSequence(y_label)
    r = float(np.sum(dx * dy) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    return CorrelationResult(r=r, n_points=len(xs), x_label=x_label, y_label=y_label)


def load_simss(path: Path | str) -> dict[JoinKey, float]:
    """Read a similarity-score table: a JSON array of

    ``{"dataset": str, "n_cl": int, "seed": int, "simss": float}`` objects,
    as written by the batch similarity command.
    """
    with Path(path).open("r", encoding="utf-8") as handle:
        raw = json.load(handle)
    table: dict[JoinKey, float] = {}
    for entry in raw:
        key = (str(entry["dataset"]), int(entry["n_cl"]), int(entry["seed"]))
        if key in table:
            raise DuplicateKey(key)
        table[key] = float(entry["simss"])
    return table


def correlate_dcn_simss(
    dcn: DcnTable,
    simss: Mapping[JoinKey, float],
    regime: str,
) -> CorrelationResult:
    """Pearson r between similarity scores and DCN, joined on (dataset, n_cl, seed)."""
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}, got {regime!r}")
    pairs: list[tuple[float, float]] = []
    misses: list[JoinKey] = []
    for key in sorted(dcn.rows, key=group_sort_key):
        dataset, n_cl, seed, row_regime = key
        if row_regime != regime:
            continue
        join_key = (dataset, n_cl, seed)
        if join_key not in simss:
            misses.append(join_key)
            continue
        pairs.append((simss[join_key], dcn.rows[key].dcn))
    if misses:
        raise JoinMiss(misses)
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    return pearson(xs, ys, x_label="simss", y_label=f"dcn-{regime}")


# --- emission ------------------------------------------------------------


def _pct(value: float) -> str:
    return f"{value:.2f}"


def _seed_text(seed: int | None) -> str:
    return "" if seed is None else str(seed)


def _dcn_rows(table: DcnTable) -> list[dict]:
    rows = []
    for key in sorted(table.rows, key=group_sort_key):
        dataset, n_cl, seed, regime = key
        row = table.rows[key]
        rows.append(
            {
                "dataset": dataset,
                "n_cl": n_cl,
                "seed": seed,
                "regime": regime,
                "dcn": row.dcn,
                "best_model": row.best_model,
                "tie": row.tie,
            }
        )
    return rows


def emit_report(
    out_dir: Path | str,
    *,
    dcn: DcnTable | None = None,
    rankings: Mapping[str, Mapping[str, int]] | None = None,
    curves: Mapping[tuple[str, str, str], Sequence[CurvePoint]] | None = None,
    correlations: Sequence[CorrelationResult] | None = None,
    format: str = "csv",
) -> list[Path]:
    """Write the provided tables into `out_dir` as CSV or JSON files.

    Keys: rankings maps dataset -> model -> rank; curves maps a
    (dataset, regime, quantity) triple to its points. Outputs are sorted and
    formatted deterministically, and each file is written atomically.
    """
    if format not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {format!r}")
    out_dir = Path(out_dir)
    written: list[Path] = []

    def emit(name: str, header: list[str], rows: list[dict], pct_fields: set[str]):
        if format == "json":
            text = json.dumps(rows, sort_keys=True, indent=2) + "\n"
            written.append(atomic_write_text(out_dir / f"{name}.json", text))
            return
        lines = [",".join(header)]
        for row in rows:
            cells = []
            for column in header:
                value = row[column]
                if value is None:
                    cells.append("")
                elif column in pct_fields:
                    cells.append(_pct(value))
                elif isinstance(value, bool):
                    cells.append("true" if value else "false")
                else:
                    cells.append(str(value))
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"
        written.append(atomic_write_text(out_dir / f"{name}.csv", text))

    if dcn is not None:
        emit(
            "dcn",
            ["dataset", "n_cl", "seed", "regime", "dcn", "best_model", "tie"],
            _dcn_rows(dcn),
            {"dcn"},
        )
    if rankings is not None:
        rows = [
            {"dataset": dataset, "model": model, "rank": rank}
            for dataset in sorted(rankings)
            for model, rank in sorted(rankings[dataset].items(), key=lambda kv: (kv[1], kv[0]))
        ]
        emit("rankings", ["dataset", "model", "rank"], rows, set())
    if curves is not None:
        rows = []
        for dataset, regime, quantity in sorted(curves):
            for point in curves[(dataset, regime, quantity)]:
                rows.append(
                    {
                        "dataset": dataset,
                        "regime": regime,
                        "quantity": quantity,
                        "n_cl": point.n_cl,
                        "mean": point.mean,
                        "std": point.std,
                        "n_seeds": point.n_seeds,
                    }
                )
        emit(
            "curves",
            ["dataset", "regime", "quantity", "n_cl", "mean", "std", "n_seeds"],
            rows,
            {"mean", "std"},
        )
    if correlations is not None:
        rows = [
            {
                "x_label": c.x_label,
                "y_label": c.y_label,
                "n_points": c.n_points,
                "r": f"{c.r:.6f}" if format == "csv" else c.r,
            }
            for c in sorted(correlations, key=lambda c: (c.x_label, c.y_label))
        ]
        emit("correlations", ["x_label", "y_label", "n_points", "r"], rows, set())
    return written
