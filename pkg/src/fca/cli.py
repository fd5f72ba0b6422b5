"""Single entry point exposing every pipeline as a subcommand.

Subcommands: gen-subsets, store inspect, sim, dcn, rank, curve, corr, report.
A shared YAML config file can carry dataset, paths, the subset plan, and the
similarity knobs; flags override it, and FCA_* environment variables may
override paths (only paths: computation parameters never come from the
environment).

Exit codes: 0 success, 2 config error, 3 data error, 4 compute error,
1 unexpected failure. All outputs are written atomically.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from . import bench, figures, simcore
from .embedstore import make_view, read_store
from .errors import FcaError, MissingRequired, UnknownKey
from .manifest import parse_manifest
from .subset import (
    DEFAULT_NCL,
    DEFAULT_SEEDS,
    SubsetPlan,
    expand_plan,
    load_spec,
    save_plan,
)
from .util import atomic_write_text

log = logging.getLogger("fca")

FORMAT_VERSIONS = "store format v1, subset spec v1, report schema v1"

# Environment overrides apply to paths only.
_ENV_PATHS = {
    "manifest": "FCA_MANIFEST",
    "store": "FCA_STORE",
    "results": "FCA_RESULTS",
    "simss": "FCA_SIMSS",
    "out_dir": "FCA_OUT_DIR",
}

_CONFIG_SCHEMA: dict[str, set[str] | None] = {
    "dataset": None,
    "split": None,
    "paths": {"manifest", "store", "results", "simss", "out_dir"},
    "subsets": {"ncl", "seeds"},
    "similarity": {"max_per_class", "subsample_seed", "tolerance", "threads", "block_size"},
    "report": {"format"},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration shared by the subcommands."""

    dataset: str | None = None
    split: str = "train"
    manifest: Path | None = None
    store: Path | None = None
    results: Path | None = None
    simss: Path | None = None
    out_dir: Path | None = None
    ncl: tuple[int, ...] = DEFAULT_NCL
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    max_per_class: int | None = None
    subsample_seed: int = 0
    tolerance: float = 1e-12
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    block_size: int = simcore.DEFAULT_BLOCK_SIZE
    report_format: str = "csv"

    def require(self, name: str) -> Path:
        value = getattr(self, name)
        if value is None:
            raise MissingRequired(f"paths.{name}" if name != "dataset" else name)
        return value

    def similarity_config(self) -> simcore.SimilarityConfig:
        return simcore.SimilarityConfig(
            max_instances_per_class=self.max_per_class,
            subsample_seed=self.subsample_seed,
            tolerance=self.tolerance,
        )


def load_config(path: Path | str) -> RunConfig:
    """Parse and strictly validate a YAML config file; unknown keys are errors."""
    with Path(path).open("r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle) or {}
    if not isinstance(raw, dict):
        raise UnknownKey(f"top-level value of {path}")
    for key, value in raw.items():
        if key not in _CONFIG_SCHEMA:
            raise UnknownKey(key)
        allowed = _CONFIG_SCHEMA[key]
        if allowed is not None:
            if not isinstance(value, dict):
                raise UnknownKey(f"{key} (expected a section)")
            for sub in value:
                if sub not in allowed:
                    raise UnknownKey(f"{key}.{sub}")

    paths = raw.get("paths", {}) or {}
    subsets = raw.get("subsets", {}) or {}
    similarity = raw.get("similarity", {}) or {}
    report = raw.get("report", {}) or {}

    def path_of(name: str) -> Path | None:
        env = os.environ.get(_ENV_PATHS[name])
        if env:
            return Path(env)
        value = paths.get(name)
        return Path(value) if value is not None else None

    return RunConfig(
        dataset=raw.get("dataset"),
        split=str(raw.get("split", "train")),
        manifest=path_of("manifest"),
        store=path_of("store"),
        results=path_of("results"),
        simss=path_of("simss"),
        out_dir=path_of("out_dir"),
        ncl=tuple(int(v) for v in subsets.get("ncl", DEFAULT_NCL)),
        seeds=tuple(int(v) for v in subsets.get("seeds", DEFAULT_SEEDS)),
        max_per_class=(
            int(similarity["max_per_class"])
            if similarity.get("max_per_class") is not None
            else None
        ),
        subsample_seed=int(similarity.get("subsample_seed", 0)),
        tolerance=float(similarity.get("tolerance", 1e-12)),
        threads=int(similarity.get("threads", os.cpu_count() or 1)),
        block_size=int(similarity.get("block_size", simcore.DEFAULT_BLOCK_SIZE)),
        report_format=str(report.get("format", "csv")),
    )


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    mapping = {
        "dataset": "dataset",
        "split": "split",
        "manifest": "manifest",
        "store": "store",
        "results": "results",
        "simss": "simss",
        "out": "out_dir",
        "max_per_class": "max_per_class",
        "subsample_seed": "subsample_seed",
        "threads": "threads",
        "block_size": "block_size",
        "format": "report_format",
    }
    for arg_name, cfg_name in mapping.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            if cfg_name in ("manifest", "store", "results", "simss", "out_dir"):
                value = Path(value)
            overrides[cfg_name] = value
    if getattr(args, "ncl", None):
        overrides["ncl"] = _parse_int_list(args.ncl)
    if getattr(args, "seeds", None):
        overrides["seeds"] = _parse_int_list(args.seeds)
    return replace(cfg, **overrides)


def _parse_int_list(text: str) -> tuple[int, ...]:
    """Parse '2,3,10' and '0..4' (inclusive ranges), also mixed."""
    values: list[int] = []
    for chunk in str(text).split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ".." in chunk:
            lo, hi = chunk.split("..", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(chunk))
    if not values:
        raise MissingRequired("an integer list")
    return tuple(values)


def _class_universe(cfg: RunConfig, args) -> tuple[str, list[int]]:
    """Resolve (dataset_name, class universe) from --classes or a manifest."""
    if getattr(args, "classes", None):
        dataset = cfg.dataset or "dataset"
        return dataset, list(range(int(args.classes)))
    manifest_path = cfg.require("manifest")
    manifest = parse_manifest(manifest_path, cfg.dataset or manifest_path.stem, cfg.split)
    return manifest.dataset_name, list(manifest.class_universe)


# --- subcommands ----------------------------------------------------------


def cmd_gen_subsets(args) -> int:
    cfg = _config_from_args(args)
    dataset, universe = _class_universe(cfg, args)
    out_dir = cfg.require("out_dir")
    plan = SubsetPlan(dataset_name=dataset, n_cl_list=cfg.ncl, seeds=cfg.seeds)
    specs = expand_plan(plan, universe)
    save_plan(specs, out_dir)
    log.info("wrote %d spec files + index to %s", len(specs), out_dir)
    print(f"{len(specs)} subset specs -> {out_dir}")
    return 0


def cmd_store(args) -> int:
    if args.store_action == "inspect":
        store = read_store(args.path)
        print(f"path:        {store.path}")
        print(f"version:     {store.version}")
        print(f"count:       {store.count}")
        print(f"dim:         {store.dim}")
        print(f"encoder_tag: {store.encoder_tag}")
        for image_id in store.ids[: args.limit]:
            print(f"  {image_id}")
        if store.count > args.limit:
            print(f"  ... ({store.count - args.limit} more)")
    return 0


def _run_sim_single(cfg: RunConfig, args) -> int:
    store = read_store(cfg.require("store"))
    manifest_path = cfg.require("manifest")
    manifest = parse_manifest(manifest_path, cfg.dataset or manifest_path.stem, cfg.split)
    spec = load_spec(args.subset) if args.subset else None
    view = make_view(store, manifest, spec)
    report = simcore.full_report(
        view, cfg.similarity_config(), threads=cfg.threads, block_size=cfg.block_size
    )
    out = Path(args.out)
    simcore.write_report_json(report, out)
    written = [out]
    if args.csv:
        written.append(simcore.write_report_csv(report, Path(args.csv)))
    log.info("dataset simss=%.6f over %d instances", report.dataset.simss, len(report.per_instance))
    for path in written:
        print(path)
    return 0


def _run_sim_batch(cfg: RunConfig) -> int:
    if cfg.dataset is None:
        raise MissingRequired("dataset")
    dataset = cfg.dataset
    store = read_store(cfg.require("store"))
    manifest = parse_manifest(cfg.require("manifest"), dataset, cfg.split)
    out_dir = cfg.require("out_dir")
    out_dir.mkdir(parents=True, exist_ok=True)  # validate before computing anything
    plan = SubsetPlan(dataset_name=dataset, n_cl_list=cfg.ncl, seeds=cfg.seeds)
    specs = expand_plan(plan, list(manifest.class_universe))
    sim_config = cfg.similarity_config()

    index_rows = []
    simss_rows = []
    for spec in specs:
        view = make_view(store, manifest, spec)
        report = simcore.full_report(
            view, sim_config, threads=cfg.threads, block_size=cfg.block_size
        )
        name = f"{dataset}_ncl{spec.n_cl}_seed{spec.seed}_report.json"
        simcore.write_report_json(report, out_dir / name)
        index_rows.append({"file": name, "n_cl": spec.n_cl, "seed": spec.seed})
        simss_rows.append(
            {
                "dataset": dataset,
                "n_cl": spec.n_cl,
                "seed": spec.seed,
                "simss": report.dataset.simss,
            }
        )
        log.info("ncl=%d seed=%d simss=%.6f", spec.n_cl, spec.seed, report.dataset.simss)
    atomic_write_text(
        out_dir / "index.json", json.dumps({"reports": index_rows}, sort_keys=True, indent=2) + "\n"
    )
    atomic_write_text(
        out_dir / "simss.json", json.dumps(simss_rows, sort_keys=True, indent=2) + "\n"
    )
    print(f"{len(specs)} reports + index + simss.json -> {out_dir}")
    return 0


def cmd_sim(args) -> int:
    cfg = _config_from_args(args)
    if args.out:
        return _run_sim_single(cfg, args)
    if not args.config:
        raise MissingRequired("--out (single run) or --config (batch run)")
    return _run_sim_batch(cfg)


def cmd_dcn(args) -> int:
    cfg = _config_from_args(args)
    records = bench.load_results(cfg.require("results"))
    table = bench.compute_dcn(records)
    written = bench.emit_report(cfg.require("out_dir"), dcn=table, format=cfg.report_format)
    for path in written:
        print(path)
    return 0


def cmd_rank(args) -> int:
    cfg = _config_from_args(args)
    records = bench.load_results(cfg.require("results"))
    datasets = [args.dataset] if args.dataset else sorted({r.dataset for r in records})
    rankings = {
        dataset: bench.rank_models(records, dataset, regime=args.regime)
        for dataset in datasets
    }
    written = bench.emit_report(cfg.require("out_dir"), rankings=rankings, format=cfg.report_format)
    for path in written:
        print(path)
    return 0


def cmd_curve(args) -> int:
    cfg = _config_from_args(args)
    records = bench.load_results(cfg.require("results"))
    points = bench.accuracy_curve(
        records,
        args.dataset,
        args.regime,
        model=args.model,
        n_cl_list=_parse_int_list(args.ncl) if args.ncl else None,
    )
    quantity = args.model or "dcn"
    out_dir = cfg.require("out_dir")
    written = bench.emit_report(
        out_dir,
        curves={(args.dataset, args.regime, quantity): points},
        format=cfg.report_format,
    )
    written.append(
        figures.save_curve_figure(
            points,
            out_dir / f"curve_{args.dataset}_{args.regime}_{quantity}.png",
            title=f"{args.dataset} ({args.regime}, {quantity})",
            color="tab:blue" if args.regime == "sub" else "tab:red",
        )
    )
    for path in written:
        print(path)
    return 0


def cmd_corr(args) -> int:
    cfg = _config_from_args(args)
    records = bench.load_results(cfg.require("results"))
    table = bench.compute_dcn(records)
    simss = bench.load_simss(cfg.require("simss"))
    result = bench.correlate_dcn_simss(table, simss, args.regime)
    out_dir = cfg.require("out_dir")
    written = bench.emit_report(out_dir, correlations=[result], format=cfg.report_format)
    xs, ys = _joined_points(table, simss, args.regime)
    written.append(
        figures.save_correlation_figure(
            xs, ys, result, out_dir / f"corr_{args.regime}.png"
        )
    )
    log.info("r=%.4f over %d points", result.r, result.n_points)
    for path in written:
        print(path)
    return 0


def _joined_points(table, simss, regime):
    xs, ys = [], []
    for key in sorted(table.rows, key=bench.group_sort_key):
        dataset, n_cl, seed, row_regime = key
        if row_regime != regime:
            continue
        xs.append(simss[(dataset, n_cl, seed)])
        ys.append(table.rows[key].dcn)
    return xs, ys


def cmd_report(args) -> int:
    cfg = _config_from_args(args)
    out_dir = cfg.require("out_dir")
    records = bench.load_results(cfg.require("results"))
    table = bench.compute_dcn(records)

    # Rankings only make sense for datasets where every model has exactly one
    # record; skip the rest quietly.
    all_models = sorted({r.model for r in records})
    rankings = {}
    for dataset in sorted({r.dataset for r in records}):
        rows = [r for r in records if r.dataset == dataset]
        if sorted(r.model for r in rows) == all_models:
            rankings[dataset] = bench.rank_models(rows, dataset)
        else:
            log.info("skipping rankings for %s: incomplete model grid", dataset)

    curves = {}
    for dataset, regime in sorted({(r.dataset, r.regime) for r in records}):
        ncls = {r.n_cl for r in records if r.dataset == dataset and r.regime == regime}
        if len(ncls) >= 2:
            curves[(dataset, regime, "dcn")] = bench.accuracy_curve(records, dataset, regime)

    correlations = []
    corr_points = {}
    if cfg.simss is not None:
        simss = bench.load_simss(cfg.simss)
        for regime in sorted({r.regime for r in records}):
            try:
                result = bench.correlate_dcn_simss(table, simss, regime)
            except FcaError as exc:
                log.warning("skipping %s correlation: %s", regime, exc)
                continue
            correlations.append(result)
            corr_points[regime] = _joined_points(table, simss, regime)

    written = bench.emit_report(
        out_dir,
        dcn=table,
        rankings=rankings or None,
        curves=curves or None,
        correlations=correlations or None,
        format=cfg.report_format,
    )
    written.append(figures.save_dcn_figure(records, table, out_dir / "dcn.png"))
    for (dataset, regime, quantity), points in sorted(curves.items()):
        written.append(
            figures.save_curve_figure(
                points,
                out_dir / f"curve_{dataset}_{regime}_{quantity}.png",
                title=f"{dataset} ({regime}, {quantity})",
                color="tab:blue" if regime == "sub" else "tab:red",
            )
        )
    for result in correlations:
        regime = result.y_label.removeprefix("dcn-")
        xs, ys = corr_points[regime]
        written.append(
            figures.save_correlation_figure(xs, ys, result, out_dir / f"corr_{regime}.png")
        )
    for path in written:
        print(path)
    return 0


# --- parser and dispatch ----------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "config": lambda p: p.add_argument("--config", help="YAML config file"),
        "results": lambda p: p.add_argument("--results", help="results CSV"),
        "out_dir": lambda p: p.add_argument("--out", help="output directory"),
        "format": lambda p: p.add_argument("--format", choices=("csv", "json")),
        "regime": lambda p: p.add_argument("--regime", choices=("full", "sub")),
    }
    for name in names:
        flags[name](parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fca",
        description="Few-class subset generation, similarity scoring, and benchmark reports.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__} ({FORMAT_VERSIONS})",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-subsets", help="generate seeded few-class subset specs")
    _add_common(p, "config", "out_dir")
    p.add_argument("--dataset", help="dataset name")
    p.add_argument("--ncl", help="class counts, e.g. 2,3,4,5,10,100")
    p.add_argument("--seeds", help="seeds, e.g. 0..4")
    p.add_argument("--manifest", help="manifest supplying the class universe")
    p.add_argument("--split", choices=("train", "val"))
    p.add_argument("--classes", type=int, help="universe size when no manifest is given")
    p.set_defaults(func=cmd_gen_subsets)

    p = sub.add_parser("store", help="embedding store utilities")
    store_sub = p.add_subparsers(dest="store_action", required=True)
    pi = store_sub.add_parser("inspect", help="print header fields and first ids")
    pi.add_argument("path")
    pi.add_argument("--limit", type=int, default=10)
    p.set_defaults(func=cmd_store)

    p = sub.add_parser("sim", help="similarity report for one view or a whole plan")
    _add_common(p, "config")
    p.add_argument("--store", help="embedding store file")
    p.add_argument("--manifest", help="manifest file")
    p.add_argument("--split", choices=("train", "val"))
    p.add_argument("--dataset", help="dataset name")
    p.add_argument("--subset", help="subset spec JSON (single-run mode)")
    p.add_argument("--max-per-class", dest="max_per_class", type=int)
    p.add_argument("--subsample-seed", dest="subsample_seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--out", help="report JSON path (single-run mode)")
    p.add_argument("--csv", help="also export the report as CSV here")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("dcn", help="best-accuracy table per group")
    _add_common(p, "config", "results", "out_dir", "format")
    p.set_defaults(func=cmd_dcn)

    p = sub.add_parser("rank", help="competition ranking of models per dataset")
    _add_common(p, "config", "results", "out_dir", "format", "regime")
    p.add_argument("--dataset", help="restrict to one dataset")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("curve", help="mean/std accuracy vs class count")
    _add_common(p, "config", "results", "out_dir", "format")
    p.add_argument("--dataset", required=True)
    p.add_argument("--regime", choices=("full", "sub"), required=True)
    p.add_argument("--model", help="track one model instead of the per-seed best")
    p.add_argument("--ncl", help="explicit n_cl list; error when one is missing")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("corr", help="correlate similarity scores with best accuracy")
    _add_common(p, "config", "results", "out_dir", "format")
    p.add_argument("--simss", help="similarity table JSON")
    p.add_argument("--regime", choices=("full", "sub"), required=True)
    p.set_defaults(func=cmd_corr)

    p = sub.add_parser("report", help="all tables plus rendered figures")
    _add_common(p, "config", "results", "out_dir", "format")
    p.add_argument("--simss", help="similarity table JSON for correlations")
    p.set_defaults(func=cmd_report)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, dispatch, and map errors to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FcaError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        log.error("IoError: %s", exc)
        return 3
    except Exception:  # pragma: no cover - last-resort diagnostics
        log.exception("unexpected failure")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
