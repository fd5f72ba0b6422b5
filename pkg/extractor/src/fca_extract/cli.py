"""fca-extract: encode manifest images into an FCAE embedding store.

Exit codes: 0 success, 2 config error, 3 data error (incl. strict-mode image
failures), 4 encoder load failure, 1 unexpected.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .encoders import SUPPORTED
from .errors import ExtractError
from .extract import ExtractorJob, run_extract

log = logging.getLogger("fca-extract")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fca-extract",
        description="Run a pretrained image encoder over manifest images and "
        "write an FCAE embedding store.",
    )
    parser.add_argument("--manifest", required=True, help="manifest text file")
    parser.add_argument("--images", required=True, help="image root directory")
    parser.add_argument("--encoder", required=True, choices=SUPPORTED)
    parser.add_argument("--out", required=True, help="output store path")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu", help="device hint for torch encoders")
    parser.add_argument("--strict", action="store_true", help="abort on the first bad image")
    parser.add_argument("--summary", help="also write the JSON summary here")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        job = ExtractorJob(
            manifest=Path(args.manifest),
            image_root=Path(args.images),
            encoder_tag=args.encoder,
            out_store=Path(args.out),
            batch_size=args.batch_size,
            device=args.device,
            strict=args.strict,
        )
        summary = run_extract(job)
    except ValueError as exc:
        log.error("ConfigError: %s", exc)
        return 2
    except ExtractError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        log.error("IoError: %s", exc)
        return 3
    except Exception:  # pragma: no cover - last-resort diagnostics
        log.exception("unexpected failure")
        return 1
    for failure in summary.failures:
        log.warning("skipped %s: %s", failure["image_id"], failure["reason"])
    if args.summary:
        Path(args.summary).write_text(
            json.dumps(summary.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    print(
        f"{summary.count} vectors (dim {summary.dim}, {summary.encoder_tag}) "
        f"-> {summary.store}"
        + (f", {len(summary.failures)} skipped" if summary.failures else "")
    )
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
