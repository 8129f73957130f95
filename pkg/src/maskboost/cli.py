"""Command-line interface.

Subcommands: gen-prompts, run, sweep, ablate-prompts, validate-manifest.
Options come from flags or a JSON config file (--config); flags override
file values. Exit status: 0 success, 1 pipeline failure, 2 bad usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .errors import ConfigError, MaskBoostError
from .episodes import load_manifest, validate_manifest
from .pipeline import (
    SWEEP_GRID,
    RunConfig,
    cmd_ablate_prompts,
    cmd_gen_prompts,
    cmd_run,
    cmd_sweep,
    config_from_sources,
)

logger = logging.getLogger(__name__)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    parser.add_argument("--manifest", help="dataset manifest JSON")
    parser.add_argument("--episodes", help="episode list JSON-lines (skips sampling)")
    parser.add_argument("--fold", type=int, help="fold index 0-3 (default 0)")
    parser.add_argument("--shots", type=int, help="support shots K (default 1)")
    parser.add_argument("--seed", type=int, help="episode sampling seed (default 0)")
    parser.add_argument(
        "--n-episodes", type=int, dest="n_episodes", help="episodes to sample (default 1000)"
    )
    parser.add_argument("--fss-dir", dest="fss_dir", help="directory of coarse masks <id>.png")
    parser.add_argument(
        "--data-root", dest="data_root", help="base directory for relative mask refs"
    )
    parser.add_argument(
        "--backend", help="remote:<url> | precomputed:<dir> | mock:{identity,gt,dilate:<r>}"
    )
    parser.add_argument(
        "--prompt-mode", dest="prompt_mode", choices=["point", "box", "mixed"],
        help="prompt type (default box)",
    )
    parser.add_argument("--threshold", type=float, help="selection threshold T (default 0.75)")
    parser.add_argument("--parallelism", type=int, help="max in-flight segment requests")
    parser.add_argument("--out", help="output directory (default ./out)")


def _build_config(args: argparse.Namespace) -> RunConfig:
    file_values = None
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    flag_values = {
        key: getattr(args, key, None)
        for key in RunConfig.__dataclass_fields__
    }
    return config_from_sources(file_values, flag_values)


def _parse_thresholds(raw: Optional[str]) -> List[float]:
    if raw is None:
        return list(SWEEP_GRID)
    try:
        values = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad threshold list {raw!r}") from exc
    if not values:
        raise ConfigError("threshold list is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskboost",
        description="Boost coarse segmentation masks via a promptable segmenter "
        "and threshold-based selection.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-prompts", help="derive prompts from coarse masks")
    _add_config_flags(p)

    p = sub.add_parser("run", help="full pipeline: prompts, segment, select, report")
    _add_config_flags(p)

    p = sub.add_parser("sweep", help="selection + metrics across a threshold grid")
    _add_config_flags(p)
    p.add_argument(
        "--thresholds",
        help="comma-separated grid (default 0,0.25,0.5,0.75,1)",
    )

    p = sub.add_parser("ablate-prompts", help="full pipeline once per prompt mode")
    _add_config_flags(p)

    p = sub.add_parser("validate-manifest", help="check manifest schema and mask files")
    p.add_argument("--manifest", required=True)
    p.add_argument(
        "--data-root", dest="data_root",
        help="base directory for mask refs (default: manifest directory)",
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "validate-manifest":
            manifest = load_manifest(args.manifest)
            base = args.data_root or str(Path(args.manifest).parent)
            validate_manifest(manifest, base)
            print(
                f"manifest ok: {manifest.name}, {manifest.class_count} classes, "
                f"{len(manifest.entries)} entries, {manifest.split_scheme} folds"
            )
            return 0

        config = _build_config(args)
        if args.command == "gen-prompts":
            records = cmd_gen_prompts(config)
            skipped = sum(1 for r in records if r.get("prompts") is None)
            print(
                f"wrote {len(records)} prompt records "
                f"({skipped} skipped empty) to {config.out}/prompts.jsonl"
            )
        elif args.command == "run":
            report = cmd_run(config)
            print(
                f"episodes {report['episodes']}  boosted {report['sam_selected']}  "
                f"base mIoU {report['base']['miou']:.4f} -> "
                f"final mIoU {report['final']['miou']:.4f}  "
                f"FB-mIoU {report['base']['fb_miou']:.4f} -> "
                f"{report['final']['fb_miou']:.4f}"
            )
            print(f"report in {config.out}/report.json")
        elif args.command == "sweep":
            sweep = cmd_sweep(config, _parse_thresholds(args.thresholds))
            for row in sweep["rows"]:
                print(
                    f"T={row['threshold']:<5} boosted {row['sam_selected']:>4}  "
                    f"final mIoU {row['final']['miou']:.4f}  "
                    f"FB-mIoU {row['final']['fb_miou']:.4f}"
                )
            print(f"table in {config.out}/sweep.csv")
        elif args.command == "ablate-prompts":
            ablation = cmd_ablate_prompts(config)
            for row in ablation["rows"]:
                print(
                    f"mode={row['prompt_mode']:<6} boosted {row['sam_selected']:>4}  "
                    f"final mIoU {row['final']['miou']:.4f}  "
                    f"FB-mIoU {row['final']['fb_miou']:.4f}"
                )
            print(f"table in {config.out}/ablation.csv")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MaskBoostError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
