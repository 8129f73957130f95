"""End-to-end pipeline: episodes -> prompts -> segmenter -> selection -> report.

Stage results are plain data so each command is deterministic given its
config and fixtures. Mask references resolve as follows: an absolute
path is used as-is; a relative path is joined to `data_root`, which
defaults to the directory of the episode list (when imported) or of the
manifest. When `fss_dir` is set it wins: the coarse mask for an episode
is always <fss_dir>/<episode_id>.png.
"""

from __future__ import annotations

import csv
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError, MaskBoostError, MissingMask
from .episodes import (
    Episode,
    load_manifest,
    fold_classes,
    read_episodes_jsonl,
    sample_episodes,
)
from .mask import BinaryMask, iou, load_mask_file
from .metrics import (
    EpisodeCounts,
    SITUATIONS,
    SituationTally,
    accumulate_by_class,
    build_situation_tally,
    episode_iou,
    fb_miou,
    miou,
    per_class_iou,
    situation_group_iou,
)
from .prompts import (
    PROMPT_MODES,
    generate_prompts,
    prompt_set_from_dict,
    prompt_set_to_dict,
)
from .segmenter import (
    Backend,
    MockBackend,
    PrecomputedBackend,
    RemoteBackend,
    SegmentRequest,
    SegmentResponse,
    parse_mock_kind,
    segment_batch,
)
from .selection import (
    SOURCE_FALLBACK_EMPTY,
    SOURCE_FALLBACK_ERROR,
    SOURCES,
    Selection,
    select_batch,
    selection_record,
)

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.75
DEFAULT_PROMPT_MODE = "box"
DEFAULT_EPISODE_COUNT = 1000
SWEEP_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)

SKIP_EMPTY_FOREGROUND = "empty_foreground"


@dataclass(frozen=True)
class RunConfig:
    manifest: str = ""
    episodes: str = ""  # JSON-lines episode list; overrides sampling
    fold: int = 0
    shots: int = 1
    seed: int = 0
    n_episodes: int = DEFAULT_EPISODE_COUNT
    fss_dir: str = ""
    data_root: str = ""
    backend: str = "mock:identity"
    prompt_mode: str = DEFAULT_PROMPT_MODE
    threshold: float = DEFAULT_THRESHOLD
    parallelism: int = 1
    out: str = "out"

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.prompt_mode not in PROMPT_MODES:
            raise ConfigError(f"prompt mode must be one of {PROMPT_MODES}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be positive, got {self.parallelism}")
        if self.shots < 1:
            raise ConfigError(f"shots must be positive, got {self.shots}")
        if self.n_episodes < 0:
            raise ConfigError(f"n_episodes must be nonnegative, got {self.n_episodes}")
        if not self.manifest and not self.episodes:
            raise ConfigError("one of manifest / episodes is required")
        prefix = self.backend.split(":", 1)[0]
        if prefix not in ("remote", "precomputed", "mock") or ":" not in self.backend:
            raise ConfigError(
                "backend must be remote:<url>, precomputed:<dir>, or mock:<kind>; "
                f"got {self.backend!r}"
            )

    def to_dict(self) -> dict:
        return {
            "manifest": self.manifest,
            "episodes": self.episodes,
            "fold": self.fold,
            "shots": self.shots,
            "seed": self.seed,
            "n_episodes": self.n_episodes,
            "fss_dir": self.fss_dir,
            "data_root": self.data_root,
            "backend": self.backend,
            "prompt_mode": self.prompt_mode,
            "threshold": self.threshold,
            "parallelism": self.parallelism,
            "out": self.out,
        }


def config_from_sources(file_values: Optional[dict], flag_values: dict) -> RunConfig:
    """Build a RunConfig from an optional JSON config plus flag overrides."""
    merged: dict = {}
    field_names = set(RunConfig.__dataclass_fields__)
    if file_values:
        unknown = set(file_values) - field_names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class EpisodeData:
    """One episode with its coarse prediction and ground truth loaded."""

    episode: Episode
    fss: BinaryMask
    gt: BinaryMask


@contextmanager
def _stage(name: str):
    """Prefix stage name onto pipeline errors so failures say where."""
    try:
        yield
    except MaskBoostError as exc:
        raise exc.__class__(f"stage {name}: {exc}") from exc


def _resolve(ref: str, data_root: str) -> Path:
    p = Path(ref)
    if p.is_absolute() or not data_root:
        return p
    return Path(data_root) / p


def load_episodes(config: RunConfig) -> List[Episode]:
    if config.episodes:
        episodes = read_episodes_jsonl(config.episodes)
        return episodes
    manifest = load_manifest(config.manifest)
    return sample_episodes(
        manifest,
        config.fold,
        n=config.n_episodes,
        k=config.shots,
        seed=config.seed,
        fss_dir=config.fss_dir or None,
    )


def _default_data_root(config: RunConfig) -> str:
    if config.data_root:
        return config.data_root
    source = config.episodes or config.manifest
    return str(Path(source).parent) if source else ""


def load_episode_data(config: RunConfig) -> List[EpisodeData]:
    data_root = _default_data_root(config)
    out: List[EpisodeData] = []
    for ep in load_episodes(config):
        if config.fss_dir:
            fss_path = Path(config.fss_dir) / f"{ep.id}.png"
        elif ep.fss_mask_ref:
            fss_path = _resolve(ep.fss_mask_ref, data_root)
        else:
            raise MissingMask(f"episode {ep.id} has no coarse-mask reference")
        if not fss_path.exists():
            raise MissingMask(f"episode {ep.id}: no coarse mask at {fss_path}")
        gt_path = _resolve(ep.query_gt_mask_ref, data_root)
        if not gt_path.exists():
            raise MissingMask(f"episode {ep.id}: no ground truth at {gt_path}")
        out.append(
            EpisodeData(
                episode=ep,
                fss=load_mask_file(fss_path),
                gt=load_mask_file(gt_path),
            )
        )
    return out


def make_backend(config: RunConfig, data: Sequence[EpisodeData]) -> Backend:
    kind, _, rest = config.backend.partition(":")
    if kind == "remote":
        return RemoteBackend(rest)
    if kind == "precomputed":
        return PrecomputedBackend(rest)
    mock_kind, radius = parse_mock_kind(rest)
    if mock_kind == "gt":
        fixtures = {d.episode.id: d.gt for d in data}
    else:
        fixtures = {d.episode.id: d.fss for d in data}
    return MockBackend(mock_kind, fixtures, radius=radius)


# --- prompt stage -------------------------------------------------------------


def build_prompt_records(
    data: Sequence[EpisodeData], mode: str
) -> List[dict]:
    """One record per episode: its prompts, or a skip marker when the
    coarse mask has no foreground to prompt from."""
    records = []
    for d in data:
        if d.fss.foreground_count == 0:
            records.append(
                {"episode_id": d.episode.id, "prompts": None, "skip": SKIP_EMPTY_FOREGROUND}
            )
        else:
            records.append(
                {
                    "episode_id": d.episode.id,
                    "prompts": prompt_set_to_dict(generate_prompts(d.fss, mode)),
                }
            )
    return records


def write_prompts_jsonl(records: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# --- segmentation stage ---------------------------------------------------------


def run_segmenter(
    data: Sequence[EpisodeData],
    prompt_records: Sequence[dict],
    backend: Backend,
    config: RunConfig,
):
    """Query the backend for every promptable episode.

    Returns a full-length outcome list aligned to `data`: a mask for a
    successful response, None where no prompt existed, and the error for
    a failed request.
    """
    data_root = _default_data_root(config)
    requests_: List[SegmentRequest] = []
    indices: List[int] = []
    for i, (d, rec) in enumerate(zip(data, prompt_records)):
        if rec.get("prompts") is None:
            continue
        requests_.append(
            SegmentRequest(
                episode_id=d.episode.id,
                prompts=prompt_set_from_dict(rec["prompts"]),
                width=d.fss.width,
                height=d.fss.height,
                image_ref=str(_resolve(d.episode.query_image_ref, data_root)),
            )
        )
        indices.append(i)
    batch = segment_batch(requests_, backend, parallelism=config.parallelism)
    outcomes: List = [None] * len(data)
    for i, outcome in zip(indices, batch):
        if isinstance(outcome, SegmentResponse):
            outcomes[i] = outcome.mask
        else:
            outcomes[i] = outcome
    return outcomes


# --- evaluation ------------------------------------------------------------------


def _metric_block(
    data: Sequence[EpisodeData], predictions: Sequence[BinaryMask]
) -> dict:
    counts = [episode_iou(pred, d.gt) for pred, d in zip(predictions, data)]
    acc = accumulate_by_class(
        (d.episode.class_id, c) for d, c in zip(data, counts)
    )
    classes = sorted(acc)
    return {
        "miou": miou(acc, classes),
        "fb_miou": fb_miou(counts),
        "per_class_iou": {
            str(cid): v for cid, v in per_class_iou(acc, classes).items()
        },
    }


def _pooled(sums_i: Dict[str, int], sums_u: Dict[str, int]) -> Dict[str, Optional[float]]:
    return {
        label: (sums_i[label] / sums_u[label] if sums_u[label] else None)
        for label in sums_i
    }


def evaluate_selections(
    data: Sequence[EpisodeData],
    outcomes: Sequence,
    selections: Sequence[Selection],
) -> dict:
    """Full report body for one (data, outcomes, threshold) evaluation."""
    selected = [s.chosen for s in selections]
    base = _metric_block(data, [d.fss for d in data])
    final = _metric_block(data, selected)

    situation_records = []
    source_counts = {s: 0 for s in SOURCES}
    source_i = {s: 0 for s in SOURCES}
    source_u = {s: 0 for s in SOURCES}
    for d, outcome, sel in zip(data, outcomes, selections):
        counts = episode_iou(sel.chosen, d.gt)
        iou_fss_gt = iou(d.fss, d.gt)
        iou_sam_gt = (
            iou(outcome, d.gt) if isinstance(outcome, BinaryMask) else None
        )
        situation_records.append((sel.source, iou_fss_gt, iou_sam_gt, counts))
        source_counts[sel.source] += 1
        source_i[sel.source] += counts.fg_intersection
        source_u[sel.source] += counts.fg_union
    tally = build_situation_tally(situation_records)

    assert tally.total == len(selections)  # improved+degraded+unchanged reconcile

    return {
        "episodes": len(data),
        "classes": sorted({d.episode.class_id for d in data}),
        "base": base,
        "final": final,
        "situations": {
            "counts": dict(tally.counts),
            "pooled_fg_iou": _pooled(tally.intersection_sums, tally.union_sums),
            "group_iou": situation_group_iou(tally),
        },
        "sources": {
            "counts": source_counts,
            "pooled_fg_iou": _pooled(source_i, source_u),
        },
        "fallbacks": {
            "empty": source_counts[SOURCE_FALLBACK_EMPTY],
            "error": source_counts[SOURCE_FALLBACK_ERROR],
        },
        "sam_selected": source_counts["SAM"],
    }


# --- commands --------------------------------------------------------------------


def _ensure_out(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _flatten_metrics(report: dict) -> List[Tuple[str, object]]:
    rows: List[Tuple[str, object]] = [
        ("episodes", report["episodes"]),
        ("base_miou", report["base"]["miou"]),
        ("base_fb_miou", report["base"]["fb_miou"]),
        ("final_miou", report["final"]["miou"]),
        ("final_fb_miou", report["final"]["fb_miou"]),
        ("group_iou", report["situations"]["group_iou"]),
        ("sam_selected", report["sam_selected"]),
        ("fallback_empty", report["fallbacks"]["empty"]),
        ("fallback_error", report["fallbacks"]["error"]),
    ]
    for label in SITUATIONS:
        rows.append((f"situation_{label}", report["situations"]["counts"][label]))
    return rows


def cmd_gen_prompts(config: RunConfig) -> List[dict]:
    with _stage("load"):
        data = load_episode_data(config)
    with _stage("gen-prompts"):
        records = build_prompt_records(data, config.prompt_mode)
        out = _ensure_out(config)
        write_prompts_jsonl(records, out / "prompts.jsonl")
    logger.info("wrote %d prompt records to %s", len(records), out)
    return records


def run_pipeline(config: RunConfig):
    """Shared run core: returns (data, prompt records, outcomes, selections)."""
    with _stage("load"):
        data = load_episode_data(config)
    with _stage("gen-prompts"):
        records = build_prompt_records(data, config.prompt_mode)
    with _stage("backend"):
        backend = make_backend(config, data)
    with _stage("segment"):
        outcomes = run_segmenter(data, records, backend, config)
    with _stage("select"):
        selections = select_batch(
            [d.episode.id for d in data],
            [d.fss for d in data],
            outcomes,
            config.threshold,
        )
    return data, records, outcomes, selections


def cmd_run(config: RunConfig) -> dict:
    data, records, outcomes, selections = run_pipeline(config)
    with _stage("metrics"):
        report = evaluate_selections(data, outcomes, selections)
    report = {
        "config": config.to_dict(),
        "threshold": config.threshold,
        "prompt_mode": config.prompt_mode,
        **report,
    }
    out = _ensure_out(config)
    write_prompts_jsonl(records, out / "prompts.jsonl")
    with open(out / "selections.jsonl", "w", encoding="utf-8") as fh:
        for sel in selections:
            fh.write(json.dumps(selection_record(sel), sort_keys=True) + "\n")
    _write_json(report, out / "report.json")
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "metric", "value"])
        for metric, value in _flatten_metrics(report):
            writer.writerow([config.fold, metric, value])
    logger.info(
        "run complete: %d episodes, %d boosted, final mIoU %.4f",
        report["episodes"],
        report["sam_selected"],
        report["final"]["miou"],
    )
    return report


def cmd_sweep(
    config: RunConfig, thresholds: Sequence[float] = SWEEP_GRID
) -> dict:
    """One selection + evaluation per threshold over a single segmenter pass."""
    if not thresholds:
        raise ConfigError("sweep needs at least one threshold")
    data, records, outcomes, _ = run_pipeline(config)
    ids = [d.episode.id for d in data]
    fss = [d.fss for d in data]
    rows = []
    for t in thresholds:
        with _stage(f"select@{t}"):
            selections = select_batch(ids, fss, outcomes, t)
            report = evaluate_selections(data, outcomes, selections)
        rows.append({"threshold": t, **report})
    sweep = {
        "config": config.to_dict(),
        "prompt_mode": config.prompt_mode,
        "thresholds": list(thresholds),
        "rows": rows,
    }
    out = _ensure_out(config)
    write_prompts_jsonl(records, out / "prompts.jsonl")
    _write_json(sweep, out / "sweep.json")
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["fold", "threshold", "sam_selected", "final_miou", "final_fb_miou", "group_iou"]
        )
        for row in rows:
            writer.writerow(
                [
                    config.fold,
                    row["threshold"],
                    row["sam_selected"],
                    row["final"]["miou"],
                    row["final"]["fb_miou"],
                    row["situations"]["group_iou"],
                ]
            )
    return sweep


def cmd_ablate_prompts(config: RunConfig) -> dict:
    """Full pipeline once per prompt mode; comparison table across modes."""
    rows = []
    for mode in PROMPT_MODES:
        mode_config = replace(config, prompt_mode=mode)
        data, _, outcomes, selections = run_pipeline(mode_config)
        with _stage(f"metrics@{mode}"):
            report = evaluate_selections(data, outcomes, selections)
        rows.append({"prompt_mode": mode, **report})
    ablation = {
        "config": config.to_dict(),
        "threshold": config.threshold,
        "rows": rows,
    }
    out = _ensure_out(config)
    _write_json(ablation, out / "ablation.json")
    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["fold", "prompt_mode", "sam_selected", "final_miou", "final_fb_miou", "group_iou"]
        )
        for row in rows:
            writer.writerow(
                [
                    config.fold,
                    row["prompt_mode"],
                    row["sam_selected"],
                    row["final"]["miou"],
                    row["final"]["fb_miou"],
                    row["situations"]["group_iou"],
                ]
            )
    return ablation
