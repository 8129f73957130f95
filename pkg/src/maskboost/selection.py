"""Per-episode choice between the original mask and the boosted one.

The boosted mask replaces the original only when their mutual IoU
strictly exceeds the threshold: high agreement means the segmenter was
prompted into the right region and its sharper boundary is trusted; low
agreement means the prompt likely missed, so the original is kept.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

from .errors import LengthMismatch, MaskBoostError
from .mask import BinaryMask, iou

SOURCE_FSS = "FSS"
SOURCE_SAM = "SAM"
SOURCE_FALLBACK_EMPTY = "FSS_fallback_empty"
SOURCE_FALLBACK_ERROR = "FSS_fallback_error"
SOURCES = (SOURCE_FSS, SOURCE_SAM, SOURCE_FALLBACK_EMPTY, SOURCE_FALLBACK_ERROR)

# A batch outcome per episode: the boosted mask, None when no prompt was
# derivable (empty original foreground), or the error the backend raised.
SamOutcome = Union[BinaryMask, None, MaskBoostError]


def _check_threshold(threshold: float) -> None:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")


@dataclass(frozen=True)
class Selection:
    episode_id: str
    chosen: BinaryMask
    source: str
    iou_fss_sam: Optional[float]
    threshold: float

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"unknown selection source {self.source!r}")
        _check_threshold(self.threshold)
        if self.source == SOURCE_SAM:
            if self.iou_fss_sam is None or not self.iou_fss_sam > self.threshold:
                raise ValueError(
                    f"source SAM requires iou > {self.threshold}, got {self.iou_fss_sam}"
                )
        elif self.source == SOURCE_FSS:
            if self.iou_fss_sam is None or self.iou_fss_sam > self.threshold:
                raise ValueError(
                    f"source FSS requires iou <= {self.threshold}, got {self.iou_fss_sam}"
                )
        elif self.iou_fss_sam is not None:
            raise ValueError(f"fallback source {self.source} cannot carry an iou")


def select(
    fss: BinaryMask, sam: BinaryMask, threshold: float, episode_id: str = ""
) -> Selection:
    """Keep the boosted mask iff iou(fss, sam) > threshold, strictly."""
    _check_threshold(threshold)
    overlap = iou(fss, sam)
    if overlap > threshold:
        return Selection(episode_id, sam, SOURCE_SAM, overlap, threshold)
    return Selection(episode_id, fss, SOURCE_FSS, overlap, threshold)


def select_batch(
    episode_ids: Sequence[str],
    fss_masks: Sequence[BinaryMask],
    sam_outcomes: Sequence[SamOutcome],
    threshold: float,
) -> List[Selection]:
    """Element-wise select over paired batches, keeping input order.

    An outcome of None (no prompt was derivable) or an error instance
    falls back to the original mask instead of aborting the batch.
    """
    if not len(episode_ids) == len(fss_masks) == len(sam_outcomes):
        raise LengthMismatch(
            f"batch lengths differ: {len(episode_ids)} ids, "
            f"{len(fss_masks)} masks, {len(sam_outcomes)} outcomes"
        )
    _check_threshold(threshold)
    out: List[Selection] = []
    for eid, fss, outcome in zip(episode_ids, fss_masks, sam_outcomes):
        if outcome is None:
            out.append(
                Selection(eid, fss, SOURCE_FALLBACK_EMPTY, None, threshold)
            )
        elif isinstance(outcome, MaskBoostError):
            out.append(
                Selection(eid, fss, SOURCE_FALLBACK_ERROR, None, threshold)
            )
        else:
            out.append(select(fss, outcome, threshold, episode_id=eid))
    return out


def selection_record(sel: Selection) -> dict:
    return {
        "episode_id": sel.episode_id,
        "source": sel.source,
        "iou_fss_sam": sel.iou_fss_sam,
        "threshold": sel.threshold,
    }


def write_selections_jsonl(selections: Sequence[Selection], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sel in selections:
            fh.write(json.dumps(selection_record(sel), sort_keys=True) + "\n")


def read_selection_records(path) -> List[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
