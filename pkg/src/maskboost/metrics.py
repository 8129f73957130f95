"""Evaluation engine: per-class mIoU, FB-mIoU, and situation grouping.

All metrics follow the aggregate-then-ratio protocol: integer
intersection/union pixel counts are summed over episodes first and a
single division happens at the end. This is the standard few-shot
segmentation evaluation order and differs from averaging per-episode
IoUs.

A degenerate 0/0 aggregate (every pred and every gt empty) is scored
1.0, consistent with the mask-level IoU convention for two empty sets;
`situation_group_iou` instead refuses it, since a pooled union of zero
means the whole evaluation is vacuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import DimensionMismatch, EmptyClass, EmptySet, ZeroUnion
from .mask import BinaryMask
from .selection import SOURCE_SAM

SITUATION_IMPROVED = "improved"
SITUATION_DEGRADED = "degraded"
SITUATION_UNCHANGED = "unchanged"
SITUATIONS = (SITUATION_IMPROVED, SITUATION_DEGRADED, SITUATION_UNCHANGED)


@dataclass(frozen=True)
class EpisodeCounts:
    """Exact pixel counts of one prediction against its ground truth."""

    fg_intersection: int
    fg_union: int
    bg_intersection: int
    bg_union: int


def episode_iou(pred: BinaryMask, gt: BinaryMask) -> EpisodeCounts:
    """Foreground and background intersection/union counts for one episode."""
    if pred.data.shape != gt.data.shape:
        raise DimensionMismatch(
            f"pred {pred.width}x{pred.height} vs gt {gt.width}x{gt.height}"
        )
    p, g = pred.data, gt.data
    fg_i = int((p & g).sum())
    fg_u = int((p | g).sum())
    total = p.size
    # Complement counts via inclusion-exclusion; no second pass needed.
    bg_i = total - fg_u
    bg_u = total - fg_i
    return EpisodeCounts(fg_i, fg_u, bg_i, bg_u)


def _agg_ratio(intersection: int, union: int) -> float:
    if union == 0:
        return 1.0
    return intersection / union


@dataclass
class ClassAccumulator:
    """Running intersection/union pixel sums for one foreground class."""

    class_id: int
    intersection_sum: int = 0
    union_sum: int = 0
    episode_count: int = 0

    def add(self, fg_intersection: int, fg_union: int) -> None:
        self.intersection_sum += fg_intersection
        self.union_sum += fg_union
        self.episode_count += 1

    def merge(self, other: "ClassAccumulator") -> "ClassAccumulator":
        if other.class_id != self.class_id:
            raise ValueError(
                f"cannot merge class {other.class_id} into {self.class_id}"
            )
        merged = ClassAccumulator(self.class_id)
        merged.intersection_sum = self.intersection_sum + other.intersection_sum
        merged.union_sum = self.union_sum + other.union_sum
        merged.episode_count = self.episode_count + other.episode_count
        return merged


def accumulate_by_class(
    records: Iterable[Tuple[int, EpisodeCounts]],
) -> Dict[int, ClassAccumulator]:
    acc: Dict[int, ClassAccumulator] = {}
    for class_id, counts in records:
        if class_id not in acc:
            acc[class_id] = ClassAccumulator(class_id)
        acc[class_id].add(counts.fg_intersection, counts.fg_union)
    return acc


def per_class_iou(
    accumulators: Mapping[int, ClassAccumulator], fold_classes: Iterable[int]
) -> Dict[int, float]:
    out: Dict[int, float] = {}
    for class_id in sorted(fold_classes):
        acc = accumulators.get(class_id)
        if acc is None or acc.episode_count == 0:
            raise EmptyClass(f"class {class_id} has no episodes")
        out[class_id] = _agg_ratio(acc.intersection_sum, acc.union_sum)
    return out


def miou(
    accumulators: Mapping[int, ClassAccumulator], fold_classes: Iterable[int]
) -> float:
    """Mean over fold classes of (summed intersection / summed union)."""
    ratios = per_class_iou(accumulators, fold_classes)
    if not ratios:
        raise EmptyClass("fold has no classes")
    return sum(ratios.values()) / len(ratios)


def fb_miou(counts: Sequence[EpisodeCounts]) -> float:
    """Class-blind mean of aggregate foreground IoU and background IoU."""
    if not counts:
        raise EmptySet("fb_miou needs at least one episode")
    fg_i = sum(c.fg_intersection for c in counts)
    fg_u = sum(c.fg_union for c in counts)
    bg_i = sum(c.bg_intersection for c in counts)
    bg_u = sum(c.bg_union for c in counts)
    return (_agg_ratio(fg_i, fg_u) + _agg_ratio(bg_i, bg_u)) / 2.0


def situation_split(
    source: str, iou_fss_gt: float, iou_sam_gt: Optional[float]
) -> str:
    """Label one episode by what swapping in the boosted mask did.

    Only episodes where the boosted mask was actually selected can
    improve or degrade; keeping the original (including both fallback
    paths) and exact ties are 'unchanged'.
    """
    if source == SOURCE_SAM and iou_sam_gt is not None:
        if iou_sam_gt > iou_fss_gt:
            return SITUATION_IMPROVED
        if iou_sam_gt < iou_fss_gt:
            return SITUATION_DEGRADED
    return SITUATION_UNCHANGED


def _zero_per_situation() -> Dict[str, int]:
    return {label: 0 for label in SITUATIONS}


@dataclass
class SituationTally:
    """Episode counts and pooled pixel sums per situation group.

    The pooled sums are foreground intersection/union of the *selected*
    mask against ground truth, so the grouped ratio scores the final
    dataset as evaluated.
    """

    counts: Dict[str, int] = field(default_factory=_zero_per_situation)
    intersection_sums: Dict[str, int] = field(default_factory=_zero_per_situation)
    union_sums: Dict[str, int] = field(default_factory=_zero_per_situation)

    @property
    def improved(self) -> int:
        return self.counts[SITUATION_IMPROVED]

    @property
    def degraded(self) -> int:
        return self.counts[SITUATION_DEGRADED]

    @property
    def unchanged(self) -> int:
        return self.counts[SITUATION_UNCHANGED]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def add(self, label: str, fg_intersection: int, fg_union: int) -> None:
        if label not in SITUATIONS:
            raise ValueError(f"unknown situation label {label!r}")
        self.counts[label] += 1
        self.intersection_sums[label] += fg_intersection
        self.union_sums[label] += fg_union

    def merge(self, other: "SituationTally") -> "SituationTally":
        merged = SituationTally()
        for label in SITUATIONS:
            merged.counts[label] = self.counts[label] + other.counts[label]
            merged.intersection_sums[label] = (
                self.intersection_sums[label] + other.intersection_sums[label]
            )
            merged.union_sums[label] = (
                self.union_sums[label] + other.union_sums[label]
            )
        return merged


def situation_group_iou(tally: SituationTally) -> float:
    """Pooled foreground IoU across all situation groups.

    Sums every group's intersections and every group's unions, then
    divides once: the groups' shares of the pool show which of them
    carries the final number.
    """
    total_i = sum(tally.intersection_sums[label] for label in SITUATIONS)
    total_u = sum(tally.union_sums[label] for label in SITUATIONS)
    if total_u == 0:
        raise ZeroUnion("pooled union is zero; nothing was evaluated")
    return total_i / total_u


def build_situation_tally(
    records: Iterable[Tuple[str, float, Optional[float], EpisodeCounts]],
) -> SituationTally:
    """Tally (source, iou_fss_gt, iou_sam_gt, selected_counts) records."""
    tally = SituationTally()
    for source, iou_fss_gt, iou_sam_gt, counts in records:
        label = situation_split(source, iou_fss_gt, iou_sam_gt)
        tally.add(label, counts.fg_intersection, counts.fg_union)
    return tally
