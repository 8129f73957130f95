"""Prompt derivation from a coarse mask.

A predicted foreground is summarized either as its centroid (a single
positive point, sub-pixel precision) or as the tight axis-aligned
bounding box, or both. With several disconnected components the whole
foreground is summarized at once, so the centroid can land on background.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyForeground
from .mask import BinaryMask, raw_moments

MODE_POINT = "point"
MODE_BOX = "box"
MODE_MIXED = "mixed"
PROMPT_MODES = (MODE_POINT, MODE_BOX, MODE_MIXED)

FOREGROUND_LABEL = 1


@dataclass(frozen=True)
class PointPrompt:
    """One positive click at sub-pixel coordinates."""

    x: float
    y: float
    label: int = FOREGROUND_LABEL


@dataclass(frozen=True)
class BoxPrompt:
    """Tight foreground bounding box, inclusive pixel coordinates."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self) -> None:
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"degenerate box {self}")


@dataclass(frozen=True)
class PromptSet:
    mode: str
    point: Optional[PointPrompt] = None
    box: Optional[BoxPrompt] = None

    def __post_init__(self) -> None:
        if self.mode not in PROMPT_MODES:
            raise ValueError(f"unknown prompt mode {self.mode!r}")
        want_point = self.mode in (MODE_POINT, MODE_MIXED)
        want_box = self.mode in (MODE_BOX, MODE_MIXED)
        if (self.point is not None) != want_point:
            raise ValueError(f"mode {self.mode!r} but point={self.point!r}")
        if (self.box is not None) != want_box:
            raise ValueError(f"mode {self.mode!r} but box={self.box!r}")


def centroid_point(mask: BinaryMask) -> PointPrompt:
    """Foreground centroid (m10/m00, m01/m00) as a positive point."""
    m = raw_moments(mask)
    if m.m00 == 0:
        raise EmptyForeground("cannot derive a point prompt from an empty mask")
    return PointPrompt(x=m.m10 / m.m00, y=m.m01 / m.m00)


def bounding_box(mask: BinaryMask) -> BoxPrompt:
    """Per-axis min/max of the foreground, inclusive on both ends."""
    ys, xs = np.nonzero(mask.data)
    if len(xs) == 0:
        raise EmptyForeground("cannot derive a box prompt from an empty mask")
    return BoxPrompt(
        x1=int(xs.min()), y1=int(ys.min()), x2=int(xs.max()), y2=int(ys.max())
    )


def generate_prompts(mask: BinaryMask, mode: str) -> PromptSet:
    if mode not in PROMPT_MODES:
        raise ValueError(f"unknown prompt mode {mode!r}")
    point = centroid_point(mask) if mode in (MODE_POINT, MODE_MIXED) else None
    box = bounding_box(mask) if mode in (MODE_BOX, MODE_MIXED) else None
    return PromptSet(mode=mode, point=point, box=box)


def prompt_set_to_dict(prompts: PromptSet) -> dict:
    """Plain-JSON shape shared by the wire protocol and prompt files."""
    return {
        "mode": prompts.mode,
        "point": (
            None
            if prompts.point is None
            else {"x": prompts.point.x, "y": prompts.point.y, "label": prompts.point.label}
        ),
        "box": (
            None
            if prompts.box is None
            else {
                "x1": prompts.box.x1,
                "y1": prompts.box.y1,
                "x2": prompts.box.x2,
                "y2": prompts.box.y2,
            }
        ),
    }


def prompt_set_from_dict(payload: dict) -> PromptSet:
    point = payload.get("point")
    box = payload.get("box")
    return PromptSet(
        mode=payload["mode"],
        point=None if point is None else PointPrompt(
            x=float(point["x"]), y=float(point["y"]), label=int(point.get("label", 1))
        ),
        box=None if box is None else BoxPrompt(
            x1=int(box["x1"]), y1=int(box["y1"]), x2=int(box["x2"]), y2=int(box["y2"])
        ),
    )
