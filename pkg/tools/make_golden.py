#!/usr/bin/env python3
"""Regenerate the checked-in golden fixtures under tests/fixtures/.

Everything here is computed by brute force on explicit pixel sets —
plain Python loops, no imports from the package under test — so the
fixtures are an independent cross-check of the whole pipeline: mask
codecs, prompt derivation, selection, and every metric.

Running it in place rewrites:
  tests/fixtures/golden/   20-episode 64x64 end-to-end fixture set
                           (gt/, fss/, sam/, episodes.jsonl, manifest.json,
                           golden_report.json)
  tests/fixtures/wire/     request/response JSON for the wire protocol
"""

from __future__ import annotations

import base64
import io
import json
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from PIL import Image

SIDE = 64
FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

Pixels = Set[Tuple[int, int]]


# --- mask primitives (brute force on pixel sets) -------------------------------


def disk(cx: int, cy: int, r: int) -> Pixels:
    return {
        (x, y)
        for y in range(SIDE)
        for x in range(SIDE)
        if (x - cx) ** 2 + (y - cy) ** 2 <= r * r
    }


def ring(cx: int, cy: int, r_outer: int, r_inner: int) -> Pixels:
    return disk(cx, cy, r_outer) - disk(cx, cy, r_inner)


def rect(x0: int, y0: int, w: int, h: int) -> Pixels:
    return {
        (x, y)
        for y in range(y0, min(y0 + h, SIDE))
        for x in range(x0, min(x0 + w, SIDE))
    }


def lshape(x0: int, y0: int, arm: int, thick: int) -> Pixels:
    return rect(x0, y0, thick, arm) | rect(x0, y0 + arm - thick, arm, thick)


def translate(fg: Pixels, dx: int, dy: int) -> Pixels:
    return {
        (x + dx, y + dy)
        for x, y in fg
        if 0 <= x + dx < SIDE and 0 <= y + dy < SIDE
    }


def dilate(fg: Pixels, radius: int) -> Pixels:
    out = set()
    for x, y in fg:
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                nx, ny = x + dx, y + dy
                if 0 <= nx < SIDE and 0 <= ny < SIDE:
                    out.add((nx, ny))
    return out


def save_png(path: Path, fg: Pixels, side: int = SIDE) -> None:
    im = Image.new("L", (side, side), 0)
    for x, y in fg:
        im.putpixel((x, y), 255)
    path.parent.mkdir(parents=True, exist_ok=True)
    im.save(path, format="PNG")


def png_bytes(fg: Pixels, side: int) -> bytes:
    im = Image.new("L", (side, side), 0)
    for x, y in fg:
        im.putpixel((x, y), 255)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


# --- brute-force measures --------------------------------------------------------


def iou(a: Pixels, b: Pixels) -> float:
    union = len(a | b)
    if union == 0:
        return 1.0
    return len(a & b) / union


def fg_counts(pred: Pixels, gt: Pixels) -> Tuple[int, int]:
    return len(pred & gt), len(pred | gt)


def bg_counts(pred: Pixels, gt: Pixels) -> Tuple[int, int]:
    total = SIDE * SIDE
    return total - len(pred | gt), total - len(pred & gt)


def moments(fg: Pixels) -> Tuple[int, int, int]:
    m00 = m10 = m01 = 0
    for x, y in fg:
        m00 += 1
        m10 += x
        m01 += y
    return m00, m10, m01


def bbox(fg: Pixels) -> Tuple[int, int, int, int]:
    xs = [x for x, _ in fg]
    ys = [y for _, y in fg]
    return min(xs), min(ys), max(xs), max(ys)


# --- the episode table --------------------------------------------------------------
# 20 episodes, two classes. sam=None marks an episode deliberately absent from
# the precomputed directory (backend error path); an empty fss set never
# queries the backend at all (empty-foreground path).


def episode_table() -> List[dict]:
    eps: List[dict] = []

    def add(fss: Pixels, gt: Pixels, sam: Optional[Pixels], class_id: int) -> None:
        eps.append(
            {
                "id": f"golden_{len(eps):02d}",
                "class_id": class_id,
                "fss": fss,
                "gt": gt,
                "sam": sam,
            }
        )

    # 00: empty coarse mask -> fallback (no prompt derivable).
    add(set(), disk(20, 20, 8), disk(20, 20, 8), 1)
    # 01: coarse == gt, sam == gt too (iou 1 everywhere).
    add(disk(32, 32, 10), disk(32, 32, 10), disk(32, 32, 10), 1)
    # 02: sam slightly sharper than the coarse disk (high mutual iou, improves).
    add(dilate(disk(30, 30, 9), 2), disk(30, 30, 9), disk(30, 30, 9), 1)
    # 03: sam degrades: coarse equals gt, sam slightly shifted but overlapping.
    add(disk(40, 24, 8), disk(40, 24, 8), translate(disk(40, 24, 8), 2, 0), 1)
    # 04: sam disjoint from coarse (low mutual iou -> kept coarse at high T).
    add(rect(4, 4, 10, 10), rect(4, 4, 12, 12), rect(40, 40, 10, 10), 1)
    # 05: ring-shaped gt; coarse solid disk; sam the exact ring.
    add(disk(16, 44, 10), ring(16, 44, 10, 5), ring(16, 44, 10, 5), 1)
    # 06: two-component coarse; sam merges into the right blob.
    add(rect(6, 6, 6, 6) | rect(50, 50, 6, 6), rect(50, 50, 8, 8), rect(50, 50, 8, 8), 1)
    # 07: sam misses entirely (backend hallucination), moderate overlap.
    add(rect(20, 20, 12, 12), rect(20, 20, 12, 12), rect(26, 26, 12, 12), 1)
    # 08: L-shaped gt, boxy coarse, sam recovers the L.
    add(rect(8, 30, 12, 12), lshape(8, 30, 12, 4), lshape(8, 30, 12, 4), 1)
    # 09: absent from the precomputed directory -> backend error fallback.
    add(rect(44, 8, 9, 9), rect(45, 9, 9, 9), None, 1)

    # class 2
    # 10: coarse == gt == sam.
    add(rect(10, 10, 14, 8), rect(10, 10, 14, 8), rect(10, 10, 14, 8), 2)
    # 11: coarse 1px off; sam exact.
    add(translate(rect(30, 40, 10, 10), 1, 1), rect(30, 40, 10, 10), rect(30, 40, 10, 10), 2)
    # 12: sam grows the coarse mask past gt (degrades mildly).
    add(rect(18, 48, 10, 8), rect(18, 48, 10, 8), dilate(rect(18, 48, 10, 8), 2), 2)
    # 13: sam equals coarse exactly (iou 1, no metric change).
    add(disk(50, 20, 7), disk(50, 20, 6), disk(50, 20, 7), 2)
    # 14: disjoint sam, tiny coarse.
    add(rect(2, 2, 5, 5), rect(2, 2, 6, 6), rect(30, 6, 5, 5), 2)
    # 15: ring coarse, solid gt, sam solid (improves).
    add(ring(40, 44, 9, 4), disk(40, 44, 9), disk(40, 44, 9), 2)
    # 16: mutual iou in (0.5, 0.75): selected only at low thresholds.
    add(rect(12, 20, 12, 12), rect(12, 20, 12, 12), rect(12, 24, 12, 12), 2)
    # 17: mutual iou just above 0.75: flips between T=0.75 and T=1.
    add(rect(34, 10, 10, 16), rect(34, 10, 10, 16), rect(34, 12, 10, 16), 2)
    # 18: coarse way off, sam exact on gt (low mutual iou: rescue not taken).
    add(rect(52, 36, 8, 8), disk(14, 14, 7), disk(14, 14, 7), 2)
    # 19: absent from the precomputed directory -> backend error fallback.
    add(disk(26, 54, 6), disk(27, 54, 6), None, 2)
    return eps


THRESHOLDS = [0.0, 0.25, 0.5, 0.75, 1.0]
RUN_THRESHOLD = 0.75

SRC_FSS = "FSS"
SRC_SAM = "SAM"
SRC_EMPTY = "FSS_fallback_empty"
SRC_ERROR = "FSS_fallback_error"
SOURCES = [SRC_FSS, SRC_SAM, SRC_EMPTY, SRC_ERROR]
SITS = ["improved", "degraded", "unchanged"]


def select(ep: dict, threshold: float) -> Tuple[Pixels, str, Optional[float]]:
    if not ep["fss"]:
        return ep["fss"], SRC_EMPTY, None
    if ep["sam"] is None:
        return ep["fss"], SRC_ERROR, None
    mutual = iou(ep["fss"], ep["sam"])
    if mutual > threshold:
        return ep["sam"], SRC_SAM, mutual
    return ep["fss"], SRC_FSS, mutual


def metric_block(eps: List[dict], chosen: List[Pixels]) -> dict:
    by_class_i: Dict[int, int] = {}
    by_class_u: Dict[int, int] = {}
    fg_i = fg_u = bg_i = bg_u = 0
    for ep, pred in zip(eps, chosen):
        i, u = fg_counts(pred, ep["gt"])
        bi, bu = bg_counts(pred, ep["gt"])
        by_class_i[ep["class_id"]] = by_class_i.get(ep["class_id"], 0) + i
        by_class_u[ep["class_id"]] = by_class_u.get(ep["class_id"], 0) + u
        fg_i += i
        fg_u += u
        bg_i += bi
        bg_u += bu
    per_class = {
        str(c): by_class_i[c] / by_class_u[c] for c in sorted(by_class_i)
    }
    values = [per_class[str(c)] for c in sorted(by_class_i)]
    return {
        "miou": sum(values) / len(values),
        "fb_miou": (fg_i / fg_u + bg_i / bg_u) / 2.0,
        "per_class_iou": per_class,
    }


def evaluate(eps: List[dict], threshold: float) -> dict:
    chosen: List[Pixels] = []
    sources: List[str] = []
    sit_counts = {s: 0 for s in SITS}
    sit_i = {s: 0 for s in SITS}
    sit_u = {s: 0 for s in SITS}
    src_counts = {s: 0 for s in SOURCES}
    src_i = {s: 0 for s in SOURCES}
    src_u = {s: 0 for s in SOURCES}
    for ep in eps:
        pick, source, _mutual = select(ep, threshold)
        chosen.append(pick)
        sources.append(source)
        label = "unchanged"
        if source == SRC_SAM:
            gain = iou(ep["sam"], ep["gt"]) - iou(ep["fss"], ep["gt"])
            if gain > 0:
                label = "improved"
            elif gain < 0:
                label = "degraded"
        i, u = fg_counts(pick, ep["gt"])
        sit_counts[label] += 1
        sit_i[label] += i
        sit_u[label] += u
        src_counts[source] += 1
        src_i[source] += i
        src_u[source] += u
    total_i = sum(sit_i.values())
    total_u = sum(sit_u.values())
    return {
        "episodes": len(eps),
        "classes": sorted({ep["class_id"] for ep in eps}),
        "base": metric_block(eps, [ep["fss"] for ep in eps]),
        "final": metric_block(eps, chosen),
        "situations": {
            "counts": sit_counts,
            "pooled_fg_iou": {
                s: (sit_i[s] / sit_u[s] if sit_u[s] else None) for s in SITS
            },
            "group_iou": total_i / total_u,
        },
        "sources": {
            "counts": src_counts,
            "pooled_fg_iou": {
                s: (src_i[s] / src_u[s] if src_u[s] else None) for s in SOURCES
            },
        },
        "fallbacks": {"empty": src_counts[SRC_EMPTY], "error": src_counts[SRC_ERROR]},
        "sam_selected": src_counts[SRC_SAM],
    }


def write_golden_set() -> None:
    root = FIXTURES / "golden"
    eps = episode_table()

    # mask files
    for ep in eps:
        save_png(root / "gt" / f"{ep['id']}.png", ep["gt"])
        save_png(root / "fss" / f"{ep['id']}.png", ep["fss"])
    sam_manifest = {}
    for ep in eps:
        if ep["sam"] is not None:
            save_png(root / "sam" / f"{ep['id']}.png", ep["sam"])
            sam_manifest[ep["id"]] = {"width": SIDE, "height": SIDE}
    (root / "sam" / "manifest.json").write_text(
        json.dumps(sam_manifest, indent=2, sort_keys=True) + "\n"
    )

    # dataset manifest (for validate-manifest and completeness)
    manifest = {
        "name": "golden",
        "class_count": 8,
        "split_scheme": "contiguous",
        "entries": [
            {
                "image_ref": f"images/{ep['id']}.jpg",
                "gt_mask_ref": f"gt/{ep['id']}.png",
                "class_id": ep["class_id"],
            }
            for ep in eps
        ],
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )

    # explicit episode list consumed by the pipeline
    with open(root / "episodes.jsonl", "w") as fh:
        for n, ep in enumerate(eps):
            support = eps[(n + 1) % len(eps)]
            record = {
                "id": ep["id"],
                "fold": 0,
                "class_id": ep["class_id"],
                "k": 1,
                "query": {
                    "image_ref": f"images/{ep['id']}.jpg",
                    "gt_mask_ref": f"gt/{ep['id']}.png",
                },
                "supports": [
                    {
                        "image_ref": f"images/{support['id']}.jpg",
                        "mask_ref": f"gt/{support['id']}.png",
                    }
                ],
                "fss_mask_ref": f"fss/{ep['id']}.png",
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    report = {
        "threshold": RUN_THRESHOLD,
        "prompt_mode": "box",
        "run": evaluate(eps, RUN_THRESHOLD),
        "sweep": [
            {"threshold": t, **evaluate(eps, t)} for t in THRESHOLDS
        ],
    }
    (root / "golden_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    counts = report["run"]["sources"]["counts"]
    print(f"golden: {len(eps)} episodes -> {root}")
    print(f"  run@{RUN_THRESHOLD}: sources {counts}")
    print(f"  sweep sam_selected: {[r['sam_selected'] for r in report['sweep']]}")


def write_wire_fixtures() -> None:
    root = FIXTURES / "wire"
    root.mkdir(parents=True, exist_ok=True)

    side = 10
    prompt_pixels = {(0, 0), (9, 9)}  # two components, whole-foreground summary
    m00, m10, m01 = moments(prompt_pixels)
    x1, y1, x2, y2 = bbox(prompt_pixels)
    request = {
        "episode_id": "wire_001",
        "image": {"uri": "images/wire_001.jpg"},
        "prompts": {
            "mode": "mixed",
            "point": {"x": m10 / m00, "y": m01 / m00, "label": 1},
            "box": {"x1": x1, "y1": y1, "x2": x2, "y2": y2},
        },
    }
    canonical = json.dumps(request, sort_keys=True, separators=(",", ":"))
    (root / "request.json").write_bytes(canonical.encode("utf-8"))

    response_pixels = {
        (x, y) for y in range(side) for x in range(side) if abs(x - y) <= 1
    }
    response = {
        "mask_png_b64": base64.b64encode(png_bytes(response_pixels, side)).decode(),
        "score": 0.875,
        "width": side,
        "height": side,
    }
    (root / "response.json").write_bytes(
        json.dumps(response, sort_keys=True, separators=(",", ":")).encode()
    )

    # A self-consistent response at the WRONG resolution for the request.
    wrong_side = 16
    wrong_pixels = {(x, y) for y in range(4) for x in range(4)}
    wrong = {
        "mask_png_b64": base64.b64encode(png_bytes(wrong_pixels, wrong_side)).decode(),
        "score": 0.5,
        "width": wrong_side,
        "height": wrong_side,
    }
    (root / "response_wrong_size.json").write_bytes(
        json.dumps(wrong, sort_keys=True, separators=(",", ":")).encode()
    )

    meta = {
        "episode_id": "wire_001",
        "image_uri": "images/wire_001.jpg",
        "declared_width": side,
        "declared_height": side,
        "prompt_mask_pixels": sorted(prompt_pixels),
        "response_mask_pixels": sorted(response_pixels),
        "score": 0.875,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wire: request/response fixtures -> {root}")


if __name__ == "__main__":
    write_golden_set()
    write_wire_fixtures()
