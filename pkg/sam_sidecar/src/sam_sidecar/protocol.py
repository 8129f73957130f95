"""Wire-protocol request parsing and response building.

The protocol (shared with the maskboost client):

    POST /segment
      {"episode_id": str,
       "image": {"uri": str} | {"png_b64": str},
       "prompts": {"mode": "point"|"box"|"mixed",
                   "point": {"x": num, "y": num, "label": int} | null,
                   "box": {"x1": int, "y1": int, "x2": int, "y2": int} | null}}
    -> {"mask_png_b64": str, "score": num|null, "width": int, "height": int}

Box coordinates on the wire are inclusive pixel indices. Parsing keeps
them as received; the conversion to the model's continuous-corner
convention happens when the service hands prompts to the predictor.

Errors split by kind: a body that doesn't match the schema is a
BadRequest (HTTP 400); a body that matches but whose image can't be
turned into pixels is an UndecodableImage (HTTP 422).
"""

from __future__ import annotations

import base64
import binascii
import io
import json
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

MODES = ("point", "box", "mixed")


class BadRequest(Exception):
    """Request body violates the wire schema."""


class UndecodableImage(Exception):
    """Schema-valid image field that does not decode to pixels."""


@dataclass(frozen=True)
class PointPrompt:
    x: float
    y: float
    label: int


@dataclass(frozen=True)
class BoxPrompt:
    x1: int
    y1: int
    x2: int
    y2: int


@dataclass(frozen=True)
class ImageSource:
    kind: str  # "uri" | "png_b64"
    value: str


@dataclass(frozen=True)
class SegmentRequest:
    episode_id: str
    image: ImageSource
    mode: str
    point: Optional[PointPrompt]
    box: Optional[BoxPrompt]


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise BadRequest(message)


def _parse_point(payload) -> PointPrompt:
    _require(isinstance(payload, dict), "prompts.point must be an object")
    try:
        x, y = payload["x"], payload["y"]
    except KeyError as exc:
        raise BadRequest(f"prompts.point missing key {exc}") from exc
    _require(
        isinstance(x, (int, float)) and not isinstance(x, bool),
        "point.x must be a number",
    )
    _require(
        isinstance(y, (int, float)) and not isinstance(y, bool),
        "point.y must be a number",
    )
    label = payload.get("label", 1)
    _require(
        isinstance(label, int) and not isinstance(label, bool),
        "point.label must be an integer",
    )
    return PointPrompt(float(x), float(y), label)


def _parse_box(payload) -> BoxPrompt:
    _require(isinstance(payload, dict), "prompts.box must be an object")
    coords = []
    for key in ("x1", "y1", "x2", "y2"):
        try:
            value = payload[key]
        except KeyError as exc:
            raise BadRequest(f"prompts.box missing key {exc}") from exc
        _require(
            isinstance(value, int) and not isinstance(value, bool),
            f"box.{key} must be an integer",
        )
        coords.append(value)
    box = BoxPrompt(*coords)
    _require(
        box.x1 <= box.x2 and box.y1 <= box.y2,
        f"inverted box ({box.x1},{box.y1},{box.x2},{box.y2})",
    )
    return box


def _parse_image(payload) -> ImageSource:
    _require(isinstance(payload, dict), "image must be an object")
    keys = set(payload)
    _require(
        keys in ({"uri"}, {"png_b64"}),
        "image must carry exactly one of 'uri' / 'png_b64'",
    )
    (kind,) = keys
    value = payload[kind]
    _require(isinstance(value, str) and value != "", f"image.{kind} must be a nonempty string")
    return ImageSource(kind, value)


def parse_segment_request(body: bytes) -> SegmentRequest:
    try:
        payload = json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BadRequest(f"body is not JSON: {exc}") from exc
    _require(isinstance(payload, dict), "body must be a JSON object")

    episode_id = payload.get("episode_id")
    _require(isinstance(episode_id, str), "episode_id must be a string")
    _require("image" in payload, "missing 'image'")
    image = _parse_image(payload["image"])

    prompts = payload.get("prompts")
    _require(isinstance(prompts, dict), "missing 'prompts' object")
    mode = prompts.get("mode")
    _require(mode in MODES, f"prompts.mode must be one of {MODES}")

    raw_point = prompts.get("point")
    raw_box = prompts.get("box")
    if mode in ("point", "mixed"):
        _require(raw_point is not None, f"mode '{mode}' requires a point")
    else:
        _require(raw_point is None, "mode 'box' forbids a point")
    if mode in ("box", "mixed"):
        _require(raw_box is not None, f"mode '{mode}' requires a box")
    else:
        _require(raw_box is None, "mode 'point' forbids a box")

    point = _parse_point(raw_point) if raw_point is not None else None
    box = _parse_box(raw_box) if raw_box is not None else None
    return SegmentRequest(episode_id, image, mode, point, box)


def decode_image(source: ImageSource) -> np.ndarray:
    """Image source -> RGB uint8 array of shape (height, width, 3)."""
    if source.kind == "png_b64":
        try:
            raw = base64.b64decode(source.value, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise UndecodableImage(f"image.png_b64 is not base64: {exc}") from exc
        stream = io.BytesIO(raw)
    else:
        try:
            stream = open(source.value, "rb")
        except OSError as exc:
            raise UndecodableImage(f"cannot open image uri: {exc}") from exc
    try:
        with stream:
            with Image.open(stream) as im:
                return np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise UndecodableImage(f"cannot decode image: {exc}") from exc


def encode_mask_png(mask: np.ndarray) -> str:
    """Boolean (H, W) array -> base64 of an 8-bit gray PNG with values 0/255."""
    raster = np.where(mask, 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(raster, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def build_segment_response(mask: np.ndarray, score: Optional[float]) -> dict:
    height, width = mask.shape
    return {
        "mask_png_b64": encode_mask_png(mask),
        "score": None if score is None else float(score),
        "width": int(width),
        "height": int(height),
    }


def predictor_box(box: BoxPrompt) -> Tuple[float, float, float, float]:
    """Inclusive wire box -> continuous-corner XYXY handed to predictors."""
    return (float(box.x1), float(box.y1), float(box.x2 + 1), float(box.y2 + 1))
