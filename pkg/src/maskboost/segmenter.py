"""Promptable-segmenter boundary with interchangeable backends.

The pipeline talks to one `Backend`: a remote HTTP service speaking the
wire protocol below, a directory of precomputed masks, or a
deterministic mock. Query images are never decoded here — they travel by
reference or as opaque bytes, and all model concerns live behind the
protocol.

Wire protocol (HTTP + JSON):
  POST /segment
    {"episode_id": str,
     "image": {"uri": str} | {"png_b64": str},
     "prompts": {"mode": "point"|"box"|"mixed",
                 "point": {"x", "y", "label"} | null,
                 "box": {"x1", "y1", "x2", "y2"} | null}}
  -> {"mask_png_b64": str, "score": number|null, "width": int, "height": int}
  GET /health -> {"status": "ok", "model_id": str}

Box coordinates on the wire are inclusive pixel coordinates.
"""

from __future__ import annotations

import base64
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import requests

from .errors import (
    BackendUnavailable,
    DimensionMismatch,
    MaskBoostError,
    MissingPrecomputed,
    ProtocolError,
)
from .mask import BinaryMask, load_mask
from .prompts import PromptSet, prompt_set_to_dict

logger = logging.getLogger(__name__)

PRECOMPUTED_MANIFEST = "manifest.json"


@dataclass(frozen=True)
class SegmentRequest:
    """One segmentation query: an image by reference plus its prompts.

    width/height declare the query resolution; every backend's response
    mask is checked against them.
    """

    episode_id: str
    prompts: PromptSet
    width: int
    height: int
    image_ref: Optional[str] = None
    image_bytes: Optional[bytes] = None


@dataclass(frozen=True)
class SegmentResponse:
    mask: BinaryMask
    score: Optional[float]
    backend_id: str


# An item outcome inside a batch: a response or the error that request hit.
BatchOutcome = Union[SegmentResponse, MaskBoostError]


def _check_dims(mask: BinaryMask, request: SegmentRequest) -> None:
    if (mask.width, mask.height) != (request.width, request.height):
        raise DimensionMismatch(
            f"episode {request.episode_id}: backend returned "
            f"{mask.width}x{mask.height}, request declared "
            f"{request.width}x{request.height}"
        )


# --- wire codec ---------------------------------------------------------------


def encode_segment_request(request: SegmentRequest) -> dict:
    if (request.image_ref is None) == (request.image_bytes is None):
        raise ValueError(
            f"episode {request.episode_id}: exactly one of image_ref / "
            "image_bytes is required on the wire"
        )
    if request.image_ref is not None:
        image = {"uri": request.image_ref}
    else:
        image = {"png_b64": base64.b64encode(request.image_bytes).decode("ascii")}
    return {
        "episode_id": request.episode_id,
        "image": image,
        "prompts": prompt_set_to_dict(request.prompts),
    }


def canonical_json(payload: dict) -> str:
    """Key-sorted, separator-free JSON; one byte representation per value."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def decode_segment_response(
    payload: dict, request: SegmentRequest, backend_id: str
) -> SegmentResponse:
    try:
        mask_b64 = payload["mask_png_b64"]
        width = int(payload["width"])
        height = int(payload["height"])
        score = payload.get("score")
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed segment response: {exc}") from exc
    try:
        mask = load_mask(base64.b64decode(mask_b64))
    except (MaskBoostError, ValueError) as exc:
        raise ProtocolError(f"response mask does not decode: {exc}") from exc
    if (mask.width, mask.height) != (width, height):
        raise ProtocolError(
            f"response claims {width}x{height} but mask is "
            f"{mask.width}x{mask.height}"
        )
    _check_dims(mask, request)
    return SegmentResponse(
        mask=mask,
        score=None if score is None else float(score),
        backend_id=backend_id,
    )


# --- backends -----------------------------------------------------------------


class Backend:
    """A promptable segmenter. Implementations must be concurrency-safe."""

    backend_id: str = "abstract"

    def segment(self, request: SegmentRequest) -> SegmentResponse:
        raise NotImplementedError


class RemoteBackend(Backend):
    """Client for a wire-protocol service. One retry on transport failure."""

    def __init__(self, base_url: str, timeout: float = 60.0, session=None) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session if session is not None else requests.Session()
        self.backend_id = f"remote:{self.base_url}"

    def _post(self, body: dict) -> requests.Response:
        # Canonical bytes on the wire so a given request has exactly one
        # byte representation (diffable logs, replayable captures).
        raw = canonical_json(body).encode("utf-8")
        last_exc: Optional[Exception] = None
        for attempt in range(2):
            try:
                return self._session.post(
                    f"{self.base_url}/segment",
                    data=raw,
                    headers={"Content-Type": "application/json"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_exc = exc
                if attempt == 0:
                    logger.warning("segment request failed, retrying once: %s", exc)
        raise BackendUnavailable(
            f"{self.base_url} unreachable after retry: {last_exc}"
        ) from last_exc

    def segment(self, request: SegmentRequest) -> SegmentResponse:
        response = self._post(encode_segment_request(request))
        if response.status_code != 200:
            raise ProtocolError(
                f"{self.base_url}/segment returned HTTP {response.status_code}: "
                f"{response.text[:200]}"
            )
        try:
            payload = response.json()
        except ValueError as exc:
            raise ProtocolError(f"response is not JSON: {exc}") from exc
        return decode_segment_response(payload, request, self.backend_id)

    def health(self) -> dict:
        try:
            response = self._session.get(
                f"{self.base_url}/health", timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(f"{self.base_url} health check failed: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"/health returned HTTP {response.status_code}")
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(f"/health response is not JSON: {exc}") from exc


class PrecomputedBackend(Backend):
    """Masks already on disk: <dir>/<episode_id>.png plus a manifest of dims."""

    def __init__(self, directory) -> None:
        from pathlib import Path

        self.directory = Path(directory)
        self.backend_id = f"precomputed:{self.directory}"
        manifest_path = self.directory / PRECOMPUTED_MANIFEST
        if not manifest_path.exists():
            raise MissingPrecomputed(f"no {PRECOMPUTED_MANIFEST} in {self.directory}")
        self._manifest: Dict[str, dict] = json.loads(
            manifest_path.read_text(encoding="utf-8")
        )

    def segment(self, request: SegmentRequest) -> SegmentResponse:
        entry = self._manifest.get(request.episode_id)
        if entry is None:
            raise MissingPrecomputed(
                f"episode {request.episode_id} not in precomputed manifest"
            )
        path = self.directory / f"{request.episode_id}.png"
        if not path.exists():
            raise MissingPrecomputed(f"no precomputed mask file {path}")
        mask = load_mask(path.read_bytes())
        if (mask.width, mask.height) != (int(entry["width"]), int(entry["height"])):
            raise DimensionMismatch(
                f"precomputed mask {path} is {mask.width}x{mask.height}, "
                f"manifest says {entry['width']}x{entry['height']}"
            )
        _check_dims(mask, request)
        return SegmentResponse(mask=mask, score=None, backend_id=self.backend_id)


class MockBackend(Backend):
    """Deterministic fixture-driven backend for tests and dry runs.

    kind 'identity' answers with the fixture mask unchanged (fixtures are
    the original coarse masks); 'gt' answers with ground truth; 'dilate'
    answers with the fixture mask grown by `radius` in Chebyshev
    distance. Pure function of (episode_id, prompts) given the fixtures.
    """

    def __init__(
        self, kind: str, fixtures: Mapping[str, BinaryMask], radius: int = 0
    ) -> None:
        if kind not in ("identity", "gt", "dilate"):
            raise ValueError(f"unknown mock backend kind {kind!r}")
        if kind == "dilate" and radius < 0:
            raise ValueError(f"dilate radius must be nonnegative, got {radius}")
        self.kind = kind
        self.radius = radius
        self._fixtures = dict(fixtures)
        self.backend_id = (
            f"mock:dilate:{radius}" if kind == "dilate" else f"mock:{kind}"
        )

    def segment(self, request: SegmentRequest) -> SegmentResponse:
        mask = self._fixtures.get(request.episode_id)
        if mask is None:
            raise MissingPrecomputed(
                f"mock backend has no fixture for episode {request.episode_id}"
            )
        if self.kind == "dilate":
            mask = dilate_chebyshev(mask, self.radius)
        _check_dims(mask, request)
        return SegmentResponse(mask=mask, score=1.0, backend_id=self.backend_id)


def dilate_chebyshev(mask: BinaryMask, radius: int) -> BinaryMask:
    """Grow the foreground by `radius` pixels in L-infinity distance."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return mask
    arr = mask.data
    h, w = arr.shape
    out = np.zeros_like(arr)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            src = arr[
                max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)
            ]
            out[
                max(0, dy) : h - max(0, -dy), max(0, dx) : w - max(0, -dx)
            ] |= src
    return BinaryMask(out)


def parse_mock_kind(spec: str) -> tuple:
    """'identity' | 'gt' | 'dilate:<r>' -> (kind, radius)."""
    if spec in ("identity", "gt"):
        return spec, 0
    if spec.startswith("dilate:"):
        try:
            radius = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad dilate radius in {spec!r}") from exc
        if radius < 0:
            raise ValueError(f"dilate radius must be nonnegative: {spec!r}")
        return "dilate", radius
    raise ValueError(f"unknown mock backend {spec!r}")


# --- batch --------------------------------------------------------------------


def segment(request: SegmentRequest, backend: Backend) -> SegmentResponse:
    return backend.segment(request)


def segment_batch(
    requests_: Sequence[SegmentRequest],
    backend: Backend,
    parallelism: int = 1,
) -> List[BatchOutcome]:
    """Run a batch with at most `parallelism` requests in flight.

    The result aligns index-by-index with the input; a failed request
    contributes its error instead of aborting the whole batch.
    """
    if parallelism < 1:
        raise ValueError(f"parallelism must be positive, got {parallelism}")
    if not requests_:
        return []

    def one(request: SegmentRequest) -> BatchOutcome:
        try:
            return backend.segment(request)
        except MaskBoostError as exc:
            logger.warning("episode %s failed: %s", request.episode_id, exc)
            return exc

    if parallelism == 1 or len(requests_) == 1:
        return [one(r) for r in requests_]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, requests_))
