from __future__ import annotations

import base64
import io
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from sam_sidecar.service import create_app


class FakePredictor:
    """Deterministic stand-in recording every call it receives.

    Returns three candidates whose scores make the middle one the
    winner; its mask is a filled square so tests can recognize it.
    """

    def __init__(self, model_id: str = "fake-model", mask_dtype=bool) -> None:
        self.model_id = model_id
        self.mask_dtype = mask_dtype
        self.calls = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()

    def predict(self, image, point, box, multimask):
        with self._lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            self.calls.append(
                {
                    "shape": image.shape,
                    "point": point,
                    "box": box,
                    "multimask": multimask,
                }
            )
            h, w = image.shape[:2]
            masks = np.zeros((3, h, w), dtype=bool)
            masks[0, 0, 0] = True
            masks[1, : h // 2 + 1, : w // 2 + 1] = True  # the winner
            masks[2, -1, -1] = True
            if self.mask_dtype is not bool:
                # float candidates: probability 0.7 inside, 0.3 outside
                masks = np.where(masks, 0.7, 0.3).astype(self.mask_dtype)
            return masks, [0.2, 0.9, 0.5]
        finally:
            with self._lock:
                self.in_flight -= 1


def png_b64(width: int, height: int) -> str:
    rng = np.random.default_rng(width * 1000 + height)
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def segment_body(
    width=16, height=12, mode="box", point=None, box=None, image=None
) -> dict:
    if mode in ("point", "mixed") and point is None:
        point = {"x": 4.5, "y": 3.0, "label": 1}
    if mode in ("box", "mixed") and box is None:
        box = {"x1": 2, "y1": 1, "x2": 10, "y2": 8}
    return {
        "episode_id": "ep_test",
        "image": image if image is not None else {"png_b64": png_b64(width, height)},
        "prompts": {"mode": mode, "point": point, "box": box},
    }


def decode_mask(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["mask_png_b64"])
    with Image.open(io.BytesIO(raw)) as im:
        return np.asarray(im)


@pytest.fixture()
def fake() -> FakePredictor:
    return FakePredictor()


@pytest.fixture()
def client(fake):
    app = create_app(lambda: fake)
    with TestClient(app) as c:
        # startup loads on a thread; the fake is instant but don't race it
        for _ in range(100):
            if c.get("/health").status_code == 200:
                break
        yield c
