"""Conformance checks against shared protocol artifacts and a real model.

The wire-fixture test runs whenever the sibling maskboost checkout is
present (it only reads JSON files — no code is shared). The checkpoint
test needs the real model stack and a downloaded checkpoint; point
SAM_SIDECAR_CHECKPOINT at a .pth file to enable it.
"""

import base64
import json
import os
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sam_sidecar.protocol import parse_segment_request
from sam_sidecar.service import create_app

from .conftest import png_b64, segment_body

WIRE_FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "wire"
CHECKPOINT = os.environ.get("SAM_SIDECAR_CHECKPOINT")


@pytest.mark.skipif(
    not (WIRE_FIXTURES / "request.json").exists(),
    reason="client wire fixtures not present",
)
def test_accepts_the_client_request_fixture():
    raw = (WIRE_FIXTURES / "request.json").read_bytes()
    parsed = parse_segment_request(raw)
    meta = json.loads((WIRE_FIXTURES / "meta.json").read_text())
    assert parsed.episode_id == meta["episode_id"]
    assert parsed.mode == "mixed"
    assert parsed.point is not None and parsed.box is not None


@pytest.mark.skipif(CHECKPOINT is None, reason="SAM_SIDECAR_CHECKPOINT not set")
def test_real_checkpoint_conformance():
    from sam_sidecar.cli import build_parser, config_from_args
    from sam_sidecar.service import app_from_config

    args = build_parser().parse_args(
        ["--checkpoint", CHECKPOINT, "--device", os.environ.get("SAM_SIDECAR_DEVICE", "cpu")]
    )
    app = app_from_config(config_from_args(args))
    with TestClient(app) as client:
        import time

        deadline = time.monotonic() + 600  # ViT-H on CPU takes a while
        while client.get("/health").status_code != 200:
            assert time.monotonic() < deadline, client.get("/health").json()
        health = client.get("/health").json()
        assert health["status"] == "ok" and health["model_id"]

        r = client.post("/segment", json=segment_body(width=64, height=48))
        assert r.status_code == 200
        payload = r.json()
        assert (payload["width"], payload["height"]) == (64, 48)
        raw = base64.b64decode(payload["mask_png_b64"])
        from io import BytesIO

        from PIL import Image

        with Image.open(BytesIO(raw)) as im:
            mask = np.asarray(im)
        assert mask.shape == (48, 64)
        assert set(np.unique(mask)) <= {0, 255}

        assert (
            client.post(
                "/segment",
                content=b"{bad",
                headers={"Content-Type": "application/json"},
            ).status_code
            == 400
        )
