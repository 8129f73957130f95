import base64
import json

import numpy as np
import pytest

from sam_sidecar.protocol import (
    BadRequest,
    ImageSource,
    UndecodableImage,
    build_segment_response,
    decode_image,
    parse_segment_request,
    predictor_box,
)

from .conftest import png_b64, segment_body


def parse(payload) -> object:
    return parse_segment_request(json.dumps(payload).encode())


def test_parse_full_mixed_request():
    req = parse(segment_body(mode="mixed"))
    assert req.episode_id == "ep_test"
    assert req.image.kind == "png_b64"
    assert req.mode == "mixed"
    assert (req.point.x, req.point.y, req.point.label) == (4.5, 3.0, 1)
    assert (req.box.x1, req.box.y1, req.box.x2, req.box.y2) == (2, 1, 10, 8)


def test_parse_point_mode_leaves_box_none():
    req = parse(segment_body(mode="point"))
    assert req.point is not None and req.box is None


def test_label_defaults_to_one():
    body = segment_body(mode="point", point={"x": 1, "y": 2})
    assert parse(body).point.label == 1


@pytest.mark.parametrize(
    "mangle",
    [
        lambda b: b.pop("episode_id"),
        lambda b: b.pop("image"),
        lambda b: b.pop("prompts"),
        lambda b: b.__setitem__("episode_id", 7),
        lambda b: b["prompts"].__setitem__("mode", "triangle"),
        lambda b: b["prompts"].__setitem__("box", None),           # box mode needs one
        lambda b: b["prompts"].__setitem__("point", {"x": 1, "y": 2}),  # box mode forbids one
        lambda b: b["prompts"]["box"].pop("x2"),
        lambda b: b["prompts"]["box"].__setitem__("x1", 1.5),
        lambda b: b["prompts"]["box"].update(x1=9, x2=3),          # inverted
        lambda b: b.__setitem__("image", {}),
        lambda b: b.__setitem__("image", {"uri": "a", "png_b64": "b"}),
        lambda b: b.__setitem__("image", {"png_b64": ""}),
    ],
)
def test_schema_violations_are_bad_requests(mangle):
    body = segment_body(mode="box")
    mangle(body)
    with pytest.raises(BadRequest):
        parse(body)


def test_point_mode_forbids_box():
    body = segment_body(mode="point")
    body["prompts"]["box"] = {"x1": 0, "y1": 0, "x2": 1, "y2": 1}
    with pytest.raises(BadRequest):
        parse(body)


def test_non_json_body_is_bad_request():
    with pytest.raises(BadRequest):
        parse_segment_request(b"not json {")


def test_decode_b64_roundtrip():
    image = decode_image(ImageSource("png_b64", png_b64(7, 5)))
    assert image.shape == (5, 7, 3) and image.dtype == np.uint8


def test_decode_uri(tmp_path):
    path = tmp_path / "q.png"
    path.write_bytes(base64.b64decode(png_b64(4, 6)))
    assert decode_image(ImageSource("uri", str(path))).shape == (6, 4, 3)


@pytest.mark.parametrize(
    "source",
    [
        ImageSource("png_b64", "@@@not-base64@@@"),
        ImageSource("png_b64", base64.b64encode(b"not a png").decode()),
        ImageSource("uri", "/nonexistent/query.png"),
    ],
)
def test_undecodable_images(source):
    with pytest.raises(UndecodableImage):
        decode_image(source)


def test_response_encoding_is_0_255_gray():
    mask = np.zeros((3, 4), dtype=bool)
    mask[1, 2] = True
    payload = build_segment_response(mask, 0.5)
    assert (payload["width"], payload["height"]) == (4, 3)
    raw = base64.b64decode(payload["mask_png_b64"])
    assert raw[:8] == b"\x89PNG\r\n\x1a\n"
    from PIL import Image
    import io

    with Image.open(io.BytesIO(raw)) as im:
        arr = np.asarray(im)
    assert set(np.unique(arr)) <= {0, 255}
    assert arr[1, 2] == 255 and arr.sum() == 255


def test_null_score_passes_through():
    assert build_segment_response(np.ones((1, 1), dtype=bool), None)["score"] is None


def test_inclusive_box_gains_one_pixel_at_far_corner():
    from sam_sidecar.protocol import BoxPrompt

    assert predictor_box(BoxPrompt(2, 1, 10, 8)) == (2.0, 1.0, 11.0, 9.0)
    assert predictor_box(BoxPrompt(0, 0, 0, 0)) == (0.0, 0.0, 1.0, 1.0)
