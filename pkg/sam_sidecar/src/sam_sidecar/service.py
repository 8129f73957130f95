"""FastAPI application and server lifecycle.

The model loads in a background thread so the server can come up and
answer /health (with 503) while the checkpoint is still reading;
/segment also answers 503 until the predictor is ready. Inference is
serialized behind a lock — SAM holds per-image state (set_image) and
the wire contract promises one mask per request, so concurrency comes
from the client's bounded parallelism, never from racing the model.
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from sam_sidecar.predictor import (
    MODEL_TYPES,
    Predictor,
    SamCheckpointPredictor,
    infer_model_type,
)
from sam_sidecar.protocol import (
    BadRequest,
    UndecodableImage,
    build_segment_response,
    decode_image,
    parse_segment_request,
    predictor_box,
)

logger = logging.getLogger("sam_sidecar")


@dataclass
class SidecarConfig:
    checkpoint: str
    model_type: str
    device: str = "cuda"
    host: str = "127.0.0.1"
    port: int = 8000
    multimask: bool = True

    def validate(self) -> None:
        if self.model_type not in MODEL_TYPES:
            raise ValueError(
                f"model_type must be one of {MODEL_TYPES}, got {self.model_type!r}"
            )
        path = Path(self.checkpoint)
        if not path.is_file():
            raise ValueError(f"checkpoint not found: {self.checkpoint}")
        named = infer_model_type(path.name)
        if named is not None and named != self.model_type:
            raise ValueError(
                f"checkpoint filename says {named!r} but model_type is "
                f"{self.model_type!r}"
            )


class _ModelState:
    """Loading-state machine shared between the loader thread and handlers."""

    def __init__(self) -> None:
        self.predictor: Optional[Predictor] = None
        self.error: Optional[str] = None
        self.inference_lock = threading.Lock()


def _json_error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(
    loader: Callable[[], Predictor], *, multimask: bool = True
) -> FastAPI:
    """Build the service around any predictor factory.

    `loader` runs once on a background thread at startup; tests inject
    fakes through it, production injects the checkpoint adapter.
    """
    state = _ModelState()

    def load() -> None:
        try:
            state.predictor = loader()
            logger.info("model ready: %s", state.predictor.model_id)
        except Exception as exc:  # surface the cause through /health
            state.error = f"{type(exc).__name__}: {exc}"
            logger.exception("model failed to load")

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        threading.Thread(target=load, daemon=True).start()
        yield

    app = FastAPI(lifespan=lifespan)
    app.state.model = state

    @app.get("/health")
    def health() -> JSONResponse:
        if state.predictor is not None:
            return JSONResponse(
                {"status": "ok", "model_id": state.predictor.model_id}
            )
        if state.error is not None:
            return JSONResponse(
                status_code=503, content={"status": "error", "error": state.error}
            )
        return JSONResponse(status_code=503, content={"status": "loading"})

    @app.post("/segment")
    def segment(request: Request) -> JSONResponse:
        predictor = state.predictor
        if predictor is None:
            message = state.error or "model is loading"
            return _json_error(503, message)
        try:
            parsed = parse_segment_request(request.state.body)
        except BadRequest as exc:
            return _json_error(400, str(exc))
        try:
            image = decode_image(parsed.image)
        except UndecodableImage as exc:
            return _json_error(422, str(exc))

        point = (
            (parsed.point.x, parsed.point.y, parsed.point.label)
            if parsed.point is not None
            else None
        )
        box = predictor_box(parsed.box) if parsed.box is not None else None
        with state.inference_lock:
            masks, scores = predictor.predict(image, point, box, multimask)

        masks = np.asarray(masks)
        if masks.ndim != 3 or len(scores) != masks.shape[0] or masks.shape[0] == 0:
            return _json_error(500, "predictor returned no usable candidates")
        best = int(np.argmax(scores))
        mask = masks[best]
        if mask.dtype != bool:
            mask = mask > 0.5
        if mask.shape != image.shape[:2]:
            return _json_error(
                500,
                f"predictor mask shape {mask.shape} != image shape {image.shape[:2]}",
            )
        return JSONResponse(build_segment_response(mask, scores[best]))

    @app.middleware("http")
    async def _read_body(request: Request, call_next):
        # handlers are sync (threadpool); stash the body while still async
        request.state.body = await request.body()
        return await call_next(request)

    return app


def app_from_config(config: SidecarConfig) -> FastAPI:
    config.validate()

    def loader() -> Predictor:
        logger.info(
            "loading %s from %s on %s",
            config.model_type,
            config.checkpoint,
            config.device,
        )
        return SamCheckpointPredictor(
            config.checkpoint, config.model_type, config.device
        )

    return create_app(loader, multimask=config.multimask)


def serve(config: SidecarConfig) -> None:
    import uvicorn

    uvicorn.run(app_from_config(config), host=config.host, port=config.port)
