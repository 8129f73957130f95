"""Predictor interface and the SAM checkpoint adapter.

A predictor takes one RGB image plus optional prompts and returns every
candidate mask with its score; the service picks the winner. Prompt
conventions at this boundary:

- point: (x, y) continuous pixel coordinates plus an integer label;
- box: continuous XYXY with EXCLUSIVE far corner (the service converts
  from the wire's inclusive pixel indices before calling);
- returned masks: shape (n_candidates, height, width) at the input
  image's resolution, either boolean or float mask probabilities.

The SAM imports live inside the adapter so the service, CLI, and tests
work on machines without the model stack installed.
"""

from __future__ import annotations

import re
from typing import Optional, Protocol, Sequence, Tuple

import numpy as np

MODEL_TYPES = ("vit_h", "vit_l", "vit_b")


class Predictor(Protocol):
    model_id: str

    def predict(
        self,
        image: np.ndarray,
        point: Optional[Tuple[float, float, int]],
        box: Optional[Tuple[float, float, float, float]],
        multimask: bool,
    ) -> Tuple[np.ndarray, Sequence[float]]:
        """Return (candidate masks, per-candidate scores)."""
        ...


def infer_model_type(checkpoint_path: str) -> Optional[str]:
    """Pull the vit_{h,l,b} token out of an official checkpoint filename."""
    match = re.search(r"vit_[hlb]", str(checkpoint_path))
    return match.group(0) if match else None


class SamCheckpointPredictor:
    """Official SAM predictor loaded from a checkpoint file."""

    def __init__(self, checkpoint: str, model_type: str, device: str = "cuda") -> None:
        if model_type not in MODEL_TYPES:
            raise ValueError(f"model_type must be one of {MODEL_TYPES}, got {model_type!r}")
        from segment_anything import SamPredictor, sam_model_registry

        model = sam_model_registry[model_type](checkpoint=checkpoint)
        model.to(device)
        model.eval()
        self._predictor = SamPredictor(model)
        self.model_id = model_type

    def predict(
        self,
        image: np.ndarray,
        point: Optional[Tuple[float, float, int]],
        box: Optional[Tuple[float, float, float, float]],
        multimask: bool,
    ) -> Tuple[np.ndarray, Sequence[float]]:
        self._predictor.set_image(image)
        point_coords = point_labels = sam_box = None
        if point is not None:
            x, y, label = point
            point_coords = np.array([[x, y]], dtype=np.float64)
            point_labels = np.array([label], dtype=np.int64)
        if box is not None:
            sam_box = np.array(box, dtype=np.float64)
        # masks come back boolean at the original image resolution, i.e.
        # already thresholded at probability 0.5
        masks, scores, _ = self._predictor.predict(
            point_coords=point_coords,
            point_labels=point_labels,
            box=sam_box,
            multimask_output=multimask,
        )
        return masks, [float(s) for s in scores]
