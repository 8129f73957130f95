"""Training-free post-processing that boosts few-shot segmentation masks.

A coarse predicted mask is turned into point/box prompts, a promptable
segmenter is queried with them, and the sharper of the two masks is kept
based on their mutual overlap.
"""

from .errors import MaskBoostError
from .mask import BinaryMask, RawMoments, iou, load_mask, raw_moments, save_mask

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "MaskBoostError",
    "RawMoments",
    "iou",
    "load_mask",
    "raw_moments",
    "save_mask",
    "__version__",
]
