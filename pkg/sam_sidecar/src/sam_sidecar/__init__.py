"""HTTP sidecar serving a SAM checkpoint behind the segmenter wire protocol."""

from sam_sidecar.service import SidecarConfig, create_app, serve

__all__ = ["SidecarConfig", "create_app", "serve"]
__version__ = "0.1.0"
