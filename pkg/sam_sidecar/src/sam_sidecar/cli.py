"""Command line entry point: sam-sidecar --checkpoint ... [--model-type ...]"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from sam_sidecar.predictor import MODEL_TYPES, infer_model_type
from sam_sidecar.service import SidecarConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sam-sidecar",
        description="Serve a SAM checkpoint behind the segmenter wire protocol.",
    )
    parser.add_argument("--checkpoint", required=True, help="path to a .pth checkpoint")
    parser.add_argument(
        "--model-type",
        choices=MODEL_TYPES,
        help="SAM variant; default inferred from the checkpoint filename",
    )
    parser.add_argument("--device", default="cuda", help="torch device (default: cuda)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument(
        "--single-mask",
        action="store_true",
        help="ask the model for one mask instead of scored candidates",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> SidecarConfig:
    model_type = args.model_type or infer_model_type(args.checkpoint)
    if model_type is None:
        raise ValueError(
            "cannot infer --model-type from the checkpoint filename; pass it explicitly"
        )
    return SidecarConfig(
        checkpoint=args.checkpoint,
        model_type=model_type,
        device=args.device,
        host=args.host,
        port=args.port,
        multimask=not args.single_mask,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
