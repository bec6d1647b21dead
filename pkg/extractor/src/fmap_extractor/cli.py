"""Command line entry point: extract --image-dir D --out-dir O."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backbone import DEFAULT_MODEL
from .extract import ExtractConfig, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Convert raster images into .fmap dense feature files",
    )
    parser.add_argument("--image-dir", required=True)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--model", default=DEFAULT_MODEL)
    parser.add_argument("--size", type=int, default=476)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    image_dir = Path(args.image_dir)
    if not image_dir.is_dir():
        print(f"error: image directory not found: {image_dir}", file=sys.stderr)
        return 2
    try:
        config = ExtractConfig(
            image_dir=image_dir,
            out_dir=Path(args.out_dir),
            model_name=args.model,
            image_size=args.size,
        )
        count = extract(config)
    except Exception as e:  # noqa: BLE001 - model load or config failure is fatal
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {count} feature maps to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
