"""Export CLI: video in, VAEB embeddings plus label manifest out."""
from __future__ import annotations

import argparse
import sys

from .export import ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vaexport", description=__doc__)
    parser.add_argument("input", help="video file to decode")
    parser.add_argument("--fps-sample", type=float, default=1.0,
                        help="frames per second kept after resampling (default 1.0)")
    parser.add_argument("--encoder", default="gridpool", choices=("gridpool", "vit-b16"))
    parser.add_argument("--second-encoder", choices=("gridpool", "vit-b16"),
                        help="optional second stream written to <out>.alt.vaeb")
    parser.add_argument("--grid", type=int, default=14, help="patch grid side (gridpool)")
    parser.add_argument("--channels", type=int, default=16, help="embedding channels (gridpool)")
    parser.add_argument("--weights", help="local checkpoint for vit-b16")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--annotations", help="JSON with intervals/categories for the manifest")
    parser.add_argument("--out", required=True, help="output prefix for .vaeb and .labels.json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        video_path=args.input,
        out_prefix=args.out,
        fps_sample=args.fps_sample,
        encoder_name=args.encoder,
        grid=args.grid,
        channels=args.channels,
        weights=args.weights,
        seed=args.seed,
        annotations=args.annotations,
        second_encoder=args.second_encoder,
    )
    try:
        written = export(job)
    except FileNotFoundError as exc:
        print(f"vaexport: io error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"vaexport: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written['vaeb']} (T={written['frames']}, N={written['patches']}, "
          f"C={written['channels']}, fps={written['fps']:g}) and {written['manifest']}")
    return 0


def entry() -> None:
    sys.exit(main())
