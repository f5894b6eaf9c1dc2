"""Command-line exporter: TorchScript feature extractor + image tree -> HFV1."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, ExportManifest, export_features


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feature-export",
        description="export image embeddings from a folder-per-class tree",
    )
    parser.add_argument("--model", required=True,
                        help="TorchScript module whose forward output is the "
                             "embedding (export classifiers with the head "
                             "removed)")
    parser.add_argument("--images", required=True,
                        help="directory with one subfolder per class")
    parser.add_argument("--out", required=True, help="HFV1 output path")
    parser.add_argument("--image-size", type=int, default=224,
                        dest="image_size")
    parser.add_argument("--batch-size", type=int, default=32,
                        dest="batch_size")
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    manifest = ExportManifest(
        model_path=args.model,
        image_dir=args.images,
        output_path=args.out,
        image_size=args.image_size,
        batch_size=args.batch_size,
        device=args.device,
    )
    try:
        report = export_features(manifest)
    except (ExportError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"exported {report.exported} records of dim {report.dim} "
          f"across {len(report.label_names)} classes to {args.out}")
    if report.skipped:
        print(f"skipped {len(report.skipped)} unreadable images:",
              file=sys.stderr)
        for path in report.skipped:
            print(f"  {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
