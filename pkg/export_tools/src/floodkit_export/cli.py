"""Command line for the offline export tools."""

import argparse
import sys
from pathlib import Path

from .datasets import CONVERTERS, ConversionJob, convert_dataset


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodkit-export",
        description="Convert flood datasets and network features into floodkit files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("convert", help="dataset tree -> tensors + manifest")
    sp.add_argument("kind", choices=sorted(CONVERTERS))
    sp.add_argument("source_root")
    sp.add_argument("out_dir")
    sp.add_argument("--split", default="train",
                    help="split / location / set directory under the root")

    sp = sub.add_parser("export-features",
                        help="U-Net checkpoint -> <id>.features.imtf per image")
    sp.add_argument("manifest")
    sp.add_argument("checkpoint")
    sp.add_argument("out_dir")

    sp = sub.add_parser("plot-bank", help="2-D embedding scatter of a bank")
    sp.add_argument("bank")
    sp.add_argument("out_png")
    sp.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            job = ConversionJob(
                source_root=Path(args.source_root),
                out_dir=Path(args.out_dir),
                split=args.split,
            )
            manifest = convert_dataset(args.kind, job)
            print(f"wrote {manifest}")
        elif args.command == "export-features":
            from .unet import export_features

            written = export_features(args.checkpoint, args.manifest, args.out_dir)
            print(f"wrote {len(written)} feature tensors -> {args.out_dir}")
        else:
            from .embedding import plot_prototype_embedding

            coords = plot_prototype_embedding(args.bank, args.out_png, seed=args.seed)
            print(f"plotted {len(coords)} prototypes -> {args.out_png}")
        return 0
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
