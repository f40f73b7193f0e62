"""Command line entry points: batch feature extraction and the detection proxy.

Exit codes: 0 success, 2 bad arguments or config, 3 runtime failure.
"""

import argparse
import sys

from .backbones import SPECS
from .extract import ExtractError, extract_batch


def _build_parser():
    p = argparse.ArgumentParser(
        prog="lvm-extract",
        description="Extract image features with a frozen vision backbone, "
        "or front a detection service.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="run a backbone over a directory of PNGs")
    ex.add_argument("--images", required=True, help="directory of .png inputs")
    ex.add_argument(
        "--backbone", required=True, choices=sorted(SPECS), help="backbone name"
    )
    ex.add_argument(
        "--out",
        required=True,
        help="output base path; writes <base>.fvec and <base>.sources.jsonl",
    )
    ex.add_argument("--batch-size", type=int, default=8)
    ex.add_argument(
        "--init",
        choices=("seeded", "pretrained"),
        default="seeded",
        help="weight init; 'pretrained' needs downloadable torchvision weights",
    )

    sv = sub.add_parser("serve", help="serve the detection protocol, forwarding upstream")
    sv.add_argument("--port", type=int, required=True)
    sv.add_argument("--upstream", required=True, help="base URL of the upstream detector")
    sv.add_argument("--host", default="127.0.0.1")
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "extract":
        if args.batch_size < 1:
            print("error: --batch-size must be at least 1", file=sys.stderr)
            return 2
        try:
            n = extract_batch(
                args.images,
                args.backbone,
                args.out,
                batch_size=args.batch_size,
                init=args.init,
            )
        except ExtractError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        print(f"extracted {n} feature vectors with {args.backbone}")
        return 0
    if args.command == "serve":
        from .service import serve_detection

        serve_detection(args.port, args.upstream, host=args.host)
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
