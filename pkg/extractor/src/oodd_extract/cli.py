"""Command line front end.

One subcommand, `extract`.  Passing --crops N (N >= 1) runs the
multi-view crop pipeline; leaving it off extracts one plain feature row
per image.  Exit codes: 0 success, 1 domain error, 2 usage error.
"""

import argparse
import sys

from .crops import CropGeometry
from .errors import ExtractError
from .extract import ExtractionJob, extract_crops, extract_plain


def _pair(text, what):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"{what} wants 'lo,hi', got {text!r}")
    return float(parts[0]), float(parts[1])


def _triple(text, what):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"{what} wants three comma-separated values")
    return tuple(float(p) for p in parts)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="oodd-extract",
        description="Extract classifier features into the detector's binary formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("extract", help="run one extraction job")
    ex.add_argument("--dataset", required=True,
                    help="cifar10|cifar100|mnist|svhn, folder:<path>, or a folder name under --data-root")
    ex.add_argument("--split", required=True, help="dataset split, e.g. train or test")
    ex.add_argument("--ckpt", required=True, help="classifier checkpoint path")
    ex.add_argument("--out-dir", required=True, help="directory for the output files")
    ex.add_argument("--crops", type=int, default=None,
                    help="views per image; omit for plain one-row-per-image extraction")
    ex.add_argument("--data-root", default="data", help="root holding named datasets (default data)")
    ex.add_argument("--batch-size", type=int, default=256, help="inference batch size (default 256)")
    ex.add_argument("--seed", type=int, default=0, help="crop geometry seed (default 0)")
    ex.add_argument("--scale", type=lambda t: _pair(t, "--scale"), default=(0.3, 1.0),
                    help="crop area fraction range lo,hi (default 0.3,1.0)")
    ex.add_argument("--ratio", type=lambda t: _pair(t, "--ratio"), default=(0.75, 4.0 / 3.0),
                    help="crop aspect ratio range lo,hi (default 0.75,1.3333)")
    ex.add_argument("--size", type=int, default=32, help="network input side (default 32)")
    ex.add_argument("--mean", type=lambda t: _triple(t, "--mean"), default=None,
                    help="channel means for input normalization, e.g. 0.5071,0.4865,0.4409")
    ex.add_argument("--std", type=lambda t: _triple(t, "--std"), default=None,
                    help="channel stds for input normalization")
    ex.add_argument("--out-name", default=None,
                    help="output file stem (default <dataset>_<split>)")
    return parser


def parse_and_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if (args.mean is None) != (args.std is None):
        print("error: extract: --mean and --std must be given together", file=sys.stderr)
        return 1
    try:
        geometry = CropGeometry(
            scale_min=args.scale[0], scale_max=args.scale[1],
            ratio_min=args.ratio[0], ratio_max=args.ratio[1], size=args.size,
        )
        job = ExtractionJob(
            dataset=args.dataset, split=args.split, checkpoint=args.ckpt,
            crops=args.crops if args.crops is not None else 4,
            geometry=geometry, out_dir=args.out_dir, batch_size=args.batch_size,
            seed=args.seed, data_root=args.data_root,
            normalize=(args.mean, args.std) if args.mean is not None else None,
            out_name=args.out_name,
        )
        if args.crops is None:
            paths = extract_plain(job)
        else:
            paths = extract_crops(job)
    except ExtractError as exc:
        print(f"error: extract: {exc}", file=sys.stderr)
        return 1
    for role, path in sorted(paths.items()):
        print(f"{role}: {path}")
    return 0


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))
