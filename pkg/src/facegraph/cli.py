"""Command-line interface.

Exit codes: 0 success, 1 usage or config error, 2 over-recognition present
(a manual-correction signal), 3 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PipelineConfig
from .detection import FaceTemplate
from .errors import (
    AlignmentError,
    BankMismatch,
    DataError,
    EmptyDataset,
    FaceGraphError,
    FormatMismatch,
    InvalidConfig,
    InvalidInput,
)
from .pipeline import (
    cmd_detect,
    cmd_enroll,
    cmd_evaluate,
    cmd_recognize,
    cmd_train_skin,
    ingest_dataset,
)
from .segmentation import SkinModel

USAGE_ERRORS = (InvalidConfig, InvalidInput, FormatMismatch)
DATA_ERRORS = (DataError, EmptyDataset, AlignmentError, BankMismatch, OSError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; keep 1 for usage
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="facegraph", description=__doc__)
    parser.add_argument("--config", metavar="FILE", help="pipeline config JSON")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and info")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-skin", help="build the skin-chroma model from a dataset")
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="output skin model JSON")

    p = sub.add_parser("enroll", help="build per-person bunch graphs from annotated images")
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="output models directory")
    p.add_argument("--restrict-frequency", action="store_true",
                   help="use only the pi/4 frequency band")

    p = sub.add_parser("detect", help="detect faces in one image")
    p.add_argument("image")
    p.add_argument("--skin-model", required=True)
    p.add_argument("--template", required=True, help="template PNG (JSON sidecar optional)")
    p.add_argument("--out", required=True, help="output prefix for .json and .png")

    p = sub.add_parser("recognize", help="recognize faces in one image")
    p.add_argument("image")
    p.add_argument("--models", required=True, help="bunch-graph directory")
    p.add_argument("--skin-model", default=None)
    p.add_argument("--template", default=None)
    p.add_argument("--pre-cropped", action="store_true",
                   help="treat the image as an already-cropped face")
    p.add_argument("--out", required=True, help="output outcome JSON")

    p = sub.add_parser("evaluate", help="run recognition over a labeled dataset")
    p.add_argument("dataset")
    p.add_argument("--models", required=True)
    p.add_argument("--skin-model", default=None)
    p.add_argument("--template", default=None)
    p.add_argument("--pre-cropped", action="store_true")
    p.add_argument("--out", default=None, help="report JSON path")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
        if args.command == "train-skin":
            cmd_train_skin(ingest_dataset(args.dataset), args.out, config)
            return 0
        if args.command == "enroll":
            cmd_enroll(ingest_dataset(args.dataset), args.out, config,
                       restrict_frequency=args.restrict_frequency or None)
            return 0
        if args.command == "detect":
            candidates = cmd_detect(
                args.image,
                SkinModel.load(args.skin_model),
                FaceTemplate.load(args.template),
                args.out,
                config,
            )
            print(f"{len(candidates)} candidate(s) written to {args.out}.json")
            return 0
        if args.command == "recognize":
            skin = SkinModel.load(args.skin_model) if args.skin_model else None
            template = FaceTemplate.load(args.template) if args.template else None
            code = cmd_recognize(
                args.image, args.models, args.out, config,
                pre_cropped=args.pre_cropped, skin_model=skin, template=template,
            )
            print(f"outcomes written to {args.out}")
            return code
        if args.command == "evaluate":
            skin = SkinModel.load(args.skin_model) if args.skin_model else None
            template = FaceTemplate.load(args.template) if args.template else None
            cmd_evaluate(
                ingest_dataset(args.dataset), args.models, config,
                pre_cropped=args.pre_cropped, skin_model=skin, template=template,
                out_path=args.out,
            )
            return 0
        parser.error(f"unknown command {args.command}")
    except USAGE_ERRORS as exc:
        print(f"facegraph: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"facegraph: {exc}", file=sys.stderr)
        return 3
    except FaceGraphError as exc:
        print(f"facegraph: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
