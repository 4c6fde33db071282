"""serkit-export command line: checkpoint conversion and fixture generation."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, ExportSpec, export
from .fixture import FIXTURE_SEED, make_fixture


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="serkit-export",
        description="Convert Wav2Vec2/HuBERT checkpoints into serkit tensor archives.",
    )
    parser.add_argument("--model", help="checkpoint id or local directory")
    parser.add_argument("--out", required=True, help="archive path (or fixture directory with --fixture)")
    parser.add_argument(
        "--normalize-input",
        choices=("auto", "yes", "no"),
        default="auto",
        help="whether the consumer should standardize waveforms (auto reads the preprocessor config)",
    )
    parser.add_argument("--sample-rate", type=int, default=16000)
    parser.add_argument("--fixture", action="store_true", help="emit the tiny parity fixture set instead")
    parser.add_argument("--seed", type=int, default=FIXTURE_SEED)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.fixture:
            meta = make_fixture(args.out, seed=args.seed)
            print(f"fixtures in {args.out}: {meta['frames']}x{meta['dim']} reference, seed {meta['seed']}")
            return 0
        if not args.model:
            print("error: --model is required unless --fixture is given", file=sys.stderr)
            return 2
        normalize = {"auto": None, "yes": True, "no": False}[args.normalize_input]
        manifest = export(
            ExportSpec(
                source=args.model,
                target=args.out,
                normalize_input=normalize,
                expected_sample_rate=args.sample_rate,
            )
        )
        print(
            f"wrote {args.out}: {manifest['model_family']} d={manifest['hidden_dim']} "
            f"layers={manifest['num_layers']} normalize_input={manifest['normalize_input']}"
        )
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
