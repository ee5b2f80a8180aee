"""Command-line wrapper: meme-extract --manifest manifest.json"""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import ExtractionError, run_extraction
from .manifest import load_manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="meme-extract",
        description="Extract frozen-model features from meme images and "
                    "captions into an MMF1 feature file")
    parser.add_argument("--manifest", required=True,
                        help="extraction manifest (JSON)")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = load_manifest(args.manifest)
        summary = run_extraction(manifest)
    except (ExtractionError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {summary['written']} records "
          f"(skipped {summary['skipped']}) to {summary['output']}; "
          f"dims {summary['dims']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
