import argparse
import sys

from .errors import ExtractorError
from .extract import ExtractionSpec, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnchain-extract",
        description="Dump a vision transformer's attention to the "
                    "attnchain manifest format.")
    parser.add_argument("--model", required=True, help="hub id or local path")
    parser.add_argument("--image", required=True, help="input image file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--resize", type=int, default=None,
                        help="square input resolution override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExtractionSpec(model_id=args.model, image_path=args.image,
                          output_dir=args.out, resize=args.resize)
    try:
        manifest = extract(spec)
    except (ExtractorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(str(manifest))
    return 0


if __name__ == "__main__":
    sys.exit(main())
