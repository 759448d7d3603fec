"""Write a synthetic natural-like test image as PNG."""

import argparse

from splatzip.imgio import save_png
from splatzip.synth import natural_image


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("output")
    ap.add_argument("--size", type=int, default=512, help="square side in pixels")
    ap.add_argument("--height", type=int, default=None)
    ap.add_argument("--width", type=int, default=None)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    h = args.height or args.size
    w = args.width or args.size
    save_png(natural_image(h, w, seed=args.seed), args.output)
    print(f"wrote {w}x{h} test image to {args.output}")


if __name__ == "__main__":
    main()
