"""Initialization ablation: the four-variant ladder on one image.

Thin wrapper over `splatzip ablate` so the table lands next to other
experiment outputs.
"""

import argparse
import sys

from splatzip.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("image")
    ap.add_argument("--cr", type=float, default=200)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--csv", action="store_true")
    args = ap.parse_args()
    argv = ["ablate", args.image, "--cr", str(args.cr),
            "--iters", str(args.iters), "--seed", str(args.seed)]
    if args.csv:
        argv.append("--csv")
    sys.exit(cli_main(argv))


if __name__ == "__main__":
    main()
