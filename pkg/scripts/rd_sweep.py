"""Rate-distortion sweep: encode one image at several ratios, report quality.

Writes a CSV with requested ratio, primitive count, file size, achieved
ratio, PSNR, SSIM, and MS-SSIM (empty when the image is too small).
"""

import argparse
import sys
import time

from splatzip.codec import MODE_QUANT, achieved_ratio, decode_file, encode_file
from splatzip.core import EncoderConfig, compute_budget
from splatzip.imgio import load_png
from splatzip.metrics import evaluate
from splatzip.rasterizer import render
from splatzip.sampling import initialize
from splatzip.train import train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("image")
    ap.add_argument("--ratios", default="20,50,100,200")
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")
    args = ap.parse_args()

    image = load_png(args.image)
    rows = ["cr,n_g,file_bytes,achieved_ratio,psnr,ssim,ms_ssim,train_s"]
    for cr in (float(v) for v in args.ratios.split(",")):
        budget = compute_budget(image.height, image.width, cr, 0.7)
        config = EncoderConfig(seed=args.seed, iterations=args.iters)
        t0 = time.perf_counter()
        splats = initialize(image, budget, config)
        splats, _ = train(image, splats, config)
        dt = time.perf_counter() - t0
        blob = encode_file(splats, image.height, image.width, MODE_QUANT)
        recovered, h, w = decode_file(blob)
        report = evaluate(render(recovered, h, w).image, image.data)
        ms = "" if report.ms_ssim is None else f"{report.ms_ssim:.6f}"
        rows.append(
            f"{cr:g},{budget.n_g},{len(blob)},"
            f"{achieved_ratio(len(blob), h, w):.2f},"
            f"{report.psnr:.4f},{report.ssim:.6f},{ms},{dt:.1f}"
        )
        print(rows[-1], file=sys.stderr)

    out = "\n".join(rows) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        print(out, end="")


if __name__ == "__main__":
    main()
