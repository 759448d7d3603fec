"""Per-step convergence histories for smart vs random initialization.

Writes a long-format CSV (variant, step, loss, psnr) suitable for plotting
loss curves; PSNR appears on its snapshot steps and is empty elsewhere.
"""

import argparse

from splatzip.core import EncoderConfig, compute_budget
from splatzip.imgio import load_png
from splatzip.sampling import initialize_variant
from splatzip.train import train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("image")
    ap.add_argument("--cr", type=float, default=200)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("-o", "--output", default="convergence.csv")
    args = ap.parse_args()

    image = load_png(args.image)
    budget = compute_budget(image.height, image.width, args.cr, 0.7)
    config = EncoderConfig(seed=args.seed, iterations=args.iters)

    rows = ["variant,step,loss,psnr"]
    for variant in ("full", "random"):
        splats = initialize_variant(image, budget, config, variant)
        _, state = train(image, splats, config)
        psnrs = dict(state.psnr_history)
        for step, loss in enumerate(state.loss_history):
            p = f"{psnrs[step]:.4f}" if step in psnrs else ""
            rows.append(f"{variant},{step},{loss:.8f},{p}")
        print(f"{variant}: final loss {state.loss_history[-1]:.6f}, "
              f"final psnr {psnrs[max(psnrs)]:.2f} dB")

    with open(args.output, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
