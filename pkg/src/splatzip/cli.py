"""Command-line front end: encode, decode, eval, and ablate.

Exit codes: 0 success, 1 usage error, 2 input error (unreadable or
mismatched inputs, corrupt files, infeasible budgets), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import codec, metrics
from .core import (
    Budget,
    BudgetTooSmallError,
    EncoderConfig,
    GaussianSet,
    ImageBuffer,
    SplatError,
    compute_budget,
)
from .imgio import UnreadableImageError, load_png, save_png
from .rasterizer import render
from .sampling import initialize_variant, sample_points
from .train import NonFiniteLossError, train

ABLATION_LADDER = ("random", "means", "scales", "full")
MS_SSIM_FALLBACK = "fallback"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; this package reserves 2 for
    # input errors, so reroute through our own exception
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunManifest:
    """Human-readable record of one encode run."""

    input: str
    output: str
    config: dict
    budget: dict
    timings: dict
    quality: dict
    nominal_ratio: float
    achieved_ratio: float
    file_bytes: int

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _config_from_args(args) -> EncoderConfig:
    return EncoderConfig(
        lambda_m=args.lambda_m,
        lambda_g=args.lambda_g,
        lambda_l=args.lambda_l,
        k_neighbors=args.k,
        tile_size=args.tile_size,
        iterations=args.iters,
        seed=args.seed,
    )


def _add_encode_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cr", type=float, required=True, help="target compression ratio")
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--lambda-m", type=float, default=0.9, dest="lambda_m")
    p.add_argument("--lambda-g", type=float, default=0.7, dest="lambda_g")
    p.add_argument("--lambda-l", type=float, default=0.9, dest="lambda_l")
    p.add_argument("--tile-size", type=int, default=1024, dest="tile_size")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--verbose", action="store_true", help="step,loss,psnr progress")
    p.add_argument("--loss-csv", default=None, help="write per-step loss history CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splatzip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="fit an image and write a .ssplat file")
    enc.add_argument("image")
    enc.add_argument("-o", "--output", required=True)
    _add_encode_options(enc)
    enc.add_argument("--init", choices=("smart", "random"), default="smart")
    enc.add_argument("--mode", choices=("float", "quant"), default="quant")
    enc.add_argument("--dump-weights", default=None, dest="dump_weights",
                     help="write the sampling-weight map as a grayscale PNG")
    enc.add_argument("--dump-samples", default=None, dest="dump_samples",
                     help="write sample positions over the source as a PNG")

    dec = sub.add_parser("decode", help="render a .ssplat file to PNG")
    dec.add_argument("splat")
    dec.add_argument("-o", "--output", required=True)
    dec.add_argument("--scale", type=float, default=1.0,
                     help="render at scaled resolution (continuous canvas)")
    dec.add_argument("--threads", type=int, default=None)

    ev = sub.add_parser("eval", help="quality metrics between two images")
    ev.add_argument("original")
    ev.add_argument("reconstruction")
    ev.add_argument("--csv", action="store_true")
    ev.add_argument("--threads", type=int, default=None)

    abl = sub.add_parser("ablate", help="initialization ablation table")
    abl.add_argument("image")
    _add_encode_options(abl)
    abl.add_argument("--variants", default=",".join(ABLATION_LADDER))
    abl.add_argument("--csv", action="store_true")
    return parser


def _dump_weight_map(image: ImageBuffer, config: EncoderConfig, path: str) -> None:
    from PIL import Image as PILImage

    from .features import (
        color_variance,
        gradient_magnitude,
        plan_tiles,
        sampling_weights,
    )

    canvas = np.zeros((image.height, image.width))
    plan = plan_tiles(image.height, image.width, config.tile_size, 1, 0)
    for (r, c), (th, tw) in zip(plan.origins, plan.extents):
        tile = image.data[r : r + th, c : c + tw]
        wmap = sampling_weights(
            gradient_magnitude(tile),
            color_variance(tile, config.variance_window),
            config.lambda_m,
        )
        canvas[r : r + th, c : c + tw] = wmap.weights
    u8 = np.round(np.clip(canvas, 0.0, 1.0) * 255.0).astype(np.uint8)
    PILImage.fromarray(u8, mode="L").save(path)


def _dump_sample_map(image: ImageBuffer, budget: Budget, config: EncoderConfig,
                     path: str) -> None:
    pts = sample_points(image.data, budget, config)
    canvas = image.data.copy()
    colors = {"variational": (1.0, 0.15, 0.15), "uniform": (0.1, 0.9, 1.0)}
    for p in pts:
        x, y = p.position
        r = min(image.height - 1, max(0, int(y)))
        c = min(image.width - 1, max(0, int(x)))
        canvas[r, c] = colors[p.origin_kind]
    save_png(canvas, path)


def _final_quality(image: ImageBuffer, set_: GaussianSet) -> dict:
    out = render(set_, image.height, image.width)
    report = metrics.evaluate(out.image, image.data)
    return {"psnr": report.psnr, "ssim": report.ssim, "ms_ssim": report.ms_ssim}


def cmd_encode(args) -> int:
    _set_threads(args.threads)
    image = load_png(args.image)
    budget = compute_budget(image.height, image.width, args.cr, args.lambda_g)
    config = _config_from_args(args)

    if args.dump_weights:
        _dump_weight_map(image, config, args.dump_weights)
    if args.dump_samples:
        _dump_sample_map(image, budget, config, args.dump_samples)

    t0 = time.perf_counter()
    variant = "full" if args.init == "smart" else "random"
    set_ = initialize_variant(image, budget, config, variant)
    t_init = time.perf_counter() - t0

    t0 = time.perf_counter()
    set_, state = train(image, set_, config, verbose=args.verbose)
    t_train = time.perf_counter() - t0

    t0 = time.perf_counter()
    mode = codec.MODE_FLOAT if args.mode == "float" else codec.MODE_QUANT
    blob = codec.encode_file(set_, image.height, image.width, mode=mode)
    with open(args.output, "wb") as fh:
        fh.write(blob)
    t_encode = time.perf_counter() - t0

    if args.loss_csv:
        with open(args.loss_csv, "w") as fh:
            fh.write("step,loss\n")
            for i, loss in enumerate(state.loss_history):
                fh.write(f"{i},{loss:.10g}\n")

    manifest = RunManifest(
        input=args.image,
        output=args.output,
        config=asdict(config),
        budget=asdict(budget),
        timings={"init_s": t_init, "train_s": t_train, "encode_s": t_encode},
        quality=_final_quality(image, set_),
        nominal_ratio=codec.nominal_ratio(image.height, image.width, budget.n_g),
        achieved_ratio=codec.achieved_ratio(len(blob), image.height, image.width),
        file_bytes=len(blob),
    )
    manifest.write(args.output + ".manifest.json")
    print(
        f"encoded {args.image} -> {args.output}: {budget.n_g} primitives, "
        f"{len(blob)} bytes, nominal ratio {manifest.nominal_ratio:.1f}, "
        f"achieved ratio {manifest.achieved_ratio:.1f}, "
        f"psnr {manifest.quality['psnr']:.2f} dB"
    )
    return 0


def _scaled_set(set_: GaussianSet, scale: float) -> GaussianSet:
    out = set_.copy()
    out.means *= scale
    out.log_scales += math.log(scale)
    return out


def cmd_decode(args) -> int:
    _set_threads(args.threads)
    if args.scale <= 0:
        raise UsageError("--scale must be positive")
    with open(args.splat, "rb") as fh:
        data = fh.read()
    set_, height, width = codec.decode_file(data)
    if args.scale != 1.0:
        set_ = _scaled_set(set_, args.scale)
        height = max(1, round(height * args.scale))
        width = max(1, round(width * args.scale))
    t0 = time.perf_counter()
    out = render(set_, height, width)
    dt = time.perf_counter() - t0
    save_png(out.image, args.output)
    fps = 1.0 / dt if dt > 0 else float("inf")
    print(
        f"decoded {args.splat} -> {args.output} ({width}x{height}), "
        f"{dt:.3f} s ({fps:.1f} fps)"
    )
    return 0


def cmd_eval(args) -> int:
    _set_threads(args.threads)
    a = load_png(args.original)
    b = load_png(args.reconstruction)
    if a.data.shape != b.data.shape:
        raise SplatError(
            f"image dimensions differ: {a.data.shape} vs {b.data.shape}"
        )
    report = metrics.evaluate(a, b)
    ms = MS_SSIM_FALLBACK if report.ms_ssim is None else f"{report.ms_ssim:.6f}"
    if args.csv:
        print("psnr,ssim,ms_ssim")
        print(f"{report.psnr:.4f},{report.ssim:.6f},{ms}")
    else:
        print(f"PSNR: {report.psnr:.4f} dB")
        print(f"SSIM: {report.ssim:.6f}")
        if report.ms_ssim is None:
            print(f"MS-SSIM: {MS_SSIM_FALLBACK} (image too small; use SSIM)")
        else:
            print(f"MS-SSIM: {report.ms_ssim:.6f}")
    return 0


def cmd_ablate(args) -> int:
    _set_threads(args.threads)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in ABLATION_LADDER:
            raise UsageError(
                f"unknown variant {v!r}; choose from {', '.join(ABLATION_LADDER)}"
            )
    image = load_png(args.image)
    budget = compute_budget(image.height, image.width, args.cr, args.lambda_g)
    config = _config_from_args(args)

    rows = []
    for variant in variants:
        set_ = initialize_variant(image, budget, config, variant)
        set_, _ = train(image, set_, config, verbose=args.verbose)
        quality = _final_quality(image, set_)
        rows.append((variant, quality["psnr"], quality["ssim"]))

    if args.csv:
        print("variant,psnr,ssim")
        for name, p, s in rows:
            print(f"{name},{p:.4f},{s:.6f}")
    else:
        print(f"{'variant':<10} {'psnr_db':>9} {'ssim':>8}")
        for name, p, s in rows:
            print(f"{name:<10} {p:>9.3f} {s:>8.4f}")
    return 0


_COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonFiniteLossError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except BudgetTooSmallError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (SplatError, UnreadableImageError, FileNotFoundError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
