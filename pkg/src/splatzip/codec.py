"""The .ssplat container: serialized Gaussian sets plus ratio accounting.

Layout (all little-endian; see FORMAT.md for the byte-exact description):

    header, 32 bytes:
        magic   4s   "SSPL"
        version u8   1
        mode    u8   0 = float32, 1 = quantized
        reserved u16 0
        height  u32
        width   u32
        count   u32
        q_lo    f32  log-scale quantization range (0 in float mode)
        q_hi    f32
        pad     4 bytes of zeros

    float32 payload: count * 8 * f32, per primitive
        (mean_x, mean_y, log_s_x, log_s_y, theta, r, g, b)

    quantized payload: count * 10 bytes, per primitive
        mean_x, mean_y   u16  fraction of width/height (x / 65536)
        log_s_x, log_s_y u8   uniform over [q_lo, q_hi]
        theta            u8   fraction of 2*pi
        r, g, b          u8   fraction of 1
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .core import GaussianSet, SplatError
from .rasterizer import SCALE_FLOOR

MAGIC = b"SSPL"
VERSION = 1
_HEADER = struct.Struct("<4sBBHIIIff4x")
HEADER_SIZE = _HEADER.size  # 32

MODE_FLOAT = "float32"
MODE_QUANT = "quantized"
_MODE_CODES = {MODE_FLOAT: 0, MODE_QUANT: 1}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}

_QUANT_DTYPE = np.dtype(
    [
        ("mx", "<u2"),
        ("my", "<u2"),
        ("lsx", "u1"),
        ("lsy", "u1"),
        ("theta", "u1"),
        ("r", "u1"),
        ("g", "u1"),
        ("b", "u1"),
    ]
)

TWO_PI = 2.0 * math.pi


class BadMagicError(SplatError):
    pass


class UnsupportedVersionError(SplatError):
    pass


class TruncatedPayloadError(SplatError):
    pass


def _log_scale_range(height: int, width: int, count: int) -> tuple[float, float]:
    # from the renderer's scale floor up to 8x the 3-sigma base scale
    s_base = math.sqrt(height * width / (math.pi * count)) / 3.0
    lo = math.log(SCALE_FLOOR)
    hi = math.log(3.0 * s_base * 8.0)
    return lo, max(hi, lo + 1e-6)


def encode_file(
    set_: GaussianSet, height: int, width: int, mode: str = MODE_FLOAT
) -> bytes:
    """Serialize a GaussianSet; float mode is lossless at float32 precision."""
    if set_.count < 1:
        raise ValueError("refusing to encode an empty GaussianSet")
    if mode not in _MODE_CODES:
        raise ValueError(f"unknown mode {mode!r}")
    n = set_.count
    q_lo = q_hi = 0.0
    if mode == MODE_FLOAT:
        payload = np.empty((n, 8), dtype="<f4")
        payload[:, 0:2] = set_.means
        payload[:, 2:4] = set_.log_scales
        payload[:, 4] = set_.thetas
        payload[:, 5:8] = set_.colors
        body = payload.tobytes()
    else:
        q_lo, q_hi = _log_scale_range(height, width, n)
        rec = np.empty(n, dtype=_QUANT_DTYPE)
        fx = np.clip(set_.means[:, 0] / width, 0.0, 65535.0 / 65536.0)
        fy = np.clip(set_.means[:, 1] / height, 0.0, 65535.0 / 65536.0)
        rec["mx"] = np.round(fx * 65536.0).astype(np.uint16)
        rec["my"] = np.round(fy * 65536.0).astype(np.uint16)
        span = q_hi - q_lo
        for name, col in (("lsx", 0), ("lsy", 1)):
            ls = np.clip(set_.log_scales[:, col], q_lo, q_hi)
            rec[name] = np.round((ls - q_lo) / span * 255.0).astype(np.uint8)
        frac = np.mod(set_.thetas, TWO_PI) / TWO_PI
        rec["theta"] = (np.round(frac * 256.0).astype(np.int64) % 256).astype(np.uint8)
        for name, col in (("r", 0), ("g", 1), ("b", 2)):
            rec[name] = np.round(
                np.clip(set_.colors[:, col], 0.0, 1.0) * 255.0
            ).astype(np.uint8)
        body = rec.tobytes()
    header = _HEADER.pack(
        MAGIC, VERSION, _MODE_CODES[mode], 0, height, width, n, q_lo, q_hi
    )
    return header + body


def decode_file(data: bytes) -> tuple[GaussianSet, int, int]:
    """Parse a .ssplat byte sequence back into a GaussianSet and its canvas."""
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(
            f"file too short for header: {len(data)} < {HEADER_SIZE}"
        )
    magic, version, mode_code, _, height, width, count, q_lo, q_hi = _HEADER.unpack(
        data[:HEADER_SIZE]
    )
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if mode_code not in _MODE_NAMES:
        raise SplatError(f"unknown mode code {mode_code}")
    mode = _MODE_NAMES[mode_code]
    body = data[HEADER_SIZE:]
    if mode == MODE_FLOAT:
        expected = count * 32
        if len(body) < expected:
            raise TruncatedPayloadError(
                f"payload holds {len(body)} bytes, expected {expected}"
            )
        arr = np.frombuffer(body[:expected], dtype="<f4").reshape(count, 8)
        arr = arr.astype(np.float64)
        set_ = GaussianSet(
            means=arr[:, 0:2], log_scales=arr[:, 2:4],
            thetas=arr[:, 4], colors=arr[:, 5:8],
        )
    else:
        expected = count * _QUANT_DTYPE.itemsize
        if len(body) < expected:
            raise TruncatedPayloadError(
                f"payload holds {len(body)} bytes, expected {expected}"
            )
        rec = np.frombuffer(body[:expected], dtype=_QUANT_DTYPE)
        means = np.column_stack(
            [
                rec["mx"].astype(np.float64) / 65536.0 * width,
                rec["my"].astype(np.float64) / 65536.0 * height,
            ]
        )
        span = q_hi - q_lo
        log_scales = np.column_stack(
            [
                q_lo + rec["lsx"].astype(np.float64) / 255.0 * span,
                q_lo + rec["lsy"].astype(np.float64) / 255.0 * span,
            ]
        )
        thetas = rec["theta"].astype(np.float64) / 256.0 * TWO_PI
        colors = np.column_stack(
            [rec[c].astype(np.float64) / 255.0 for c in ("r", "g", "b")]
        )
        set_ = GaussianSet(
            means=means, log_scales=log_scales, thetas=thetas, colors=colors
        )
    return set_, height, width


def achieved_ratio(file_bytes: int, height: int, width: int) -> float:
    """Compression ratio against the raw 3-bytes-per-pixel baseline."""
    if file_bytes <= 0:
        raise ValueError("file size must be positive")
    return 3.0 * height * width / file_bytes


def nominal_ratio(height: int, width: int, n_g: int) -> float:
    """The ratio the primitive budget nominally corresponds to: 3HW / (7 n_g)."""
    return 3.0 * height * width / (7.0 * n_g)
