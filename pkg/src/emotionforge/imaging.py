"""Pixel-level primitives.

An image is a 2-D ``numpy`` array of ``uint8``, shape ``(height, width)``,
row-major. All math that lands back in uint8 rounds half away from zero
(every quantity in the pixel pipeline is non-negative, so that is simply
``floor(x + 0.5)``) — pinned so goldens are stable.

The only mandatory raster format is binary PGM (P5, maxval 255).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    MalformedHeaderError,
    NonPositiveFactorError,
    TruncatedPayloadError,
    UnsupportedMaxvalError,
    ZeroDimensionError,
)

BLUR_KINDS = ("gaussian", "average", "median")


def round_half_up(x: np.ndarray) -> np.ndarray:
    """Round-half-away-from-zero for non-negative values."""
    return np.floor(x + 0.5)


def _to_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(round_half_up(x), 0, 255).astype(np.uint8)


# --- PGM codec ---------------------------------------------------------------

def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens, skipping '#' comment
    lines. Returns the tokens and the offset just past the final separator."""
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] != ord("\n"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i] != ord("#"):
            i += 1
        if i == start:
            raise MalformedHeaderError("unexpected end of header")
        tokens.append(data[start:i])
    if i >= n or not data[i : i + 1].isspace():
        raise MalformedHeaderError("missing separator after maxval")
    return tokens, i + 1  # exactly one whitespace byte ends the header


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a binary PGM (P5, maxval 255) byte sequence."""
    tokens, payload_at = _header_tokens(data, 4)
    if tokens[0] != b"P5":
        raise MalformedHeaderError(f"bad magic {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedHeaderError("non-numeric header field") from None
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"maxval {maxval}, only 255 supported")
    need = width * height
    payload = data[payload_at : payload_at + need]
    if len(payload) < need:
        raise TruncatedPayloadError(f"payload {len(payload)} bytes, need {need}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(img: np.ndarray) -> bytes:
    """Encode to canonical binary PGM: ``P5\\n<w> <h>\\n255\\n`` + payload."""
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img.tobytes()


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_pgm(f.read())


def save_pgm(path, img: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(write_pgm(img))


# --- point ops ----------------------------------------------------------------

def to_grayscale(r: int, g: int, b: int) -> int:
    """BT.601 luma of one RGB triple."""
    y = 0.299 * r + 0.587 * g + 0.114 * b
    return int(min(max(math.floor(y + 0.5), 0), 255))


def rgb_to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of an (h, w, 3) uint8 array."""
    y = rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
    return _to_u8(y)


def adjust_brightness(img: np.ndarray, factor: float) -> np.ndarray:
    """Multiply every pixel by ``factor``, round, clamp to [0, 255]."""
    if not factor > 0:
        raise NonPositiveFactorError(f"factor {factor} must be > 0")
    return _to_u8(img.astype(np.float64) * factor)


# --- geometric ops ------------------------------------------------------------

def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment.

    Source coordinate for destination index d is ``(d + 0.5) * src/dst - 0.5``,
    clamped to the valid range.
    """
    if out_w <= 0 or out_h <= 0:
        raise ZeroDimensionError(f"target {out_w}x{out_h}")
    h, w = img.shape
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[None, :]
    fy = (sy - y0)[:, None]
    p = img.astype(np.float64)
    top = p[np.ix_(y0, x0)] * (1 - fx) + p[np.ix_(y0, x1)] * fx
    bot = p[np.ix_(y1, x0)] * (1 - fx) + p[np.ix_(y1, x1)] * fx
    return _to_u8(top * (1 - fy) + bot * fy)


def warp_rotate(img: np.ndarray, angle: float, center: tuple[float, float]) -> np.ndarray:
    """Rotate by ``angle`` (radians, image coordinates, y down) about ``center``.

    Output keeps the input dimensions. Each destination pixel samples the
    source at the inverse-rotated coordinate with bilinear interpolation;
    samples falling outside the source rectangle are 0.
    """
    h, w = img.shape
    cx, cy = center
    dx, dy = np.meshgrid(np.arange(w, dtype=np.float64) - cx,
                         np.arange(h, dtype=np.float64) - cy)
    ca, sa = math.cos(-angle), math.sin(-angle)
    sx = cx + ca * dx - sa * dy
    sy = cy + sa * dx + ca * dy
    # tolerance keeps boundary membership from flipping on 1e-16 trig noise
    tol = 1e-9
    inside = (sx >= -tol) & (sx <= w - 1 + tol) & (sy >= -tol) & (sy <= h - 1 + tol)
    sx = np.clip(sx, 0, w - 1)
    sy = np.clip(sy, 0, h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    p = img.astype(np.float64)
    val = (p[y0, x0] * (1 - fx) * (1 - fy) + p[y0, x1] * fx * (1 - fy)
           + p[y1, x0] * (1 - fx) * fy + p[y1, x1] * fx * fy)
    return np.where(inside, _to_u8(val), np.uint8(0))


# --- blur kernels -------------------------------------------------------------

def _gaussian_kernel_5x5(sigma: float = 1.5) -> np.ndarray:
    d = np.arange(-2, 3, dtype=np.float64)
    g1 = np.exp(-(d ** 2) / (2 * sigma ** 2))
    k = np.outer(g1, g1)
    return k / k.sum()

_GAUSSIAN_5X5 = _gaussian_kernel_5x5()


def _windows_5x5(img: np.ndarray) -> np.ndarray:
    """(h, w, 25) view of the 5x5 neighbourhoods, edges replicated."""
    padded = np.pad(img, 2, mode="edge").astype(np.float64)
    h, w = img.shape
    stack = [padded[i : i + h, j : j + w] for i in range(5) for j in range(5)]
    return np.stack(stack, axis=-1)


def blur(img: np.ndarray, kind: str) -> np.ndarray:
    """5x5 blur with clamp-to-border edge handling.

    gaussian: sigma 1.5, kernel normalized to sum 1; average: uniform 1/25;
    median: 13th order statistic of the 25 window values.
    """
    win = _windows_5x5(img)
    if kind == "gaussian":
        out = win @ _GAUSSIAN_5X5.ravel()
    elif kind == "average":
        out = win.mean(axis=-1)
    elif kind == "median":
        out = np.partition(win, 12, axis=-1)[..., 12]
    else:
        raise ValueError(f"unknown blur kind {kind!r}")
    return _to_u8(out)
