"""Image containers, bilinear resampling, and PNG I/O.

An image is a numpy float32 array of shape (H, W, C) with C in {1, 3} and
values in [0, 1]. Pixel (i, j) sits at continuous coordinates (v=i, u=j);
every resampling operation in this package goes through `bilinear_sample`.
Images are treated as immutable: operations always return new arrays.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image as _PILImage

__all__ = [
    "validate_image",
    "bilinear_sample",
    "resize",
    "luminance",
    "load_png",
    "save_png",
]


def validate_image(img: np.ndarray, name: str = "image", check_range: bool = False) -> np.ndarray:
    """Check the (H, W, C) float32 conventions and return the array unchanged."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"{name}: expected shape (H, W, C) with C in {{1, 3}}, got {arr.shape}")
    if arr.dtype != np.float32:
        raise ValueError(f"{name}: expected float32 pixels, got {arr.dtype}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: non-finite pixel values")
    if check_range and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name}: pixel values outside [0, 1]")
    return arr


def bilinear_sample(img: np.ndarray, u, v, border: str = "zero") -> np.ndarray:
    """Sample `img` at continuous coordinates (u=column, v=row).

    `u` and `v` may be scalars or broadcast-compatible arrays; the result has
    the broadcast shape plus a trailing channel axis (scalars yield a plain
    (C,) vector).

    border="zero": neighbors outside the pixel grid contribute zeros, so a
    sample whose footprint lies fully outside [0, W-1] x [0, H-1] is black.
    border="clamp": coordinates are clamped to the image edge (used by
    `resize` so constant images stay constant).
    """
    img = np.asarray(img)
    h, w, c = img.shape
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    scalar = u.ndim == 0 and v.ndim == 0
    u, v = np.broadcast_arrays(u, v)

    u0f = np.floor(u)
    v0f = np.floor(v)
    fu = (u - u0f)[..., None].astype(np.float32)
    fv = (v - v0f)[..., None].astype(np.float32)
    u0 = u0f.astype(np.int64)
    v0 = v0f.astype(np.int64)

    if border == "clamp":
        def fetch(vi, ui):
            return img[np.clip(vi, 0, h - 1), np.clip(ui, 0, w - 1)]
    elif border == "zero":
        def fetch(vi, ui):
            inside = (vi >= 0) & (vi < h) & (ui >= 0) & (ui < w)
            vals = img[np.clip(vi, 0, h - 1), np.clip(ui, 0, w - 1)]
            return np.where(inside[..., None], vals, np.float32(0.0))
    else:
        raise ValueError(f"unknown border mode {border!r}")

    p00 = fetch(v0, u0)
    p01 = fetch(v0, u0 + 1)
    p10 = fetch(v0 + 1, u0)
    p11 = fetch(v0 + 1, u0 + 1)

    top = p00 * (1.0 - fu) + p01 * fu
    bot = p10 * (1.0 - fu) + p11 * fu
    out = (top * (1.0 - fv) + bot * fv).astype(np.float32, copy=False)
    if scalar:
        return out.reshape(c)
    return out


def _axis_weights(n_src: int, n_dst: int):
    """Clamped source indices and fractions for one separable bilinear axis."""
    c = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
    c0 = np.floor(c)
    frac = (c - c0).astype(np.float32)
    i0 = np.clip(c0, 0, n_src - 1).astype(np.int64)
    i1 = np.clip(c0 + 1, 0, n_src - 1).astype(np.int64)
    return i0, i1, frac


def resize(img: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Bilinear resize to (new_h, new_w).

    Target pixel (i, j) samples the source at
    ((i + 0.5) * H / new_h - 0.5, (j + 0.5) * W / new_w - 0.5), with edge
    clamping so the borders are not darkened. Bilinear interpolation is
    separable, so the resample runs as two 1-D passes.
    """
    img = np.asarray(img)
    if new_h < 1 or new_w < 1:
        raise ValueError(f"resize: target size must be >= 1, got {new_h}x{new_w}")
    h, w, _ = img.shape
    if (int(new_h), int(new_w)) == (h, w):
        return img.astype(np.float32).copy()
    v0, v1, fv = _axis_weights(h, new_h)
    u0, u1, fu = _axis_weights(w, new_w)
    rows = img[v0] * (1.0 - fv)[:, None, None] + img[v1] * fv[:, None, None]
    out = rows[:, u0] * (1.0 - fu)[None, :, None] + rows[:, u1] * fu[None, :, None]
    return out.astype(np.float32, copy=False)


def luminance(img: np.ndarray) -> np.ndarray:
    """Channel mean as a 2-D (H, W) float32 array."""
    return np.asarray(img).mean(axis=2, dtype=np.float32)


def load_png(path) -> np.ndarray:
    """Load an 8-bit grayscale or RGB PNG as float32 in [0, 1] (byte k -> k/255)."""
    path = os.fspath(path)
    try:
        with _PILImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                raise OSError(
                    f"{path}: unsupported image mode {im.mode!r}, need 8-bit grayscale or RGB"
                )
            arr = np.asarray(im, dtype=np.uint8)
    except OSError:
        raise
    except Exception as exc:
        raise OSError(f"{path}: failed to read PNG: {exc}") from exc
    out = (arr / 255.0).astype(np.float32)
    if out.ndim == 2:
        out = out[:, :, None]
    return out


def save_png(img: np.ndarray, path) -> None:
    """Write as 8-bit PNG; value v maps to round(v * 255) clamped to [0, 255]."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"save_png: expected (H, W, C) with C in {{1, 3}}, got {img.shape}")
    path = os.fspath(path)
    q = np.clip(np.rint(img.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    if q.shape[2] == 1:
        pil = _PILImage.fromarray(q[:, :, 0], mode="L")
    else:
        pil = _PILImage.fromarray(q, mode="RGB")
    try:
        pil.save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"{path}: failed to write PNG: {exc}") from exc
