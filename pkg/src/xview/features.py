"""Deterministic descriptor extraction.

Feature volumes are (grid_h, grid_w, channels) float32 histograms of gradient
orientation, one histogram per image block, weighted by gradient magnitude.
The extractor is translation equivariant by construction: shifting a full
360-degree image by an exact block width rotates the volume columns
bit-identically, which is what makes azimuth estimation by circular
correlation possible. Retrieval descriptors concatenate the volumes of the
projective and polar branches along the channel axis.
"""

from __future__ import annotations

import numpy as np

from .img import luminance
from .transforms import PolarParams, ProjParams, polar_transform, projective_transform

__all__ = [
    "extract",
    "l2_normalize",
    "make_descriptor",
    "descriptor_width",
    "satellite_descriptor",
    "ground_descriptor",
]

GRID_H = 4
GRID_W = 64
CHANNELS = 8


def _gradients(lum: np.ndarray, cyclic: bool):
    """Central-difference gradients of a 2-D luminance field.

    Horizontal differences wrap around for full 360-degree inputs and use
    zero padding otherwise; vertical differences use edge replication so a
    vertically constant image has no phantom top/bottom edges.
    """
    h, w = lum.shape
    if cyclic:
        gx = (np.roll(lum, -1, axis=1) - np.roll(lum, 1, axis=1)) * 0.5
    else:
        padded = np.zeros((h, w + 2), dtype=lum.dtype)
        padded[:, 1:-1] = lum
        gx = (padded[:, 2:] - padded[:, :-2]) * 0.5
    vpad = np.empty((h + 2, w), dtype=lum.dtype)
    vpad[1:-1] = lum
    vpad[0] = lum[0]
    vpad[-1] = lum[-1]
    gy = (vpad[2:] - vpad[:-2]) * 0.5
    return gx, gy


def extract(img: np.ndarray, grid_h: int = GRID_H, grid_w: int = GRID_W,
            channels: int = CHANNELS, cyclic: bool = True,
            normalize_blocks: bool = True) -> np.ndarray:
    """Block histogram of gradient orientations, (grid_h, grid_w, channels).

    The image is partitioned into grid_h x grid_w equal blocks; per block a
    `channels`-bin histogram over gradient directions [0, 360) accumulates
    gradient magnitudes. With `normalize_blocks` each non-zero histogram is
    scaled to unit length (the usual block-normalization step for this
    descriptor family), which makes correlation score orientation-structure
    alignment rather than raw gradient energy; zero blocks stay zero, so a
    constant image still maps to an all-zero volume. `cyclic` selects
    wrap-around horizontal gradients (full panoramas and transformed
    overhead images) versus zero-padded borders (limited field-of-view
    crops).
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    if grid_h > h or grid_w > w:
        raise ValueError(f"extract: grid {grid_h}x{grid_w} larger than image {h}x{w}")
    if h % grid_h != 0 or w % grid_w != 0:
        raise ValueError(
            f"extract: image {h}x{w} not divisible by grid {grid_h}x{grid_w}"
        )
    lum = luminance(img) if img.ndim == 3 else img.astype(np.float32)
    gx, gy = _gradients(lum, cyclic=cyclic)
    mag = np.hypot(gx, gy)
    # Degrees keep the axis-aligned boundary cases (0/90/180/270) exact.
    ang = np.degrees(np.arctan2(gy, gx)) % 360.0
    bins = np.minimum((ang / (360.0 / channels)).astype(np.int64), channels - 1)

    bh, bw = h // grid_h, w // grid_w
    rows = np.arange(h) // bh
    cols = np.arange(w) // bw
    flat = (rows[:, None] * grid_w + cols[None, :]) * channels + bins
    hist = np.bincount(flat.ravel(), weights=mag.ravel().astype(np.float64),
                       minlength=grid_h * grid_w * channels)
    vol = hist.reshape(grid_h, grid_w, channels)
    if normalize_blocks:
        norms = np.linalg.norm(vol, axis=2, keepdims=True)
        vol = np.divide(vol, norms, out=np.zeros_like(vol), where=norms > 0)
    return vol.astype(np.float32)


def l2_normalize(vol: np.ndarray) -> np.ndarray:
    """Scale to unit Frobenius norm; an all-zero volume stays all-zero."""
    vol = np.asarray(vol)
    norm = float(np.linalg.norm(vol))
    if norm == 0.0:
        return vol.astype(np.float32).copy()
    return (vol / norm).astype(np.float32)


def make_descriptor(proj_vol: np.ndarray, polar_vol: np.ndarray) -> np.ndarray:
    """Concatenate branch volumes along channels, projective part first."""
    proj_vol = np.asarray(proj_vol)
    polar_vol = np.asarray(polar_vol)
    if proj_vol.shape[:2] != polar_vol.shape[:2]:
        raise ValueError(
            f"make_descriptor: spatial shapes differ, {proj_vol.shape} vs {polar_vol.shape}"
        )
    return np.concatenate([proj_vol, polar_vol], axis=2)


def descriptor_width(fov_deg: float, grid_w: int = GRID_W) -> int:
    """Descriptor columns for a field of view: round(grid_w * fov / 360)."""
    if not 0.0 < fov_deg <= 360.0:
        raise ValueError(f"fov must be in (0, 360], got {fov_deg}")
    cols = int(round(grid_w * fov_deg / 360.0))
    return max(cols, 1)


def satellite_descriptor(sat: np.ndarray, polar: PolarParams | None = None,
                         proj: ProjParams | None = None, grid_h: int = GRID_H,
                         grid_w: int = GRID_W, channels: int = CHANNELS) -> np.ndarray:
    """Two-branch overhead descriptor: projective then polar volume."""
    if polar is None:
        polar = PolarParams.for_satellite(sat)
    if proj is None:
        proj = ProjParams.for_satellite(sat)
    proj_vol = extract(projective_transform(sat, proj), grid_h, grid_w, channels, cyclic=True)
    polar_vol = extract(polar_transform(sat, polar), grid_h, grid_w, channels, cyclic=True)
    return make_descriptor(proj_vol, polar_vol)


def ground_descriptor(pano: np.ndarray, fov_deg: float = 360.0, grid_h: int = GRID_H,
                      grid_w: int = GRID_W, channels: int = CHANNELS) -> np.ndarray:
    """Two-branch ground descriptor: bottom half then whole image.

    `pano` must already be cropped to the stated field of view; its width
    then corresponds to descriptor_width(fov_deg) blocks. Gradients wrap
    only for full panoramas.
    """
    pano = np.asarray(pano)
    if pano.shape[0] % 2 != 0:
        raise ValueError(f"ground_descriptor: height must be even, got {pano.shape[0]}")
    cols = descriptor_width(fov_deg, grid_w)
    cyclic = fov_deg == 360.0
    bottom = pano[pano.shape[0] // 2:]
    bottom_vol = extract(bottom, grid_h, cols, channels, cyclic=cyclic)
    whole_vol = extract(pano, grid_h, cols, channels, cyclic=cyclic)
    return make_descriptor(bottom_vol, whole_vol)
