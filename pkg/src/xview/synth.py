"""Seeded synthetic planar scenes with exact pose ground truth.

A Scene is a procedurally generated world-plane texture: band-limited value
noise plus road-like strips and soft-edged rectangular patches, rasterized
once at high resolution. Overhead crops and ground panoramas are both
rendered by sampling this master raster, so the two views are geometrically
consistent by construction and every pose is known exactly. All randomness
flows from the constructor seed; identical seeds give bit-identical scenes.

World frame: x east, y north, meters; the scene is centered on `origin`.
Overhead renders are north-aligned (image up = +y). A panorama column j
views absolute azimuth `pose.azimuth_deg + 360 j / W`, matching the
transform convention where azimuth 0 is panorama column 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .img import bilinear_sample, resize, save_png
from .transforms import DEFAULT_CAM_HEIGHT, DEFAULT_MPP

__all__ = [
    "ScenePose",
    "Scene",
    "render_satellite",
    "render_panorama",
    "fov_crop",
    "make_dataset",
    "SKY_VALUE",
]

# Constant value for panorama rows above the horizon: the ground-plane model
# cannot produce sky/building content, and a constant keeps the upper rows
# free of spurious gradient signal.
SKY_VALUE = 0.53

DEFAULT_EXTENT = 72.0
# Master raster: 4x finer than the finest rendered ground sampling distance.
DEFAULT_MASTER_MPP = DEFAULT_MPP / 4.0


@dataclass(frozen=True)
class ScenePose:
    """Ground camera state: position in meters, azimuth degrees (0 = north,
    clockwise positive)."""

    x: float
    y: float
    azimuth_deg: float = 0.0


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


class Scene:
    """Procedural world-plane texture, immutable after construction."""

    def __init__(self, seed: int, extent_m: float = DEFAULT_EXTENT,
                 master_mpp: float = DEFAULT_MASTER_MPP, origin=(0.0, 0.0)):
        if extent_m <= 0 or master_mpp <= 0:
            raise ValueError("extent_m and master_mpp must be > 0")
        self.seed = int(seed)
        self.extent = float(extent_m)
        self.master_mpp = float(master_mpp)
        self.origin = (float(origin[0]), float(origin[1]))
        self.size = int(round(self.extent / self.master_mpp))
        self.master = self._generate()

    def _world_grid(self):
        # float32 keeps the mask math cheap; at <100 m extents the loss of
        # precision is far below the texture transition widths
        half = self.extent / 2.0
        xs = (self.origin[0] - half + (np.arange(self.size) + 0.5) * self.master_mpp)
        ys = (self.origin[1] + half - (np.arange(self.size) + 0.5) * self.master_mpp)
        return xs.astype(np.float32)[None, :], ys.astype(np.float32)[:, None]

    def _generate(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        n = self.size
        # Two octaves of bilinear value noise, features around extent/8 and
        # extent/24 so the texture stays smooth at overhead resolution.
        img = np.zeros((n, n, 3), dtype=np.float32)
        for cells, amp in ((9, 0.45), (25, 0.2)):
            lattice = rng.uniform(0.0, 1.0, size=(cells, cells, 3)).astype(np.float32)
            img += amp * resize(lattice, n, n)
        img += 0.18

        xg, yg = self._world_grid()
        edge = 0.8  # soft transition width, meters

        n_roads = int(rng.integers(2, 5))
        for _ in range(n_roads):
            theta = rng.uniform(0.0, np.pi)
            px = self.origin[0] + rng.uniform(-0.25, 0.25) * self.extent
            py = self.origin[1] + rng.uniform(-0.25, 0.25) * self.extent
            width = rng.uniform(2.5, 5.0)
            shade = rng.uniform(0.08, 0.3)
            dist = np.abs((xg - px) * np.sin(theta) - (yg - py) * np.cos(theta))
            mask = 1.0 - _smoothstep((dist - width / 2.0) / edge)
            img = img * (1.0 - 0.85 * mask[:, :, None]) + 0.85 * shade * mask[:, :, None]

        half = self.extent / 2.0
        n_rects = int(rng.integers(3, 8))
        for _ in range(n_rects):
            cx = self.origin[0] + rng.uniform(-0.35, 0.35) * self.extent
            cy = self.origin[1] + rng.uniform(-0.35, 0.35) * self.extent
            ha = rng.uniform(2.0, 7.0)
            hb = rng.uniform(2.0, 7.0)
            theta = rng.uniform(0.0, np.pi)
            color = rng.uniform(0.15, 0.85, size=3).astype(np.float32)
            # rectangles have bounded support; restrict the mask to its box
            reach = float(np.hypot(ha + edge, hb + edge))
            j0 = max(0, int((cx - reach - (self.origin[0] - half)) / self.master_mpp))
            j1 = min(n, int((cx + reach - (self.origin[0] - half)) / self.master_mpp) + 1)
            i0 = max(0, int(((self.origin[1] + half) - (cy + reach)) / self.master_mpp))
            i1 = min(n, int(((self.origin[1] + half) - (cy - reach)) / self.master_mpp) + 1)
            if j0 >= j1 or i0 >= i1:
                continue
            dx = xg[:, j0:j1] - np.float32(cx)
            dy = yg[i0:i1] - np.float32(cy)
            uu = dx * np.cos(theta) + dy * np.sin(theta)
            vv = -dx * np.sin(theta) + dy * np.cos(theta)
            d = np.maximum(np.abs(uu) - ha, np.abs(vv) - hb).astype(np.float32)
            mask = (1.0 - _smoothstep(d / edge))[:, :, None]
            img[i0:i1, j0:j1] = img[i0:i1, j0:j1] * (1.0 - 0.8 * mask) + 0.8 * mask * color

        # Final band-limiting pass; sigma in master pixels.
        img = gaussian_filter(img, sigma=(1.5, 1.5, 0.0), mode="nearest")
        return np.clip(img, 0.0, 1.0).astype(np.float32)

    def sample(self, x, y) -> np.ndarray:
        """Bilinear texture lookup at world meters; outside the scene is black."""
        half = self.extent / 2.0
        u = (np.asarray(x, dtype=np.float64) - self.origin[0] + half) / self.master_mpp - 0.5
        v = (self.origin[1] + half - np.asarray(y, dtype=np.float64)) / self.master_mpp - 0.5
        return bilinear_sample(self.master, u, v, border="zero")


def render_satellite(scene: Scene, center, size_px: int = 256,
                     mpp: float = DEFAULT_MPP) -> np.ndarray:
    """North-aligned orthographic crop centered at world point `center`.

    Pixel (i, j) samples world (cx + (j - size/2) mpp, cy + (size/2 - i) mpp),
    so the image center pixel (size/2, size/2) sits exactly on `center`.
    """
    cx, cy = float(center[0]), float(center[1])
    half_m = size_px * mpp / 2.0
    eps = 1e-9
    if (abs(cx - scene.origin[0]) + half_m > scene.extent / 2.0 + eps
            or abs(cy - scene.origin[1]) + half_m > scene.extent / 2.0 + eps):
        raise ValueError(
            f"crop of {2 * half_m:.2f} m at ({cx}, {cy}) escapes the "
            f"{scene.extent:.2f} m scene around {scene.origin}"
        )
    j = np.arange(size_px, dtype=np.float64)[None, :]
    i = np.arange(size_px, dtype=np.float64)[:, None]
    x = cx + (j - size_px / 2.0) * mpp
    y = cy + (size_px / 2.0 - i) * mpp
    return np.clip(scene.sample(x, y), 0.0, 1.0)


def render_panorama(scene: Scene, pose: ScenePose, target_h: int = 128,
                    target_w: int = 512, cam_height: float = DEFAULT_CAM_HEIGHT,
                    sky: float = SKY_VALUE) -> np.ndarray:
    """Equirectangular ground panorama at `pose`.

    Rows below the horizon (v_t = row + 1 in (H/2, H]) cast rays through the
    spherical camera to the ground plane and sample the scene texture; rows
    at or above the horizon are a constant sky value. The bottom row is the
    camera footprint replicated across all columns.
    """
    if target_h % 2 != 0:
        raise ValueError(f"target_h must be even, got {target_h}")
    if cam_height <= 0:
        raise ValueError(f"cam_height must be > 0, got {cam_height}")
    half = target_h // 2
    out = np.full((target_h, target_w, 3), np.float32(sky), dtype=np.float32)
    v_t = (np.arange(half, dtype=np.float64) + half + 1.0)[:, None]
    # Ground distance from the camera; tan is negative below the horizon.
    dist = -cam_height * np.tan(np.pi * v_t / target_h)
    phi = np.radians(pose.azimuth_deg) + 2.0 * np.pi * np.arange(target_w)[None, :] / target_w
    x = pose.x - dist * np.cos(phi)
    y = pose.y - dist * np.sin(phi)
    out[half:] = np.clip(scene.sample(x, y), 0.0, 1.0)
    return out


def fov_crop(pano: np.ndarray, fov_deg: float, block_px: int = 8) -> np.ndarray:
    """Crop a full panorama to a field of view starting at its first column.

    The width is rounded to whole descriptor blocks (block_px source columns
    per descriptor column) so downstream feature grids stay aligned.
    """
    if not 0.0 < fov_deg <= 360.0:
        raise ValueError(f"fov must be in (0, 360], got {fov_deg}")
    w = pano.shape[1]
    if fov_deg == 360.0:
        return pano
    cols = int(round((w / block_px) * fov_deg / 360.0)) * block_px
    cols = max(block_px, min(cols, w))
    return pano[:, :cols]


def make_dataset(out_dir, seed: int, n_scenes: int, offset_max_px: int = 0,
                 fov_list=(360.0,), extent_m: float = DEFAULT_EXTENT,
                 sat_size: int = 256, mpp: float = DEFAULT_MPP,
                 pano_h: int = 128, pano_w: int = 512,
                 cam_height: float = DEFAULT_CAM_HEIGHT) -> Path:
    """Write a reproducible retrieval dataset.

    Layout: ``scenes/<id>/sat.png`` plus ``scenes/<id>/pano_<fov>.png`` per
    field of view, and a ``manifest.csv`` with one row per panorama:
    id, x_m, y_m, azimuth_deg, offset_du_px, offset_dv_px, fov. Scene crops
    sit on a square grid with `extent_m` spacing, so (x_m, y_m) are global
    camera coordinates and the reference geotag of a crop is recovered as
    (x_m - du * mpp, y_m + dv * mpp). Camera offsets are integer pixels up
    to `offset_max_px` from the crop center; azimuths are uniform in
    [0, 360). Identical seeds reproduce the dataset byte for byte.
    """
    if n_scenes < 1:
        raise ValueError(f"n_scenes must be >= 1, got {n_scenes}")
    out = Path(out_dir)
    try:
        (out / "scenes").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: cannot create dataset directory: {exc}") from exc

    rng = np.random.default_rng(seed)
    grid_cols = int(np.ceil(np.sqrt(n_scenes)))
    rows = []
    for sid in range(n_scenes):
        anchor = (float(sid % grid_cols) * extent_m,
                  float(sid // grid_cols) * extent_m)
        scene = Scene(int(rng.integers(0, 2 ** 63)), extent_m=extent_m, origin=anchor)
        du = int(rng.integers(-offset_max_px, offset_max_px + 1)) if offset_max_px else 0
        dv = int(rng.integers(-offset_max_px, offset_max_px + 1)) if offset_max_px else 0
        azimuth = float(rng.uniform(0.0, 360.0))
        pose = ScenePose(anchor[0] + du * mpp, anchor[1] - dv * mpp, azimuth)

        scene_dir = out / "scenes" / f"{sid:04d}"
        scene_dir.mkdir(parents=True, exist_ok=True)
        save_png(render_satellite(scene, anchor, sat_size, mpp), scene_dir / "sat.png")
        pano = render_panorama(scene, pose, pano_h, pano_w, cam_height)
        for fov in fov_list:
            save_png(fov_crop(pano, float(fov)), scene_dir / f"pano_{int(fov)}.png")
            rows.append((sid, pose.x, pose.y, pose.azimuth_deg, du, dv, int(fov)))

    with open(out / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x_m", "y_m", "azimuth_deg",
                         "offset_du_px", "offset_dv_px", "fov"])
        writer.writerows(rows)
    return out
