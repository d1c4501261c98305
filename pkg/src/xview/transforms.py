"""Satellite-to-ground view transforms.

Two inverse-warp transforms take a north-aligned overhead (satellite) image
into ground-panorama layout:

* the polar transform samples rays uniformly in radius, so the full image
  content survives in distorted form;
* the projective transform maps points of the ground plane through a
  spherical ground camera at a known height, so the bottom half of a real
  panorama is reproduced exactly for planar scenes.

Conventions: output column u_t covers azimuth 360 * u_t / W_g degrees with
azimuth 0 at column 0 and clockwise positive; output rows are indexed by
v_t = row + 1 so the bottom row (v_t = H_g) lands exactly on the projection
center (zero radius / nadir). Coordinates are (u=column, v=row).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .img import bilinear_sample

__all__ = [
    "DEFAULT_MPP",
    "DEFAULT_CAM_HEIGHT",
    "PolarParams",
    "ProjParams",
    "polar_coords",
    "projective_coords",
    "polar_transform",
    "projective_transform",
]

# 40 px of a 256 px overhead image cover 11.25 m -> 0.28125 m per pixel.
DEFAULT_MPP = 0.28125
# Street-level camera height above the ground plane, meters.
DEFAULT_CAM_HEIGHT = 1.7


@dataclass(frozen=True)
class PolarParams:
    """Polar transform parameters.

    sat_size: side length S of the overhead image in pixels.
    u0, v0: projection center (column, row) in overhead pixels.
    target_h, target_w: output panorama size H_g x W_g.
    max_radius: outermost sampled radius r in pixels (defaults to S / 2).
    """

    sat_size: int
    u0: float
    v0: float
    target_h: int = 128
    target_w: int = 512
    max_radius: float = 0.0

    def __post_init__(self):
        if self.max_radius == 0.0:
            object.__setattr__(self, "max_radius", self.sat_size / 2.0)
        if self.max_radius <= 0:
            raise ValueError(f"max_radius must be > 0, got {self.max_radius}")
        if self.target_h < 1 or self.target_w < 1:
            raise ValueError(f"target size must be >= 1, got {self.target_h}x{self.target_w}")

    @classmethod
    def for_satellite(cls, sat: np.ndarray, target_h: int = 128, target_w: int = 512,
                      center=None, max_radius: float = 0.0) -> "PolarParams":
        h, w = sat.shape[:2]
        if center is None:
            center = (w / 2.0, h / 2.0)
        return cls(sat_size=w, u0=float(center[0]), v0=float(center[1]),
                   target_h=target_h, target_w=target_w, max_radius=max_radius)


@dataclass(frozen=True)
class ProjParams:
    """Ground-plane projective transform parameters.

    u0, v0: projection center (column, row) in overhead pixels.
    px_per_m: overhead resolution s in pixels per meter.
    cam_height: ground-camera height z2 above the ground plane, meters.
    target_h, target_w: full panorama size H_g x W_g; only the bottom half
        (rows with 0.5 * H_g < v_t <= H_g) is ever synthesized.
    """

    u0: float
    v0: float
    px_per_m: float = 1.0 / DEFAULT_MPP
    cam_height: float = DEFAULT_CAM_HEIGHT
    target_h: int = 128
    target_w: int = 512

    def __post_init__(self):
        if self.px_per_m <= 0:
            raise ValueError(f"px_per_m must be > 0, got {self.px_per_m}")
        if self.cam_height <= 0:
            raise ValueError(f"cam_height must be > 0, got {self.cam_height}")
        if self.target_h < 1 or self.target_w < 1:
            raise ValueError(f"target size must be >= 1, got {self.target_h}x{self.target_w}")

    @classmethod
    def for_satellite(cls, sat: np.ndarray, mpp: float = DEFAULT_MPP,
                      cam_height: float = DEFAULT_CAM_HEIGHT,
                      target_h: int = 128, target_w: int = 512, center=None) -> "ProjParams":
        h, w = sat.shape[:2]
        if center is None:
            center = (w / 2.0, h / 2.0)
        return cls(u0=float(center[0]), v0=float(center[1]), px_per_m=1.0 / mpp,
                   cam_height=cam_height, target_h=target_h, target_w=target_w)

    def at_center(self, center) -> "ProjParams":
        return replace(self, u0=float(center[0]), v0=float(center[1]))


def polar_coords(u_t, v_t, p: PolarParams):
    """Map panorama coordinates (u_t, v_t) to overhead coordinates (u_s, v_s).

    u_s = u0 - r (H_g - v_t) cos(2 pi u_t / W_g) / H_g
    v_s = v0 + r (H_g - v_t) sin(2 pi u_t / W_g) / H_g
    """
    u_t = np.asarray(u_t, dtype=np.float64)
    v_t = np.asarray(v_t, dtype=np.float64)
    ang = 2.0 * np.pi * u_t / p.target_w
    rad = p.max_radius * (p.target_h - v_t) / p.target_h
    u_s = p.u0 - rad * np.cos(ang)
    v_s = p.v0 + rad * np.sin(ang)
    return u_s, v_s


def projective_coords(u_t, v_t, p: ProjParams):
    """Map panorama coordinates (u_t, v_t) to overhead coordinates (u_s, v_s)
    for points on the ground plane.

    u_s = u0 + s z2 tan(pi v_t / H_g) cos(2 pi u_t / W_g)
    v_s = v0 - s z2 tan(pi v_t / H_g) sin(2 pi u_t / W_g)

    Valid for 0.5 * H_g < v_t <= H_g; at or above the horizon the tangent
    diverges and a ValueError is raised.
    """
    u_t = np.asarray(u_t, dtype=np.float64)
    v_t = np.asarray(v_t, dtype=np.float64)
    if np.any(v_t <= 0.5 * p.target_h):
        raise ValueError(
            f"projective_coords: v_t must exceed H_g/2 = {0.5 * p.target_h} "
            "(horizon singularity)"
        )
    ang = 2.0 * np.pi * u_t / p.target_w
    ground = p.px_per_m * p.cam_height * np.tan(np.pi * v_t / p.target_h)
    u_s = p.u0 + ground * np.cos(ang)
    v_s = p.v0 - ground * np.sin(ang)
    return u_s, v_s


def polar_transform(sat: np.ndarray, p: PolarParams) -> np.ndarray:
    """Inverse-warp the overhead image into an H_g x W_g polar panorama.

    Output row i is sampled at v_t = i + 1, so the bottom row replicates the
    projection center and the top row reaches radius r (H_g - 1) / H_g.
    Samples outside the overhead image are black.
    """
    u_t = np.arange(p.target_w, dtype=np.float64)[None, :]
    v_t = (np.arange(p.target_h, dtype=np.float64) + 1.0)[:, None]
    u_s, v_s = polar_coords(u_t, v_t, p)
    return bilinear_sample(sat, u_s, v_s, border="zero")


def projective_transform(sat: np.ndarray, p: ProjParams, center=None) -> np.ndarray:
    """Inverse-warp the overhead image into the bottom half of a panorama.

    Output row k holds panorama row v_t = H_g/2 + 1 + k for k in
    [0, H_g/2), i.e. the ground rows below the horizon; the result has shape
    (H_g/2, W_g, C). `center` optionally overrides the projection center
    (u0, v0), which is how the fine-grained search re-renders candidates.
    """
    if p.target_h % 2 != 0:
        raise ValueError(f"projective_transform: target_h must be even, got {p.target_h}")
    if center is not None:
        p = p.at_center(center)
    half = p.target_h // 2
    u_t = np.arange(p.target_w, dtype=np.float64)[None, :]
    v_t = (np.arange(half, dtype=np.float64) + half + 1.0)[:, None]
    u_s, v_s = projective_coords(u_t, v_t, p)
    return bilinear_sample(sat, u_s, v_s, border="zero")
