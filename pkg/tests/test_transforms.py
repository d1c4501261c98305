import math

import numpy as np
import pytest

from xview.img import bilinear_sample
from xview.transforms import (PolarParams, ProjParams, polar_coords, polar_transform,
                              projective_coords, projective_transform)

# Scalar re-implementations used as the independent oracle for both
# coordinate maps; deliberately written with math.* on plain floats.


def oracle_polar(u_t, v_t, p):
    ang = 2.0 * math.pi * u_t / p.target_w
    rad = p.max_radius * (p.target_h - v_t) / p.target_h
    return p.u0 - rad * math.cos(ang), p.v0 + rad * math.sin(ang)


def oracle_projective(u_t, v_t, p):
    ang = 2.0 * math.pi * u_t / p.target_w
    g = p.px_per_m * p.cam_height * math.tan(math.pi * v_t / p.target_h)
    return p.u0 + g * math.cos(ang), p.v0 - g * math.sin(ang)


POLAR = PolarParams(sat_size=256, u0=128, v0=128, target_h=128, target_w=512)
PROJ = ProjParams(u0=128, v0=128, px_per_m=256 / 72, cam_height=1.7,
                  target_h=128, target_w=512)


def test_polar_default_radius_is_half_size():
    assert POLAR.max_radius == 128.0


def test_polar_bottom_row_is_center():
    for u_t in (0.0, 17.3, 300.0, 511.0):
        u_s, v_s = polar_coords(u_t, 128.0, POLAR)
        assert u_s == pytest.approx(128.0, abs=1e-12)
        assert v_s == pytest.approx(128.0, abs=1e-12)


def test_polar_hand_evaluated_points():
    # angle pi/2, radius 64
    assert polar_coords(128, 64, POLAR) == pytest.approx((128.0, 192.0))
    # angle 0, radius 128
    assert polar_coords(0, 0, POLAR) == pytest.approx((0.0, 128.0))


def test_projective_nadir_is_center():
    for u_t in (0.0, 100.0, 511.0):
        u_s, v_s = projective_coords(u_t, 128.0, PROJ)
        assert u_s == pytest.approx(128.0, abs=1e-9)
        assert v_s == pytest.approx(128.0, abs=1e-9)


def test_projective_hand_evaluated_points():
    # tan(3*pi/4) = -1, cos 0 = 1
    u_s, v_s = projective_coords(0, 96, PROJ)
    assert u_s == pytest.approx(128.0 - (256 / 72) * 1.7, abs=1e-9)
    assert v_s == pytest.approx(128.0, abs=1e-9)
    # sin(pi/2) = 1 with the leading minus
    u_s, v_s = projective_coords(128, 96, PROJ)
    assert u_s == pytest.approx(128.0, abs=1e-9)
    assert v_s == pytest.approx(128.0 + (256 / 72) * 1.7, abs=1e-9)


def test_projective_rejects_horizon_and_above():
    with pytest.raises(ValueError):
        projective_coords(0, 64, PROJ)
    with pytest.raises(ValueError):
        projective_coords(0, 10, PROJ)


def test_coordinate_maps_match_scalar_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = PolarParams(
            sat_size=int(rng.integers(64, 512)),
            u0=float(rng.uniform(0, 512)), v0=float(rng.uniform(0, 512)),
            target_h=int(rng.integers(16, 256)), target_w=int(rng.integers(16, 1024)),
            max_radius=float(rng.uniform(1, 300)))
        u_t = float(rng.uniform(0, p.target_w))
        v_t = float(rng.uniform(0, p.target_h))
        got = polar_coords(u_t, v_t, p)
        want = oracle_polar(u_t, v_t, p)
        assert got[0] == pytest.approx(want[0], abs=1e-10)
        assert got[1] == pytest.approx(want[1], abs=1e-10)

        q = ProjParams(
            u0=float(rng.uniform(0, 512)), v0=float(rng.uniform(0, 512)),
            px_per_m=float(rng.uniform(0.5, 10)), cam_height=float(rng.uniform(0.5, 3)),
            target_h=int(rng.integers(16, 256)) * 2, target_w=int(rng.integers(16, 1024)))
        u_t = float(rng.uniform(0, q.target_w))
        v_t = float(rng.uniform(0.5 * q.target_h + 1.0, q.target_h))
        got = projective_coords(u_t, v_t, q)
        want = oracle_projective(u_t, v_t, q)
        assert got[0] == pytest.approx(want[0], abs=1e-10)
        assert got[1] == pytest.approx(want[1], abs=1e-10)


def test_polar_transform_constant_image():
    sat = np.full((256, 256, 1), 0.7, dtype=np.float32)
    out = polar_transform(sat, POLAR)
    assert out.shape == (128, 512, 1)
    # rows sampling radius <= 127 stay fully inside the image
    assert np.allclose(out[64:], 0.7, atol=1e-6)
    assert out.min() >= 0.0 and out.max() <= 0.7 + 1e-6


def test_polar_transform_white_pixel_lands_at_north_column():
    sat = np.zeros((256, 256, 1), dtype=np.float32)
    sat[128, 64, 0] = 1.0  # (u, v) = (u0 - 64, v0)
    out = polar_transform(sat, POLAR)
    # 1-based row v_t = H * (1 - 64 / r) = 64 -> row index 63, azimuth 0
    assert out[63, 0, 0] == pytest.approx(1.0)
    hot = np.argwhere(out[:, :, 0] > 0.5)
    assert len(hot) == 1 and tuple(hot[0]) == (63, 0)


def test_polar_transform_bottom_row_replicates_center():
    rng = np.random.default_rng(12)
    sat = rng.uniform(0, 1, (256, 256, 3)).astype(np.float32)
    out = polar_transform(sat, POLAR)
    center = bilinear_sample(sat, 128.0, 128.0)
    assert np.allclose(out[-1], center[None, :], atol=1e-6)


def test_projective_transform_bottom_row_replicates_center():
    rng = np.random.default_rng(13)
    sat = rng.uniform(0, 1, (256, 256, 3)).astype(np.float32)
    out = projective_transform(sat, PROJ)
    assert out.shape == (64, 512, 3)
    center = bilinear_sample(sat, 128.0, 128.0)
    assert np.allclose(out[-1], center[None, :], atol=1e-6)


def test_projective_transform_requires_even_height():
    sat = np.zeros((64, 64, 1), dtype=np.float32)
    p = ProjParams(u0=32, v0=32, target_h=65, target_w=128)
    with pytest.raises(ValueError):
        projective_transform(sat, p)


def test_projective_white_pixel_at_unit_ground_distance():
    p = ProjParams(u0=128, v0=128, px_per_m=256 / 72, cam_height=1.7,
                   target_h=128, target_w=512)
    sat = np.zeros((256, 256, 1), dtype=np.float32)
    s_z2 = p.px_per_m * p.cam_height
    # white pixel one "s*z2" to the -u side of the center: the tan = -1 ray
    sat[128, int(round(128 - s_z2)), 0] = 1.0
    out = projective_transform(sat, p)
    # row where tan(pi v_t / H) = -1 is v_t = 3H/4 = 96 -> output row 31
    expect_row = 96 - (64 + 1)
    k, j = np.unravel_index(np.argmax(out[:, :, 0]), out.shape[:2])
    assert out[k, j, 0] > 0.45  # s*z2 is not integral; bilinear splits energy
    assert abs(int(k) - expect_row) <= 1
    assert min(int(j), 512 - int(j)) <= 1  # azimuth 0 up to angular quantization
    # the halo widens angularly at small radii (one pixel subtends ~1/r rad)
    hot = np.argwhere(out[:, :, 0] > 0.1)
    assert all(min(c, 512 - c) <= 13 for c in hot[:, 1])


def test_rotation_becomes_circular_shift():
    rng = np.random.default_rng(14)
    sat = rng.uniform(0, 1, (256, 256, 3)).astype(np.float32)
    # np.rot90 rotates about the array center (S-1)/2, so use that center
    p = PolarParams(sat_size=256, u0=127.5, v0=127.5, target_h=128,
                    target_w=512, max_radius=127.0)
    base = polar_transform(sat, p)
    for k in (1, 2, 3):
        rotated = polar_transform(np.rot90(sat, k=k).copy(), p)
        assert np.abs(rotated - np.roll(base, k * 128, axis=1)).max() <= 1e-6


def test_projective_rotation_becomes_circular_shift():
    rng = np.random.default_rng(15)
    sat = rng.uniform(0, 1, (256, 256, 3)).astype(np.float32)
    p = ProjParams(u0=127.5, v0=127.5, px_per_m=1 / 0.28125, cam_height=1.7,
                   target_h=128, target_w=512)
    base = projective_transform(sat, p)
    rotated = projective_transform(np.rot90(sat, k=1).copy(), p)
    assert np.abs(rotated - np.roll(base, 128, axis=1)).max() <= 1e-6


def _translate_zero_fill(img, du, dv):
    """new[v, u] = img[v + dv, u + du] where valid, zero elsewhere."""
    out = np.roll(np.roll(img, -dv, axis=0), -du, axis=1)
    h, w = img.shape[:2]
    if dv < 0:
        out[:(-dv)] = 0
    elif dv > 0:
        out[h - dv:] = 0
    if du < 0:
        out[:, :(-du)] = 0
    elif du > 0:
        out[:, w - du:] = 0
    return out


def test_projective_center_shift_equals_translation():
    # equality holds wherever both sampling footprints stay inside the
    # canvas; the fixed-size translated image clips content at its border
    rng = np.random.default_rng(16)
    sat = rng.uniform(0, 1, (128, 128, 3)).astype(np.float32)
    p = ProjParams(u0=64, v0=64, px_per_m=4.0, cam_height=1.7,
                   target_h=64, target_w=256)
    u_t = np.arange(p.target_w, dtype=np.float64)[None, :]
    v_t = (np.arange(p.target_h // 2, dtype=np.float64) + p.target_h / 2 + 1.0)[:, None]
    u_s, v_s = projective_coords(u_t, v_t, p)
    for du, dv in ((5, -3), (-4, 7), (0, 2)):
        m = max(abs(du), abs(dv)) + 1
        inside = ((u_s >= m) & (u_s <= 127 - m) & (v_s >= m) & (v_s <= 127 - m))
        moved_center = projective_transform(sat, p, center=(64 + du, 64 + dv))
        moved_image = projective_transform(_translate_zero_fill(sat, du, dv), p)
        diff = np.abs(moved_center - moved_image).max(axis=2)
        assert diff[inside].max() <= 1e-6
        assert inside.sum() > diff.size * 0.5  # the masked check is not vacuous


def test_projective_concentration_vs_polar_uniformity():
    # most projective rows sample close to the center; polar radii are uniform
    p = PROJ
    v_t = np.arange(p.target_h // 2, dtype=np.float64) + p.target_h / 2 + 1.0
    u_s, v_s = projective_coords(np.zeros_like(v_t), v_t, p)
    radius = np.hypot(u_s - p.u0, v_s - p.v0)
    near = radius <= 4.0 * p.px_per_m * p.cam_height
    assert near.mean() >= 0.5
    rows = np.arange(POLAR.target_h, dtype=np.float64) + 1.0
    pu, pv = polar_coords(np.zeros_like(rows), rows, POLAR)
    polar_radius = np.hypot(pu - POLAR.u0, pv - POLAR.v0)
    steps = np.diff(polar_radius)
    assert np.allclose(steps, steps[0], atol=1e-9)


def test_param_validation():
    with pytest.raises(ValueError):
        PolarParams(sat_size=256, u0=0, v0=0, max_radius=-1.0)
    with pytest.raises(ValueError):
        ProjParams(u0=0, v0=0, px_per_m=0.0)
    with pytest.raises(ValueError):
        ProjParams(u0=0, v0=0, cam_height=-2.0)
