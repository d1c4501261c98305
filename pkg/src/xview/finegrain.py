"""Fine-grained location and orientation search.

After coarse retrieval the query camera may sit anywhere inside the
retrieved overhead image, so this stage exhaustively re-renders the overhead
image through the ground-plane projective transform at a grid of candidate
projection centers, circularly shifts each rendering through a set of
candidate orientations, and scores every (center, orientation) pair against
the query with SSIM. The best-scoring candidate gives the pixel offset from
the image center and the azimuth.

SSIM uses the standard 11x11 Gaussian window (sigma 1.5) with constants
C1 = (0.01 L)^2, C2 = (0.03 L)^2 at L = 1, computed over valid windows only
(5-pixel borders excluded); multi-channel inputs are averaged to one channel
first. The search path evaluates the same statistics in float32 batches for
speed; `ssim` itself computes in float64.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .img import bilinear_sample, luminance
from .transforms import DEFAULT_MPP, ProjParams, projective_coords

__all__ = [
    "SearchConfig",
    "FineResult",
    "ssim",
    "fine_localize",
    "offset_to_meters",
]

_WINDOW = 11
_SIGMA = 1.5
_RADIUS = _WINDOW // 2
_C1 = (0.01 * 1.0) ** 2
_C2 = (0.03 * 1.0) ** 2


def _gaussian_kernel() -> np.ndarray:
    x = np.arange(_WINDOW, dtype=np.float64) - _RADIUS
    k = np.exp(-0.5 * (x / _SIGMA) ** 2)
    return k / k.sum()


_KERNEL = _gaussian_kernel()


def _gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 3:
        return luminance(img)
    if img.ndim == 2:
        return img.astype(np.float32)
    raise ValueError(f"expected a 2-D or (H, W, C) image, got shape {img.shape}")


def _filter2(arr: np.ndarray, wrap_x: bool = False) -> np.ndarray:
    """Separable Gaussian over the last two axes; zero boundary vertically,
    zero or wrap-around horizontally."""
    kern = _KERNEL.astype(arr.dtype)
    out = correlate1d(arr, kern, axis=arr.ndim - 2, mode="constant", cval=0.0)
    mode = "wrap" if wrap_x else "constant"
    return correlate1d(out, kern, axis=arr.ndim - 1, mode=mode, cval=0.0)


def _interior(arr: np.ndarray) -> np.ndarray:
    return arr[..., _RADIUS:arr.shape[-2] - _RADIUS, _RADIUS:arr.shape[-1] - _RADIUS]


def _filter2_hnw(arr: np.ndarray) -> np.ndarray:
    """Gaussian over axes 0 and 2 of an (H, n, W) orientation stack."""
    kern = _KERNEL.astype(arr.dtype)
    out = correlate1d(arr, kern, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, kern, axis=2, mode="constant", cval=0.0)


def _interior_hnw(arr: np.ndarray) -> np.ndarray:
    return arr[_RADIUS:arr.shape[0] - _RADIUS, :, _RADIUS:arr.shape[2] - _RADIUS]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows."""
    ga = _gray(a).astype(np.float64)
    gb = _gray(b).astype(np.float64)
    if ga.shape != gb.shape:
        raise ValueError(f"ssim: image sizes differ, {ga.shape} vs {gb.shape}")
    if min(ga.shape) < _WINDOW:
        raise ValueError(f"ssim: images must be at least {_WINDOW}x{_WINDOW}, got {ga.shape}")
    mu_a = _interior(_filter2(ga))
    mu_b = _interior(_filter2(gb))
    m_aa = _interior(_filter2(ga * ga))
    m_bb = _interior(_filter2(gb * gb))
    m_ab = _interior(_filter2(ga * gb))
    var_a = m_aa - mu_a * mu_a
    var_b = m_bb - mu_b * mu_b
    cov = m_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + _C1) * (2.0 * cov + _C2)
    den = (mu_a * mu_a + mu_b * mu_b + _C1) * (var_a + var_b + _C2)
    return float(np.mean(num / den))


def offset_to_meters(offset, mpp: float = DEFAULT_MPP) -> tuple[float, float]:
    """Pixel offset (du, dv) scaled componentwise to meters."""
    if mpp <= 0:
        raise ValueError(f"mpp must be > 0, got {mpp}")
    return float(offset[0]) * mpp, float(offset[1]) * mpp


@dataclass(frozen=True)
class SearchConfig:
    """Fine search extent and resolution.

    region_half: half-extent of the candidate grid in pixels. With
        inclusive=False the grid covers offsets {-region_half, ...,
        region_half - 1} per axis (even count, e.g. 40 points for the
        default 20, so the full-scale 40x40 grid x 512 orientations runs
        819,200 score evaluations); inclusive=True adds the +region_half
        edge for an odd grid.
    grid_step: stride between candidate centers, pixels.
    n_orient: number of candidate orientations over 360 degrees; must divide
        the panorama width so shifts land on whole columns.
    fov: horizontal field of view of the query, degrees.
    mpp: overhead meters per pixel (for the metric offset in results).
    proj: projective transform parameters; (u0, v0) is the search center.
    """

    proj: ProjParams
    region_half: int = 20
    grid_step: int = 1
    n_orient: int = 512
    fov: float = 360.0
    mpp: float = DEFAULT_MPP
    inclusive: bool = False

    def __post_init__(self):
        if self.region_half < 1 or self.grid_step < 1:
            raise ValueError("region_half and grid_step must be >= 1")
        if self.n_orient < 1:
            raise ValueError(f"n_orient must be >= 1, got {self.n_orient}")
        if not 0.0 < self.fov <= 360.0:
            raise ValueError(f"fov must be in (0, 360], got {self.fov}")
        if self.mpp <= 0:
            raise ValueError(f"mpp must be > 0, got {self.mpp}")
        if self.proj.target_w % self.n_orient != 0:
            raise ValueError(
                f"n_orient {self.n_orient} must divide panorama width {self.proj.target_w}"
            )

    def axis_offsets(self) -> np.ndarray:
        hi = self.region_half + 1 if self.inclusive else self.region_half
        return np.arange(-self.region_half, hi, self.grid_step)

    @property
    def candidate_count(self) -> int:
        """Total score evaluations: grid cells times orientations."""
        return len(self.axis_offsets()) ** 2 * self.n_orient


@dataclass(frozen=True)
class FineResult:
    """Best candidate of a fine search."""

    du: int
    dv: int
    offset_m: tuple[float, float]
    azimuth_deg: float
    score: float
    score_map: np.ndarray = field(repr=False)
    n_evaluated: int = 0


def _candidate_scores(t_gray, q_gray, mu_q, q2_f, col_idx, int_idx, chunk):
    """Max SSIM over orientations for one candidate rendering.

    t_gray: (H, W_g) rendering; col_idx/int_idx: per-orientation gather
    indices for the full and interior crop columns. Orientation stacks stay
    in (H, n, W) layout so gathers and filters run without transposes.
    Returns (best_score, best_orientation_index, scores_vector).
    """
    n_orient = col_idx.shape[0]
    mu_t_full = _filter2(t_gray, wrap_x=True)
    t2_full = _filter2(t_gray * t_gray, wrap_x=True)
    rows = slice(_RADIUS, t_gray.shape[0] - _RADIUS)
    var_q = (q2_f - mu_q * mu_q)[:, None, :]
    mu_q3 = mu_q[:, None, :]
    mu_q_sq = mu_q3 * mu_q3

    scores = np.empty(n_orient, dtype=np.float64)
    for lo in range(0, n_orient, chunk):
        sel = col_idx[lo:lo + chunk]
        qt_f = _interior_hnw(_filter2_hnw(q_gray[:, None, :] * t_gray[:, sel]))
        mu_t = mu_t_full[rows][:, int_idx[lo:lo + chunk]]
        t2_f = t2_full[rows][:, int_idx[lo:lo + chunk]]
        cross = mu_q3 * mu_t
        num = (2.0 * cross + _C1) * (2.0 * (qt_f - cross) + _C2)
        den = (mu_q_sq + mu_t * mu_t + _C1) * (var_q + (t2_f - mu_t * mu_t) + _C2)
        num /= den
        scores[lo:lo + chunk] = num.mean(axis=(0, 2))
    best = int(np.argmax(scores))
    return float(scores[best]), best, scores


def fine_localize(sat: np.ndarray, query: np.ndarray, cfg: SearchConfig,
                  threads: int = 1) -> FineResult:
    """Exhaustive (center, orientation) search scored by SSIM.

    `query` is the bottom half of a ground panorama cropped to cfg.fov (a
    full panorama is accepted and its bottom half taken). For every grid
    candidate the overhead image is projectively re-rendered at that center;
    the candidate's score is its maximum SSIM over all circular orientation
    shifts. Ties resolve to the lowest row-major grid index, then the lowest
    shift, so results are reproducible and thread-count independent.
    """
    sat = np.asarray(sat)
    query = np.asarray(query)
    p = cfg.proj
    half_h = p.target_h // 2
    if query.shape[0] == p.target_h:
        query = query[half_h:]
    if query.shape[0] != half_h:
        raise ValueError(
            f"query height {query.shape[0]} does not match panorama bottom half {half_h}"
        )
    wq = int(round(p.target_w * cfg.fov / 360.0))
    if query.shape[1] != wq:
        raise ValueError(
            f"query width {query.shape[1]} does not match fov {cfg.fov} "
            f"(expected {wq} columns of {p.target_w})"
        )
    if half_h < _WINDOW or wq < _WINDOW:
        raise ValueError(f"query {half_h}x{wq} too small for the {_WINDOW}px SSIM window")

    offsets = cfg.axis_offsets()
    margin = cfg.region_half * cfg.grid_step + 1
    h_s, w_s = sat.shape[:2]
    if not (margin <= p.u0 <= w_s - 1 - margin and margin <= p.v0 <= h_s - 1 - margin):
        raise ValueError(
            f"search region (half-extent {margin}px around ({p.u0}, {p.v0})) "
            f"does not fit inside the {h_s}x{w_s} overhead image"
        )

    col_step = p.target_w // cfg.n_orient
    shifts = np.arange(cfg.n_orient)[:, None] * col_step
    col_idx = (np.arange(wq)[None, :] + shifts) % p.target_w
    int_idx = (np.arange(_RADIUS, wq - _RADIUS)[None, :] + shifts) % p.target_w

    q_gray = _gray(query)
    mu_q = _interior(_filter2(q_gray))
    q2_f = _interior(_filter2(q_gray * q_gray))

    # Candidates share one grayscale overhead raster and one offset grid;
    # only the projection center moves.
    sat_gray = _gray(sat)[:, :, None]
    u_t = np.arange(p.target_w, dtype=np.float64)[None, :]
    v_t = (np.arange(half_h, dtype=np.float64) + half_h + 1.0)[:, None]
    u_off, v_off = projective_coords(u_t, v_t, p.at_center((0.0, 0.0)))

    # Chunk orientations so the (chunk, H, Wq) stacks stay around ~32 MB.
    chunk = max(1, min(cfg.n_orient, int(32e6 / (4 * half_h * wq))))

    n_axis = len(offsets)
    score_map = np.empty((n_axis, n_axis), dtype=np.float64)
    shift_map = np.empty((n_axis, n_axis), dtype=np.int64)

    def run_row(i):
        dv = offsets[i]
        for j, du in enumerate(offsets):
            t_gray = bilinear_sample(sat_gray, u_off + (p.u0 + du), v_off + (p.v0 + dv),
                                     border="zero")[:, :, 0]
            score, best_k, _ = _candidate_scores(
                t_gray, q_gray, mu_q, q2_f, col_idx, int_idx, chunk)
            score_map[i, j] = score
            shift_map[i, j] = best_k

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_row, range(n_axis)))
    else:
        for i in range(n_axis):
            run_row(i)

    flat = int(np.argmax(score_map))  # first (row-major lowest) index on ties
    bi, bj = divmod(flat, n_axis)
    best_k = int(shift_map[bi, bj])
    du = int(offsets[bj])
    dv = int(offsets[bi])
    return FineResult(
        du=du,
        dv=dv,
        offset_m=offset_to_meters((du, dv), cfg.mpp),
        azimuth_deg=360.0 * best_k / cfg.n_orient,
        score=float(score_map[bi, bj]),
        score_map=score_map,
        n_evaluated=n_axis * n_axis * cfg.n_orient,
    )
