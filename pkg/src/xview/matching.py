"""Orientation-aware descriptor matching.

Similarity between a ground descriptor and an overhead descriptor is scored
by circular cross-correlation along the azimuth (width) axis:

    scores[i] = sum_{h,w,c} Fs(h, (i + w) mod W_s, c) * Fg(h, w, c)

The argmax over i is the estimated relative orientation. Full panoramas are
scored by the peak correlation of unit-normalized descriptors; limited
field-of-view queries crop the overhead descriptor at the best shift,
re-normalize the crop, and score by negated Frobenius distance. A spectral
backend evaluates the same correlation with one inverse real FFT per pair
and supports precomputed reference spectra for database ranking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import descriptor_width, l2_normalize

__all__ = [
    "MatchResult",
    "correlate_direct",
    "correlate_fft",
    "volume_spectrum",
    "estimate_orientation",
    "score_pair",
    "rank_database",
    "profiles_direct",
    "profiles_fft",
]


@dataclass(frozen=True)
class MatchResult:
    """One reference scored against a query."""

    ref_id: int
    shift: int
    azimuth_deg: float
    similarity: float


def _check_pair(fs: np.ndarray, fg: np.ndarray):
    if fs.ndim != 3 or fg.ndim != 3:
        raise ValueError(f"expected (H, W, C) volumes, got {fs.shape} and {fg.shape}")
    if fs.shape[0] != fg.shape[0] or fs.shape[2] != fg.shape[2]:
        raise ValueError(f"volume shapes incompatible: {fs.shape} vs {fg.shape}")
    if fg.shape[1] > fs.shape[1]:
        raise ValueError(
            f"query width {fg.shape[1]} exceeds reference width {fs.shape[1]}"
        )


def correlate_direct(fs: np.ndarray, fg: np.ndarray) -> np.ndarray:
    """Spatial-domain circular correlation profile of length W_s."""
    fs = np.asarray(fs)
    fg = np.asarray(fg)
    _check_pair(fs, fg)
    ws = fs.shape[1]
    wg = fg.shape[1]
    if wg > 1:
        doubled = np.concatenate([fs, fs[:, : wg - 1, :]], axis=1)
    else:
        doubled = fs
    windows = np.lib.stride_tricks.sliding_window_view(doubled, wg, axis=1)
    # windows: (H, W_s, C, W_g); shift i aligns fs columns i..i+wg-1 with fg.
    return np.einsum("hscw,hwc->s", windows, fg, optimize=True).astype(np.float32)


def volume_spectrum(vol: np.ndarray, ws: int | None = None) -> np.ndarray:
    """Real FFT of a volume along the width axis, zero-padded to length ws."""
    vol = np.asarray(vol)
    n = vol.shape[1] if ws is None else int(ws)
    return np.fft.rfft(vol, n=n, axis=1)


def correlate_fft(fs: np.ndarray, fg: np.ndarray, fs_spec: np.ndarray | None = None) -> np.ndarray:
    """Spectral evaluation of `correlate_direct`.

    Per-(h, c) spectra are multiplied and summed over (h, c) first, so a
    single inverse transform of length W_s serves the whole pair. `fs_spec`
    short-circuits the reference transform when spectra are cached.
    """
    fs = np.asarray(fs)
    fg = np.asarray(fg)
    _check_pair(fs, fg)
    ws = fs.shape[1]
    if fs_spec is None:
        fs_spec = volume_spectrum(fs)
    g_spec = volume_spectrum(fg, ws=ws)
    prod = (fs_spec * np.conj(g_spec)).sum(axis=(0, 2))
    return np.fft.irfft(prod, n=ws).astype(np.float32)


def estimate_orientation(profile: np.ndarray, tie_break: str = "first",
                         rng: np.random.Generator | None = None) -> tuple[int, float]:
    """Argmax of a correlation profile as (shift, azimuth degrees).

    Ties take the smallest index by default, which keeps runs reproducible;
    tie_break="random" picks uniformly among the maxima (seed via `rng`) for
    scenes with indistinguishable symmetries.
    """
    if tie_break not in ("first", "random"):
        raise ValueError(f"unknown tie_break {tie_break!r}")
    profile = np.asarray(profile)
    if profile.ndim != 1 or profile.size == 0:
        raise ValueError(f"expected a non-empty 1-D profile, got shape {profile.shape}")
    peak = profile.max()
    ties = np.flatnonzero(profile == peak)
    if tie_break == "first" or ties.size == 1:
        shift = int(ties[0])
    else:
        rng = np.random.default_rng() if rng is None else rng
        shift = int(rng.choice(ties))
    return shift, 360.0 * shift / profile.size


def _crop_cyclic(fs: np.ndarray, start: int, width: int) -> np.ndarray:
    idx = (start + np.arange(width)) % fs.shape[1]
    return fs[:, idx, :]


def score_pair(fs_desc: np.ndarray, fg_desc: np.ndarray, fov_deg: float = 360.0,
               fs_spec: np.ndarray | None = None,
               backend: str = "fft") -> tuple[int, float, float]:
    """Score one reference descriptor against one query descriptor.

    Returns (shift, azimuth_deg, similarity). The query width must equal
    descriptor_width(fov_deg) for the reference width. `fs_spec`, when given,
    must be the spectrum of the unit-normalized reference descriptor.
    """
    fs_desc = np.asarray(fs_desc)
    fg_desc = np.asarray(fg_desc)
    expected = descriptor_width(fov_deg, grid_w=fs_desc.shape[1])
    if fg_desc.shape[1] != expected:
        raise ValueError(
            f"query width {fg_desc.shape[1]} does not match fov {fov_deg} "
            f"(expected {expected} columns)"
        )
    fg_n = l2_normalize(fg_desc)
    if fs_spec is None:
        fs_n = l2_normalize(fs_desc)
        if backend == "fft":
            profile = correlate_fft(fs_n, fg_n)
        elif backend == "direct":
            profile = correlate_direct(fs_n, fg_n)
        else:
            raise ValueError(f"unknown backend {backend!r}")
    else:
        fs_n = fs_desc  # caller passed the normalized descriptor with its spectrum
        profile = correlate_fft(fs_n, fg_n, fs_spec=fs_spec)
    shift, azimuth = estimate_orientation(profile)
    if fov_deg == 360.0:
        similarity = float(profile[shift])
    else:
        crop = l2_normalize(_crop_cyclic(fs_n, shift, fg_n.shape[1]))
        similarity = -float(np.linalg.norm(crop - fg_n))
    return shift, azimuth, similarity


def rank_database(fg_desc: np.ndarray, references, fov_deg: float = 360.0) -> list[MatchResult]:
    """Score a query against every (ref_id, descriptor) pair and sort.

    Results are ordered by similarity descending with ties broken by id, so
    rankings are deterministic. Raises on an empty reference list.
    """
    refs = list(references)
    if not refs:
        raise ValueError("rank_database: empty reference database")
    fg_n = l2_normalize(np.asarray(fg_desc))
    results = []
    for ref_id, desc in refs:
        fs_n = l2_normalize(np.asarray(desc))
        profile = correlate_fft(fs_n, fg_n)
        shift, azimuth = estimate_orientation(profile)
        if fov_deg == 360.0:
            similarity = float(profile[shift])
        else:
            crop = l2_normalize(_crop_cyclic(fs_n, shift, fg_n.shape[1]))
            similarity = -float(np.linalg.norm(crop - fg_n))
        results.append(MatchResult(int(ref_id), shift, azimuth, similarity))
    results.sort(key=lambda m: (-m.similarity, m.ref_id))
    return results


def profiles_direct(refs: np.ndarray, fg: np.ndarray) -> np.ndarray:
    """Spatial-domain correlation profiles for a stacked reference bank.

    refs: (N, H, W_s, C); fg: (H, W_g, C); returns (N, W_s).
    """
    refs = np.asarray(refs)
    fg = np.asarray(fg)
    wg = fg.shape[1]
    if wg > 1:
        doubled = np.concatenate([refs, refs[:, :, : wg - 1, :]], axis=2)
    else:
        doubled = refs
    windows = np.lib.stride_tricks.sliding_window_view(doubled, wg, axis=2)
    return np.einsum("nhscw,hwc->ns", windows, fg, optimize=True).astype(np.float32)


def profiles_fft(ref_spectra: np.ndarray, fg: np.ndarray, ws: int) -> np.ndarray:
    """Spectral correlation profiles against precomputed reference spectra.

    ref_spectra: (N, H, W_s//2+1, C) from `volume_spectrum`; returns (N, W_s).
    """
    g_spec = np.conj(volume_spectrum(np.asarray(fg), ws=ws))
    prod = np.einsum("nhkc,hkc->nk", ref_spectra, g_spec, optimize=True)
    return np.fft.irfft(prod, n=ws, axis=1).astype(np.float32)
