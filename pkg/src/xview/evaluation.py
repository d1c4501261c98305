"""Retrieval harness: descriptor database, metrics, and the correlation
backend benchmark.

The database file format (little-endian) is:

    magic "XVDB" | u16 version=1 | u32 count | u16 h | u16 w | u16 c_total
    per entry: u64 id | f64 x_m | f64 y_m | h*w*c_total f32 descriptor

Width-axis spectra are recomputed at load rather than stored, which keeps
the file readable by any implementation of the format.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .features import l2_normalize
from .matching import (MatchResult, estimate_orientation, profiles_direct,
                       profiles_fft, _crop_cyclic)

__all__ = [
    "DbFormatError",
    "DescriptorDB",
    "RetrievalResult",
    "recall_at_k",
    "distance_recall",
    "orientation_accuracy",
    "overall",
    "bench_correlation",
    "format_bench_report",
]

_MAGIC = b"XVDB"
_VERSION = 1


class DbFormatError(Exception):
    """Raised when a database file fails validation; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DescriptorDB:
    """Immutable bank of reference descriptors with geotags.

    Descriptors are stored raw; unit-normalized copies and their width-axis
    spectra are derived deterministically at construction so ranking can run
    the cached spectral path.
    """

    def __init__(self, ids, geotags, descriptors):
        self.ids = np.asarray(ids, dtype=np.uint64)
        self.geotags = np.asarray(geotags, dtype=np.float64).reshape(len(self.ids), 2)
        self.descriptors = np.asarray(descriptors, dtype=np.float32)
        if self.descriptors.ndim != 4 or len(self.descriptors) != len(self.ids):
            raise ValueError(
                f"descriptors must be (N, H, W, C) matching {len(self.ids)} ids, "
                f"got {self.descriptors.shape}"
            )
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("reference ids must be unique")
        self._normalized = np.stack([l2_normalize(d) for d in self.descriptors]) \
            if len(self.ids) else self.descriptors
        self._spectra = np.fft.rfft(self._normalized, axis=2)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def width(self) -> int:
        return self.descriptors.shape[2]

    def geotag_of(self, ref_id: int) -> tuple[float, float]:
        idx = np.flatnonzero(self.ids == np.uint64(ref_id))
        if idx.size == 0:
            raise ValueError(f"unknown reference id {ref_id}")
        x, y = self.geotags[idx[0]]
        return float(x), float(y)

    def rank(self, fg_desc: np.ndarray, fov_deg: float = 360.0) -> list[MatchResult]:
        """Rank every reference against a query descriptor (cached spectra)."""
        if len(self) == 0:
            raise ValueError("rank: empty database")
        fg_n = l2_normalize(np.asarray(fg_desc))
        ws = self.width
        profiles = profiles_fft(self._spectra, fg_n, ws)
        results = []
        for row, ref_id in enumerate(self.ids):
            shift, azimuth = estimate_orientation(profiles[row])
            if fov_deg == 360.0:
                similarity = float(profiles[row][shift])
            else:
                crop = l2_normalize(_crop_cyclic(self._normalized[row], shift, fg_n.shape[1]))
                similarity = -float(np.linalg.norm(crop - fg_n))
            results.append(MatchResult(int(ref_id), shift, azimuth, similarity))
        results.sort(key=lambda m: (-m.similarity, m.ref_id))
        return results

    def save(self, path) -> None:
        n, h, w, c = self.descriptors.shape
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<HIHHH", _VERSION, n, h, w, c))
            for i in range(n):
                fh.write(struct.pack("<Qdd", int(self.ids[i]),
                                     float(self.geotags[i, 0]), float(self.geotags[i, 1])))
                fh.write(self.descriptors[i].astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "DescriptorDB":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 4 or data[:4] != _MAGIC:
            raise DbFormatError(f"bad magic {data[:4]!r}, expected {_MAGIC!r}", 0)
        header = struct.Struct("<HIHHH")
        if len(data) < 4 + header.size:
            raise DbFormatError("truncated header", len(data))
        version, count, h, w, c = header.unpack_from(data, 4)
        if version != _VERSION:
            raise DbFormatError(f"unsupported version {version}", 4)
        pos = 4 + header.size
        entry = struct.Struct("<Qdd")
        desc_bytes = h * w * c * 4
        ids = np.empty(count, dtype=np.uint64)
        geotags = np.empty((count, 2), dtype=np.float64)
        descs = np.empty((count, h, w, c), dtype=np.float32)
        for i in range(count):
            if pos + entry.size + desc_bytes > len(data):
                raise DbFormatError(f"truncated entry {i} of {count}", pos)
            rid, x, y = entry.unpack_from(data, pos)
            pos += entry.size
            vals = np.frombuffer(data, dtype="<f4", count=h * w * c, offset=pos)
            pos += desc_bytes
            ids[i] = rid
            geotags[i] = (x, y)
            descs[i] = vals.reshape(h, w, c)
        return cls(ids, geotags, descs)


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked references for one query, with its ground truth."""

    query_id: int
    truth_ref_id: int
    truth_azimuth_deg: float
    matches: list[MatchResult] = field(repr=False)
    query_pos: tuple[float, float] | None = None


def recall_at_k(results, k: int) -> float:
    """Fraction of queries whose true reference appears in the top k."""
    results = list(results)
    if not results:
        raise ValueError("recall_at_k: empty result list")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits = sum(1 for r in results
               if any(m.ref_id == r.truth_ref_id for m in r.matches[:k]))
    return hits / len(results)


def distance_recall(results, geotags, radius_m: float = 5.0, k: int = 1) -> float:
    """Fraction of queries with any top-k reference within `radius_m` of the
    query's true position.

    `geotags` maps reference id to (x, y) meters. The query position is
    `query_pos` when the result carries one, otherwise the geotag of its
    true reference.
    """
    results = list(results)
    if not results:
        raise ValueError("distance_recall: empty result list")
    hits = 0
    for r in results:
        if r.query_pos is not None:
            qx, qy = r.query_pos
        elif r.truth_ref_id in geotags:
            qx, qy = geotags[r.truth_ref_id]
        else:
            raise ValueError(f"missing geotag for reference {r.truth_ref_id}")
        for m in r.matches[:k]:
            if m.ref_id not in geotags:
                raise ValueError(f"missing geotag for reference {m.ref_id}")
            gx, gy = geotags[m.ref_id]
            if np.hypot(gx - qx, gy - qy) <= radius_m:
                hits += 1
                break
    return hits / len(results)


def circular_error_deg(a: float, b: float) -> float:
    """Smallest absolute angular difference on the circle, in [0, 180]."""
    return abs((a - b + 180.0) % 360.0 - 180.0)


def orientation_accuracy(results, fov_deg: float) -> float | None:
    """Fraction of top-1-correct queries with azimuth error within 10% of the
    field of view; None (undefined) when no query is top-1 correct."""
    results = list(results)
    if not results:
        raise ValueError("orientation_accuracy: empty result list")
    threshold = 0.1 * fov_deg
    considered = 0
    hits = 0
    for r in results:
        if not r.matches or r.matches[0].ref_id != r.truth_ref_id:
            continue
        considered += 1
        if circular_error_deg(r.matches[0].azimuth_deg, r.truth_azimuth_deg) <= threshold:
            hits += 1
    if considered == 0:
        return None
    return hits / considered


def overall(loc_acc: float, orien_acc: float) -> float:
    """Combined 3-DoF score: location accuracy times orientation accuracy."""
    for name, v in (("loc_acc", loc_acc), ("orien_acc", orien_acc)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    return loc_acc * orien_acc


def bench_correlation(n_refs: int, h: int = 4, w: int = 64, c: int = 16,
                      repetitions: int = 5, query_w: int | None = None,
                      seed: int = 0) -> dict:
    """Median wall time of the direct and spectral correlation backends.

    Measures scoring one query against `n_refs` references, with reference
    spectra precomputed for the spectral path as they would be in a deployed
    database. Returns a report dict with nanosecond medians and the speedup.
    """
    if min(n_refs, h, w, c, repetitions) < 1:
        raise ValueError("all benchmark sizes must be >= 1")
    wg = w if query_w is None else query_w
    rng = np.random.default_rng(seed)
    refs = rng.standard_normal((n_refs, h, w, c)).astype(np.float32)
    query = rng.standard_normal((h, wg, c)).astype(np.float32)
    spectra = np.fft.rfft(refs, axis=2)

    def median_ns(fn):
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter_ns()
            fn()
            times.append(time.perf_counter_ns() - t0)
        return int(np.median(times))

    profiles_direct(refs, query)  # warm-up both paths once
    profiles_fft(spectra, query, w)
    direct_ns = median_ns(lambda: profiles_direct(refs, query))
    fft_ns = median_ns(lambda: profiles_fft(spectra, query, w))
    return {
        "n_refs": n_refs, "h": h, "w": w, "c": c, "query_w": wg,
        "repetitions": repetitions,
        "direct_ns": direct_ns, "fft_ns": fft_ns,
        "speedup": direct_ns / fft_ns if fft_ns else float("inf"),
    }


def format_bench_report(report: dict) -> str:
    lines = [
        f"correlation benchmark: N={report['n_refs']} volumes "
        f"{report['h']}x{report['w']}x{report['c']} (query width {report['query_w']}), "
        f"median of {report['repetitions']} runs",
        f"direct_ns={report['direct_ns']}",
        f"fft_ns={report['fft_ns']}",
        f"speedup={report['speedup']:.2f}",
    ]
    return "\n".join(lines)
