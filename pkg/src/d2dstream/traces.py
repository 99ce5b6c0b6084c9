"""Per-chunk multi-quality video traces: CSV + JSON sidecar I/O and a synthetic generator.

File format
-----------
``<name>.csv`` with header ``chunk,mode,psnr_db,bits_per_pixel``; one row per
(chunk, mode), chunks numbered from 0 and modes from 1 in ascending bit order.
``<name>.json`` sidecar: ``{"file_id": ..., "pixels_per_chunk": ..., "chunk_seconds": ...}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

CSV_HEADER = ["chunk", "mode", "psnr_db", "bits_per_pixel"]


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class ChunkQualityEntry:
    psnr_db: float
    bits_per_pixel: float
    total_bits: float


@dataclass(frozen=True)
class VideoTrace:
    """Immutable trace. ``psnr`` and ``bits`` are (chunks, modes) arrays, bits ascending per row."""

    file_id: str
    pixels_per_chunk: int
    psnr: np.ndarray
    bits_per_pixel: np.ndarray
    chunk_seconds: float = 0.5

    def __post_init__(self) -> None:
        psnr = np.asarray(self.psnr, dtype=float)
        bpp = np.asarray(self.bits_per_pixel, dtype=float)
        if psnr.ndim != 2 or psnr.shape != bpp.shape:
            raise TraceError("psnr and bits_per_pixel must be equal-shape (chunks, modes) arrays")
        if psnr.shape[0] == 0 or psnr.shape[1] == 0:
            raise TraceError("trace must contain at least one chunk and one mode")
        if self.pixels_per_chunk <= 0:
            raise TraceError("pixels_per_chunk must be positive")
        if np.any(bpp <= 0) or not np.all(np.isfinite(bpp)):
            raise TraceError("bits_per_pixel must be positive")
        if np.any(psnr <= 0) or np.any(psnr >= 100):
            raise TraceError("psnr_db must lie in (0, 100)")
        _check_monotone(psnr, bpp)
        for a in (psnr, bpp):
            a.setflags(write=False)
        object.__setattr__(self, "psnr", psnr)
        object.__setattr__(self, "bits_per_pixel", bpp)
        object.__setattr__(self, "bits", bpp * self.pixels_per_chunk)

    @property
    def num_chunks(self) -> int:
        return self.psnr.shape[0]

    @property
    def num_modes(self) -> int:
        return self.psnr.shape[1]

    def entries(self, chunk: int) -> list[ChunkQualityEntry]:
        return [
            ChunkQualityEntry(float(p), float(b), float(t))
            for p, b, t in zip(self.psnr[chunk], self.bits_per_pixel[chunk], self.bits[chunk])
        ]


def _check_monotone(psnr: np.ndarray, bpp: np.ndarray, first_line: int | None = None) -> None:
    bad_bits = np.diff(bpp, axis=1) <= 0
    bad_psnr = np.diff(psnr, axis=1) <= 0
    bad = bad_bits | bad_psnr
    if np.any(bad):
        chunk, mode = (int(x) for x in np.argwhere(bad)[0])
        what = "bits_per_pixel not increasing" if bad_bits[chunk, mode] else "psnr_db not increasing with bits (dominated mode)"
        where = f"chunk {chunk}, mode {mode + 2}"
        if first_line is not None:
            where += f" (line {first_line + chunk * psnr.shape[1] + mode + 1})"
        raise TraceError(f"{what} at {where}")


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".json")


def parse_trace(csv_text: str, sidecar: dict) -> VideoTrace:
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceError("empty trace file") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise TraceError(f"line 1: expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
    rows: dict[int, dict[int, tuple[float, float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise TraceError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            chunk, mode = int(row[0]), int(row[1])
            psnr, bpp = float(row[2]), float(row[3])
        except ValueError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
        if not (0 < psnr < 100):
            raise TraceError(f"line {lineno}: psnr_db {psnr} outside (0, 100)")
        if not (bpp > 0 and math.isfinite(bpp)):
            raise TraceError(f"line {lineno}: bits_per_pixel must be positive")
        modes = rows.setdefault(chunk, {})
        if mode in modes:
            raise TraceError(f"line {lineno}: duplicate (chunk {chunk}, mode {mode})")
        prev = modes.get(mode - 1)
        if prev is not None:
            if bpp <= prev[1]:
                raise TraceError(f"line {lineno}: bits_per_pixel not increasing with mode")
            if psnr <= prev[0]:
                raise TraceError(f"line {lineno}: psnr_db not increasing with bits (dominated mode)")
        modes[mode] = (psnr, bpp)
    if not rows:
        raise TraceError("trace contains no chunks")
    if sorted(rows) != list(range(len(rows))):
        raise TraceError("chunk indices must be contiguous from 0")
    m = len(rows[0])
    for c, modes in rows.items():
        if sorted(modes) != list(range(1, m + 1)):
            raise TraceError(f"chunk {c}: expected modes 1..{m}, got {sorted(modes)}")
    psnr = np.array([[rows[c][q][0] for q in range(1, m + 1)] for c in range(len(rows))])
    bpp = np.array([[rows[c][q][1] for q in range(1, m + 1)] for c in range(len(rows))])
    try:
        return VideoTrace(
            file_id=str(sidecar["file_id"]),
            pixels_per_chunk=int(sidecar["pixels_per_chunk"]),
            psnr=psnr,
            bits_per_pixel=bpp,
            chunk_seconds=float(sidecar.get("chunk_seconds", 0.5)),
        )
    except KeyError as exc:
        raise TraceError(f"sidecar is missing {exc}") from None


def load_trace(path: str | Path) -> VideoTrace:
    path = Path(path)
    sidecar_path = _sidecar_path(path)
    if not sidecar_path.exists():
        raise TraceError(f"missing sidecar {sidecar_path}")
    return parse_trace(path.read_text(), json.loads(sidecar_path.read_text()))


def format_trace_csv(trace: VideoTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in range(trace.num_chunks):
        for q in range(trace.num_modes):
            w.writerow([c, q + 1, repr(float(trace.psnr[c, q])), repr(float(trace.bits_per_pixel[c, q]))])
    return buf.getvalue()


def save_trace(trace: VideoTrace, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(format_trace_csv(trace))
    sidecar = {
        "file_id": trace.file_id,
        "pixels_per_chunk": trace.pixels_per_chunk,
        "chunk_seconds": trace.chunk_seconds,
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2) + "\n")
    return path


class RateDistortionParams(BaseModel):
    """Synthetic rate-quality model: ``psnr = a + b * log2(bpp)`` plus per-chunk jitter.

    Mode bitrates are spaced geometrically between ``min_bitrate_bps`` and
    ``max_bitrate_bps``; per-chunk scene complexity scales all modes of a chunk
    by one log-normal factor.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    pixels_per_chunk: int = Field(1280 * 720 * 15, gt=0)
    min_bitrate_bps: float = Field(0.5e6, gt=0)
    max_bitrate_bps: float = Field(8.0e6, gt=0)
    complexity_sigma: float = Field(0.3, ge=0)
    psnr_intercept_db: float = 49.5
    psnr_slope_db: float = Field(3.0, gt=0)
    psnr_jitter_db: float = Field(0.5, ge=0)


def generate_synthetic(
    num_chunks: int,
    modes: int,
    seed: int | np.random.Generator,
    rd_params: RateDistortionParams | None = None,
    file_id: str = "synthetic",
    chunk_seconds: float = 0.5,
) -> VideoTrace:
    if modes < 1:
        raise ValueError("need at least one quality mode")
    if num_chunks < 1:
        raise ValueError("need at least one chunk")
    rd = rd_params or RateDistortionParams()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.Philox(seed))
    if modes == 1:
        rates = np.array([math.sqrt(rd.min_bitrate_bps * rd.max_bitrate_bps)])
    else:
        rates = np.geomspace(rd.min_bitrate_bps, rd.max_bitrate_bps, modes)
    base_bpp = rates * chunk_seconds / rd.pixels_per_chunk
    complexity = rng.lognormal(0.0, rd.complexity_sigma, size=(num_chunks, 1))
    jitter = rng.normal(0.0, rd.psnr_jitter_db, size=(num_chunks, 1))
    bpp = base_bpp[None, :] * complexity
    psnr = rd.psnr_intercept_db + rd.psnr_slope_db * np.log2(base_bpp)[None, :] + jitter
    psnr = np.clip(psnr, 1.0, 99.0)
    return VideoTrace(file_id, rd.pixels_per_chunk, psnr, bpp, chunk_seconds)
