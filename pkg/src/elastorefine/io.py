"""File formats: EFG1 binary grids, histogram CSV, binary PGM images.

EFG1 layout (all little-endian)::

    offset  size  field
    0       4     magic b"EFG1"
    4       4     rows (uint32)
    8       4     cols (uint32)
    12      8     axial_spacing (float64, mm)
    20      8     lateral_spacing (float64, mm)
    28      4*N   values, float32, row-major, N = rows*cols

Grids are computed in float64 and narrowed to float32 on write.
Concurrent writes to the same path are not supported.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ParameterError
from .grid import Grid2D, GridGeometry
from .metrics import EprHistogram

MAGIC = b"EFG1"
HEADER = struct.Struct("<4sIIdd")
HEADER_SIZE = HEADER.size  # 28
_F32 = np.dtype("<f4")


def encode_grid(g: Grid2D) -> bytes:
    geom = g.geometry
    with np.errstate(over="ignore"):
        payload = g.values.astype(_F32)
    if not np.all(np.isfinite(payload)):
        raise FormatError("grid value exceeds float32 range")
    header = HEADER.pack(MAGIC, geom.rows, geom.cols, geom.axial_spacing, geom.lateral_spacing)
    return header + payload.tobytes(order="C")


def decode_grid(data: bytes, path=None) -> Grid2D:
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}", 0, path)
    if len(data) < HEADER_SIZE:
        raise FormatError(f"truncated header: {len(data)} of {HEADER_SIZE} bytes", len(data), path)
    _, rows, cols, da, dl = HEADER.unpack_from(data)
    n = rows * cols
    expected = HEADER_SIZE + 4 * n
    if len(data) < expected:
        raise FormatError(f"truncated payload: {rows}x{cols} needs {expected} bytes, file has {len(data)}",
                          len(data), path)
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after payload", expected, path)
    try:
        geom = GridGeometry(rows, cols, da, dl)
    except (DimensionError, ParameterError) as exc:
        raise FormatError(f"invalid header: {exc}", 4, path) from exc
    values = np.frombuffer(data, dtype=_F32, count=n, offset=HEADER_SIZE).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FormatError("non-finite payload value", HEADER_SIZE + 4 * int(bad[0]), path)
    return Grid2D(geom, values.reshape(rows, cols))


def write_grid(g: Grid2D, path) -> None:
    Path(path).write_bytes(encode_grid(g))


def read_grid(path) -> Grid2D:
    return decode_grid(Path(path).read_bytes(), path)


def _pgm_levels(g: Grid2D, lo: float | None, hi: float | None) -> np.ndarray:
    v = g.values
    if lo is None or hi is None:
        lo, hi = float(v.min()), float(v.max())
        if lo == hi:
            return np.full(v.shape, 128, dtype=np.uint8)
    elif not lo < hi:
        raise ParameterError(f"fixed normalization needs lo < hi, got ({lo}, {hi})")
    scaled = np.clip((v - lo) / (hi - lo), 0.0, 1.0) * 255.0
    return np.rint(scaled).astype(np.uint8)


def encode_pgm(g: Grid2D, normalization: str = "minmax", lo: float | None = None,
               hi: float | None = None) -> bytes:
    if normalization == "minmax":
        lo = hi = None
    elif normalization == "fixed":
        if lo is None or hi is None:
            raise ParameterError("fixed normalization needs lo and hi")
    else:
        raise ParameterError(f"normalization must be 'minmax' or 'fixed', got {normalization!r}")
    pixels = _pgm_levels(g, lo, hi)
    rows, cols = pixels.shape
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + pixels.tobytes(order="C")


def render_pgm(g: Grid2D, path, normalization: str = "minmax", lo: float | None = None,
               hi: float | None = None) -> None:
    """Write an 8-bit binary PGM; rows are axial depth, columns lateral position."""
    Path(path).write_bytes(encode_pgm(g, normalization, lo, hi))


def format_histogram_csv(h: EprHistogram) -> str:
    lines = ["bin_lo,bin_hi,count"]
    edges = h.bin_edges
    for k, count in enumerate(h.counts):
        lines.append(f"{float(edges[k])!r},{float(edges[k + 1])!r},{int(count)}")
    return "\n".join(lines) + "\n"


def write_histogram_csv(h: EprHistogram, path) -> None:
    path = Path(path)
    try:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            fh.write(format_histogram_csv(h))
    except OSError as exc:
        raise OSError(f"cannot write histogram to {path}: {exc.strerror}") from exc


def read_histogram_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(bin_edges, counts)`` parsed from a histogram CSV."""
    text = Path(path).read_text(encoding="ascii")
    lines = text.split("\n")
    if lines[0] != "bin_lo,bin_hi,count":
        raise FormatError("missing histogram header", 0, path)
    lows, highs, counts = [], [], []
    for line in lines[1:]:
        if not line:
            continue
        a, b, c = line.split(",")
        lows.append(float(a))
        highs.append(float(b))
        counts.append(int(c))
    if not counts:
        raise FormatError("histogram has no bins", len(lines[0]) + 1, path)
    edges = np.array(lows + [highs[-1]])
    if highs[:-1] != lows[1:]:
        raise FormatError("histogram bins are not contiguous", None, path)
    return edges, np.array(counts, dtype=np.int64)
