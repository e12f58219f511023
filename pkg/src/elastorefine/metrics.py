"""Image-quality and physics metrics: ROI statistics, CNR, SR, incompressibility residual, EPR histogram."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .epr import DEFAULT_BOUNDS
from .errors import DegenerateStatisticsError, DimensionError, ParameterError
from .grid import Grid2D, StrainPair, _same_geometry

DEFAULT_HIST_BINS = 64
DEFAULT_HIST_RANGE = (-0.5, 1.5)


@dataclass(frozen=True)
class RoiSpec:
    row_start: int
    col_start: int
    rows: int
    cols: int

    def __post_init__(self):
        if min(self.row_start, self.col_start) < 0 or min(self.rows, self.cols) < 1:
            raise DimensionError(f"invalid ROI {self}")
        if self.rows * self.cols < 2:
            raise DimensionError("ROI needs at least 2 pixels for a standard deviation")

    @classmethod
    def parse(cls, text: str) -> "RoiSpec":
        """Parse ``"r0,c0,h,w"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ParameterError(f"ROI must be 'r0,c0,h,w', got {text!r}")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError as exc:
            raise ParameterError(f"ROI must be four integers, got {text!r}") from exc

    def slices(self) -> tuple[slice, slice]:
        return (slice(self.row_start, self.row_start + self.rows),
                slice(self.col_start, self.col_start + self.cols))

    def check_inside(self, shape: tuple[int, int]):
        if self.row_start + self.rows > shape[0] or self.col_start + self.cols > shape[1]:
            raise DimensionError(f"ROI {self} extends outside the {shape[0]}x{shape[1]} grid")

    def __str__(self):
        return f"{self.row_start},{self.col_start},{self.rows},{self.cols}"


@dataclass(frozen=True)
class RoiStats:
    mean: float
    std: float
    count: int

    def scaled(self, alpha: float) -> "RoiStats":
        return RoiStats(alpha * self.mean, abs(alpha) * self.std, self.count)


@dataclass(frozen=True)
class EprHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    in_range_fraction: float


def roi_stats(g: Grid2D, roi: RoiSpec) -> RoiStats:
    """Mean and population standard deviation over a rectangular ROI."""
    roi.check_inside(g.shape)
    v = g.values[roi.slices()]
    mean = float(v.mean())
    return RoiStats(mean, float(np.sqrt(np.mean((v - mean) ** 2))), int(v.size))


def cnr(target: RoiStats, background: RoiStats) -> float:
    var = background.std ** 2 + target.std ** 2
    if var == 0:
        raise DegenerateStatisticsError("CNR undefined: both ROIs have zero variance (infinite contrast)")
    return math.sqrt(2.0 * (background.mean - target.mean) ** 2 / var)


def sr(target: RoiStats, background: RoiStats) -> float:
    if background.mean == 0:
        raise DegenerateStatisticsError("SR undefined: background ROI mean is zero")
    return target.mean / background.mean


def incompressibility_residual(strains: StrainPair) -> tuple[Grid2D, float]:
    """``eps11 + 2 eps22`` on interior pixels (border set to 0) and its RMS over the interior."""
    _same_geometry(strains.axial, strains.lateral)
    r = strains.axial.values[1:-1, 1:-1] + 2.0 * strains.lateral.values[1:-1, 1:-1]
    full = np.zeros(strains.geometry.shape)
    full[1:-1, 1:-1] = r
    return strains.axial.with_values(full), float(np.sqrt(np.mean(r * r)))


def epr_histogram(epr, bounds=None, bins: int = DEFAULT_HIST_BINS,
                  value_range: tuple[float, float] = DEFAULT_HIST_RANGE) -> EprHistogram:
    """Histogram of non-degenerate EPR values; values outside ``value_range`` land in the end bins."""
    bounds = bounds or DEFAULT_BOUNDS
    lo, hi = value_range
    if int(bins) != bins or bins < 1:
        raise ParameterError(f"bins must be a positive integer, got {bins}")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ParameterError(f"histogram range must satisfy lo < hi, got {value_range}")
    v = epr.valid_values()
    edges = np.linspace(lo, hi, int(bins) + 1)
    counts, _ = np.histogram(np.clip(v, lo, hi), bins=edges)
    inside = np.count_nonzero((v > bounds.v_min) & (v < bounds.v_max))
    frac = inside / v.size if v.size else 0.0
    return EprHistogram(edges, counts.astype(np.int64), float(frac))
