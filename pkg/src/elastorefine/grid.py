"""Grid containers, finite-difference derivatives and separable Gaussian smoothing.

Axis convention: row index ``i`` runs along the axial coordinate ``a`` (depth),
column index ``j`` runs along the lateral coordinate ``l``. All arithmetic is
float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError

MIN_SIDE = 3


@dataclass(frozen=True)
class GridGeometry:
    rows: int
    cols: int
    axial_spacing: float = 1.0
    lateral_spacing: float = 1.0

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise DimensionError(f"grid dimensions must be integers, got {self.rows}x{self.cols}")
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        if self.rows < MIN_SIDE or self.cols < MIN_SIDE:
            raise DimensionError(
                f"grid must be at least {MIN_SIDE}x{MIN_SIDE}, got {self.rows}x{self.cols}"
            )
        for name in ("axial_spacing", "lateral_spacing"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be positive and finite, got {value}")
            object.__setattr__(self, name, value)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def transposed(self) -> "GridGeometry":
        return GridGeometry(self.cols, self.rows, self.lateral_spacing, self.axial_spacing)


class Grid2D:
    """Immutable 2-D scalar field on a :class:`GridGeometry`.

    ``values`` is a read-only C-ordered float64 array of shape ``(rows, cols)``.
    """

    __slots__ = ("geometry", "values")

    def __init__(self, geometry: GridGeometry, values):
        arr = np.array(values, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 1 and arr.size == geometry.rows * geometry.cols:
            arr = arr.reshape(geometry.shape)
        if arr.shape != geometry.shape:
            raise DimensionError(f"values of shape {arr.shape} do not match geometry {geometry.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ParameterError(f"grid contains a non-finite value at (i={bad[0]}, j={bad[1]})")
        arr.setflags(write=False)
        self.geometry = geometry
        self.values = arr

    @classmethod
    def from_array(cls, values, axial_spacing: float = 1.0, lateral_spacing: float = 1.0) -> "Grid2D":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"expected a 2-D array, got {arr.ndim}-D")
        return cls(GridGeometry(arr.shape[0], arr.shape[1], axial_spacing, lateral_spacing), arr)

    @classmethod
    def full(cls, geometry: GridGeometry, value: float) -> "Grid2D":
        return cls(geometry, np.full(geometry.shape, float(value)))

    def with_values(self, values) -> "Grid2D":
        return Grid2D(self.geometry, values)

    def transposed(self) -> "Grid2D":
        return Grid2D(self.geometry.transposed(), self.values.T)

    @property
    def shape(self) -> tuple[int, int]:
        return self.geometry.shape

    def __repr__(self):
        g = self.geometry
        return f"Grid2D({g.rows}x{g.cols}, da={g.axial_spacing}, dl={g.lateral_spacing})"


def _same_geometry(*grids: Grid2D) -> GridGeometry:
    geom = grids[0].geometry
    for g in grids[1:]:
        if g.geometry != geom:
            raise DimensionError(f"geometry mismatch: {geom} vs {g.geometry}")
    return geom


@dataclass(frozen=True)
class DisplacementField:
    """Axial (``w_a``) and lateral (``w_l``) displacement in mm on one grid."""

    axial: Grid2D
    lateral: Grid2D

    def __post_init__(self):
        _same_geometry(self.axial, self.lateral)

    @property
    def geometry(self) -> GridGeometry:
        return self.axial.geometry

    def with_lateral(self, values) -> "DisplacementField":
        return DisplacementField(self.axial, self.lateral.with_values(values))


@dataclass(frozen=True)
class StrainPair:
    """Axial strain ``eps11`` and lateral strain ``eps22``."""

    axial: Grid2D
    lateral: Grid2D

    def __post_init__(self):
        _same_geometry(self.axial, self.lateral)

    @property
    def geometry(self) -> GridGeometry:
        return self.axial.geometry

    def scaled(self, factor: float) -> "StrainPair":
        return StrainPair(
            self.axial.with_values(self.axial.values * factor),
            self.lateral.with_values(self.lateral.values * factor),
        )

    def transposed(self) -> "StrainPair":
        return StrainPair(self.axial.transposed(), self.lateral.transposed())


def _diff_axis0(v: np.ndarray, h: float) -> np.ndarray:
    n = v.shape[0]
    if n < MIN_SIDE:
        raise DimensionError(f"derivative needs at least {MIN_SIDE} samples along the axis, got {n}")
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (v[1] - v[0]) / h
    out[-1] = (v[-1] - v[-2]) / h
    return out


def gradient_axial(g: Grid2D) -> Grid2D:
    """Derivative along rows per unit length.

    Central differences inside, first-order one-sided differences on the first
    and last row, so affine fields are differentiated exactly everywhere.
    """
    return g.with_values(_diff_axis0(g.values, g.geometry.axial_spacing))


def gradient_lateral(g: Grid2D) -> Grid2D:
    """Derivative along columns per unit length (mirror of :func:`gradient_axial`)."""
    return g.with_values(_diff_axis0(g.values.T, g.geometry.lateral_spacing).T)


def compute_strains(field: DisplacementField) -> StrainPair:
    """``eps11 = d w_a / d a`` and ``eps22 = d w_l / d l``."""
    return StrainPair(gradient_axial(field.axial), gradient_lateral(field.lateral))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps on ``[-ceil(3 sigma), ceil(3 sigma)]``."""
    if sigma < 0 or not math.isfinite(sigma):
        raise ParameterError(f"gaussian sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return np.ones(1)
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


GAUSSIAN_BOUNDARIES = ("replicate", "linear")


def _pad_axis0(v: np.ndarray, radius: int, boundary: str) -> np.ndarray:
    if boundary == "replicate":
        head = np.repeat(v[:1], radius, axis=0)
        tail = np.repeat(v[-1:], radius, axis=0)
    else:
        # point reflection about the edge sample: continues affine trends exactly
        n = v.shape[0]
        idx = np.minimum(np.arange(1, radius + 1), n - 1)
        head = (2.0 * v[0] - v[idx])[::-1]
        tail = 2.0 * v[-1] - v[n - 1 - idx]
    return np.concatenate([head, v, tail])


def _filter_axis0(v: np.ndarray, kernel: np.ndarray, boundary: str) -> np.ndarray:
    radius = kernel.size // 2
    n = v.shape[0]
    padded = _pad_axis0(v, radius, boundary)
    # fixed tap order keeps results bit-reproducible
    out = kernel[0] * padded[0:n]
    for t in range(1, kernel.size):
        out = out + kernel[t] * padded[t:t + n]
    return out


def gaussian_filter(g: Grid2D, sigma: float, boundary: str = "replicate") -> Grid2D:
    """Separable Gaussian blur, ``sigma`` in samples on both axes.

    ``boundary="replicate"`` clamps to the edge sample, so the output stays
    within the input range. ``boundary="linear"`` pads by point reflection
    about the edge sample, which reproduces affine fields exactly (used when
    smoothing displacement ramps). ``sigma == 0`` returns the grid unchanged.
    """
    if boundary not in GAUSSIAN_BOUNDARIES:
        raise ParameterError(f"boundary must be one of {GAUSSIAN_BOUNDARIES}, got {boundary!r}")
    kernel = gaussian_kernel(sigma)
    if kernel.size == 1:
        return g
    v = _filter_axis0(g.values, kernel, boundary)
    v = _filter_axis0(v.T, kernel, boundary).T
    return g.with_values(v)
