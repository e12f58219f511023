"""Lateral-displacement refinement operators.

``poisson_clipper`` clamps the effective Poisson's ratio into the feasible
range and re-integrates the lateral displacement line by line.
``guo_refine`` relaxes the lateral displacement toward the uniaxial
incompressibility condition ``eps11 + 2 eps22 = 0`` with momentum and a
Gaussian smoothing step after every update. Neither touches the axial grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .epr import DEFAULT_BOUNDS, DEFAULT_FLOOR, FeasibilityBounds, compute_epr, feasibility_mask
from .errors import DegenerateStatisticsError, DimensionError, ParameterError
from .grid import GAUSSIAN_BOUNDARIES, DisplacementField, StrainPair, gaussian_filter, gradient_axial, gradient_lateral
from .metrics import incompressibility_residual

STENCIL_MODES = ("corrected", "paper_literal")


@dataclass(frozen=True)
class ClipperConfig:
    bounds: FeasibilityBounds = DEFAULT_BOUNDS
    iterations: int = 10
    epr_floor: float = DEFAULT_FLOOR
    convergence_tol: float | None = None
    literal_sign: bool = False

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ParameterError(f"clipper iterations must be a positive integer, got {self.iterations}")
        if not self.epr_floor > 0:
            raise ParameterError(f"epr_floor must be > 0, got {self.epr_floor}")
        if self.convergence_tol is not None and self.convergence_tol < 0:
            raise ParameterError("convergence_tol must be >= 0")


@dataclass(frozen=True)
class GuoConfig:
    iterations: int = 100
    lambda1: float = 0.1
    lambda2: float = 0.1
    gaussian_sigma: float = 1.0
    stencil_mode: str = "corrected"
    gaussian_boundary: str = "linear"
    # only used for the out-of-range column of the trace
    bounds: FeasibilityBounds = DEFAULT_BOUNDS
    epr_floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ParameterError(f"guo iterations must be a positive integer, got {self.iterations}")
        if self.lambda2 < 0:
            raise ParameterError(f"lambda2 must be >= 0, got {self.lambda2}")
        if self.lambda1 < 0:
            raise ParameterError(f"lambda1 must be >= 0, got {self.lambda1}")
        if self.gaussian_sigma < 0:
            raise ParameterError(f"gaussian_sigma must be >= 0, got {self.gaussian_sigma}")
        if self.stencil_mode not in STENCIL_MODES:
            raise ParameterError(f"stencil_mode must be one of {STENCIL_MODES}, got {self.stencil_mode!r}")
        if self.gaussian_boundary not in GAUSSIAN_BOUNDARIES:
            raise ParameterError(f"gaussian_boundary must be one of {GAUSSIAN_BOUNDARIES}")


@dataclass(frozen=True)
class IterationRecord:
    operator: str
    iteration: int
    out_of_range_fraction: float
    residual_l2: float
    max_update: float


@dataclass
class RefinementTrace:
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def extend(self, other: "RefinementTrace"):
        self.records.extend(other.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def summary(self) -> dict:
        if not self.records:
            return {"iterations": 0}
        last = self.records[-1]
        return {
            "iterations": len(self.records),
            "final_out_of_range_fraction": last.out_of_range_fraction,
            "final_residual_l2": last.residual_l2,
            "final_max_update": last.max_update,
        }


def _record(operator: str, q: int, field_: DisplacementField, e11, max_update: float,
            bounds: FeasibilityBounds, floor: float) -> IterationRecord:
    strains = StrainPair(e11, gradient_lateral(field_.lateral))
    mask = feasibility_mask(compute_epr(strains, floor, bounds), bounds)
    _, l2 = incompressibility_residual(strains)
    return IterationRecord(operator, q, mask.fraction, l2, max_update)


def poisson_clipper(field: DisplacementField, cfg: ClipperConfig = ClipperConfig()
                    ) -> tuple[DisplacementField, RefinementTrace]:
    """Clamp EPR into ``[v_min, v_max]`` and re-integrate the lateral displacement.

    Each pass differentiates the current lateral field, clamps its EPR against
    the fixed axial strain, and rebuilds every row from column 0 with
    ``w[:, j] = w[:, j-1] + (-epr_clipped * eps11)[:, j] * lateral_spacing``.
    With ``literal_sign`` the increment is ``epr_clipped * eps11`` without the
    spacing factor instead.
    """
    g = field.geometry
    if g.cols < 3:
        raise DimensionError(f"clipper needs at least 3 lateral lines, got {g.cols}")
    e11 = gradient_axial(field.axial)
    if np.all(np.abs(e11.values) < cfg.epr_floor):
        raise DegenerateStatisticsError(
            f"axial strain magnitude is below the EPR floor {cfg.epr_floor} everywhere"
        )
    lo, hi = cfg.bounds.v_min, cfg.bounds.v_max
    trace = RefinementTrace()
    current = field
    for q in range(1, cfg.iterations + 1):
        strains = StrainPair(e11, gradient_lateral(current.lateral))
        epr = np.clip(compute_epr(strains, cfg.epr_floor, cfg.bounds).values.values, lo, hi)
        if cfg.literal_sign:
            steps = epr * e11.values
        else:
            steps = -epr * e11.values * g.lateral_spacing
        steps[:, 0] = current.lateral.values[:, 0]
        # sequential running sum along j: w[j] = w[j-1] + step[j]
        new_lateral = np.cumsum(steps, axis=1)
        max_update = float(np.max(np.abs(new_lateral - current.lateral.values)))
        current = current.with_lateral(new_lateral)
        trace.records.append(_record("clipper", q, current, e11, max_update, cfg.bounds, cfg.epr_floor))
        if cfg.convergence_tol is not None and max_update < cfg.convergence_tol:
            break
    return current, trace


def _shift(v: np.ndarray, di: int, dj: int) -> np.ndarray:
    """``out[i, j] = v[clamp(i + di), clamp(j + dj)]`` (replicate indexing)."""
    rows, cols = v.shape
    ri = np.clip(np.arange(rows) + di, 0, rows - 1)
    cj = np.clip(np.arange(cols) + dj, 0, cols - 1)
    return v[np.ix_(ri, cj)]


def lateral_laplacian(w: np.ndarray) -> np.ndarray:
    """Index-space ``w[j-1] - 2 w[j] + w[j+1]``.

    The border columns extrapolate linearly (zero curvature), so any field
    that is affine along ``j`` gives exactly zero, border included.
    """
    out = np.zeros_like(w)
    out[:, 1:-1] = w[:, :-2] - 2.0 * w[:, 1:-1] + w[:, 2:]
    return out


def mixed_stencil(wa: np.ndarray, mode: str) -> np.ndarray:
    if mode == "corrected":
        return 0.25 * (_shift(wa, 1, 1) - _shift(wa, 1, -1) - _shift(wa, -1, 1) + _shift(wa, -1, -1))
    return _shift(wa, 1, 1) - _shift(wa, -1, 0) - _shift(wa, 0, -1) + _shift(wa, -1, -1)


def guo_refine(field: DisplacementField, cfg: GuoConfig = GuoConfig()
               ) -> tuple[DisplacementField, RefinementTrace]:
    """Incompressibility relaxation with momentum and per-iteration Gaussian smoothing.

    Jacobi schedule: ``delta`` is evaluated on the whole previous iterate,
    then ``w_q = gauss(w_{q-1} + lambda2 * delta)``. Stencils work in index
    units, so ``lambda2`` absorbs the grid spacing.
    """
    g = field.geometry
    if g.rows < 3 or g.cols < 3:
        raise DimensionError(f"guo refinement needs a grid of at least 3x3, got {g.rows}x{g.cols}")
    e11 = gradient_axial(field.axial)
    mixed = mixed_stencil(field.axial.values, cfg.stencil_mode)
    trace = RefinementTrace()
    previous = None
    current = field.lateral.values
    for q in range(1, cfg.iterations + 1):
        delta = lateral_laplacian(current) + mixed
        if previous is not None and cfg.lambda1 != 0:
            delta = delta + cfg.lambda1 * (current - previous)
        updated = gaussian_filter(field.lateral.with_values(current + cfg.lambda2 * delta),
                                  cfg.gaussian_sigma, cfg.gaussian_boundary).values
        max_update = float(np.max(np.abs(updated - current)))
        previous, current = current, updated
        out = field.with_lateral(current)
        trace.records.append(_record("guo", q, out, e11, max_update, cfg.bounds, cfg.epr_floor))
    return field.with_lateral(current), trace


OPERATORS = ("clipper", "guo")


def kpicture_refine(field: DisplacementField, clipper: ClipperConfig = ClipperConfig(),
                    guo: GuoConfig = GuoConfig(), order: Sequence[str] = OPERATORS
                    ) -> tuple[DisplacementField, RefinementTrace]:
    """Apply the clipper and/or the Guo relaxation in ``order``; traces are concatenated."""
    trace = RefinementTrace()
    current = field
    for name in order:
        if name == "clipper":
            current, t = poisson_clipper(current, clipper)
        elif name == "guo":
            current, t = guo_refine(current, guo)
        else:
            raise ParameterError(f"unknown operator {name!r}; expected one of {OPERATORS}")
        trace.extend(t)
    return current, trace

