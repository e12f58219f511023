"""Effective Poisson's ratio (EPR) fields, feasibility mask and PICTURE-style losses.

EPR is ``-eps22 / eps11``. Pixels whose axial strain magnitude falls below a
floor carry no usable ratio: they are set to the midpoint of the feasible
bounds, flagged degenerate, excluded from statistics and never masked.

The losses are forward diagnostics only. The stop-gradient on ``eps11`` in the
training objective has no effect here because nothing is differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStatisticsError, ParameterError
from .grid import Grid2D, StrainPair, _same_geometry, gradient_axial, gradient_lateral

DEFAULT_FLOOR = 1e-6
DEFAULT_BETA = 1.0
DEFAULT_LAMBDA_VS = 1.0


@dataclass(frozen=True)
class FeasibilityBounds:
    v_min: float = 0.1
    v_max: float = 0.6

    def __post_init__(self):
        if not (0.0 <= self.v_min < self.v_max) or not np.isfinite(self.v_max):
            raise ParameterError(f"bounds must satisfy 0 <= v_min < v_max, got ({self.v_min}, {self.v_max})")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.v_min + self.v_max)


DEFAULT_BOUNDS = FeasibilityBounds()


@dataclass(frozen=True)
class EprField:
    values: Grid2D
    degenerate: np.ndarray
    denominator_floor: float = DEFAULT_FLOOR

    @property
    def n_valid(self) -> int:
        return int(self.degenerate.size - np.count_nonzero(self.degenerate))

    def valid_values(self) -> np.ndarray:
        return self.values.values[~self.degenerate]

    def transposed(self) -> "EprField":
        return EprField(self.values.transposed(), self.degenerate.T.copy(), self.denominator_floor)


@dataclass(frozen=True)
class FeasibilityMask:
    values: Grid2D

    @property
    def fraction(self) -> float:
        return float(self.values.values.mean())


@dataclass(frozen=True)
class PictureLossReport:
    l_vd: float
    l_vs: float
    l_v: float
    mean_inrange_epr: float
    out_of_range_fraction: float
    beta: float
    lambda_vs: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def compute_epr(strains: StrainPair, floor: float = DEFAULT_FLOOR,
                bounds: FeasibilityBounds = DEFAULT_BOUNDS) -> EprField:
    if not floor > 0:
        raise ParameterError(f"EPR denominator floor must be > 0, got {floor}")
    _same_geometry(strains.axial, strains.lateral)
    e11 = strains.axial.values
    e22 = strains.lateral.values
    degenerate = np.abs(e11) < floor
    safe = np.where(degenerate, 1.0, e11)
    epr = np.where(degenerate, bounds.midpoint, -e22 / safe)
    degenerate.setflags(write=False)
    return EprField(strains.axial.with_values(epr), degenerate, floor)


def feasibility_mask(epr: EprField, bounds: FeasibilityBounds = DEFAULT_BOUNDS) -> FeasibilityMask:
    """1 where EPR is outside the open interval ``(v_min, v_max)``, else 0."""
    v = epr.values.values
    inside = (v > bounds.v_min) & (v < bounds.v_max)
    m = np.where(inside | epr.degenerate, 0.0, 1.0)
    return FeasibilityMask(epr.values.with_values(m))


def mean_inrange_epr(epr: EprField, mask: FeasibilityMask) -> float:
    support = (mask.values.values == 0) & ~epr.degenerate
    if not support.any():
        raise DegenerateStatisticsError(
            "no in-range, non-degenerate EPR pixels; fall back to the midpoint of the bounds"
        )
    return float(epr.values.values[support].mean())


def picture_data_loss(strains: StrainPair, epr: EprField, mask: FeasibilityMask) -> tuple[float, float]:
    """Masked lateral-strain penalty and the in-range mean EPR it uses.

    Returns ``(l_vd, mean_epr)`` with
    ``l_vd = sqrt(mean((M * (eps22 + mean_epr * eps11))**2))``.
    """
    _same_geometry(strains.axial, strains.lateral, epr.values, mask.values)
    mean_epr = mean_inrange_epr(epr, mask)
    m = mask.values.values
    r = m * (strains.lateral.values + mean_epr * strains.axial.values)
    return float(np.sqrt(np.mean(r * r))), mean_epr


def epr_smoothness_loss(epr: EprField, beta: float = DEFAULT_BETA) -> float:
    """``mean|d epr/d a| + beta * mean|d epr/d l|``."""
    if beta < 0:
        raise ParameterError(f"beta must be >= 0, got {beta}")
    axial = float(np.mean(np.abs(gradient_axial(epr.values).values)))
    if beta == 0:
        return axial
    lateral = float(np.mean(np.abs(gradient_lateral(epr.values).values)))
    return axial + beta * lateral


def picture_loss(strains: StrainPair, bounds: FeasibilityBounds = DEFAULT_BOUNDS,
                 beta: float = DEFAULT_BETA, lambda_vs: float = DEFAULT_LAMBDA_VS,
                 floor: float = DEFAULT_FLOOR) -> PictureLossReport:
    if lambda_vs < 0:
        raise ParameterError(f"lambda_vs must be >= 0, got {lambda_vs}")
    epr = compute_epr(strains, floor, bounds)
    mask = feasibility_mask(epr, bounds)
    l_vd, mean_epr = picture_data_loss(strains, epr, mask)
    l_vs = epr_smoothness_loss(epr, beta)
    return PictureLossReport(
        l_vd=l_vd,
        l_vs=l_vs,
        l_v=l_vd + lambda_vs * l_vs,
        mean_inrange_epr=mean_epr,
        out_of_range_fraction=mask.fraction,
        beta=beta,
        lambda_vs=lambda_vs,
    )
