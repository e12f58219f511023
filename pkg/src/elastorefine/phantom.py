"""Synthetic strain-prescribed displacement phantoms with exact ground truth.

The axial strain map is ``-eps0 * m(a, l)`` where ``m`` is 1 in the background
and ``strain_contrast`` inside each inclusion, with a raised-cosine ramp of
width ``edge_softness`` across the rim. Lateral strain follows the linear
isotropic relation ``eps22 = -nu * eps11``. Displacements are trapezoidal
running integrals anchored at ``w_a(0, :) = 0`` and ``w_l(:, 0) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grid import DisplacementField, Grid2D, GridGeometry, StrainPair, gradient_axial, gradient_lateral

DEFAULT_GEOMETRY = GridGeometry(256, 256, 0.0385, 0.15)


@dataclass(frozen=True)
class Inclusion:
    center_axial: float  # mm
    center_lateral: float  # mm
    radius: float  # mm
    strain_contrast: float = 0.5
    edge_softness: float = 0.0  # mm

    def weight(self, a: np.ndarray, l: np.ndarray) -> np.ndarray:
        """1 inside, 0 outside, raised-cosine ramp across the rim."""
        r = np.hypot(a - self.center_axial, l - self.center_lateral)
        if self.edge_softness <= 0:
            return (r <= self.radius).astype(np.float64)
        half = 0.5 * self.edge_softness
        t = np.clip((r - (self.radius - half)) / self.edge_softness, 0.0, 1.0)
        return 0.5 * (1.0 + np.cos(np.pi * t))


@dataclass(frozen=True)
class PhantomSpec:
    geometry: GridGeometry = DEFAULT_GEOMETRY
    applied_axial_strain: float = 0.02
    poisson_ratio: float = 0.5
    inclusions: tuple[Inclusion, ...] = field(default_factory=tuple)
    noise_std_axial: float = 0.0
    noise_std_lateral: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        if not self.applied_axial_strain > 0:
            raise ParameterError(f"applied_axial_strain must be > 0, got {self.applied_axial_strain}")
        if not 0.0 <= self.poisson_ratio <= 0.5:
            raise ParameterError(f"poisson_ratio must lie in [0, 0.5], got {self.poisson_ratio}")
        if self.noise_std_axial < 0 or self.noise_std_lateral < 0:
            raise ParameterError("noise standard deviations must be >= 0")
        g = self.geometry
        depth = (g.rows - 1) * g.axial_spacing
        width = (g.cols - 1) * g.lateral_spacing
        for k, inc in enumerate(self.inclusions):
            if not inc.strain_contrast > 0:
                raise ParameterError(f"inclusion {k}: strain_contrast must be > 0")
            if not inc.radius > 0 or inc.edge_softness < 0:
                raise ParameterError(f"inclusion {k}: radius must be > 0 and edge_softness >= 0")
            reach = inc.radius + 0.5 * inc.edge_softness
            if (inc.center_axial - reach < 0 or inc.center_axial + reach > depth
                    or inc.center_lateral - reach < 0 or inc.center_lateral + reach > width):
                raise ParameterError(
                    f"inclusion {k} (reach {reach} mm) does not fit in the {depth:g} x {width:g} mm field of view"
                )


@dataclass(frozen=True)
class Phantom:
    noisy: DisplacementField
    clean: DisplacementField
    clean_strains: StrainPair
    spec: PhantomSpec


def coordinates(geometry: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    a = np.arange(geometry.rows, dtype=np.float64)[:, None] * geometry.axial_spacing
    l = np.arange(geometry.cols, dtype=np.float64)[None, :] * geometry.lateral_spacing
    return np.broadcast_to(a, geometry.shape), np.broadcast_to(l, geometry.shape)


def stiffness_map(spec: PhantomSpec) -> np.ndarray:
    """Relative local strain ``m(a, l)``."""
    a, l = coordinates(spec.geometry)
    m = np.ones(spec.geometry.shape)
    for inc in spec.inclusions:
        m = m * (1.0 + (inc.strain_contrast - 1.0) * inc.weight(a, l))
    return m


def _cumtrapz(strain: np.ndarray, h: float, axis: int) -> np.ndarray:
    s = np.moveaxis(strain, axis, 0)
    steps = 0.5 * h * (s[1:] + s[:-1])
    out = np.concatenate([np.zeros_like(s[:1]), steps]).cumsum(axis=0)
    return np.moveaxis(out, 0, axis)


def generate(spec: PhantomSpec) -> Phantom:
    g = spec.geometry
    e11 = -spec.applied_axial_strain * stiffness_map(spec)
    e22 = -spec.poisson_ratio * e11
    wa = _cumtrapz(e11, g.axial_spacing, axis=0)
    wl = _cumtrapz(e22, g.lateral_spacing, axis=1)
    clean = DisplacementField(Grid2D(g, wa), Grid2D(g, wl))

    rng = np.random.default_rng(spec.seed)
    noise_a = rng.standard_normal(g.shape)
    noise_l = rng.standard_normal(g.shape)
    noisy_a = wa + spec.noise_std_axial * noise_a if spec.noise_std_axial > 0 else wa
    noisy_l = wl + spec.noise_std_lateral * noise_l if spec.noise_std_lateral > 0 else wl
    noisy = DisplacementField(Grid2D(g, noisy_a), Grid2D(g, noisy_l))
    return Phantom(noisy, clean, StrainPair(Grid2D(g, e11), Grid2D(g, e22)), spec)


def integrate_central(target_e22: np.ndarray, anchor: np.ndarray, h: float) -> np.ndarray:
    """Lateral displacement whose central-difference gradient equals ``target_e22``.

    Exact on columns ``0 .. cols-2``; the last column's one-sided gradient is
    whatever the recursion leaves.
    """
    rows, cols = target_e22.shape
    w = np.empty((rows, cols))
    w[:, 0] = anchor
    w[:, 1] = anchor + h * target_e22[:, 0]
    for j in range(1, cols - 1):
        w[:, j + 1] = w[:, j - 1] + 2.0 * h * target_e22[:, j]
    return w


def perturb_epr(field: DisplacementField, fraction: float, magnitude: float, seed: int = 0,
                symmetric: bool = False) -> tuple[DisplacementField, np.ndarray]:
    """Shift the local EPR of a random subset of pixels by ``magnitude``.

    Candidate pixels are columns ``0 .. cols-2`` of every row. The lateral
    displacement is rebuilt so that the central-difference lateral strain at a
    selected pixel becomes ``eps22 - s * magnitude * eps11`` (``s = +1``, or a
    random sign when ``symmetric``) while every other candidate keeps its
    strain. Returns the new field and the ``(k, 2)`` array of perturbed
    ``(i, j)`` indices.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"fraction must lie in [0, 1], got {fraction}")
    if not np.isfinite(magnitude):
        raise ParameterError("magnitude must be finite")
    g = field.geometry
    n_candidates = g.rows * (g.cols - 1)
    k = int(round(fraction * n_candidates))
    if k == 0:
        return field, np.empty((0, 2), dtype=np.int64)

    rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(n_candidates, size=k, replace=False))
    ii, jj = np.divmod(flat, g.cols - 1)
    signs = rng.choice(np.array([-1.0, 1.0]), size=k) if symmetric else np.ones(k)

    e11 = gradient_axial(field.axial).values
    e22 = gradient_lateral(field.lateral).values.copy()
    e22[ii, jj] -= signs * magnitude * e11[ii, jj]
    wl = integrate_central(e22, field.lateral.values[:, 0], g.lateral_spacing)
    return field.with_lateral(wl), np.stack([ii, jj], axis=1)
