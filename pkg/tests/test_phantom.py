import numpy as np
import pytest

from elastorefine.epr import FeasibilityBounds, compute_epr, feasibility_mask
from elastorefine.errors import ParameterError
from elastorefine.grid import GridGeometry, compute_strains
from elastorefine.metrics import incompressibility_residual
from elastorefine.phantom import Inclusion, PhantomSpec, generate, perturb_epr, stiffness_map

GEOM = GridGeometry(64, 48, 0.0385, 0.15)
INNER = (slice(1, -1), slice(1, -1))


def test_incompressible_phantom_recovers_epr_and_zero_residual():
    ph = generate(PhantomSpec(GEOM, 0.02, 0.5))
    s = compute_strains(ph.clean)
    epr = compute_epr(s).values.values
    assert np.abs(epr[INNER] - 0.5).max() <= 1e-9
    _, l2 = incompressibility_residual(s)
    assert l2 <= 1e-9


def test_prescribed_strains():
    ph = generate(PhantomSpec(GEOM, 0.02, 0.3))
    np.testing.assert_allclose(ph.clean_strains.axial.values, -0.02, rtol=1e-15)
    np.testing.assert_allclose(ph.clean_strains.lateral.values, 0.006, rtol=1e-12)
    assert np.all(ph.clean.axial.values[0] == 0) and np.all(ph.clean.lateral.values[:, 0] == 0)


def test_determinism_and_zero_noise():
    spec = PhantomSpec(GEOM, 0.02, 0.4, noise_std_axial=0.001, noise_std_lateral=0.01, seed=9)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(a.noisy.axial.values, b.noisy.axial.values)
    assert np.array_equal(a.noisy.lateral.values, b.noisy.lateral.values)
    quiet = generate(PhantomSpec(GEOM, 0.02, 0.4, seed=9))
    assert np.array_equal(quiet.noisy.axial.values, quiet.clean.axial.values)
    assert np.array_equal(quiet.noisy.lateral.values, quiet.clean.lateral.values)


def test_inclusion_background_keeps_poisson_ratio():
    inc = Inclusion(1.2, 3.5, 0.6, 0.5, 0.2)
    ph = generate(PhantomSpec(GEOM, 0.02, 0.45, (inc,)))
    m = stiffness_map(ph.spec)
    assert m.min() == pytest.approx(0.5) and m.max() == 1.0
    epr = compute_epr(compute_strains(ph.clean)).values.values
    # background pixels at least two samples away from the ramp in both directions
    a = np.arange(GEOM.rows)[:, None] * GEOM.axial_spacing
    l = np.arange(GEOM.cols)[None, :] * GEOM.lateral_spacing
    far = np.hypot(a - 1.2, l - 3.5) > 0.6 + 0.1 + 2 * GEOM.lateral_spacing
    assert np.abs(epr[INNER][far[INNER]] - 0.45).max() <= 1e-9


@pytest.mark.parametrize("bad", [
    dict(poisson_ratio=0.6),
    dict(applied_axial_strain=0.0),
    dict(noise_std_lateral=-1.0),
    dict(inclusions=(Inclusion(0.1, 3.0, 0.5),)),
    dict(inclusions=(Inclusion(1.2, 3.0, 0.5, strain_contrast=0.0),)),
])
def test_invalid_spec_rejected(bad):
    with pytest.raises(ParameterError):
        PhantomSpec(GEOM, **bad)


def test_perturb_identity_and_axial_untouched():
    ph = generate(PhantomSpec(GEOM, 0.02, 0.3))
    same, idx = perturb_epr(ph.clean, 0.0, 0.6, seed=1)
    assert same is ph.clean and idx.shape == (0, 2)
    out, idx = perturb_epr(ph.clean, 0.3, 0.6, seed=1)
    assert out.axial is ph.clean.axial
    assert len(idx) == round(0.3 * GEOM.rows * (GEOM.cols - 1))
    with pytest.raises(ParameterError):
        perturb_epr(ph.clean, 1.5, 0.6)


def test_perturb_sets_exact_epr_on_selected_pixels():
    ph = generate(PhantomSpec(GEOM, 0.02, 0.3))
    out, idx = perturb_epr(ph.clean, 0.3, 0.6, seed=4)
    epr = compute_epr(compute_strains(out)).values.values
    ii, jj = idx[:, 0], idx[:, 1]
    np.testing.assert_allclose(epr[ii, jj], 0.9, atol=1e-9)
    untouched = np.ones(GEOM.shape, bool)
    untouched[ii, jj] = False
    untouched[:, -1] = False
    np.testing.assert_allclose(epr[untouched], 0.3, atol=1e-9)


def test_perturb_mask_fraction_matches_counting_oracle():
    ph = generate(PhantomSpec(GridGeometry(128, 128, 0.0385, 0.15), 0.02, 0.3))
    out, idx = perturb_epr(ph.clean, 0.3, 0.6, seed=2)
    frac = feasibility_mask(compute_epr(compute_strains(out)), FeasibilityBounds()).fraction
    assert abs(frac - 0.3) <= 0.02
    # counting oracle: perturbed pixels plus whatever the last column picked up
    last = feasibility_mask(compute_epr(compute_strains(out)), FeasibilityBounds()).values.values[:, -1].sum()
    assert frac * 128 * 128 == len(idx) + last


def test_perturb_symmetric_signs():
    ph = generate(PhantomSpec(GEOM, 0.02, 0.3))
    out, idx = perturb_epr(ph.clean, 0.5, 0.6, seed=8, symmetric=True)
    epr = compute_epr(compute_strains(out)).values.values[idx[:, 0], idx[:, 1]]
    assert np.all(np.isclose(epr, 0.9, atol=1e-9) | np.isclose(epr, -0.3, atol=1e-9))
    assert (epr < 0).any() and (epr > 0.6).any()


def test_more_noise_means_more_out_of_range():
    fracs = []
    for sigma in (0.0, 0.0005, 0.002, 0.008):
        vals = [feasibility_mask(compute_epr(compute_strains(
            generate(PhantomSpec(GEOM, 0.02, 0.3, noise_std_lateral=sigma, seed=s)).noisy))).fraction
            for s in range(5)]
        fracs.append(np.mean(vals))
    assert all(b >= a for a, b in zip(fracs, fracs[1:]))
