"""Potential and internal energies, objectives, Gibbs targets."""

import math

import numpy as np
import pytest

from fbflow import (
    GaussianMeasure,
    InconsistencyError,
    InternalEnergy,
    ParticleCloud,
    Potential,
    QuantileMeasure,
    energy_value,
    gaussian_to_quantile,
    gibbs_target,
    make_rng,
    objective,
    objective_gap_to_target,
    potential_energy,
)

NEG_ENTROPY_STD_NORMAL = -0.5 * (1.0 + math.log(2.0 * math.pi))


class TestPotential:
    def test_quadratic_constants_exact(self):
        F = Potential.diagonal_quadratic([1.0, 4.0, 2.0])
        assert F.L == 4.0
        assert F.lam == 1.0

    def test_gradient_matches_finite_differences(self):
        F = Potential.diagonal_quadratic([1.0, 3.0], anchor=[0.5, -2.0])
        rng = make_rng(0)
        h = 1e-6
        for _ in range(20):
            x = rng.uniform(-5, 5, 2)
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                fd = (F.value(x + e) - F.value(x - e)) / (2 * h)
                assert fd.item() == pytest.approx(F.grad(x)[k], rel=1e-6)

    def test_custom_1d_accepted(self):
        # smooth strongly convex: F(x) = log cosh x + x^2
        F = Potential.custom_1d(
            f=lambda x: np.logaddexp(x, -x) - math.log(2.0) + x**2,
            grad=lambda x: np.tanh(x) + 2.0 * x,
            smoothness=3.0, strong_convexity=2.0)
        assert F.L == 3.0

    def test_custom_1d_wrong_constants_rejected(self):
        # claims smoothness 0.1 for the quadratic x^2 (true L = 2)
        with pytest.raises(ValueError):
            Potential.custom_1d(f=lambda x: x**2, grad=lambda x: 2 * x,
                                smoothness=0.1)

    def test_nonpositive_curvature_rejected(self):
        with pytest.raises(ValueError):
            Potential.diagonal_quadratic([1.0, 0.0])


class TestPotentialEnergy:
    def test_standard_normal(self):
        F = Potential.diagonal_quadratic([1.0])
        assert potential_energy(F, GaussianMeasure.standard()) == pytest.approx(0.5)

    def test_benchmark_initial(self):
        F = Potential.diagonal_quadratic([1.0])
        mu = GaussianMeasure([10.0], [100.0**2])
        assert potential_energy(F, mu) == pytest.approx(5050.0)

    def test_quantile_grid_matches_closed_form(self):
        F = Potential.diagonal_quadratic([1.0])
        grid = gaussian_to_quantile(GaussianMeasure.standard(), 4096)
        assert potential_energy(F, grid) == pytest.approx(0.5, abs=1e-3)

    def test_particles(self):
        F = Potential.diagonal_quadratic([2.0], anchor=[1.0])
        cloud = ParticleCloud([[0.0], [2.0]])
        assert potential_energy(F, cloud) == pytest.approx(1.0)


class TestEnergyValue:
    def test_standard_normal_entropy(self):
        H = InternalEnergy.negative_entropy()
        got = energy_value(H, GaussianMeasure.standard())
        assert got == pytest.approx(NEG_ENTROPY_STD_NORMAL, abs=1e-12)
        assert got == pytest.approx(-1.4189385332046727, abs=1e-12)

    def test_zero_energy(self):
        assert energy_value(InternalEnergy.zero(), GaussianMeasure.standard()) == 0.0

    def test_quantile_entropy_matches_closed_form(self):
        H = InternalEnergy.negative_entropy()
        grid = gaussian_to_quantile(GaussianMeasure.standard(), 4096)
        assert energy_value(H, grid) == pytest.approx(
            NEG_ENTROPY_STD_NORMAL, abs=5e-3)

    def test_quantile_entropy_translation_invariant(self):
        H = InternalEnergy.negative_entropy()
        grid = gaussian_to_quantile(GaussianMeasure.standard(), 256)
        shifted = QuantileMeasure(grid.values + 7.25)
        assert energy_value(H, shifted) == pytest.approx(
            energy_value(H, grid), abs=1e-12)

    def test_power_entropy_gaussian_closed_form(self):
        # (1/(m-1)) int mu^m with m = 2 is 1/(2 sigma sqrt(pi)) in 1D
        H = InternalEnergy.power(2.0)
        got = energy_value(H, GaussianMeasure([3.0], [4.0]))
        assert got == pytest.approx(1.0 / (2.0 * 2.0 * math.sqrt(math.pi)))

    def test_power_entropy_quantile_matches_gaussian(self):
        H = InternalEnergy.power(2.0)
        grid = gaussian_to_quantile(GaussianMeasure.standard(), 4096)
        assert energy_value(H, grid) == pytest.approx(
            energy_value(H, GaussianMeasure.standard()), abs=5e-3)

    def test_power_requires_exponent_above_one(self):
        with pytest.raises(ValueError):
            InternalEnergy.power(1.0)

    def test_entropy_not_defined_on_particles(self):
        with pytest.raises(TypeError):
            energy_value(InternalEnergy.negative_entropy(),
                         ParticleCloud([[0.0], [1.0]]))


class TestObjective:
    def test_standard_normal(self):
        F = Potential.diagonal_quadratic([1.0])
        H = InternalEnergy.negative_entropy()
        assert objective(F, H, GaussianMeasure.standard()) == pytest.approx(
            0.5 + NEG_ENTROPY_STD_NORMAL)

    def test_zero_energy(self):
        F = Potential.diagonal_quadratic([1.0])
        assert objective(F, InternalEnergy.zero(),
                         GaussianMeasure.standard()) == pytest.approx(0.5)

    def test_benchmark_initial_cross_check(self):
        F = Potential.diagonal_quadratic([1.0])
        H = InternalEnergy.negative_entropy()
        mu = GaussianMeasure([10.0], [100.0**2])
        expected = 5050.0 - 0.5 * (1.0 + math.log(2.0 * math.pi * 1e4))
        assert objective(F, H, mu) == pytest.approx(expected, abs=1e-12)
        # discretized cross-check at the library's scale-aware tolerance; the
        # grid's tail truncation costs about 2e-4 relative at sigma = 100
        grid = gaussian_to_quantile(mu, 8192)
        assert objective(F, H, grid) == pytest.approx(
            expected, abs=1e-3 * (1.0 + abs(expected)))


class TestObjectiveGap:
    def test_zero_at_target(self):
        F = Potential.diagonal_quadratic([1.0])
        H = InternalEnergy.negative_entropy()
        star = gibbs_target(F)
        assert objective_gap_to_target(F, H, star, star) == 0.0

    def test_gap_equals_kl_divergence(self):
        # for quadratic + entropy the gap is the KL divergence to the Gibbs
        # measure: KL(N(m, s^2) || N(0, 1)) = (m^2 + s^2 - 1 - log s^2) / 2
        F = Potential.diagonal_quadratic([1.0])
        H = InternalEnergy.negative_entropy()
        star = gibbs_target(F)
        mu = GaussianMeasure([10.0], [100.0**2])
        kl = 0.5 * (10.0**2 + 100.0**2 - 1.0 - math.log(1e4))
        assert objective_gap_to_target(F, H, mu, star) == pytest.approx(kl, abs=1e-9)

    def test_small_mean_perturbation(self):
        F = Potential.diagonal_quadratic([1.0])
        H = InternalEnergy.negative_entropy()
        star = gibbs_target(F)
        mu = GaussianMeasure([0.1], [1.0])
        assert objective_gap_to_target(F, H, mu, star) == pytest.approx(0.005)

    def test_beaten_minimizer_raises(self):
        F = Potential.diagonal_quadratic([1.0])
        H = InternalEnergy.negative_entropy()
        fake_star = GaussianMeasure([1.0], [1.0])  # not the minimizer
        with pytest.raises(InconsistencyError):
            objective_gap_to_target(F, H, gibbs_target(F), fake_star)


class TestGibbsTarget:
    def test_standard(self):
        F = Potential.diagonal_quadratic([1.0])
        star = gibbs_target(F)
        assert star.mean == pytest.approx([0.0])
        assert star.variances == pytest.approx([1.0])

    def test_shifted_and_scaled(self):
        F = Potential.diagonal_quadratic([2.0], anchor=[3.0])
        star = gibbs_target(F)
        assert star.mean == pytest.approx([3.0])
        assert star.variances == pytest.approx([0.5])

    def test_anisotropic(self):
        F = Potential.diagonal_quadratic([1.0, 4.0])
        star = gibbs_target(F)
        assert star.variances == pytest.approx([1.0, 0.25])

    def test_custom_rejected(self):
        F = Potential.custom_1d(f=lambda x: 0.5 * x**2, grad=lambda x: x,
                                smoothness=1.0, strong_convexity=1.0)
        with pytest.raises(ValueError):
            gibbs_target(F)
