"""Proximal (JKO) operators: closed forms, Newton solver, particle update."""

import math

import numpy as np
import pytest

from fbflow import (
    GaussianMeasure,
    InternalEnergy,
    ParticleCloud,
    Potential,
    QuantileMeasure,
    SolverFailure,
    energy_value,
    gaussian_to_quantile,
    jko_affine_particles,
    jko_backward_full,
    jko_entropy_gaussian,
    jko_quantile,
    w2_quantile,
)

ENTROPY = InternalEnergy.negative_entropy()


def prox_objective(H, q, q_nu, gamma):
    """Phi(Q) = H(Q) + |Q - Qnu|^2 / (2 gamma M), the solver's objective."""
    m = q.size
    h = energy_value(H, QuantileMeasure(q))
    return h + float(np.dot(q - q_nu, q - q_nu)) / (2.0 * gamma * m)


class TestGaussianClosedForm:
    def test_hand_value(self):
        # s solves s^2 - 0.9 s - 0.1 = 0, i.e. s = 1
        out = jko_entropy_gaussian(GaussianMeasure([0.0], [0.9**2]), 0.1)
        assert out.std[0] == pytest.approx(1.0, abs=1e-15)

    def test_quadratic_root(self):
        out = jko_entropy_gaussian(GaussianMeasure([3.0], [4.0]), 0.5)
        assert out.std[0] == pytest.approx((2.0 + math.sqrt(6.0)) / 2.0, abs=1e-14)
        assert out.mean[0] == 3.0

    def test_mean_unchanged_variance_grows(self):
        g = GaussianMeasure([1.0, -2.0], [0.25, 9.0])
        out = jko_entropy_gaussian(g, 0.3)
        assert np.array_equal(out.mean, g.mean)
        assert np.all(out.variances > g.variances)

    def test_stationarity_identity(self):
        # the output std satisfies s = sigma + gamma / s
        g = GaussianMeasure([0.0], [2.5])
        gamma = 0.2
        s = jko_entropy_gaussian(g, gamma).std[0]
        assert s == pytest.approx(g.std[0] + gamma / s, abs=1e-14)

    def test_positive_step_required(self):
        with pytest.raises(ValueError):
            jko_entropy_gaussian(GaussianMeasure.standard(), 0.0)


class TestQuantileProx:
    def test_zero_energy_is_identity(self):
        nu = gaussian_to_quantile(GaussianMeasure.standard(), 64)
        out, report = jko_quantile(InternalEnergy.zero(), nu, 0.1)
        assert out is nu
        assert report.iterations == 0
        assert report.kkt_residual == 0.0

    def test_matches_gaussian_closed_form(self):
        g = GaussianMeasure([0.5], [0.81])
        gamma = 0.1
        nu = gaussian_to_quantile(g, 4096)
        out, report = jko_quantile(ENTROPY, nu, gamma)
        expected = gaussian_to_quantile(jko_entropy_gaussian(g, gamma), 4096)
        assert w2_quantile(out, expected) <= 1e-4
        assert report.kkt_residual <= 1e-10 * max(1.0, np.abs(nu.values).max())

    def test_mean_preserved(self):
        nu = gaussian_to_quantile(GaussianMeasure([2.0], [1.0]), 512)
        out, _ = jko_quantile(ENTROPY, nu, 0.25)
        assert out.mean() == pytest.approx(nu.mean(), abs=1e-10)

    def test_objective_never_increases(self):
        nu = gaussian_to_quantile(GaussianMeasure([0.0], [0.04]), 256)
        out, report = jko_quantile(ENTROPY, nu, 0.5)
        phi_in = prox_objective(ENTROPY, nu.values, nu.values, 0.5)
        phi_out = prox_objective(ENTROPY, out.values, nu.values, 0.5)
        assert phi_out <= phi_in
        assert report.objective_decrease == pytest.approx(phi_in - phi_out, abs=1e-12)

    def test_stationarity_reconstruction(self):
        # at the optimum: Qnu_i = Q_i + gamma M dH/dQ_i, node by node
        nu = gaussian_to_quantile(GaussianMeasure([1.0], [2.0]), 128)
        gamma = 0.3
        out, _ = jko_quantile(ENTROPY, nu, gamma)
        q = out.values
        m = q.size
        d = np.diff(q)
        sub = np.zeros(m)
        sub[:-1] += 1.0 / (m * d)
        sub[1:] -= 1.0 / (m * d)
        assert np.max(np.abs(nu.values - (q + gamma * m * sub))) <= 1e-8

    def test_spread_monotone_in_step_size(self):
        nu = gaussian_to_quantile(GaussianMeasure.standard(), 256)
        variances = []
        for gamma in (0.05, 0.2, 0.8):
            out, _ = jko_quantile(ENTROPY, nu, gamma)
            variances.append(out.variance())
        assert variances[0] < variances[1] < variances[2]
        assert variances[0] > nu.variance()

    def test_power_energy_matches_gaussian_direction(self):
        # power entropy also spreads mass; sanity-check growth and symmetry
        H = InternalEnergy.power(2.0)
        nu = gaussian_to_quantile(GaussianMeasure.standard(), 256)
        out, _ = jko_quantile(H, nu, 0.5)
        assert out.variance() > nu.variance()
        assert out.mean() == pytest.approx(0.0, abs=1e-10)

    def test_budget_exhaustion_raises(self):
        nu = gaussian_to_quantile(GaussianMeasure([0.0], [1e-4]), 256)
        with pytest.raises(SolverFailure):
            jko_quantile(ENTROPY, nu, 1.0, max_iter=1)

    def test_positive_step_required(self):
        nu = gaussian_to_quantile(GaussianMeasure.standard(), 16)
        with pytest.raises(ValueError):
            jko_quantile(ENTROPY, nu, -0.1)
        with pytest.raises(ValueError):
            jko_quantile(InternalEnergy.zero(), nu, 0.0)


class TestBackwardFull:
    def test_quadratic_prox_closed_form(self):
        # H = 0, F = |x|^2/2: node-wise prox is Qnu / (1 + gamma)
        F = Potential.diagonal_quadratic([1.0])
        nu = gaussian_to_quantile(GaussianMeasure([4.0], [9.0]), 64)
        out, _ = jko_backward_full(F, InternalEnergy.zero(), nu, 0.5)
        assert np.allclose(out.values, nu.values / 1.5, atol=1e-14)

    def test_anchored_quadratic_prox(self):
        F = Potential.diagonal_quadratic([2.0], anchor=[1.0])
        nu = gaussian_to_quantile(GaussianMeasure([0.0], [1.0]), 32)
        out, _ = jko_backward_full(F, InternalEnergy.zero(), nu, 0.25)
        assert np.allclose(out.values, (nu.values + 0.5) / 1.5, atol=1e-14)

    def test_full_objective_stationarity(self):
        # Qnu_i = Q_i + gamma (F'(Q_i) + M dH/dQ_i)
        F = Potential.diagonal_quadratic([1.0])
        nu = gaussian_to_quantile(GaussianMeasure([1.0], [4.0]), 128)
        gamma = 0.2
        out, _ = jko_backward_full(F, ENTROPY, nu, gamma)
        q = out.values
        m = q.size
        d = np.diff(q)
        sub = np.zeros(m)
        sub[:-1] += 1.0 / (m * d)
        sub[1:] -= 1.0 / (m * d)
        recon = q + gamma * (q + m * sub)
        assert np.max(np.abs(nu.values - recon)) <= 1e-8

    def test_fixed_point_is_discrete_gibbs(self):
        # iterating the full prox converges to the grid's own stationary
        # point, which approaches N(0, 1) as the grid refines
        F = Potential.diagonal_quadratic([1.0])
        q = gaussian_to_quantile(GaussianMeasure([5.0], [16.0]), 512)
        for _ in range(80):
            q, _ = jko_backward_full(F, ENTROPY, q, 0.5)
        target = gaussian_to_quantile(GaussianMeasure.standard(), 512)
        assert w2_quantile(q, target) <= 1e-4

    def test_rejects_multidimensional_quadratic(self):
        F = Potential.diagonal_quadratic([1.0, 2.0])
        nu = gaussian_to_quantile(GaussianMeasure.standard(), 16)
        with pytest.raises(ValueError):
            jko_backward_full(F, ENTROPY, nu, 0.1)


class TestAffineParticles:
    def test_two_point_hand_example(self):
        # sd = 1, gamma = 2: s = (1 + 3)/2 = 2, so {-1, 1} -> {-2, 2}
        out = jko_affine_particles(ParticleCloud([[-1.0], [1.0]]), 2.0)
        assert np.allclose(out.points, [[-2.0], [2.0]])

    def test_mean_preserved(self):
        pts = np.array([[0.0], [1.0], [5.0]])
        out = jko_affine_particles(ParticleCloud(pts), 0.7)
        assert out.points.mean() == pytest.approx(2.0, abs=1e-12)

    def test_matches_gaussian_closed_form_moments(self):
        pts = np.array([[-3.0], [-1.0], [1.0], [3.0]])
        gamma = 0.4
        out = jko_affine_particles(ParticleCloud(pts), gamma)
        sd = pts.std()
        expected = 0.5 * (sd + math.sqrt(sd**2 + 4.0 * gamma))
        assert out.points.std() == pytest.approx(expected, abs=1e-12)

    def test_degenerate_cloud_rejected(self):
        with pytest.raises(ValueError):
            jko_affine_particles(ParticleCloud([[1.0], [1.0]]), 0.1)

    def test_positive_step_required(self):
        with pytest.raises(ValueError):
            jko_affine_particles(ParticleCloud([[-1.0], [1.0]]), 0.0)
