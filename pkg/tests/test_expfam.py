"""Posterior families, KL divergences, Bregman pairs and mean projection."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from ewkit.domains import ConvexDomain
from ewkit.errors import DomainError, NumericError
from ewkit.expfam import (
    BetaState,
    DiscreteAtoms,
    GaussianState,
    PoissonProductState,
    gaussian_pair,
    kl,
    kl_bernoulli,
    kl_beta,
    kl_discrete,
    kl_gaussian,
    kl_poisson_product,
    poisson_pair,
    project_mean,
    project_relative_entropy,
    unnormalized_relative_entropy,
)
from ewkit.models import Support


class TestGaussianState:
    def test_isotropic(self):
        s = GaussianState.isotropic([1.0, 2.0], 0.5)
        np.testing.assert_allclose(s.covariance, 0.5 * np.eye(2))
        np.testing.assert_allclose(s.precision, 2.0 * np.eye(2))

    def test_rejects_indefinite_precision(self):
        with pytest.raises(NumericError):
            GaussianState.from_precision([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_degenerate_covariance(self):
        with pytest.raises(NumericError):
            GaussianState.from_covariance([0.0, 0.0], np.diag([1.0, 1e-14]))

    def test_rejects_mismatched_pair(self):
        with pytest.raises(NumericError):
            GaussianState(np.zeros(2), np.eye(2), 2.0 * np.eye(2))


class TestKLGaussian:
    def test_self_divergence_is_zero(self):
        s = GaussianState.from_covariance([0.3, -1.0], [[2.0, 0.3], [0.3, 1.0]])
        assert kl_gaussian(s, s) == pytest.approx(0.0, abs=1e-12)

    def test_one_dimensional_value(self):
        q = GaussianState.isotropic([0.0], 1.0)
        p = GaussianState.isotropic([1.0], 2.0)
        assert kl_gaussian(q, p) == pytest.approx(0.5 * math.log(2.0), abs=1e-12)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(42)
        q = GaussianState.from_covariance([0.5, -0.2], [[1.0, 0.4], [0.4, 0.8]])
        p = GaussianState.from_covariance([0.0, 0.3], [[1.5, -0.2], [-0.2, 1.2]])
        x = rng.multivariate_normal(q.mean, q.covariance, size=400_000)
        log_ratio = stats.multivariate_normal(q.mean, q.covariance).logpdf(x) - stats.multivariate_normal(
            p.mean, p.covariance
        ).logpdf(x)
        assert kl_gaussian(q, p) == pytest.approx(log_ratio.mean(), abs=1e-2)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            kl_gaussian(GaussianState.isotropic([0.0], 1.0), GaussianState.isotropic([0.0, 0.0], 1.0))


class TestOtherDivergences:
    def test_bernoulli_edges(self):
        assert kl_bernoulli(0.5, 0.5) == 0.0
        assert kl_bernoulli(1.0, 0.0) == math.inf
        assert kl_bernoulli(0.0, 0.0) == 0.0
        with pytest.raises(DomainError):
            kl_bernoulli(1.2, 0.5)

    def test_bernoulli_pinsker(self):
        grid = np.linspace(0.001, 0.999, 120)
        for x in grid[::7]:
            for y in grid:
                assert kl_bernoulli(x, y) >= 2.0 * (x - y) ** 2 - 1e-15

    def test_unnormalized_relative_entropy(self):
        w = np.array([0.5, 2.0, 1.0])
        assert unnormalized_relative_entropy(w, w) == 0.0
        u = np.array([1.0, 1.0, 1.0])
        expected = np.sum(w * np.log(w / u) - w + u)
        assert unnormalized_relative_entropy(w, u) == pytest.approx(expected, abs=1e-14)
        with pytest.raises(DomainError):
            unnormalized_relative_entropy([0.0, 1.0], [1.0, 1.0])

    def test_poisson_kl_is_relative_entropy_of_rates(self):
        q = PoissonProductState.from_rates([0.5, 3.0])
        p = PoissonProductState.from_rates([1.0, 2.0])
        assert kl_poisson_product(q, p) == pytest.approx(unnormalized_relative_entropy(q.rates, p.rates), abs=1e-14)

    def test_beta_kl_matches_quadrature(self):
        q = BetaState(2.5, 1.5, Support.UNIT)
        p = BetaState(0.5, 0.5, Support.UNIT)
        fq = stats.beta(2.5, 1.5)
        fp = stats.beta(0.5, 0.5)
        value, _ = integrate.quad(lambda z: fq.pdf(z) * (fq.logpdf(z) - fp.logpdf(z)), 0.0, 1.0, limit=200)
        assert kl_beta(q, p) == pytest.approx(value, abs=1e-7)
        assert kl_beta(q, q) == pytest.approx(0.0, abs=1e-12)

    def test_discrete_kl(self):
        atoms = np.eye(2)
        q = DiscreteAtoms.normalized(atoms, [0.25, 0.75])
        p = DiscreteAtoms.normalized(atoms, [0.5, 0.5])
        expected = 0.25 * math.log(0.5) + 0.75 * math.log(1.5)
        assert kl_discrete(q, p) == pytest.approx(expected, abs=1e-14)
        assert kl(q, p) == kl_discrete(q, p)

    def test_cross_family_kl_is_rejected(self):
        with pytest.raises(DomainError):
            kl(GaussianState.isotropic([0.0], 1.0), BetaState(1.0, 1.0))


class TestDiscreteAtoms:
    def test_plus_minus_basis(self):
        s = DiscreteAtoms.plus_minus_basis(3, 2.0)
        assert s.atoms.shape == (6, 3)
        np.testing.assert_allclose(s.weights, np.full(6, 1.0 / 6.0))
        np.testing.assert_allclose(s.mean, np.zeros(3), atol=1e-15)

    def test_duplicate_atoms_are_rejected(self):
        with pytest.raises(NumericError):
            DiscreteAtoms.normalized([[1.0], [1.0]], [0.5, 0.5])

    def test_unnormalized_weights_are_rejected(self):
        with pytest.raises(NumericError):
            DiscreteAtoms(np.eye(2), np.array([0.5, 0.6]))


class TestBregmanPairs:
    def test_gaussian_divergence_is_scaled_squared_distance(self):
        pair = gaussian_pair(2.0)
        a, b = np.array([1.0, -1.0]), np.array([0.0, 2.0])
        assert pair.divergence_mean(a, b) == pytest.approx(np.sum((a - b) ** 2) / 4.0)
        np.testing.assert_allclose(pair.grad_F(pair.grad_F_star(a)), a)

    def test_poisson_divergence_is_relative_entropy(self):
        pair = poisson_pair()
        a, b = np.array([0.5, 2.0]), np.array([1.5, 0.7])
        assert pair.divergence_mean(a, b) == pytest.approx(unnormalized_relative_entropy(a, b), abs=1e-12)
        assert pair.divergence_natural(np.log(b), np.log(a)) == pytest.approx(
            unnormalized_relative_entropy(a, b), abs=1e-12
        )

    def test_relative_entropy_projection(self):
        np.testing.assert_allclose(project_relative_entropy([1.0, 3.0], ConvexDomain.simplex(2)), [0.25, 0.75])
        box = ConvexDomain.box([0.1, 0.1], [1.0, 1.0])
        np.testing.assert_allclose(project_relative_entropy([0.01, 5.0], box), [0.1, 1.0])
        with pytest.raises(DomainError):
            project_relative_entropy([1.0], ConvexDomain.interval(-1.0, 1.0))


class TestProjectMean:
    def test_gaussian_keeps_covariance(self):
        s = GaussianState.isotropic([3.0, 4.0], 0.5)
        out = project_mean(s, ConvexDomain.ball(2, 1.0))
        np.testing.assert_allclose(out.mean, [0.6, 0.8])
        np.testing.assert_array_equal(out.covariance, s.covariance)

    def test_beta_keeps_concentration(self):
        out = project_mean(BetaState(9.0, 1.0, Support.UNIT), ConvexDomain.interval(0.0, 0.5))
        assert out.mean == pytest.approx(0.5)
        assert out.concentration == pytest.approx(10.0)

    def test_beta_inside_is_unchanged(self):
        s = BetaState(2.0, 3.0, Support.UNIT)
        assert project_mean(s, ConvexDomain.interval(0.0, 1.0)) is s

    def test_symmetric_support(self):
        s = BetaState(3.0, 1.0, Support.SYMMETRIC)
        assert s.mean == pytest.approx(0.5)
        out = project_mean(s, ConvexDomain.interval(-0.5, 0.25))
        assert out.mean == pytest.approx(0.25)
