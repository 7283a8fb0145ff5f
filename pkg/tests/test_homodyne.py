"""Quadrature wavefunctions, pdfs, synthetic sampling and the binned POVM."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from csqpt import (
    EdgeOrderError,
    QuadratureDataset,
    build_povm,
    coherent_density,
    fock_density,
    quadrature_pdf,
    quadrature_wavefunction,
    sample_dataset,
)
from csqpt.homodyne import section_phases


class TestWavefunction:
    def test_ground_state_value(self):
        assert quadrature_wavefunction(0, 0.0) == pytest.approx((2 / np.pi) ** 0.25, rel=1e-12)

    def test_first_excited_node(self):
        assert quadrature_wavefunction(1, 0.0) == 0.0

    def test_orthonormality(self):
        for m in range(11):
            for n in range(m, 11):
                val, _ = quad(lambda x: quadrature_wavefunction(m, x) * quadrature_wavefunction(n, x),
                              -6, 6, epsabs=1e-12, limit=200)
                assert val == pytest.approx(1.0 if m == n else 0.0, abs=1e-8)

    def test_recurrence_matches_scipy_polynomials(self):
        # independent route: explicit Hermite polynomial formula
        from scipy.special import eval_hermite
        x = np.linspace(-4, 4, 41)
        for n in (0, 1, 5, 12):
            direct = ((2 / np.pi) ** 0.25 / math.sqrt(2.0**n * math.factorial(n))
                      * eval_hermite(n, np.sqrt(2) * x) * np.exp(-x * x))
            np.testing.assert_allclose(quadrature_wavefunction(n, x), direct, atol=1e-10)

    def test_negative_n_rejected(self):
        with pytest.raises(ValueError):
            quadrature_wavefunction(-1, 0.0)


class TestQuadraturePdf:
    def test_vacuum_gaussian(self):
        xs = np.linspace(-3, 3, 301)
        expected = np.sqrt(2 / np.pi) * np.exp(-2 * xs**2)  # N(0, 1/4)
        for theta in (0.0, 1.3, 4.0):
            np.testing.assert_allclose(quadrature_pdf(fock_density(0, 6), theta, xs), expected, atol=1e-12)

    @pytest.mark.parametrize("alpha", [0.55, 0.8 * np.exp(0.7j)])
    @pytest.mark.parametrize("theta", [0.0, 0.9, 2.5])
    def test_coherent_gaussian(self, alpha, theta):
        # closed form: mean |alpha| cos(theta - arg alpha), variance 1/4
        rho = coherent_density(alpha, 15)
        xs = np.linspace(-4, 4, 401)
        mean = abs(alpha) * np.cos(theta - np.angle(complex(alpha)))
        expected = np.sqrt(2 / np.pi) * np.exp(-2 * (xs - mean) ** 2)
        np.testing.assert_allclose(quadrature_pdf(rho, theta, xs), expected, atol=1e-8)

    def test_single_photon_node_at_origin(self):
        assert quadrature_pdf(fock_density(1, 5), 0.0, 0.0) == 0.0

    def test_normalization(self):
        xs = np.linspace(-6, 6, 24001)
        rng = np.random.default_rng(1)
        a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        rho = a @ a.conj().T
        from csqpt import DensityMatrix
        rho = DensityMatrix((rho + rho.conj().T) / 2 / np.trace(rho).real)
        for state in (fock_density(3, 10), coherent_density(1.1, 10), rho):
            p = quadrature_pdf(state, 0.7, xs)
            assert np.trapezoid(p, xs) == pytest.approx(1.0, abs=1e-6)


class TestSampleDataset:
    def test_determinism_byte_for_byte(self):
        rho = coherent_density(0.4, 8)
        a = sample_dataset(rho, 20, 5000, seed=99)
        b = sample_dataset(rho, 20, 5000, seed=99)
        assert np.array_equal(a.samples, b.samples)
        c = sample_dataset(rho, 20, 5000, seed=100)
        assert not np.array_equal(a.samples, c.samples)

    def test_zero_samples_rejected(self):
        with pytest.raises(ValueError):
            sample_dataset(fock_density(0, 4), 20, 0, seed=1)

    def test_section_assignment_deterministic(self):
        ds = sample_dataset(fock_density(0, 5), 20, 100_000, seed=7)
        centers = section_phases(20)
        counts = [(ds.thetas == c).sum() for c in centers]
        assert counts == [5000] * 20

    def test_vacuum_variance(self):
        ds = sample_dataset(fock_density(0, 7), 20, 100_000, seed=7)
        # pooled sample variance lands in the tight window for this seed
        assert 0.2475 <= ds.xs.var() <= 0.2525
        # per section, allow 4 chi-square standard errors around 1/4
        for p in range(20):
            xs = ds.xs[np.floor(ds.thetas / (2 * np.pi / 20)).astype(int) == p]
            se = 0.25 * math.sqrt(2.0 / (xs.size - 1))
            assert abs(xs.var() - 0.25) <= 4 * se

    def test_coherent_section_means_trace_cosine(self):
        alpha = 0.55
        ds = sample_dataset(coherent_density(alpha, 12), 20, 200_000, seed=21)
        centers = section_phases(20)
        sec = np.floor(ds.thetas / (2 * np.pi / 20)).astype(int)
        for p in range(20):
            xs = ds.xs[sec == p]
            se = xs.std(ddof=1) / math.sqrt(xs.size)
            assert abs(xs.mean() - alpha * np.cos(centers[p])) <= 3 * se

    def test_phase_covariance(self):
        """Rotating the state by e^{i phi n} shifts the fitted sinusoid by phi."""
        alpha, phi = 0.5, 0.8
        base = coherent_density(alpha, 10)
        rotated = coherent_density(alpha * np.exp(1j * phi), 10)  # = e^{i phi n} rho e^{-i phi n}
        centers = section_phases(20)

        def fitted_phase(rho, seed):
            ds = sample_dataset(rho, 20, 200_000, seed=seed)
            sec = np.floor(ds.thetas / (2 * np.pi / 20)).astype(int)
            means = np.array([ds.xs[sec == p].mean() for p in range(20)])
            ses = np.array([ds.xs[sec == p].std(ddof=1) / np.sqrt((sec == p).sum()) for p in range(20)])
            design = np.column_stack([np.cos(centers), np.sin(centers)])
            coef, *_ = np.linalg.lstsq(design, means, rcond=None)
            cov = np.linalg.inv(design.T @ design) * float(np.mean(ses**2) * 20 / 20)
            a, b = coef
            var_phase = (a**2 * cov[1, 1] + b**2 * cov[0, 0]) / (a**2 + b**2) ** 2
            return math.atan2(b, a), math.sqrt(var_phase)

        ph0, se0 = fitted_phase(base, 5)
        ph1, se1 = fitted_phase(rotated, 6)
        shift = (ph1 - ph0) % (2 * np.pi)
        assert abs(shift - phi) <= 3 * math.hypot(se0, se1)

    def test_metadata_round_trip(self):
        ds = sample_dataset(coherent_density(0.2, 6), 4, 100, seed=5, probe_alpha=0.2)
        assert ds.probe_alpha == 0.2 + 0j
        assert ds.seed == 5
        assert len(ds) == 100
        theta, x = ds[0]
        assert 0 <= theta < 2 * np.pi
        assert np.isfinite(x)


class TestQuadratureDatasetValidation:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            QuadratureDataset(np.empty((0, 2)))

    def test_rejects_bad_theta(self):
        with pytest.raises(ValueError):
            QuadratureDataset(np.array([[7.0, 0.0]]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            QuadratureDataset(np.array([[0.1, np.inf]]))


class TestBuildPovm:
    def test_single_wide_bin_is_identity(self):
        povm = build_povm(1, np.array([-8.0, 8.0]), 5)
        np.testing.assert_allclose(povm.operators[0, 0], np.eye(5), atol=1e-6)

    def test_vacuum_probabilities_sum_per_section(self):
        povm = build_povm(20, np.linspace(-5, 5, 101), 7)
        vac = fock_density(0, 7)
        for p in range(20):
            total = np.real(np.einsum("bmn,nm->", povm.operators[p], vac.entries))
            assert total == pytest.approx(1 / 20, abs=1e-6)

    def test_edge_order_error(self):
        with pytest.raises(EdgeOrderError):
            build_povm(4, np.array([0.0, -1.0, 1.0]), 4)
        with pytest.raises(EdgeOrderError):
            build_povm(4, np.array([0.0]), 4)

    def test_operator_invariants(self):
        povm = build_povm(8, np.linspace(-5, 5, 41), 6)
        flat = povm.flat_operators()
        assert np.array_equal(flat, flat.conj().transpose(0, 2, 1))
        assert np.min(np.linalg.eigvalsh(flat)) >= -1e-10
        for p in range(8):
            complete = 8 * povm.operators[p].sum(axis=0)
            evals = np.linalg.eigvalsh(complete)
            assert evals[-1] <= 1 + 1e-8
            sub = np.linalg.eigvalsh(complete[:5, :5])
            assert sub[0] >= 1 - 1e-3

    @pytest.mark.parametrize("state_key", ["vacuum", "coherent", "complex", "fock1"])
    def test_sampler_povm_consistency(self, state_key):
        """Empirical bin frequencies match POVM-model probabilities to 4 SE."""
        states = {
            "vacuum": (fock_density(0, 7), 501),
            "coherent": (coherent_density(0.55, 10), 502),
            "complex": (coherent_density(0.5 * np.exp(1.2j), 10), 503),
            "fock1": (fock_density(1, 7), 504),
        }
        rho, seed = states[state_key]
        n = 500_000 if state_key == "vacuum" else 200_000
        povm = build_povm(20, np.linspace(-5, 5, 101), rho.dim)
        ds = sample_dataset(rho, 20, n, seed=seed)
        sec = np.floor(ds.thetas / (2 * np.pi / 20)).astype(int)
        xbin = np.searchsorted(povm.x_edges, ds.xs, side="right") - 1
        keep = (xbin >= 0) & (xbin < 100)
        counts = np.zeros((20, 100))
        np.add.at(counts, (sec[keep], xbin[keep]), 1)
        model = np.real(np.einsum("pbmn,nm->pb", povm.operators, rho.entries)) * 20
        n_per = n / 20
        expected = model * n_per
        # z-test only where the expected count supports the normal approximation
        mask = expected >= 10
        se = np.sqrt(expected[mask] * np.maximum(1 - model[mask], 0.0))
        z = (counts[mask] - expected[mask]) / se
        assert np.max(np.abs(z)) <= 4.0
