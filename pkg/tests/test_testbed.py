"""Signal oracles, noise model, random sparse polynomials, and the B-spline testbed."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from sfft import (
    NoisyOracle,
    Rank1Lattice,
    SignalOracle,
    SparseSpectrum,
    bspline_exact_coefficient,
    bspline_exact_coefficients,
    bspline_l2_constant,
    bspline_norm_sq,
    bspline_test_function,
    eval_on_lattice,
    gen_random_sparse_poly,
    invert_single,
    relative_l2_error,
    relative_spectrum_l2_error,
    sigma_for_snr,
)
from sfft.testbed import _BSPLINE_GROUPS, _periodic_bspline


class TestSignalOracle:
    def test_counts_every_point(self):
        oracle = SignalOracle(3, lambda pts: np.zeros(len(pts), dtype=complex))
        assert oracle.call_count == 0
        oracle(np.zeros((7, 3)))
        oracle(np.zeros((5, 3)))
        assert oracle.call_count == 12

    def test_single_point_promoted(self):
        oracle = SignalOracle(2, lambda pts: pts.sum(axis=1).astype(complex))
        value = oracle(np.array([0.25, 0.5]))
        assert value.shape == (1,)
        assert value[0] == pytest.approx(0.75)
        assert oracle.call_count == 1

    def test_shape_validation(self):
        oracle = SignalOracle(3, lambda pts: np.zeros(len(pts), dtype=complex))
        with pytest.raises(ValueError):
            oracle(np.zeros((4, 2)))
        bad = SignalOracle(2, lambda pts: np.zeros(len(pts) + 1, dtype=complex))
        with pytest.raises(ValueError):
            bad(np.zeros((3, 2)))

    def test_thread_safe_counter(self):
        oracle = SignalOracle(1, lambda pts: np.zeros(len(pts), dtype=complex))
        batch = np.zeros((10, 1))
        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(lambda _: oracle(batch), range(200)))
        assert oracle.call_count == 2000


class TestNoise:
    def test_sigma_pin(self):
        assert sigma_for_snr(100, 30.0) == pytest.approx(0.31622776601683794, rel=0, abs=0)

    def test_sigma_formula(self):
        assert sigma_for_snr(1000, 10.0) == pytest.approx(np.sqrt(1000) / np.sqrt(10.0))
        with pytest.raises(ValueError):
            sigma_for_snr(0, 10.0)

    def test_noise_second_moment(self):
        sigma = 0.7
        inner = SignalOracle(1, lambda pts: np.zeros(len(pts), dtype=complex))
        noisy = NoisyOracle(inner, sigma, seed=314)
        values = noisy(np.zeros((1_000_000, 1)))
        mean_sq = np.mean(np.abs(values) ** 2)
        assert abs(mean_sq - sigma**2) <= 0.01 * sigma**2

    def test_noise_mean_near_zero(self):
        inner = SignalOracle(1, lambda pts: np.zeros(len(pts), dtype=complex))
        noisy = NoisyOracle(inner, 1.0, seed=7)
        values = noisy(np.zeros((1_000_000, 1)))
        assert abs(values.mean()) < 0.005

    def test_zero_sigma_is_exact(self):
        inner = SignalOracle(1, lambda pts: pts[:, 0].astype(complex))
        noisy = NoisyOracle(inner, 0.0, seed=0)
        pts = np.linspace(0, 1, 11)[:, None]
        assert np.array_equal(noisy(pts), pts[:, 0].astype(complex))

    def test_counter_delegates_to_inner(self):
        inner = SignalOracle(2, lambda pts: np.zeros(len(pts), dtype=complex))
        noisy = NoisyOracle(inner, 0.5, seed=1)
        noisy(np.zeros((9, 2)))
        assert noisy.call_count == 9
        assert inner.call_count == 9

    def test_seeded_reproducibility(self):
        inner = SignalOracle(1, lambda pts: np.zeros(len(pts), dtype=complex))
        a = NoisyOracle(inner, 1.0, seed=5)(np.zeros((100, 1)))
        inner2 = SignalOracle(1, lambda pts: np.zeros(len(pts), dtype=complex))
        b = NoisyOracle(inner2, 1.0, seed=5)(np.zeros((100, 1)))
        assert np.array_equal(a, b)


class TestRandomSparsePoly:
    def test_support_properties(self):
        spec, oracle = gen_random_sparse_poly(4, 8, 50, "box", seed=0)
        assert len(spec) == 50
        assert spec.dim == 4
        assert np.all(np.abs(spec.freqs) <= 8)
        assert len({tuple(row) for row in spec.freqs.tolist()}) == 50

    def test_box_model_floor(self):
        rng = np.random.default_rng(50)
        mags = []
        for _ in range(20):
            spec, _ = gen_random_sparse_poly(2, 40, 5000, "box", seed=rng)
            mags.append(np.abs(spec.coeffs))
        mags = np.concatenate(mags)
        assert mags.min() >= 1e-6
        assert mags.max() <= np.sqrt(2.0) * 3  # |a+bi|, a,b ~ U[-3,3]

    def test_unit_modulus_model(self):
        spec, _ = gen_random_sparse_poly(3, 10, 500, "unit_modulus", seed=1)
        assert np.allclose(np.abs(spec.coeffs), 1.0, atol=1e-14)

    def test_oracle_matches_direct_evaluation(self):
        spec, oracle = gen_random_sparse_poly(3, 6, 20, "box", seed=2)
        rng = np.random.default_rng(51)
        pts = rng.random((40, 3))
        direct = np.exp(2j * np.pi * pts @ spec.freqs.T.astype(float)) @ spec.coeffs
        assert np.allclose(oracle(pts), direct, atol=1e-12)
        assert oracle.call_count == 40

    def test_sparsity_exceeding_box_raises(self):
        with pytest.raises(ValueError):
            gen_random_sparse_poly(1, 2, 6, "box", seed=0)  # box has 5 points
        with pytest.raises(ValueError):
            gen_random_sparse_poly(2, 3, 10, "sawtooth", seed=0)

    def test_seed_reproducibility(self):
        a, _ = gen_random_sparse_poly(3, 9, 30, "unit_modulus", seed=77)
        b, _ = gen_random_sparse_poly(3, 9, 30, "unit_modulus", seed=77)
        assert np.array_equal(a.freqs, b.freqs)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_round_trip_through_lattice_inversion(self):
        spec, oracle = gen_random_sparse_poly(2, 3, 5, "box", seed=3)
        support = spec.support()
        # brute-force a reconstructing rank-1 lattice for this support
        from sfft import is_reconstructing_single

        found = None
        for M in range(5, 600, 2):
            for z1 in range(1, M):
                lat = Rank1Lattice((1, z1), M)
                if is_reconstructing_single(lat, support):
                    found = lat
                    break
            if found:
                break
        assert found is not None
        from sfft import LatticeSamples, lattice_nodes

        samples = LatticeSamples(found, oracle(lattice_nodes(found)))
        assert np.allclose(samples.values, eval_on_lattice(spec, found).values, atol=1e-12)
        recovered = invert_single(samples, support)
        assert relative_spectrum_l2_error(recovered, spec) <= 1e-12


class TestPeriodicBspline:
    @pytest.mark.parametrize("m", [2, 4, 6])
    def test_unit_l2_norm_by_quadrature(self, m):
        x = (np.arange(100_000) + 0.5) / 100_000
        values = _periodic_bspline(m, x)
        norm_sq = np.mean(values**2)
        assert norm_sq == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("m", [2, 4, 6])
    def test_mean_value_is_l2_constant(self, m):
        # the zeroth Fourier coefficient of the normalized spline is C_m
        x = (np.arange(200_000) + 0.5) / 200_000
        assert np.mean(_periodic_bspline(m, x)) == pytest.approx(
            bspline_l2_constant(m), abs=1e-9
        )

    @pytest.mark.parametrize("m", [2, 4, 6])
    def test_one_periodic(self, m):
        x = np.linspace(0.05, 0.95, 19)
        assert np.allclose(_periodic_bspline(m, x), _periodic_bspline(m, x + 3.0), atol=1e-12)

    def test_l2_constant_values(self):
        # C_m = (1 + 2 sum_{k>=1} sinc(k/m)^{2m})^{-1/2}; m=2 admits the
        # closed form 1/sqrt(2/3 + inf-sum) checked against direct summation
        for m in (2, 4, 6):
            k = np.arange(1, 500_000)
            total = 1.0 + 2.0 * np.sum(np.sinc(k / m) ** (2 * m))
            assert bspline_l2_constant(m) == pytest.approx(1.0 / np.sqrt(total), abs=1e-12)


class TestBsplineTestFunction:
    def test_group_structure(self):
        assert _BSPLINE_GROUPS == ((2, (0, 2, 7)), (4, (1, 4, 5, 9)), (6, (3, 6, 8)))
        all_axes = sorted(ax for _, axes in _BSPLINE_GROUPS for ax in axes)
        assert all_axes == list(range(10))

    def test_oracle_matches_sum_of_products(self):
        oracle = bspline_test_function()
        rng = np.random.default_rng(52)
        pts = rng.random((50, 10))
        expected = np.zeros(50)
        for m, axes in _BSPLINE_GROUPS:
            expected += np.prod([_periodic_bspline(m, pts[:, ax]) for ax in axes], axis=0)
        assert np.allclose(oracle(pts), expected, atol=1e-12)
        assert oracle.call_count == 50

    def test_coefficient_closed_form_matches_truncated_series(self):
        # spot-check single-group coefficients against the numeric Fourier
        # integral computed by the trapezoid rule on a fine grid
        x = (np.arange(262_144)) / 262_144
        for m, axes in _BSPLINE_GROUPS:
            values = _periodic_bspline(m, x)
            for k in (0, 1, 2, 5, 8):
                numeric = np.mean(values * np.exp(-2j * np.pi * k * x))
                freq = np.zeros(10, dtype=int)
                freq[axes[0]] = k
                closed = bspline_exact_coefficient(tuple(freq))
                # remaining groups contribute only at k=0 on their own axes;
                # here every other axis is zero so add their DC products
                expected = 0.0
                for m2, axes2 in _BSPLINE_GROUPS:
                    if m2 == m:
                        expected += numeric.real * bspline_l2_constant(m2) ** (len(axes2) - 1)
                    elif k == 0:
                        expected += bspline_l2_constant(m2) ** len(axes2)
                assert closed == pytest.approx(expected, abs=1e-6)

    def test_zero_frequency_pin(self):
        c2, c4, c6 = (bspline_l2_constant(m) for m in (2, 4, 6))
        expected = c2**3 + c4**4 + c6**3
        assert bspline_exact_coefficient((0,) * 10) == pytest.approx(expected, rel=1e-14)

    def test_ones_on_first_group_pin(self):
        freq = np.zeros(10, dtype=int)
        freq[[0, 2, 7]] = 1
        c2 = bspline_l2_constant(2)
        # sinc(pi/2)^2 = (2/pi)^2 and sign (-1)^1 per axis: (-(2/pi)^2 C_2)^3...
        # with the shared normalization: C_2^3 * (-(2/pi)^2)^3 = -C_2^3 * 64/pi^6
        expected = -(c2**3) * 64 / np.pi**6
        assert bspline_exact_coefficient(tuple(freq)) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(-0.043238700475778734, rel=1e-12)

    def test_cross_group_frequency_vanishes(self):
        freq = np.zeros(10, dtype=int)
        freq[0] = 1  # group m=2
        freq[1] = 1  # group m=4
        assert bspline_exact_coefficient(tuple(freq)) == 0.0

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(53)
        freqs = rng.integers(-6, 7, size=(30, 10))
        batch = bspline_exact_coefficients(freqs)
        for row, value in zip(freqs, batch):
            assert value == pytest.approx(bspline_exact_coefficient(tuple(row)), rel=1e-14)

    def test_coefficients_decay_with_frequency(self):
        def group_coeff(k):
            freq = np.zeros(10, dtype=int)
            freq[1] = k  # m=4 axis
            return abs(bspline_exact_coefficient(tuple(freq)))

        values = [group_coeff(k) for k in (1, 3, 5, 9)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_norm_sq_analytic_value(self):
        assert bspline_norm_sq() == pytest.approx(3.860521370158563, rel=1e-14)

    def test_norm_sq_against_monte_carlo(self):
        oracle = bspline_test_function()
        rng = np.random.default_rng(54)
        values = oracle(rng.random((1_000_000, 10)))
        estimate = np.mean(values.real**2)
        # MC standard error ~ 2.4e-3; require 3 significant digits
        assert estimate == pytest.approx(bspline_norm_sq(), rel=5e-3)


class TestRelativeErrors:
    def test_empty_detection_is_total_error(self):
        empty = SparseSpectrum(np.empty((0, 10), dtype=int), [])
        assert relative_l2_error(empty, bspline_exact_coefficients, bspline_norm_sq()) == 1.0

    def test_perfect_subset_reduces_to_tail(self):
        freqs = np.zeros((1, 10), dtype=int)
        truth = bspline_exact_coefficients(freqs)
        detected = SparseSpectrum(freqs, truth)
        norm_sq = bspline_norm_sq()
        expected = np.sqrt((norm_sq - abs(truth[0]) ** 2) / norm_sq)
        got = relative_l2_error(detected, bspline_exact_coefficients, norm_sq)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_wrong_coefficient_adds_energy(self):
        freqs = np.zeros((1, 10), dtype=int)
        truth = bspline_exact_coefficients(freqs)
        detected = SparseSpectrum(freqs, truth + 0.1)
        norm_sq = bspline_norm_sq()
        expected = np.sqrt((norm_sq - abs(truth[0]) ** 2 + 0.01) / norm_sq)
        got = relative_l2_error(detected, bspline_exact_coefficients, norm_sq)
        assert got == pytest.approx(expected, rel=1e-10)

    def test_inconsistent_norm_raises(self):
        freqs = np.zeros((1, 3), dtype=int)
        detected = SparseSpectrum(freqs, [5.0])
        with pytest.raises(ValueError):
            relative_l2_error(detected, lambda f: np.array([5.0]), 1.0)

    def test_spectrum_error_examples(self):
        truth = SparseSpectrum([(0, 0), (1, 0), (0, 1), (1, 1)], [1.0, 1.0, 1.0, 1.0])
        assert relative_spectrum_l2_error(truth, truth) == 0.0
        empty = SparseSpectrum(np.empty((0, 2), dtype=int), [])
        assert relative_spectrum_l2_error(empty, truth) == 1.0
        three = SparseSpectrum.from_dict(
            {(0, 0): 1.0, (1, 0): 1.0, (0, 1): 1.0}, dim=2
        )
        assert relative_spectrum_l2_error(three, truth) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            relative_spectrum_l2_error(truth, empty)
