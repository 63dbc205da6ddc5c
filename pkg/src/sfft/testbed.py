"""Ground-truth signal generators, noise injection, and error metrics.

Provides the experiment families used by the CLI harness and the test suite:
random sparse trigonometric polynomials (box or unit-modulus coefficients), a
fixed 10-dimensional test function built from tensor products of periodized
L2-normalized B-splines (whose exact Fourier coefficients are known in closed
form), additive complex Gaussian noise calibrated to a target SNR, and the
relative spectral / L2 error metrics.
"""

from __future__ import annotations

import threading
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import BSpline

from .lattice import SparseSpectrum

__all__ = [
    "SignalOracle",
    "NoisyOracle",
    "gen_random_sparse_poly",
    "bspline_test_function",
    "bspline_exact_coefficient",
    "bspline_exact_coefficients",
    "bspline_l2_constant",
    "bspline_norm_sq",
    "sigma_for_snr",
    "relative_l2_error",
    "relative_spectrum_l2_error",
]

#: phase-matrix entries evaluated per chunk when summing exponentials
_EVAL_BUDGET = 1 << 21


class SignalOracle:
    """Black-box evaluator of a periodic signal on [0, 1)^d with a call counter.

    Callable on an (n, d) array of points (a single point is accepted too),
    returns n complex values.  The counter increments by exactly the number of
    points evaluated; the increment is lock-protected so concurrent use keeps
    it exact.
    """

    def __init__(self, dim: int, fn: Callable[[np.ndarray], np.ndarray], concurrency_safe: bool = True):
        self.dim = int(dim)
        self.concurrency_safe = bool(concurrency_safe)
        self._fn = fn
        self._lock = threading.Lock()
        self._calls = 0

    @property
    def call_count(self) -> int:
        return self._calls

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ValueError(f"expected points of shape (n, {self.dim}), got {points.shape}")
        values = np.asarray(self._fn(points), dtype=np.complex128)
        if values.shape != (len(points),):
            raise ValueError(
                f"oracle function returned shape {values.shape}, expected ({len(points)},)"
            )
        with self._lock:
            self._calls += len(points)
        return values


class NoisyOracle:
    """Adds independent complex Gaussian noise (std sigma) to an inner oracle.

    Real and imaginary noise parts are each N(0, sigma^2/2), so E|eta|^2 equals
    sigma^2.  The noise stream is separate from all detection randomness and
    is lock-protected, hence safe (and counted exactly) under concurrent use;
    noise values are reproducible only for a fixed call order.
    """

    def __init__(self, inner: SignalOracle, sigma: float, seed=0):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self._inner = inner
        self.sigma = float(sigma)
        self.dim = inner.dim
        self.concurrency_safe = inner.concurrency_safe
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        self._calls = 0

    @property
    def call_count(self) -> int:
        return self._calls

    def __call__(self, points) -> np.ndarray:
        values = self._inner(points)
        n = len(values)
        with self._lock:
            noise = self._rng.standard_normal((n, 2)) @ np.array([1.0, 1.0j])
            self._calls += n
        return values + (self.sigma / np.sqrt(2.0)) * noise


def sigma_for_snr(sparsity: int, snr_db: float) -> float:
    """Noise level sigma = sqrt(sparsity)/sqrt(SNR) with SNR = 10^(SNR_dB/10)."""
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    return float(np.sqrt(sparsity) / np.sqrt(10.0 ** (snr_db / 10.0)))


def _poly_oracle_fn(freqs: np.ndarray, coeffs: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    freqs_t = freqs.T.astype(np.float64)

    def evaluate(points: np.ndarray) -> np.ndarray:
        out = np.empty(len(points), dtype=np.complex128)
        chunk = max(1, _EVAL_BUDGET // max(len(coeffs), 1))
        for i in range(0, len(points), chunk):
            phase = points[i : i + chunk] @ freqs_t
            out[i : i + chunk] = np.exp(2j * np.pi * phase) @ coeffs
        return out

    return evaluate


def gen_random_sparse_poly(
    dims: int,
    freq_limit: int,
    sparsity: int,
    coeff_model: str = "box",
    seed=0,
) -> tuple[SparseSpectrum, SignalOracle]:
    """Random sparse trigonometric polynomial and its evaluation oracle.

    Frequencies are drawn uniformly without replacement from the full grid
    with components in [-freq_limit, freq_limit].  The ``box`` coefficient
    model draws from [-1,1) + [-1,1)i, redrawing until |c| >= 1e-6; the
    ``unit_modulus`` model draws e^{2*pi*i*phi} with uniform phase.
    """
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if freq_limit < 0:
        raise ValueError("freq_limit must be >= 0")
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    cardinality = (2 * freq_limit + 1) ** dims
    if sparsity > cardinality:
        raise ValueError(f"sparsity {sparsity} exceeds the grid cardinality {cardinality}")
    rng = np.random.default_rng(seed)

    # sequential rejection keeps the draw uniform without replacement
    chosen: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    while len(chosen) < sparsity:
        batch = rng.integers(-freq_limit, freq_limit + 1, size=(max(sparsity, 64), dims))
        for row in map(tuple, batch.tolist()):
            if row not in seen:
                seen.add(row)
                chosen.append(row)
                if len(chosen) == sparsity:
                    break
    freqs = np.asarray(chosen, dtype=np.int64)

    if coeff_model == "box":
        coeffs = rng.uniform(-1, 1, sparsity) + 1j * rng.uniform(-1, 1, sparsity)
        small = np.abs(coeffs) < 1e-6
        while small.any():
            n_small = int(small.sum())
            coeffs[small] = rng.uniform(-1, 1, n_small) + 1j * rng.uniform(-1, 1, n_small)
            small = np.abs(coeffs) < 1e-6
    elif coeff_model == "unit_modulus":
        coeffs = np.exp(2j * np.pi * rng.random(sparsity))
    else:
        raise ValueError("coeff_model must be 'box' or 'unit_modulus'")

    spectrum = SparseSpectrum(freqs, coeffs, dims)
    oracle = SignalOracle(dims, _poly_oracle_fn(spectrum.freqs, spectrum.coeffs))
    return spectrum, oracle


# ---------------------------------------------------------------------------
# the fixed 10-dimensional B-spline test function

#: (spline order, 0-based components) of the three tensor-product terms
_BSPLINE_GROUPS: tuple[tuple[int, tuple[int, ...]], ...] = (
    (2, (0, 2, 7)),
    (4, (1, 4, 5, 9)),
    (6, (3, 6, 8)),
)

_BSPLINE_DIM = 10


@lru_cache(maxsize=None)
def bspline_l2_constant(m: int) -> float:
    """Normalization C_m making the order-m periodized B-spline unit L2 norm.

    Computed from the coefficient series: ||N_m||^2 = C_m^2 * sum_k
    sinc(pi k/m)^{2m}; the series is summed far past convergence (terms decay
    like k^{-2m}).
    """
    if m < 1:
        raise ValueError("spline order must be >= 1")
    k = np.arange(1, 200_001)
    total = 1.0 + 2.0 * np.sum(np.sinc(k / m) ** (2 * m))
    return float(1.0 / np.sqrt(total))


@lru_cache(maxsize=None)
def _bspline_basis(m: int) -> BSpline:
    # order-m cardinal B-spline (degree m-1) on knots 0..m
    return BSpline.basis_element(np.arange(m + 1), extrapolate=False)


def _periodic_bspline(m: int, x: np.ndarray) -> np.ndarray:
    """Periodized L2-normalized B-spline factor N_m on the torus.

    N_m has Fourier coefficients C_m * sinc(pi k/m)^m * (-1)^k, i.e. it is the
    m-fold self-convolution of the scaled indicator m*1_[-1/(2m),1/(2m)]
    shifted by 1/2 — one bump per period, evaluated exactly as the cardinal
    B-spline piecewise polynomial at m*frac(x), scaled by C_m * m.
    """
    u = m * np.mod(x, 1.0)
    v = _bspline_basis(m)(u)
    return bspline_l2_constant(m) * m * np.nan_to_num(v, copy=False)


def bspline_test_function() -> SignalOracle:
    """The fixed 10-dimensional test signal: three tensor-product spline terms."""

    def evaluate(points: np.ndarray) -> np.ndarray:
        total = np.zeros(len(points), dtype=np.complex128)
        for m, comps in _BSPLINE_GROUPS:
            term = np.ones(len(points))
            for t in comps:
                term = term * _periodic_bspline(m, points[:, t])
            total += term
        return total

    return SignalOracle(_BSPLINE_DIM, evaluate)


def bspline_exact_coefficients(freqs) -> np.ndarray:
    """Exact Fourier coefficients of the 10-D test function at given frequencies.

    A tensor term of order m on components A contributes
    prod_{t in A} C_m * sinc(pi k_t/m)^m * (-1)^{k_t} whenever k_t = 0 for all
    t outside A, else 0.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    if freqs.ndim == 1:
        freqs = freqs.reshape(1, -1)
    if freqs.shape[1] != _BSPLINE_DIM:
        raise ValueError(f"frequencies must have {_BSPLINE_DIM} components")
    out = np.zeros(len(freqs), dtype=np.complex128)
    for m, comps in _BSPLINE_GROUPS:
        rest = [t for t in range(_BSPLINE_DIM) if t not in comps]
        active = np.all(freqs[:, rest] == 0, axis=1)
        if not active.any():
            continue
        k = freqs[np.ix_(active.nonzero()[0], list(comps))]
        factors = bspline_l2_constant(m) * np.sinc(k / m) ** m * np.where(k % 2 == 0, 1.0, -1.0)
        out[active] += factors.prod(axis=1)
    return out


def bspline_exact_coefficient(freq) -> complex:
    """Scalar convenience wrapper around :func:`bspline_exact_coefficients`."""
    return complex(bspline_exact_coefficients(np.asarray(freq).reshape(1, -1))[0])


@lru_cache(maxsize=None)
def bspline_norm_sq() -> float:
    """Squared L2 norm of the 10-D test function.

    Each tensor term has unit norm by construction; the cross terms factor
    into products of the one-dimensional means, which equal C_m.
    """
    means = {m: bspline_l2_constant(m) ** len(comps) for m, comps in _BSPLINE_GROUPS}
    terms = list(means.values())
    cross = (
        terms[0] * terms[1]
        + terms[0] * terms[2]
        + terms[1] * terms[2]
    )
    return float(len(terms) + 2.0 * cross)


# ---------------------------------------------------------------------------
# error metrics

def relative_l2_error(
    detected: SparseSpectrum,
    exact_coefficients: Callable[[np.ndarray], np.ndarray],
    norm_sq: float,
) -> float:
    """Relative L2 approximation error of a detected spectrum.

    Computes sqrt(norm_sq - sum_I |f_k|^2 + sum_I |c_k - f_k|^2) / sqrt(norm_sq)
    over the detected index set I, where f_k are the exact coefficients; the
    radicand is clamped at 0 against roundoff (raising if it is negative
    beyond tolerance).
    """
    if not norm_sq > 0:
        raise ValueError("norm_sq must be positive")
    if not len(detected):
        return 1.0
    truth = np.asarray(exact_coefficients(detected.freqs), dtype=np.complex128)
    radicand = (
        norm_sq
        - float(np.sum(np.abs(truth) ** 2))
        + float(np.sum(np.abs(detected.coeffs - truth) ** 2))
    )
    if radicand < -1e-12 * max(1.0, norm_sq):
        raise ValueError(f"negative error radicand {radicand}: inconsistent inputs")
    return float(np.sqrt(max(radicand, 0.0) / norm_sq))


def relative_spectrum_l2_error(detected: SparseSpectrum, truth: SparseSpectrum) -> float:
    """Relative l2 coefficient error over the union of supports.

    Coefficients absent on either side count as 0, so missed frequencies and
    spurious detections both contribute their full magnitude.
    """
    if not len(truth):
        raise ValueError("truth spectrum must be nonempty")
    truth_map = truth.as_dict()
    detected_map = detected.as_dict()
    err_sq = 0.0
    for key in truth_map.keys() | detected_map.keys():
        diff = detected_map.get(key, 0.0) - truth_map.get(key, 0.0)
        err_sq += abs(diff) ** 2
    return float(np.sqrt(err_sq / truth.energy()))
