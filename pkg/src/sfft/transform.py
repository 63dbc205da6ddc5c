"""Fast transforms on rank-1 lattices.

Sampling a sparse trigonometric polynomial on a rank-1 lattice collapses every
frequency onto its residue ``k . z mod M``, so evaluation is one length-M
inverse FFT of a residue-scattered coefficient vector and inversion is one
forward FFT followed by a residue gather.  The multi-lattice inversion runs
the single-lattice inversion per constituent lattice, restricted to its
alias-free subset, and averages coefficients that several lattices recover.

Arbitrary lengths (the lattice sizes are primes by construction, and the box
extents are odd) are handled in O(K log K) by the underlying pocketfft
backend's mixed-radix and Bluestein paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft

from .lattice import (
    FrequencyIndexSet,
    MultipleRank1Lattice,
    Rank1Lattice,
    SparseSpectrum,
    residues,
)

__all__ = ["LatticeSamples", "dft_1d", "eval_on_lattice", "invert_single", "invert_multiple"]


@dataclass(frozen=True)
class LatticeSamples:
    """Sample values of a signal at the M nodes of one rank-1 lattice."""

    lattice: Rank1Lattice
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.lattice.m,):
            raise ValueError(
                f"expected {self.lattice.m} sample values, got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)


def dft_1d(values, direction: str = "forward") -> np.ndarray:
    """1-D DFT of any length K >= 1, O(K log K) including prime K.

    ``forward`` returns the unnormalized sums X_j = sum_l x_l e^{-2pi i jl/K};
    ``inverse`` applies the conjugate transform scaled by 1/K, so
    inverse(forward(x)) == x.
    """
    values = np.asarray(values, dtype=np.complex128)
    if values.ndim != 1 or not len(values):
        raise ValueError("dft_1d expects a nonempty 1-D vector")
    if direction == "forward":
        return scipy.fft.fft(values)
    if direction == "inverse":
        return scipy.fft.ifft(values)
    raise ValueError("direction must be 'forward' or 'inverse'")


def eval_on_lattice(spectrum: SparseSpectrum, lat: Rank1Lattice) -> LatticeSamples:
    """Evaluate a sparse polynomial at all lattice nodes via one inverse FFT.

    Coefficients are scattered (summing collisions) onto a dense length-M
    accumulator indexed by residue, so the cost is O(M log M + d |I|).
    """
    if spectrum.dim != lat.dim:
        raise ValueError("dimension mismatch between spectrum and lattice")
    acc = np.zeros(lat.m, dtype=np.complex128)
    if len(spectrum):
        res = residues(spectrum.freqs, lat.z, lat.m)
        np.add.at(acc, res, spectrum.coeffs)
    values = dft_1d(acc, "inverse") * lat.m
    return LatticeSamples(lat, values)


def invert_single(samples: LatticeSamples, I: FrequencyIndexSet) -> SparseSpectrum:
    """Recover coefficients for the frequencies of I from one lattice.

    Computes g_k = (1/M) sum_j value_j e^{-2pi i j (k.z mod M)/M} for every
    requested k with one forward FFT and a residue gather.  Exact whenever the
    lattice is reconstructing for I; aliased frequencies receive the sum of
    their colliding coefficients.
    """
    lat = samples.lattice
    if I.dim != lat.dim:
        raise ValueError("dimension mismatch between samples and frequency set")
    spectrum_hat = dft_1d(samples.values, "forward") / lat.m
    res = residues(I, lat.z, lat.m)
    return SparseSpectrum(I.freqs, spectrum_hat[res], I.dim)


def invert_multiple(
    samples: Sequence[LatticeSamples], ml: MultipleRank1Lattice
) -> SparseSpectrum:
    """Averaged inversion over all lattices of a multi-lattice scheme.

    Per lattice, one single-lattice inversion restricted to its alias-free
    subset; coefficients recovered by several lattices are averaged.  Target
    frequencies covered by no lattice are absent from the output (the scheme
    itself reports coverage via ``is_reconstructing`` / ``uncovered()``).
    """
    samples = list(samples)
    if len(samples) != len(ml.lattices):
        raise ValueError("need exactly one sample vector per lattice")
    for got, lat in zip(samples, ml.lattices):
        if got.lattice.m != lat.m or not np.array_equal(got.lattice.z, lat.z):
            raise ValueError("sample vectors are not aligned with the scheme's lattices")
    target = ml.target
    sums = np.zeros(len(target), dtype=np.complex128)
    counts = np.zeros(len(target), dtype=np.int64)
    for got, lat, mask in zip(samples, ml.lattices, ml.recon_masks):
        if not mask.any():
            continue
        spectrum_hat = dft_1d(got.values, "forward") / lat.m
        res = residues(target.freqs[mask], lat.z, lat.m)
        sums[mask] += spectrum_hat[res]
        counts[mask] += 1
    covered = counts > 0
    coeffs = sums[covered] / counts[covered]
    return SparseSpectrum(target.freqs[covered], coeffs, target.dim)
