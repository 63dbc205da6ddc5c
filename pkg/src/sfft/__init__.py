"""High-dimensional sparse FFT via dimension-incremental frequency detection.

The package reconstructs the frequency support and Fourier coefficients of a
black-box multivariate periodic signal from function samples taken along
single and multiple rank-1 lattices, building the support one dimension at a
time.  See :func:`sparse_fft` for the engine, :mod:`sfft.testbed` for signal
generators and error metrics, and the ``sfft`` console script for the batch
experiment harness.
"""

from .construct import (
    MLConfig,
    build_multiple_lattice,
    build_multiple_lattice_with_retries,
    build_single_lattice_cbc,
    candidate_primes,
)
from .detect import (
    DetectionConfig,
    DetectionReport,
    OracleInterrupt,
    detect_component,
    failure_bound_single_coeff,
    plan_b,
    plan_r,
    projected_line_coefficients,
    sparse_fft,
    union_failure_bound,
)
from .lattice import (
    COMPONENT_LIMIT,
    FrequencyIndexSet,
    MultipleRank1Lattice,
    Rank1Lattice,
    SearchBox,
    SparseSpectrum,
    is_reconstructing_single,
    lattice_nodes,
    project,
    residues,
)
from .testbed import (
    NoisyOracle,
    SignalOracle,
    bspline_exact_coefficient,
    bspline_exact_coefficients,
    bspline_l2_constant,
    bspline_norm_sq,
    bspline_test_function,
    gen_random_sparse_poly,
    relative_l2_error,
    relative_spectrum_l2_error,
    sigma_for_snr,
)
from .transform import LatticeSamples, dft_1d, eval_on_lattice, invert_multiple, invert_single

__version__ = "0.1.0"

__all__ = [
    "COMPONENT_LIMIT",
    "DetectionConfig",
    "DetectionReport",
    "FrequencyIndexSet",
    "LatticeSamples",
    "MLConfig",
    "MultipleRank1Lattice",
    "NoisyOracle",
    "OracleInterrupt",
    "Rank1Lattice",
    "SearchBox",
    "SignalOracle",
    "SparseSpectrum",
    "bspline_exact_coefficient",
    "bspline_exact_coefficients",
    "bspline_l2_constant",
    "bspline_norm_sq",
    "bspline_test_function",
    "build_multiple_lattice",
    "build_multiple_lattice_with_retries",
    "build_single_lattice_cbc",
    "candidate_primes",
    "detect_component",
    "dft_1d",
    "eval_on_lattice",
    "failure_bound_single_coeff",
    "gen_random_sparse_poly",
    "invert_multiple",
    "invert_single",
    "is_reconstructing_single",
    "lattice_nodes",
    "plan_b",
    "plan_r",
    "project",
    "projected_line_coefficients",
    "relative_l2_error",
    "relative_spectrum_l2_error",
    "residues",
    "sigma_for_snr",
    "sparse_fft",
    "union_failure_bound",
    "__version__",
]
