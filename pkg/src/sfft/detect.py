"""Dimension-incremental sparse FFT with rank-1 lattice sampling.

The engine reconstructs the frequency support and coefficients of a black-box
periodic signal one component at a time:

1. For each component t it samples r random lines along the t-th axis (the
   other coordinates frozen at random anchors), takes a length-K_t FFT, and
   keeps the bins whose projected coefficient magnitude clears the threshold.
   A random anchor makes every nonzero projected coefficient survive with high
   probability; r independent repetitions are unioned to cover unlucky phase
   cancellations.
2. Detected 1-D components are paired with the prefixes found so far; the
   candidate product is pruned by sampling it on a reconstructing (multiple)
   rank-1 lattice and inverting, keeping coefficients above the threshold.
3. At the last step a single inversion pass yields the final coefficients.

Anchors, lattice draws, and retries all consume dedicated child streams of one
seed, so runs are bit-reproducible.  The dimension loop is sequential by
nature; one engine invocation calls its oracle from a single thread.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .construct import MLConfig, build_multiple_lattice_with_retries, build_single_lattice_cbc
from .lattice import (
    FrequencyIndexSet,
    Rank1Lattice,
    SearchBox,
    SparseSpectrum,
    lattice_nodes,
)
from .transform import LatticeSamples, dft_1d, invert_multiple, invert_single

__all__ = [
    "DetectionConfig",
    "DetectionReport",
    "OracleInterrupt",
    "projected_line_coefficients",
    "detect_component",
    "sparse_fft",
    "plan_r",
    "plan_b",
    "failure_bound_single_coeff",
    "union_failure_bound",
]


class OracleInterrupt(Exception):
    """Deliberate abort signaled by an oracle (e.g. a sampling budget).

    Oracle exceptions of this type propagate out of the engine unwrapped;
    any other exception is reported as an evaluation failure with step
    context attached.
    """


@dataclass(frozen=True)
class DetectionConfig:
    """Parameters of the dimension-incremental detection.

    ``box`` is the search domain; only frequencies inside it are ever emitted.
    ``delta`` is the absolute magnitude threshold, ``s`` the overall sparsity
    cap, ``s_local`` the per-step cap (defaults to ``s``), ``r`` the number of
    detection iterations, and ``b`` the retry cap for each lattice search.
    ``mode='deterministic_zero_anchor'`` pins all anchors to 0, which is exact
    for signals whose nonzero coefficients share the sign of their real (or
    imaginary) part.  ``dimension_order`` optionally fixes the component
    processing order (a permutation of 0..d-1); detected frequencies are
    reported in the original orientation.  ``component_delta`` overrides the
    threshold for the 1-D component detections only (used by threshold-based
    approximation, where the line detections run at a tenth of the final
    threshold).
    """

    box: SearchBox
    delta: float
    s: int
    s_local: int | None = None
    r: int = 1
    b: int = 1
    mode: str = "randomized"
    lattice_kind: str = "multiple"
    rng_seed: int = 0
    dimension_order: tuple[int, ...] | None = None
    component_delta: float | None = None

    def __post_init__(self):
        if not isinstance(self.box, SearchBox):
            raise TypeError("box must be a SearchBox")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if self.s < 1:
            raise ValueError("sparsity cap s must be >= 1")
        if self.s_local is not None and self.s_local < 1:
            raise ValueError("s_local must be >= 1")
        if self.r < 1:
            raise ValueError("detection iterations r must be >= 1")
        if self.b < 1:
            raise ValueError("lattice retry cap b must be >= 1")
        if self.mode not in ("randomized", "deterministic_zero_anchor"):
            raise ValueError("mode must be 'randomized' or 'deterministic_zero_anchor'")
        if self.lattice_kind not in ("multiple", "single"):
            raise ValueError("lattice_kind must be 'multiple' or 'single'")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be a nonnegative integer")
        if self.component_delta is not None and not self.component_delta > 0:
            raise ValueError("component_delta must be > 0")
        if self.dimension_order is not None:
            order = tuple(int(c) for c in self.dimension_order)
            if sorted(order) != list(range(self.box.dim)):
                raise ValueError("dimension_order must be a permutation of 0..d-1")
            object.__setattr__(self, "dimension_order", order)

    @property
    def local_sparsity(self) -> int:
        return self.s if self.s_local is None else self.s_local

    @property
    def component_threshold(self) -> float:
        return self.delta if self.component_delta is None else self.component_delta


@dataclass
class DetectionReport:
    """Outcome and accounting of one engine run.

    Per-step lists are indexed by component step t = 0..d-1.  Entry t of
    ``candidate_counts`` is the size of the candidate product pruned at step t
    (for t = 0 it equals the first detected component set).  ``oracle_calls``
    is the exact audit r*sum(K_t) + sum_t r_tilde*(scheme size at t).
    """

    detected: SparseSpectrum
    component_counts: list[int] = field(default_factory=list)
    prefix_counts: list[int] = field(default_factory=list)
    candidate_counts: list[int] = field(default_factory=list)
    scheme_sizes: list[int] = field(default_factory=list)
    lattice_attempts: list[int] = field(default_factory=list)
    detection_calls: list[int] = field(default_factory=list)
    inversion_calls: list[int] = field(default_factory=list)
    oracle_calls: int = 0
    warnings: list[str] = field(default_factory=list)
    wall_time: float = 0.0


class _OracleError(RuntimeError):
    pass


def _evaluate(oracle, points: np.ndarray, step: int, iteration: int) -> np.ndarray:
    try:
        values = oracle(points)
    except OracleInterrupt:
        raise
    except Exception as exc:
        raise _OracleError(
            f"oracle evaluation failed at step {step}, iteration {iteration}: {exc}"
        ) from exc
    values = np.asarray(values, dtype=np.complex128)
    if values.shape != (len(points),):
        raise _OracleError(
            f"oracle returned shape {values.shape} for {len(points)} points "
            f"at step {step}, iteration {iteration}"
        )
    return values


def projected_line_coefficients(
    oracle, t: int, box: SearchBox, anchor: np.ndarray, *, _step_ctx: tuple[int, int] = (0, 0)
) -> tuple[np.ndarray, np.ndarray]:
    """Projected 1-D coefficients along component t at a fixed anchor.

    Samples the axis line x_t = l/K_t (l = 0..K_t-1) with all other
    coordinates held at ``anchor``, applies a length-K_t FFT scaled by 1/K_t,
    and maps bin l to the unique frequency k_t in [lo_t, hi_t] with
    k_t == l (mod K_t).  Returns (frequencies, coefficients); one projected
    coefficient equals the anchor-weighted sum of all true coefficients whose
    t-th component is that frequency.
    """
    k_len = int(box.sizes[t])
    lo, hi = box.component_range(t)
    points = np.tile(np.asarray(anchor, dtype=np.float64), (k_len, 1))
    points[:, t] = np.arange(k_len) / k_len
    values = _evaluate(oracle, points, *_step_ctx)
    bins = dft_1d(values, "forward") / k_len
    ks = np.arange(lo, hi + 1, dtype=np.int64)
    return ks, bins[ks % k_len]


def _select(
    freqs: np.ndarray, coeffs: np.ndarray, cap: int, delta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Up to ``cap`` largest coefficients with |c| >= delta.

    Ties are broken deterministically: magnitude descending, then frequency
    ascending lexicographically.
    """
    mags = np.abs(coeffs)
    mask = mags >= delta
    freqs, coeffs, mags = freqs[mask], coeffs[mask], mags[mask]
    if len(freqs) > cap:
        keys = tuple(freqs[:, c] for c in range(freqs.shape[1] - 1, -1, -1)) + (-mags,)
        order = np.lexsort(keys)[:cap]
        freqs, coeffs = freqs[order], coeffs[order]
    return freqs, coeffs


def detect_component(
    oracle, t: int, cfg: DetectionConfig, rng: np.random.Generator | None = None
) -> FrequencyIndexSet:
    """Detect candidate values of the t-th frequency component (0-based).

    Runs r anchored line samplings and unions, per iteration, the up-to-
    ``s_local`` largest projected coefficients with magnitude >= the component
    threshold.  Consumes exactly r*K_t oracle calls.  When ``rng`` is omitted
    a stream derived from (rng_seed, t) is used, so standalone calls are
    reproducible.
    """
    box = cfg.box
    d = box.dim
    if not 0 <= t < d:
        raise ValueError(f"component index t must lie in 0..{d - 1}")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, t]))
    zero_anchor = cfg.mode == "deterministic_zero_anchor"
    found: list[np.ndarray] = []
    for i in range(cfg.r):
        anchor = np.zeros(d) if zero_anchor else rng.random(d)
        ks, coeffs = projected_line_coefficients(oracle, t, box, anchor, _step_ctx=(t, i))
        kept, _ = _select(ks[:, None], coeffs, cfg.local_sparsity, cfg.component_threshold)
        found.append(kept[:, 0])
    merged = np.unique(np.concatenate(found)) if found else np.empty(0, dtype=np.int64)
    return FrequencyIndexSet(merged[:, None], 1, _presorted=True)


class _PermutedOracle:
    """View of an oracle with permuted coordinates (slot t <- component order[t])."""

    def __init__(self, inner, order: Sequence[int]):
        self._inner = inner
        self._order = np.asarray(order, dtype=np.intp)
        self.dim = len(self._order)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        full = np.empty_like(points)
        full[:, self._order] = points
        return self._inner(full)


def _candidate_product(prefixes: np.ndarray, comps: np.ndarray) -> np.ndarray:
    left = np.repeat(prefixes, len(comps), axis=0)
    right = np.tile(comps, len(prefixes))
    return np.column_stack([left, right])


def _scheme_for(
    candidates: FrequencyIndexSet,
    cfg: DetectionConfig,
    lattice_seed: np.random.SeedSequence,
):
    """Sampling scheme for a candidate set: (lattices, scheme, size, attempts, uncovered)."""
    if cfg.lattice_kind == "single":
        lat = build_single_lattice_cbc(candidates)
        return [lat], None, lat.m, 1, 0
    ml_cfg = MLConfig(c=2.0, gamma=0.5)
    scheme, attempts = build_multiple_lattice_with_retries(
        candidates, ml_cfg, cfg.b, seed_seq=lattice_seed
    )
    uncovered = len(candidates) - int(scheme.covered_mask.sum())
    return list(scheme.lattices), scheme, scheme.total_size, attempts, uncovered


def _invert_candidates(
    oracle,
    candidates: FrequencyIndexSet,
    lattices: list[Rank1Lattice],
    scheme,
    anchor_tail: np.ndarray,
    step: int,
    iteration: int,
    dim: int,
) -> SparseSpectrum:
    """Sample the embedded scheme at one anchor and invert."""
    t_plus_1 = candidates.dim
    samples = []
    for lat in lattices:
        points = np.empty((lat.m, dim), dtype=np.float64)
        points[:, :t_plus_1] = lattice_nodes(lat)
        if t_plus_1 < dim:
            points[:, t_plus_1:] = anchor_tail
        values = _evaluate(oracle, points, step, iteration)
        samples.append(LatticeSamples(lat, values))
    if scheme is None:
        return invert_single(samples[0], candidates)
    return invert_multiple(samples, scheme)


def sparse_fft(oracle, cfg: DetectionConfig) -> DetectionReport:
    """Reconstruct support and coefficients of a sparse periodic signal.

    The oracle must be callable on an (n, d) array of points in [0, 1)^d,
    returning n complex values, and expose ``dim``.  Returns a report whose
    ``detected`` spectrum satisfies |coefficient| >= delta and has at most
    ``s`` entries; the per-step accounting in the report reflects every
    oracle call exactly.
    """
    start = time.perf_counter()
    if getattr(oracle, "dim", cfg.box.dim) != cfg.box.dim:
        raise ValueError("oracle dimension does not match the search box")

    box = cfg.box
    order = cfg.dimension_order
    if order is not None and order != tuple(range(box.dim)):
        oracle = _PermutedOracle(oracle, order)
        box = box.permute(order)
        cfg = replace(cfg, box=box, dimension_order=None)
    else:
        order = None

    d = box.dim
    root = np.random.SeedSequence(cfg.rng_seed)
    detect_parent, anchor_parent, lattice_parent = root.spawn(3)
    detect_streams = detect_parent.spawn(d)
    anchor_streams = anchor_parent.spawn(d)
    lattice_streams = lattice_parent.spawn(d)

    report = DetectionReport(detected=SparseSpectrum.from_dict({}, dim=d))
    zero_anchor = cfg.mode == "deterministic_zero_anchor"

    def _zeros(n: int) -> list[int]:
        return [0] * n

    report.component_counts = _zeros(d)
    report.prefix_counts = _zeros(d)
    report.candidate_counts = _zeros(d)
    report.scheme_sizes = _zeros(d)
    report.lattice_attempts = _zeros(d)
    report.detection_calls = _zeros(d)
    report.inversion_calls = _zeros(d)

    final_freqs = np.empty((0, d), dtype=np.int64)
    final_coeffs = np.empty(0, dtype=np.complex128)

    prefixes: FrequencyIndexSet | None = None
    for t in range(d):
        component = detect_component(
            oracle, t, cfg, rng=np.random.default_rng(detect_streams[t])
        )
        report.component_counts[t] = len(component)
        report.detection_calls[t] = cfg.r * int(box.sizes[t])

        if t == 0:
            prefixes = component
            report.prefix_counts[0] = len(prefixes)
            report.candidate_counts[0] = len(prefixes)
            if d > 1:
                continue
            candidates = prefixes  # d == 1: prune/invert the detected set directly
        else:
            raw = _candidate_product(prefixes.freqs, component.freqs[:, 0])
            if len(raw):
                raw = raw[box.contains_projected(tuple(range(t + 1)), raw)]
            candidates = FrequencyIndexSet(raw, t + 1)
            report.candidate_counts[t] = len(candidates)

        last_step = t == d - 1
        r_tilde = 1 if last_step else cfg.r
        s_tilde = cfg.s if last_step else cfg.local_sparsity

        if not len(candidates):
            prefixes = candidates
            report.prefix_counts[t] = 0
            continue

        lattices, scheme, size, attempts, uncovered = _scheme_for(
            candidates, cfg, lattice_streams[t]
        )
        report.scheme_sizes[t] = size
        report.lattice_attempts[t] = attempts
        report.inversion_calls[t] = r_tilde * size
        if uncovered:
            report.warnings.append(
                f"step {t}: sampling scheme covers only {len(candidates) - uncovered}"
                f"/{len(candidates)} candidates after {attempts} attempts"
            )

        anchor_rng = np.random.default_rng(anchor_streams[t])
        kept_freqs: list[np.ndarray] = []
        kept_coeffs: list[np.ndarray] = []
        for i in range(r_tilde):
            tail_len = d - (t + 1)
            anchor_tail = np.zeros(tail_len) if zero_anchor else anchor_rng.random(tail_len)
            spectrum = _invert_candidates(
                oracle, candidates, lattices, scheme, anchor_tail, t, i, d
            )
            sel_f, sel_c = _select(spectrum.freqs, spectrum.coeffs, s_tilde, cfg.delta)
            kept_freqs.append(sel_f)
            kept_coeffs.append(sel_c)

        if last_step:
            final_freqs = kept_freqs[0]
            final_coeffs = kept_coeffs[0]
            report.prefix_counts[t] = len(final_freqs)
        else:
            prefixes = FrequencyIndexSet(np.concatenate(kept_freqs), t + 1)
            report.prefix_counts[t] = len(prefixes)

    if order is not None:
        unperm = np.empty_like(final_freqs)
        unperm[:, list(order)] = final_freqs
        final_freqs = unperm

    report.detected = SparseSpectrum(final_freqs, final_coeffs, d)
    report.oracle_calls = sum(report.detection_calls) + sum(report.inversion_calls)
    report.wall_time = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# parameter planners and probability bounds

def plan_r(sparsity: int, dims: int, eps: float, lattice_kind: str = "multiple") -> int:
    """Detection iterations guaranteeing overall failure probability <= eps."""
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if lattice_kind == "multiple":
        const = 3.0
    elif lattice_kind == "single":
        const = 2.0
    else:
        raise ValueError("lattice_kind must be 'multiple' or 'single'")
    return math.ceil(
        2.0 * sparsity * (math.log(const) + math.log(dims) + math.log(sparsity) - math.log(eps))
    )


def plan_b(dims: int, eps: float, gamma: float) -> int:
    """Lattice-search retries so all d searches succeed with probability >= 1-eps."""
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    return math.ceil((math.log(3.0) + math.log(dims) - math.log(eps)) / abs(math.log(gamma)))


def failure_bound_single_coeff(coeff_magnitudes, delta: float) -> float:
    """Per-iteration bound q on P(|projected coefficient| < delta).

    For a projected coefficient with terms of the given magnitudes and a
    uniformly random anchor, one detection iteration misses it with
    probability at most q = 1 - (max - delta)/sum; r iterations miss with
    probability at most q**r.
    """
    mags = np.atleast_1d(np.asarray(coeff_magnitudes, dtype=np.float64))
    if not len(mags) or np.any(mags < 0) or not np.all(np.isfinite(mags)):
        raise ValueError("coefficient magnitudes must be finite and nonnegative")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    largest = float(mags.max())
    if largest <= delta:
        raise ValueError("bound inapplicable: no magnitude exceeds delta")
    return 1.0 - (largest - delta) / float(mags.sum())


def union_failure_bound(q: float, r: int, sparsity: int, bins: int) -> float:
    """Union bound over a detection step: min(sparsity, bins) * q**r, capped at 1."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if r < 1:
        raise ValueError("r must be >= 1")
    if sparsity < 0 or bins < 0:
        raise ValueError("counts must be nonnegative")
    return min(1.0, min(sparsity, bins) * q**r)
