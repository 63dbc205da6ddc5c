"""Construction of reconstructing rank-1 lattice sampling schemes.

Two constructions are provided:

* a randomized multi-lattice search that draws one generating vector per prime
  lattice size and keeps, for each lattice, the subset of target frequencies
  whose residue is unique within the target (alias-free), stopping as soon as
  the union covers the whole set;
* a deterministic component-by-component (CBC) search for a single
  reconstructing lattice, scanning odd sizes M upward and extending the
  generating vector one component at a time.

The multi-lattice search is probabilistic: with oversampling factor ``c`` and
failure bound ``gamma`` it succeeds with probability at least ``1 - gamma``;
callers retry with independent RNG streams via
:func:`build_multiple_lattice_with_retries`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .lattice import (
    FrequencyIndexSet,
    MultipleRank1Lattice,
    Rank1Lattice,
    _residues_raw,
)

__all__ = [
    "MLConfig",
    "candidate_primes",
    "build_multiple_lattice",
    "build_multiple_lattice_with_retries",
    "build_single_lattice_cbc",
]


# ---------------------------------------------------------------------------
# prime stream

_sieve_limit = 0
_sieve_primes = np.empty(0, dtype=np.int64)


def _grow_sieve(limit: int) -> None:
    """Extend the cached prime table to cover [2, limit]."""
    global _sieve_limit, _sieve_primes
    if limit <= _sieve_limit:
        return
    limit = max(limit, 2 * _sieve_limit, 1 << 10)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, int(math.isqrt(limit)) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    _sieve_primes = np.flatnonzero(is_prime).astype(np.int64)
    _sieve_limit = limit


def _primes_above(bound: float) -> Iterator[int]:
    """Yield primes strictly greater than ``bound`` in increasing order."""
    start = max(int(math.floor(bound)), 0)
    pos_value = start  # last value already handed out / skipped
    while True:
        _grow_sieve(max(2 * (pos_value + 1), 2 * start + 64))
        idx = int(np.searchsorted(_sieve_primes, pos_value, side="right"))
        while idx < len(_sieve_primes):
            pos_value = int(_sieve_primes[idx])
            yield pos_value
            idx += 1
        pos_value = _sieve_limit


def _distinct_mod(freqs: np.ndarray, p: int) -> bool:
    """Do distinct frequency vectors stay distinct after componentwise mod p?"""
    reduced = freqs % p
    return len(np.unique(reduced, axis=0)) == len(freqs)


def candidate_primes(I: FrequencyIndexSet, lam: float, count: int) -> list[int]:
    """The ``count`` smallest primes p > lam keeping all of I distinct mod p.

    Distinctness is automatic once p exceeds the expansion of I (no component
    gap can wrap), so the explicit residue check only runs for small primes.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not len(I):
        raise ValueError("candidate primes need a nonempty frequency set")
    spread = I.expansion() if len(I) > 1 else 0
    out: list[int] = []
    for p in _primes_above(lam):
        if p > spread or _distinct_mod(I.freqs, p):
            out.append(p)
            if len(out) == count:
                return out
    raise AssertionError("unreachable: prime stream is unbounded")


# ---------------------------------------------------------------------------
# multiple rank-1 lattices

@dataclass(frozen=True)
class MLConfig:
    """Parameters of the randomized multi-lattice search.

    ``c`` is the oversampling factor (> 1), ``gamma`` the failure-probability
    bound in (0, 1); together they determine the maximal number of lattices
    and the lower bound on the prime lattice sizes.
    """

    c: float = 2.0
    gamma: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not self.c > 1.0:
            raise ValueError("oversampling factor c must be > 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")

    def max_lattices(self, set_size: int) -> int:
        """Upper bound on the number of lattices tried in one pass."""
        if set_size < 1:
            raise ValueError("set_size must be >= 1")
        factor = self.c**2 / (self.c - 1.0) ** 2
        return math.ceil(factor * (math.log(set_size) - math.log(self.gamma)) / 2.0)

    def size_lower_bound(self, set_size: int) -> float:
        """All lattice sizes are primes strictly above c*(|I| - 1)."""
        return self.c * (set_size - 1)


def _alias_free_mask(freqs: np.ndarray, z: np.ndarray, m: int) -> np.ndarray:
    """Mask of frequencies whose residue mod m is unique within ``freqs``."""
    res = _residues_raw(freqs, z, m)
    counts = np.bincount(res, minlength=m)
    return counts[res] == 1


def build_multiple_lattice(
    I: FrequencyIndexSet,
    cfg: MLConfig,
    rng: np.random.Generator | None = None,
) -> MultipleRank1Lattice:
    """One randomized pass of the multi-lattice construction.

    Draws, for each of the (at most ``cfg.max_lattices``) candidate prime
    sizes in increasing order, a uniform generating vector, records the
    alias-free subset of ``I``, and stops early once the union of the subsets
    covers ``I``.  The result may be non-reconstructing; callers inspect
    ``is_reconstructing`` (or use the retry wrapper).
    """
    if not len(I):
        raise ValueError("cannot build a sampling scheme for an empty set")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    n = len(I)
    l_max = cfg.max_lattices(n)
    primes = candidate_primes(I, cfg.size_lower_bound(n), l_max)
    freqs = I.freqs
    dim = I.dim

    lattices: list[Rank1Lattice] = []
    recon_sets: list[FrequencyIndexSet] = []
    masks: list[np.ndarray] = []
    covered = np.zeros(n, dtype=bool)
    for m in primes:
        z = rng.integers(0, m, size=dim, dtype=np.int64)
        mask = _alias_free_mask(freqs, z, m)
        lattices.append(Rank1Lattice(z, m))
        recon_sets.append(FrequencyIndexSet(freqs[mask], dim, _presorted=True))
        masks.append(mask)
        covered |= mask
        if covered.all():
            break
    return MultipleRank1Lattice(lattices, recon_sets, I, recon_masks=masks)


def build_multiple_lattice_with_retries(
    I: FrequencyIndexSet,
    cfg: MLConfig,
    b: int,
    seed_seq: np.random.SeedSequence | None = None,
) -> tuple[MultipleRank1Lattice, int]:
    """Retry the randomized pass up to ``b`` times with independent RNG streams.

    Returns the first reconstructing scheme together with the number of
    attempts used; after ``b`` failures the last (non-reconstructing) scheme
    is returned and the caller handles partial coverage.
    """
    if b < 1:
        raise ValueError("retry cap b must be >= 1")
    if seed_seq is None:
        seed_seq = np.random.SeedSequence(cfg.rng_seed)
    scheme = None
    for attempt, child in enumerate(seed_seq.spawn(b), start=1):
        scheme = build_multiple_lattice(I, cfg, rng=np.random.default_rng(child))
        if scheme.is_reconstructing:
            return scheme, attempt
    return scheme, b


# ---------------------------------------------------------------------------
# single rank-1 lattice (component by component)

_CBC_SCAN_BUDGET = 1 << 22  # int64 entries per candidate chunk


def _unique_prefix_rows(freqs: np.ndarray, t: int) -> np.ndarray:
    """Distinct rows of the first ``t`` columns (projection with dedup)."""
    return np.unique(freqs[:, :t], axis=0)


def _cbc_extend(prefix_res: np.ndarray, last_col: np.ndarray, m: int) -> int | None:
    """Smallest z_t in [0, M) separating all prefix residues, or None.

    ``prefix_res`` holds the residues of the distinct (t-1)-prefixes already
    fixed; ``last_col`` the t-th components.  A candidate works when
    ``prefix_res + z_t * last_col`` is pairwise distinct mod M.
    """
    col = last_col % m
    chunk = max(1, _CBC_SCAN_BUDGET // max(len(col), 1))
    for start in range(0, m, chunk):
        cand = np.arange(start, min(start + chunk, m), dtype=np.int64)
        # rows: one residue set per candidate column
        res = (prefix_res[:, None] + col[:, None] * cand[None, :]) % m
        res.sort(axis=0)
        ok = np.all(res[1:] != res[:-1], axis=0)
        hits = np.flatnonzero(ok)
        if len(hits):
            return int(cand[hits[0]])
    return None


def _cbc_try(freqs: np.ndarray, m: int) -> np.ndarray | None:
    """Greedy component-by-component vector for size ``m``, or None."""
    dim = freqs.shape[1]
    z = np.zeros(dim, dtype=np.int64)
    z[0] = 1 % m
    if dim == 1:
        res = freqs[:, 0] % m
        return z if len(np.unique(res)) == len(freqs) else None
    for t in range(1, dim):
        rows = _unique_prefix_rows(freqs, t + 1)
        prefix_res = _residues_raw(rows[:, :t], z[:t], m)
        z_t = _cbc_extend(prefix_res, rows[:, t], m)
        if z_t is None:
            return None
        z[t] = z_t
    return z


def build_single_lattice_cbc(I: FrequencyIndexSet) -> Rank1Lattice:
    """Deterministic single-lattice search: smallest workable odd size M.

    Scans odd sizes upward from |I|, for each greedily choosing the smallest
    component z_t that keeps all projected prefixes separated; the first size
    where every component succeeds yields a reconstructing lattice.  Sizes
    stay within the expected |I| <= M <= |I|^2 range on benign sets.
    """
    if not len(I):
        raise ValueError("cannot build a lattice for an empty set")
    n = len(I)
    if n == 1:
        return Rank1Lattice(np.zeros(I.dim, dtype=np.int64), 1)
    freqs = I.freqs
    m = n if n % 2 == 1 else n + 1
    while True:
        z = _cbc_try(freqs, m)
        if z is not None:
            return Rank1Lattice(z, m)
        m += 2
