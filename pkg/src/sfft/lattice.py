"""Core types for frequency index sets and rank-1 lattice sampling schemes.

A rank-1 lattice with generating vector ``z`` and size ``M`` is the point set
``{(j*z/M) mod 1 : j = 0, ..., M-1}`` on the d-torus.  It is *reconstructing*
for a finite frequency set ``I`` when the residues ``k . z mod M`` are pairwise
distinct over ``I``; the associated exponential system is then invertible with
a single length-``M`` FFT.  A multiple rank-1 lattice is a union of such
lattices, each contributing the subset of frequencies that are alias-free on
it.

All types are immutable after construction and safe to share across threads.
Frequency components are validated to fit in signed 32 bits and lattice sizes
to ``M <= 2**31 - 1``, which makes every modular inner product computable in
int64 without overflow (componentwise pre-reduction keeps products below
2**62).
"""

from __future__ import annotations

from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "FrequencyIndexSet",
    "SearchBox",
    "Rank1Lattice",
    "MultipleRank1Lattice",
    "SparseSpectrum",
    "lattice_nodes",
    "residues",
    "project",
    "is_reconstructing_single",
]

#: Largest allowed |frequency component| and lattice size.  Keeping both below
#: 2**31 guarantees overflow-free int64 residue arithmetic.
COMPONENT_LIMIT = 2**31 - 1

_U64_MAX = 2**64 - 1


def _as_frequency_array(freqs, dim: int | None = None) -> np.ndarray:
    """Coerce input to a (n, d) int64 array and validate component range."""
    arr = np.asarray(freqs, dtype=np.int64)
    if arr.size == 0:
        if arr.ndim != 2:
            if dim is None:
                raise ValueError("dim is required for an empty frequency set")
            arr = arr.reshape(0, dim)
    elif arr.ndim == 1:
        # a single frequency vector
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected a (n, d) array of frequencies, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"frequency vectors have length {arr.shape[1]}, expected {dim}")
    if arr.size and np.abs(arr).max() > COMPONENT_LIMIT:
        raise ValueError(f"frequency components must satisfy |k_t| <= {COMPONENT_LIMIT}")
    return arr


def _lexsorted_rows(rows: np.ndarray) -> np.ndarray:
    """Rows sorted lexicographically (first column most significant)."""
    if len(rows) <= 1:
        return rows
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def _unique_rows(rows: np.ndarray) -> np.ndarray:
    rows = _lexsorted_rows(rows)
    if len(rows) <= 1:
        return rows
    keep = np.ones(len(rows), dtype=bool)
    keep[1:] = np.any(rows[1:] != rows[:-1], axis=1)
    return rows[keep]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class FrequencyIndexSet:
    """An ordered set of d-dimensional integer frequency vectors.

    Vectors are stored lexicographically sorted with duplicates removed, so
    iteration order is canonical and runs are seed-reproducible.  Per-component
    extents are cached for the expansion computations used by the lattice
    constructions.
    """

    __slots__ = ("_freqs", "_dim", "_mins", "_maxs", "_index")

    def __init__(self, freqs, dim: int | None = None, *, _presorted: bool = False):
        arr = _as_frequency_array(freqs, dim)
        if not _presorted:
            arr = _unique_rows(arr)
        self._freqs = _freeze(arr)
        self._dim = arr.shape[1]
        if len(arr):
            self._mins = _freeze(arr.min(axis=0))
            self._maxs = _freeze(arr.max(axis=0))
        else:
            self._mins = None
            self._maxs = None
        self._index = None

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def freqs(self) -> np.ndarray:
        """(n, d) int64 array, lexicographically sorted, read-only."""
        return self._freqs

    @property
    def mins(self) -> np.ndarray | None:
        return self._mins

    @property
    def maxs(self) -> np.ndarray | None:
        return self._maxs

    def expansion(self, t: int | None = None) -> int:
        """Per-component extent ``max k_t - min k_t`` (max over t when omitted)."""
        if not len(self):
            raise ValueError("expansion of an empty frequency set is undefined")
        spread = self._maxs - self._mins
        if t is None:
            return int(spread.max())
        return int(spread[t])

    def union(self, other: "FrequencyIndexSet") -> "FrequencyIndexSet":
        if other.dim != self._dim:
            raise ValueError("dimension mismatch in union")
        if not len(other):
            return self
        if not len(self):
            return other
        merged = np.concatenate([self._freqs, other._freqs])
        return FrequencyIndexSet(merged, self._dim)

    def project(self, comps: Sequence[int]) -> "FrequencyIndexSet":
        return project(self, comps)

    def _tuple_index(self) -> dict:
        if self._index is None:
            self._index = {tuple(row): i for i, row in enumerate(self._freqs.tolist())}
        return self._index

    def positions_of(self, subset: "FrequencyIndexSet") -> np.ndarray:
        """Row positions of ``subset`` inside this set (raises on misses)."""
        index = self._tuple_index()
        try:
            return np.array([index[row] for row in map(tuple, subset.freqs.tolist())], dtype=np.intp)
        except KeyError as exc:
            raise ValueError(f"frequency {exc.args[0]} is not in the set") from exc

    def __contains__(self, freq) -> bool:
        return tuple(int(v) for v in freq) in self._tuple_index()

    def __len__(self) -> int:
        return len(self._freqs)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return (tuple(row) for row in self._freqs.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrequencyIndexSet):
            return NotImplemented
        return (
            self._dim == other._dim
            and self._freqs.shape == other._freqs.shape
            and bool(np.array_equal(self._freqs, other._freqs))
        )

    def __repr__(self) -> str:
        return f"FrequencyIndexSet(n={len(self)}, dim={self._dim})"


class SearchBox:
    """Axis-aligned integer box of candidate frequencies (the search domain).

    An optional membership predicate ``member(comps, rows) -> bool mask``
    post-filters candidate sets for non-box domains; ``comps`` names the
    (0-based) components the rows of the candidate array refer to.
    """

    __slots__ = ("_lows", "_highs", "_member")

    def __init__(self, lows, highs, member: Callable[[tuple[int, ...], np.ndarray], np.ndarray] | None = None):
        lows = np.atleast_1d(np.asarray(lows, dtype=np.int64))
        highs = np.atleast_1d(np.asarray(highs, dtype=np.int64))
        if lows.shape != highs.shape or lows.ndim != 1 or not len(lows):
            raise ValueError("lows and highs must be 1-D arrays of equal positive length")
        if np.any(lows > highs):
            raise ValueError("every component interval needs lo <= hi")
        if max(abs(int(lows.min())), abs(int(highs.max()))) > COMPONENT_LIMIT:
            raise ValueError(f"box bounds must satisfy |bound| <= {COMPONENT_LIMIT}")
        cardinality = 1
        for lo, hi in zip(lows.tolist(), highs.tolist()):
            cardinality *= hi - lo + 1
            if cardinality > _U64_MAX:
                raise ValueError("box cardinality exceeds the unsigned 64-bit range")
        self._lows = _freeze(lows)
        self._highs = _freeze(highs)
        self._member = member

    @classmethod
    def centered(cls, dim: int, n: int) -> "SearchBox":
        """The full grid with components in [-n, n] in every dimension."""
        return cls([-n] * dim, [n] * dim)

    @property
    def dim(self) -> int:
        return len(self._lows)

    @property
    def lows(self) -> np.ndarray:
        return self._lows

    @property
    def highs(self) -> np.ndarray:
        return self._highs

    @property
    def sizes(self) -> np.ndarray:
        """Per-component interval lengths K_t = hi_t - lo_t + 1."""
        return self._highs - self._lows + 1

    @property
    def cardinality(self) -> int:
        out = 1
        for lo, hi in zip(self._lows.tolist(), self._highs.tolist()):
            out *= hi - lo + 1
        return out

    @property
    def member(self):
        return self._member

    def component_range(self, t: int) -> tuple[int, int]:
        return int(self._lows[t]), int(self._highs[t])

    def component_frequencies(self, t: int) -> np.ndarray:
        lo, hi = self.component_range(t)
        return np.arange(lo, hi + 1, dtype=np.int64)

    def contains_projected(self, comps: Sequence[int], rows: np.ndarray) -> np.ndarray:
        """Boolean mask of rows inside the projected box (and predicate, if any)."""
        comps = tuple(int(c) for c in comps)
        rows = np.asarray(rows, dtype=np.int64)
        mask = np.all(
            (rows >= self._lows[list(comps)]) & (rows <= self._highs[list(comps)]),
            axis=1,
        )
        if self._member is not None and mask.any():
            sub = mask.nonzero()[0]
            mask[sub] &= np.asarray(self._member(comps, rows[sub]), dtype=bool)
        return mask

    def contains(self, rows: np.ndarray) -> np.ndarray:
        return self.contains_projected(tuple(range(self.dim)), rows)

    def permute(self, order: Sequence[int]) -> "SearchBox":
        """Box seen through a component permutation (``order[t]`` -> slot t)."""
        order = tuple(int(c) for c in order)
        member = self._member
        if member is not None:
            def permuted_member(comps, rows, _member=member, _order=order):
                return _member(tuple(_order[c] for c in comps), rows)
        else:
            permuted_member = None
        return SearchBox(self._lows[list(order)], self._highs[list(order)], permuted_member)

    def __repr__(self) -> str:
        return f"SearchBox(lows={self._lows.tolist()}, highs={self._highs.tolist()})"


class Rank1Lattice:
    """A rank-1 lattice: generating vector ``z`` (canonicalized mod M) and size M."""

    __slots__ = ("_z", "_m")

    def __init__(self, z, m: int):
        m = int(m)
        if m < 1:
            raise ValueError("lattice size M must be >= 1")
        if m > COMPONENT_LIMIT:
            raise ValueError(f"lattice size M must be <= {COMPONENT_LIMIT}")
        z = np.atleast_1d(np.asarray(z, dtype=np.int64))
        if z.ndim != 1 or not len(z):
            raise ValueError("generating vector z must be a 1-D integer vector")
        self._z = _freeze(z % m)
        self._m = m

    @property
    def dim(self) -> int:
        return len(self._z)

    @property
    def z(self) -> np.ndarray:
        return self._z

    @property
    def m(self) -> int:
        return self._m

    def __eq__(self, other) -> bool:
        if not isinstance(other, Rank1Lattice):
            return NotImplemented
        return self._m == other._m and bool(np.array_equal(self._z, other._z))

    def __repr__(self) -> str:
        return f"Rank1Lattice(z={self._z.tolist()}, M={self._m})"


class MultipleRank1Lattice:
    """A union of rank-1 lattices with per-lattice alias-free frequency subsets.

    ``recon_sets[l]`` holds the frequencies of ``target`` whose residue on
    lattice ``l`` is unique within the whole target set; the scheme is
    *reconstructing* when the union of the subsets covers the target exactly.
    """

    __slots__ = ("_lattices", "_recon_sets", "_target", "_masks")

    def __init__(
        self,
        lattices: Sequence[Rank1Lattice],
        recon_sets: Sequence[FrequencyIndexSet],
        target: FrequencyIndexSet,
        recon_masks: Sequence[np.ndarray] | None = None,
    ):
        lattices = tuple(lattices)
        recon_sets = tuple(recon_sets)
        if not lattices:
            raise ValueError("a multiple rank-1 lattice needs at least one lattice")
        if len(lattices) != len(recon_sets):
            raise ValueError("lattices and recon_sets must have equal length")
        dim = lattices[0].dim
        if any(lat.dim != dim for lat in lattices) or target.dim != dim:
            raise ValueError("all lattices and the target must share one dimension")
        if any(rs.dim != dim for rs in recon_sets):
            raise ValueError("recon_sets must share the target dimension")
        if recon_masks is not None:
            recon_masks = tuple(_freeze(np.asarray(m, dtype=bool)) for m in recon_masks)
            if len(recon_masks) != len(lattices):
                raise ValueError("recon_masks must match the number of lattices")
            if any(len(m) != len(target) for m in recon_masks):
                raise ValueError("recon_masks must align with the target rows")
        self._lattices = lattices
        self._recon_sets = recon_sets
        self._target = target
        self._masks = recon_masks

    @property
    def dim(self) -> int:
        return self._lattices[0].dim

    @property
    def lattices(self) -> tuple[Rank1Lattice, ...]:
        return self._lattices

    @property
    def recon_sets(self) -> tuple[FrequencyIndexSet, ...]:
        return self._recon_sets

    @property
    def target(self) -> FrequencyIndexSet:
        return self._target

    @property
    def recon_masks(self) -> tuple[np.ndarray, ...]:
        """Boolean masks over target rows marking each lattice's alias-free subset."""
        if self._masks is None:
            masks = []
            for rs in self._recon_sets:
                mask = np.zeros(len(self._target), dtype=bool)
                if len(rs):
                    mask[self._target.positions_of(rs)] = True
                masks.append(_freeze(mask))
            self._masks = tuple(masks)
        return self._masks

    @property
    def total_size(self) -> int:
        """Total number of sampling nodes, the raw sum of the lattice sizes."""
        return sum(lat.m for lat in self._lattices)

    @property
    def covered_mask(self) -> np.ndarray:
        masks = self.recon_masks
        out = np.zeros(len(self._target), dtype=bool)
        for mask in masks:
            out |= mask
        return out

    @property
    def is_reconstructing(self) -> bool:
        return bool(self.covered_mask.all()) if len(self._target) else True

    def uncovered(self) -> FrequencyIndexSet:
        mask = self.covered_mask
        return FrequencyIndexSet(self._target.freqs[~mask], self.dim)

    def __len__(self) -> int:
        return len(self._lattices)

    def __repr__(self) -> str:
        sizes = [lat.m for lat in self._lattices]
        return f"MultipleRank1Lattice(L={len(sizes)}, sizes={sizes}, target_n={len(self._target)})"


class SparseSpectrum:
    """A finite map from frequency vector to complex Fourier coefficient."""

    __slots__ = ("_freqs", "_coeffs", "_index")

    def __init__(self, freqs, coeffs, dim: int | None = None):
        arr = _as_frequency_array(freqs, dim)
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (len(arr),):
            raise ValueError("coefficients must align one-to-one with frequencies")
        if len(arr) > 1:
            order = np.lexsort(arr.T[::-1])
            arr = arr[order]
            coeffs = coeffs[order]
            if np.any(np.all(arr[1:] == arr[:-1], axis=1)):
                raise ValueError("duplicate frequency keys in spectrum")
        self._freqs = _freeze(arr)
        self._coeffs = _freeze(coeffs.copy())
        self._index = None

    @classmethod
    def from_dict(cls, mapping: dict, dim: int | None = None) -> "SparseSpectrum":
        if not mapping:
            if dim is None:
                raise ValueError("dim is required for an empty spectrum")
            return cls(np.empty((0, dim), dtype=np.int64), np.empty(0, dtype=np.complex128), dim)
        freqs = list(mapping.keys())
        coeffs = [mapping[k] for k in freqs]
        return cls(freqs, coeffs, dim)

    @property
    def dim(self) -> int:
        return self._freqs.shape[1]

    @property
    def freqs(self) -> np.ndarray:
        return self._freqs

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    def support(self) -> FrequencyIndexSet:
        return FrequencyIndexSet(self._freqs, self.dim, _presorted=True)

    def as_dict(self) -> dict[tuple[int, ...], complex]:
        return {tuple(row): complex(c) for row, c in zip(self._freqs.tolist(), self._coeffs)}

    def _tuple_index(self) -> dict:
        if self._index is None:
            self._index = {tuple(row): i for i, row in enumerate(self._freqs.tolist())}
        return self._index

    def get(self, freq, default: complex = 0.0) -> complex:
        key = tuple(int(v) for v in freq)
        idx = self._tuple_index().get(key)
        return default if idx is None else complex(self._coeffs[idx])

    def __getitem__(self, freq) -> complex:
        key = tuple(int(v) for v in freq)
        idx = self._tuple_index().get(key)
        if idx is None:
            raise KeyError(key)
        return complex(self._coeffs[idx])

    def __contains__(self, freq) -> bool:
        return tuple(int(v) for v in freq) in self._tuple_index()

    def restrict(self, min_magnitude: float) -> "SparseSpectrum":
        """Sub-spectrum of coefficients with |c| >= min_magnitude."""
        mask = np.abs(self._coeffs) >= min_magnitude
        return SparseSpectrum(self._freqs[mask], self._coeffs[mask], self.dim)

    def energy(self) -> float:
        return float(np.sum(np.abs(self._coeffs) ** 2))

    def items(self) -> Iterator[tuple[tuple[int, ...], complex]]:
        return zip((tuple(r) for r in self._freqs.tolist()), (complex(c) for c in self._coeffs))

    def __len__(self) -> int:
        return len(self._freqs)

    def __repr__(self) -> str:
        return f"SparseSpectrum(n={len(self)}, dim={self.dim})"


def lattice_nodes(lat: Rank1Lattice) -> np.ndarray:
    """All M lattice points ``(j*z mod M)/M`` as an (M, d) float array in [0, 1)."""
    j = np.arange(lat.m, dtype=np.int64)
    return (j[:, None] * lat.z[None, :] % lat.m) / lat.m


def _residues_raw(freqs: np.ndarray, z: np.ndarray, m: int) -> np.ndarray:
    """Componentwise-reduced inner products ``k . z mod M`` (overflow-free int64)."""
    z_mod = np.asarray(z, dtype=np.int64) % m
    acc = np.zeros(len(freqs), dtype=np.int64)
    for t in range(freqs.shape[1]):
        acc = (acc + (freqs[:, t] % m) * z_mod[t]) % m
    return acc


def residues(I: FrequencyIndexSet, z, m: int) -> np.ndarray:
    """Residues ``k . z mod M`` per frequency, in set order, each in [0, M)."""
    m = int(m)
    if m < 1:
        raise ValueError("modulus M must be >= 1")
    z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    freqs = I.freqs if isinstance(I, FrequencyIndexSet) else _as_frequency_array(I)
    if freqs.shape[1] != len(z):
        raise ValueError("dimension mismatch between frequencies and z")
    return _residues_raw(freqs, z, m)


def project(I: FrequencyIndexSet, comps: Sequence[int]) -> FrequencyIndexSet:
    """Projection onto the given (0-based, distinct) components, duplicates removed."""
    comps = tuple(int(c) for c in np.atleast_1d(comps))
    if not comps:
        raise ValueError("at least one component index is required")
    if len(set(comps)) != len(comps):
        raise ValueError("component indices must be distinct")
    if any(c < 0 or c >= I.dim for c in comps):
        raise ValueError(f"component indices must lie in 0..{I.dim - 1}")
    return FrequencyIndexSet(I.freqs[:, comps], len(comps))


def is_reconstructing_single(lat: Rank1Lattice, I: FrequencyIndexSet) -> bool:
    """True iff the residues of I on the lattice are pairwise distinct."""
    if lat.dim != I.dim:
        raise ValueError("dimension mismatch between lattice and frequency set")
    if len(I) <= 1:
        return True
    res = _residues_raw(I.freqs, lat.z, lat.m)
    return len(np.unique(res)) == len(I)
