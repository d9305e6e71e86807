"""Domain types, standardization, and the sparse-coding energy.

The central objects are a dictionary ``phi`` (a D x N_q real matrix whose
columns are basis vectors with Euclidean norm at most 1) and binary
activation vectors ``a`` in {0,1}^N_q.  The energy of a reconstruction is

    E(x, a) = 0.5 * ||x - phi @ a||^2 + lam * sum(a)

where ``lam`` is the sparsity penalty.  For binary ``a`` the number of
nonzeros equals the plain sum, so the L0 and L1 penalties coincide.

Everything in this module is an immutable value; all operations are pure
functions and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, TooFewSamples, ZeroVariance

NORM_TOL = 1e-12  # slack allowed on the unit column-norm bound


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Sample:
    """One data point: input vector ``x`` and optional target ``y``."""

    x: np.ndarray
    y: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(np.atleast_1d(self.x)))
        if not np.all(np.isfinite(self.x)):
            raise ValueError("sample has non-finite inputs")
        if self.y is not None:
            y = float(self.y)
            if not np.isfinite(y):
                raise ValueError("sample has non-finite target")
            object.__setattr__(self, "y", y)

    @property
    def d(self) -> int:
        return self.x.shape[0]


class Dictionary:
    """D x N_q basis matrix with column norms bounded by 1."""

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray):
        m = np.array(matrix, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise DimensionMismatch(f"dictionary must be a 2-d matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("dictionary has non-finite entries")
        norms = np.linalg.norm(m, axis=0)
        if np.any(norms > 1.0 + NORM_TOL):
            raise ValueError(f"column norm {norms.max():.17g} exceeds the unit bound")
        m.flags.writeable = False
        self.matrix = m

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_q(self) -> int:
        return self.matrix.shape[1]

    @property
    def overcompleteness(self) -> float:
        """Number of basis vectors per input dimension."""
        return self.n_q / self.d

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.matrix, axis=0)

    @classmethod
    def random(cls, d: int, n_q: int, rng: np.random.Generator) -> "Dictionary":
        """Entries uniform in [-1, 1], then projected onto the norm bound."""
        return project_columns_matrix(rng.uniform(-1.0, 1.0, size=(d, n_q)))

    def __repr__(self) -> str:
        return f"Dictionary(d={self.d}, n_q={self.n_q})"


@dataclass(frozen=True, eq=False)
class SparseCode:
    """Binary activation vector over the dictionary columns."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.uint8, copy=True)
        if b.ndim != 1:
            raise DimensionMismatch("code must be one-dimensional")
        if np.any((b != 0) & (b != 1)):
            raise ValueError("code entries must be 0 or 1")
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return self.bits.shape[0]

    @property
    def ones(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, SparseCode) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    """Per-coordinate mean and standard deviation over D inputs plus y."""

    means: np.ndarray
    stddevs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means))
        object.__setattr__(self, "stddevs", _frozen(self.stddevs))
        if self.means.shape != self.stddevs.shape or self.means.ndim != 1:
            raise DimensionMismatch("means and stddevs must be 1-d and equal length")
        if np.any(self.stddevs <= 0):
            raise ZeroVariance(int(np.argmax(self.stddevs <= 0)))

    @property
    def d(self) -> int:
        """Input dimension (last coordinate is the target)."""
        return self.means.shape[0] - 1


def standardize_fit(train: Sequence[Sample]) -> StandardizationStats:
    """Sample mean and standard deviation (n-1 denominator) per coordinate.

    Covers all D input coordinates and the target as coordinate D.  Every
    training sample must carry a target.
    """
    if len(train) < 2:
        raise TooFewSamples(f"need at least 2 samples, got {len(train)}")
    d = train[0].d
    for s in train:
        if s.d != d:
            raise DimensionMismatch("samples have inconsistent input dimension")
        if s.y is None:
            raise ValueError("training sample is missing its target")
    data = np.column_stack(
        [np.stack([s.x for s in train]), np.array([s.y for s in train])]
    )
    means = data.mean(axis=0)
    stds = data.std(axis=0, ddof=1)
    bad = np.flatnonzero(stds == 0.0)
    if bad.size:
        raise ZeroVariance(int(bad[0]))
    return StandardizationStats(means, stds)


def standardize_apply(stats: StandardizationStats, sample: Sample) -> Sample:
    """Map each coordinate to (v - mean) / stddev; y handled when present."""
    if sample.d != stats.d:
        raise DimensionMismatch(f"sample has d={sample.d}, stats expect d={stats.d}")
    x = (sample.x - stats.means[:-1]) / stats.stddevs[:-1]
    y = None
    if sample.y is not None:
        y = (sample.y - stats.means[-1]) / stats.stddevs[-1]
    return Sample(x, y)


def standardize_invert(stats: StandardizationStats, value: float, coordinate: int) -> float:
    """Undo standardization of one coordinate: value * stddev + mean."""
    if not 0 <= coordinate < stats.means.shape[0]:
        raise DimensionMismatch(f"coordinate {coordinate} out of range")
    return float(value) * float(stats.stddevs[coordinate]) + float(stats.means[coordinate])


def _code_array(a, n_q: int) -> np.ndarray:
    bits = a.bits if isinstance(a, SparseCode) else np.asarray(a)
    if bits.shape != (n_q,):
        raise DimensionMismatch(f"code length {bits.shape} does not match n_q={n_q}")
    return bits.astype(np.float64)


def sc_energy(dictionary: Dictionary, x: np.ndarray, a, lam: float) -> float:
    """Sparse-coding energy 0.5*||x - phi a||^2 + lam * (number of ones)."""
    if lam < 0:
        raise ValueError("sparsity penalty must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dictionary.d,):
        raise DimensionMismatch(f"x has shape {x.shape}, dictionary d={dictionary.d}")
    av = _code_array(a, dictionary.n_q)
    r = x - dictionary.matrix @ av
    return 0.5 * float(r @ r) + float(lam) * float(av.sum())


def project_columns_matrix(matrix: np.ndarray) -> Dictionary:
    """Project a raw matrix onto the feasible set of column norms <= 1.

    Columns with norm above 1 are rescaled to unit norm; the rest pass
    through untouched, so the projection is exactly idempotent.  Rescaling
    repeats until the recomputed norm no longer exceeds 1, which absorbs
    the one-ulp overshoot that a single division can leave behind.
    """
    m = np.array(matrix, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    while True:
        norms = np.linalg.norm(m, axis=0)
        over = norms > 1.0
        if not over.any():
            break
        m[:, over] /= norms[over]
    return Dictionary(m)


def project_columns(dictionary: Dictionary) -> Dictionary:
    return project_columns_matrix(dictionary.matrix)
