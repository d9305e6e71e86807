"""QUBO/Ising reduction of binary sparse inference, and classical solvers.

Selecting the best binary code for an input x under a fixed dictionary is
a quadratic unconstrained binary optimization.  ``build_qubo`` performs the
exact expansion of the sparse-coding energy,

    E(a) = 0.5 ||x||^2  +  sum_i a_i (lam + 0.5 ||phi_i||^2 - (phi^T x)_i)
         + sum_{i<j} (phi^T phi)_{ij} a_i a_j,

so QUBO energies match ``core.sc_energy`` for every code.  With unit-norm
columns the linear coefficient reduces to the familiar -phi^T x + lam + 1/2
bias form.  The spin formulation over s = 2a - 1 is kept as a distinct type
with an explicit, tested conversion.

Ground-state search is provided by an exhaustive enumerator (the oracle,
capped at 26 variables) and by multi-read simulated annealing, the
classical stand-in for a quantum annealer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Dictionary, SparseCode, _code_array
from .errors import DimensionMismatch, TooLarge

EXHAUSTIVE_CAP = 26


def _check_coeffs(linear, quadratic) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(linear, dtype=np.float64)
    m = np.asarray(quadratic, dtype=np.float64)
    n = q.shape[0]
    if q.ndim != 1 or m.shape != (n, n):
        raise DimensionMismatch(f"linear {q.shape} and quadratic {m.shape} are inconsistent")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(m))):
        raise ValueError("coefficients must be finite")
    if np.any(np.tril(m) != 0.0):
        raise ValueError("quadratic coefficients must be strictly upper-triangular")
    return q, m


@dataclass(frozen=True, eq=False)
class QuboProblem:
    """Minimize offset + q.a + sum_{i<j} Q_ij a_i a_j over a in {0,1}^n."""

    linear: np.ndarray
    quadratic: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        q, m = _check_coeffs(self.linear, self.quadratic)
        q.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "linear", q)
        object.__setattr__(self, "quadratic", m)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.linear.shape[0]


@dataclass(frozen=True, eq=False)
class IsingProblem:
    """Minimize offset + h.s + sum_{i<j} J_ij s_i s_j over s in {-1,+1}^n."""

    h: np.ndarray
    j: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        h, j = _check_coeffs(self.h, self.j)
        h.flags.writeable = False
        j.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class AnnealSchedule:
    """Multi-read Metropolis schedule: geometric beta ladder per read."""

    sweeps: int = 1000
    beta_initial: float = 0.1
    beta_final: float = 50.0
    reads: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1 or self.reads < 1:
            raise ValueError("sweeps and reads must be at least 1")
        if not 0 < self.beta_initial <= self.beta_final:
            raise ValueError("need 0 < beta_initial <= beta_final")

    def betas(self) -> np.ndarray:
        return np.geomspace(self.beta_initial, self.beta_final, self.sweeps)


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Lowest-energy code found, plus the per-read energy record."""

    best_code: SparseCode
    best_energy: float
    reads_taken: int
    all_energies: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.all_energies, dtype=np.float64)
        e.flags.writeable = False
        object.__setattr__(self, "all_energies", e)


def build_qubo(dictionary: Dictionary, x: np.ndarray, lam: float) -> QuboProblem:
    """Exact QUBO form of the code optimization at fixed dictionary.

    offset = 0.5||x||^2, q_i = lam + 0.5||phi_i||^2 - (phi^T x)_i and
    Q_ij = (phi^T phi)_ij for i < j; QUBO energies equal the sparse-coding
    energy for every code.
    """
    if lam < 0:
        raise ValueError("sparsity penalty must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    phi = dictionary.matrix
    if x.shape != (dictionary.d,):
        raise DimensionMismatch(f"x has shape {x.shape}, dictionary d={dictionary.d}")
    gram = phi.T @ phi
    linear = lam + 0.5 * np.diag(gram) - phi.T @ x
    quad = np.triu(gram, k=1)
    return QuboProblem(linear, quad, offset=0.5 * float(x @ x))


def qubo_energy(qubo: QuboProblem, a) -> float:
    av = _code_array(a, qubo.n)
    return qubo.offset + float(qubo.linear @ av) + float(av @ qubo.quadratic @ av)


def ising_energy(ising: IsingProblem, s) -> float:
    sv = np.asarray(s, dtype=np.float64)
    if sv.shape != (ising.n,):
        raise DimensionMismatch(f"spins have shape {sv.shape}, problem n={ising.n}")
    if np.any(np.abs(sv) != 1.0):
        raise ValueError("spins must be -1 or +1")
    return ising.offset + float(ising.h @ sv) + float(sv @ ising.j @ sv)


def qubo_to_ising(qubo: QuboProblem) -> IsingProblem:
    """Substitute a = (s+1)/2.  Energies agree pointwise with the QUBO."""
    q, m = qubo.linear, qubo.quadratic
    row = m.sum(axis=1)
    col = m.sum(axis=0)
    h = 0.5 * q + 0.25 * (row + col)
    offset = qubo.offset + 0.5 * q.sum() + 0.25 * m.sum()
    return IsingProblem(h, 0.25 * m, offset=offset)


def ising_to_qubo(ising: IsingProblem) -> QuboProblem:
    """Substitute s = 2a - 1.  Energies agree pointwise with the Ising form."""
    h, j = ising.h, ising.j
    row = j.sum(axis=1)
    col = j.sum(axis=0)
    q = 2.0 * h - 2.0 * (row + col)
    offset = ising.offset - h.sum() + j.sum()
    return QuboProblem(q, 4.0 * j, offset=offset)


def spins_to_code(s: np.ndarray) -> np.ndarray:
    return ((np.asarray(s) + 1) // 2).astype(np.uint8)


def code_to_spins(a) -> np.ndarray:
    bits = a.bits if isinstance(a, SparseCode) else np.asarray(a)
    return 2 * bits.astype(np.int8) - 1


def solve_exhaustive(qubo: QuboProblem) -> SolveResult:
    """Enumerate all 2^n codes and return the global minimizer.

    Ties break toward the code with fewer ones, then the lexicographically
    smallest bit sequence.  Reported as a single deterministic read.
    """
    if qubo.n > EXHAUSTIVE_CAP:
        raise TooLarge(f"n={qubo.n} exceeds the exhaustive cap of {EXHAUSTIVE_CAP}")
    bits = _kernels.exhaustive_argmin_single(qubo.linear, qubo.quadratic)
    code = SparseCode(bits)
    energy = qubo_energy(qubo, code)
    return SolveResult(code, energy, reads_taken=1, all_energies=np.array([energy]))


def _quad_sym(qubo: QuboProblem) -> np.ndarray:
    return qubo.quadratic + qubo.quadratic.T


def sa_reads(qubo: QuboProblem, schedule: AnnealSchedule) -> tuple[np.ndarray, np.ndarray]:
    """Run the schedule's independent reads; return per-read best codes and
    exact energies (reads, n) / (reads,).

    Read r consumes the counter-keyed substream (schedule.seed, (r,)), so
    reads can run in any order or in parallel with identical results.
    """
    reads = schedule.reads
    linear = np.repeat(qubo.linear[None, :], reads, axis=0)
    codes = _kernels.sa_run_chains(
        linear,
        _quad_sym(qubo)[None, :, :],
        np.zeros(reads, dtype=np.int64),
        schedule.betas(),
        [(r,) for r in range(reads)],
        schedule.seed,
    )
    af = codes.astype(np.float64)
    energies = qubo.offset + af @ qubo.linear + np.einsum("ij,ij->i", af @ qubo.quadratic, af)
    return codes, energies


def _pick_best_read(codes: np.ndarray, energies: np.ndarray) -> int:
    return int(np.argmin(energies))


def solve_sa(qubo: QuboProblem, schedule: AnnealSchedule) -> SolveResult:
    """Multi-read simulated annealing; returns the lowest-energy read."""
    codes, energies = sa_reads(qubo, schedule)
    best = _pick_best_read(codes, energies)
    return SolveResult(
        SparseCode(codes[best]),
        float(energies[best]),
        reads_taken=schedule.reads,
        all_energies=energies,
    )


def infer_batch_exhaustive(phi: np.ndarray, xs: np.ndarray, lam: float) -> np.ndarray:
    """Exhaustive best codes for many inputs sharing one dictionary.

    Returns (S, n) uint8.  Equivalent to solving build_qubo per row; the
    shared Gram matrix is tabulated once.  Ties resolve to the first code
    in the scan order rather than the single-problem sparsity rule.
    """
    n = phi.shape[1]
    if n > EXHAUSTIVE_CAP:
        raise TooLarge(f"n={n} exceeds the exhaustive cap of {EXHAUSTIVE_CAP}")
    gram = phi.T @ phi
    linear = lam + 0.5 * np.diag(gram) - (xs @ phi)
    return _kernels.exhaustive_argmin_batch(linear, np.triu(gram, k=1))


def infer_batch_sa(
    phi: np.ndarray,
    xs: np.ndarray,
    lam: float,
    schedule: AnnealSchedule,
    max_tape_bytes: int = 256_000_000,
) -> np.ndarray:
    """SA best codes for many inputs sharing one dictionary, (S, n) uint8.

    Sample s, read r consumes substream (schedule.seed, (s, r)); chunking
    exists only to bound the memory of the pre-drawn acceptance tapes.
    """
    gram = phi.T @ phi
    n = phi.shape[1]
    linear = lam + 0.5 * np.diag(gram) - (xs @ phi)
    quad = np.triu(gram, k=1)
    w = (quad + quad.T)[None, :, :]
    reads = schedule.reads
    betas = schedule.betas()
    n_samples = xs.shape[0]
    out = np.empty((n_samples, n), dtype=np.uint8)
    per_chain = 8 * (schedule.sweeps + 2) * n
    chunk = max(1, min(n_samples, max_tape_bytes // (per_chain * reads)))
    for s0 in range(0, n_samples, chunk):
        s1 = min(s0 + chunk, n_samples)
        span = s1 - s0
        chain_linear = np.repeat(linear[s0:s1], reads, axis=0)
        keys = [(s, r) for s in range(s0, s1) for r in range(reads)]
        codes = _kernels.sa_run_chains(
            chain_linear, w, np.zeros(span * reads, dtype=np.int64), betas, keys, schedule.seed
        )
        af = codes.astype(np.float64)
        # pick the lowest-energy read per sample (offset-free scores suffice)
        e = (np.einsum("ij,ij->i", af @ quad, af) + np.einsum("ij,ij->i", af, chain_linear)).reshape(
            span, reads
        )
        best = e.argmin(axis=1)
        out[s0:s1] = codes.reshape(span, reads, n)[np.arange(span), best]
    return out
