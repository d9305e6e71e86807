"""Low-level solver kernels.

Two families live here, each with a numba fast path and a pure-numpy
fallback implementing the same arithmetic:

* exhaustive QUBO argmin, both for a single problem (full tie-breaking
  rule) and for a batch of problems sharing one quadratic matrix
  (half-split score table with row pruning);
* the Metropolis single-flip annealing sweep used by all SA-based solvers.

The SA kernel consumes a pre-drawn uniform "tape" per chain so that results
are bit-identical whichever path executes, and independent of how chains
are chunked or parallelized.
"""

from __future__ import annotations

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

_BIT_CACHE: dict[int, np.ndarray] = {}
_TIE_RULE_LIMIT = 16  # full-table tie resolution up to this many variables


def bit_matrix(nbits: int) -> np.ndarray:
    """All 2^nbits binary rows; row k has bit i equal to (k >> i) & 1."""
    if nbits not in _BIT_CACHE:
        idx = np.arange(1 << nbits, dtype=np.uint32)
        m = ((idx[:, None] >> np.arange(nbits, dtype=np.uint32)[None, :]) & 1).astype(np.float64)
        m.flags.writeable = False
        _BIT_CACHE[nbits] = m
    return _BIT_CACHE[nbits]


def codes_from_indices(indices: np.ndarray, n: int) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(indices, dtype=np.uint64))
    return ((idx[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & 1).astype(np.uint8)


# --------------------------------------------------------------------------
# exhaustive argmin, batched over linear terms with a shared quadratic
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, parallel=True)
    def _scan_table(base, row_min, glo, ghi, out_lo, out_hi):  # pragma: no cover - jit
        n_samples = glo.shape[1]
        for s in numba.prange(n_samples):
            best = np.inf
            b_lo = 0
            b_hi = 0
            gmin = np.inf
            for h in range(ghi.shape[0]):
                if ghi[h, s] < gmin:
                    gmin = ghi[h, s]
            for lo in range(base.shape[0]):
                g = glo[lo, s]
                # row lower bound; small slack keeps float grouping honest
                if row_min[lo] + g + gmin > best + 1e-12 * (1.0 + abs(best)):
                    continue
                row = base[lo]
                for h in range(row.shape[0]):
                    v = row[h] + g + ghi[h, s]
                    if v < best:
                        best = v
                        b_lo = lo
                        b_hi = h
            out_lo[s] = b_lo
            out_hi[s] = b_hi


def _scan_table_numpy(base, glo, ghi, out_lo, out_hi):
    n_samples = glo.shape[1]
    best = np.full(n_samples, np.inf)
    cols = np.arange(n_samples)
    for lo in range(base.shape[0]):
        # grouping matches the jit path: (base + g) + ghi
        scores = (base[lo][:, None] + glo[lo][None, :]) + ghi  # (2^n_hi, S)
        h = scores.argmin(axis=0)
        v = scores[h, cols]
        upd = v < best
        if upd.any():
            best[upd] = v[upd]
            out_lo[upd] = lo
            out_hi[upd] = h[upd]


def exhaustive_argmin_batch(linear: np.ndarray, quad_upper: np.ndarray) -> np.ndarray:
    """Per-row argmin of q.a + sum_{i<j} Q_ij a_i a_j over a in {0,1}^n.

    ``linear`` is (S, n); ``quad_upper`` is strictly upper triangular and
    shared by all rows.  Scores decompose over the low/high bit halves, so
    the quadratic part is tabulated once per call and the per-sample work
    is a pruned scan of the table.  Returns (S, n) uint8 codes.
    """
    linear = np.ascontiguousarray(linear, dtype=np.float64)
    n_samples, n = linear.shape
    n_lo = n // 2
    n_hi = n - n_lo
    b_lo = bit_matrix(n_lo)
    b_hi = bit_matrix(n_hi)
    c_lo = np.einsum("ij,ij->i", b_lo @ quad_upper[:n_lo, :n_lo], b_lo)
    c_hi = np.einsum("ij,ij->i", b_hi @ quad_upper[n_lo:, n_lo:], b_hi)
    base = np.ascontiguousarray(c_lo[:, None] + c_hi[None, :] + (b_lo @ quad_upper[:n_lo, n_lo:]) @ b_hi.T)
    glo = np.ascontiguousarray(b_lo @ linear[:, :n_lo].T)
    ghi = np.ascontiguousarray(b_hi @ linear[:, n_lo:].T)
    out_lo = np.zeros(n_samples, dtype=np.int64)
    out_hi = np.zeros(n_samples, dtype=np.int64)
    if HAVE_NUMBA:
        _scan_table(base, base.min(axis=1), glo, ghi, out_lo, out_hi)
    else:
        _scan_table_numpy(base, glo, ghi, out_lo, out_hi)
    codes = np.empty((n_samples, n), dtype=np.uint8)
    codes[:, :n_lo] = b_lo[out_lo].astype(np.uint8)
    codes[:, n_lo:] = b_hi[out_hi].astype(np.uint8)
    return codes


# --------------------------------------------------------------------------
# exhaustive scan of a single problem with the sparsity tie-breaking rule
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _gray_scan(linear, quad_sym):  # pragma: no cover - jit
        n = linear.shape[0]
        total = np.int64(1) << n
        a = np.zeros(n, dtype=np.uint8)
        field = linear.copy()
        energy = 0.0
        best_energy = 0.0
        best_index = np.int64(0)
        best_ones = 0
        ones = 0
        code = np.int64(0)
        for step in range(1, total):
            i = 0
            t = step
            while t & 1 == 0:
                t >>= 1
                i += 1
            delta = 1.0 - 2.0 * a[i]
            energy += delta * field[i]
            a[i] ^= 1
            ones += 1 if a[i] else -1
            code ^= np.int64(1) << i
            for j in range(n):
                field[j] += delta * quad_sym[i, j]
            if (step & 0xFFFF) == 0:
                # re-anchor the incremental energy to stop drift
                e = 0.0
                for j in range(n):
                    if a[j]:
                        e += linear[j]
                        for k in range(j + 1, n):
                            if a[k]:
                                e += quad_sym[j, k]
                energy = e
            if energy < best_energy:
                best_energy = energy
                best_index = code
                best_ones = ones
            elif energy == best_energy:
                if ones < best_ones:
                    best_index = code
                    best_ones = ones
                elif ones == best_ones:
                    # lexicographic over (a_0, a_1, ...): reverse the bits
                    rev_new = np.int64(0)
                    rev_old = np.int64(0)
                    for j in range(n):
                        rev_new = (rev_new << 1) | ((code >> j) & 1)
                        rev_old = (rev_old << 1) | ((best_index >> j) & 1)
                    if rev_new < rev_old:
                        best_index = code
        return best_index


def _reverse_bits(values: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(values)
    v = values.copy()
    for _ in range(n):
        out = (out << 1) | (v & 1)
        v >>= 1
    return out


def _tie_rule_pick(indices: np.ndarray, n: int) -> int:
    """Among equal-energy codes: fewest ones, then lexicographically least."""
    codes = codes_from_indices(indices, n)
    ones = codes.sum(axis=1)
    indices = indices[ones == ones.min()]
    return int(indices[np.argmin(_reverse_bits(indices.astype(np.int64), n))])


def _exhaustive_argmin_table(linear: np.ndarray, quad_upper: np.ndarray) -> int:
    n = linear.shape[0]
    codes = bit_matrix(n)
    energies = np.einsum("ij,ij->i", codes @ quad_upper, codes) + codes @ linear
    tied = np.flatnonzero(energies == energies.min())
    if tied.size == 1:
        return int(tied[0])
    return _tie_rule_pick(tied.astype(np.uint64), n)


def _exhaustive_scan_numpy(linear: np.ndarray, quad_upper: np.ndarray) -> int:
    n = linear.shape[0]
    block_bits = min(n, _TIE_RULE_LIMIT)
    blk = bit_matrix(block_bits)
    blk_quad = np.einsum("ij,ij->i", blk @ quad_upper[:block_bits, :block_bits], blk)
    best_energy = np.inf
    candidates: list[np.ndarray] = []
    for high in range(1 << (n - block_bits)):
        hi_bits = codes_from_indices(np.array([high]), n - block_bits)[0].astype(np.float64)
        e_hi = float(hi_bits @ linear[block_bits:]) + float(
            hi_bits @ quad_upper[block_bits:, block_bits:] @ hi_bits
        )
        energies = blk_quad + blk @ (linear[:block_bits] + quad_upper[:block_bits, block_bits:] @ hi_bits) + e_hi
        m = float(energies.min())
        if m < best_energy:
            best_energy = m
            candidates = []
        if m <= best_energy:
            idx = np.flatnonzero(energies == best_energy).astype(np.uint64)
            candidates.append(idx | (np.uint64(high) << np.uint64(block_bits)))
    return _tie_rule_pick(np.concatenate(candidates), n)


def exhaustive_argmin_single(linear: np.ndarray, quad_upper: np.ndarray) -> np.ndarray:
    """Global argmin over {0,1}^n, ties broken toward fewer ones and then
    the lexicographically smallest code.

    Up to 16 variables the full energy table is evaluated, which applies
    the tie rule on exact energies.  Beyond that the jit gray-code scan
    resolves ties on its incrementally tracked energies (drift is
    re-anchored every 2^16 steps).
    """
    linear = np.ascontiguousarray(linear, dtype=np.float64)
    n = linear.shape[0]
    if n <= _TIE_RULE_LIMIT or not HAVE_NUMBA:
        if n <= _TIE_RULE_LIMIT:
            best = _exhaustive_argmin_table(linear, quad_upper)
        else:
            best = _exhaustive_scan_numpy(linear, quad_upper)
    else:
        quad_sym = np.ascontiguousarray(quad_upper + quad_upper.T)
        best = int(_gray_scan(linear, quad_sym))
    return codes_from_indices(np.array([best]), n)[0]


# --------------------------------------------------------------------------
# Metropolis single-flip annealing sweeps
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, parallel=True)
    def _sa_chains(states, fields, quad_sym, prob_idx, betas, tape, best_states, best_rel):  # pragma: no cover - jit
        n_chains, n = states.shape
        sweeps = betas.shape[0]
        for c in numba.prange(n_chains):
            w = quad_sym[prob_idx[c]]
            a = states[c]
            field = fields[c]
            e_rel = 0.0
            e_best = 0.0
            for t in range(sweeps):
                beta = betas[t]
                for i in range(n):
                    de = (1.0 - 2.0 * a[i]) * field[i]
                    if de <= 0.0 or tape[c, t, i] < np.exp(-beta * de):
                        delta = 1.0 - 2.0 * a[i]
                        a[i] = 1.0 - a[i]
                        e_rel += de
                        for j in range(n):
                            field[j] += delta * w[i, j]
                if e_rel < e_best:
                    e_best = e_rel
                    for j in range(n):
                        best_states[c, j] = a[j]
            best_rel[c] = e_best


def _sa_chains_numpy(states, fields, quad_sym, prob_idx, betas, tape, best_states, best_rel):
    n_chains, n = states.shape
    e_rel = np.zeros(n_chains)
    e_best = np.zeros(n_chains)
    w_rows = quad_sym[prob_idx]  # (C, n, n); fallback path, memory is fine
    for t, beta in enumerate(betas):
        for i in range(n):
            de = (1.0 - 2.0 * states[:, i]) * fields[:, i]
            accept = (de <= 0.0) | (tape[:, t, i] < np.exp(-beta * np.maximum(de, 0.0)))
            if accept.any():
                delta = 1.0 - 2.0 * states[accept, i]
                states[accept, i] = 1.0 - states[accept, i]
                e_rel[accept] += de[accept]
                fields[accept] += delta[:, None] * w_rows[accept, i, :]
        improved = e_rel < e_best
        if improved.any():
            e_best[improved] = e_rel[improved]
            best_states[improved] = states[improved]
    best_rel[:] = e_best


def sa_run_chains(
    linear: np.ndarray,
    quad_sym: np.ndarray,
    prob_idx: np.ndarray,
    betas: np.ndarray,
    seed_keys: list[tuple[int, ...]],
    entropy: int,
) -> np.ndarray:
    """Anneal one chain per linear row; return each chain's best code (C, n).

    Chain c minimizes linear[c] . a + sum_{i<j} W_ij a_i a_j over the beta
    ladder, where W = quad_sym[prob_idx[c]] is symmetric with zero diagonal.
    Each chain draws its initial state and acceptance tape from the
    counter-keyed stream SeedSequence(entropy, spawn_key=seed_keys[c]), so
    results do not depend on chunking or execution order.  The incumbent
    best state of each chain is refreshed at sweep boundaries.
    """
    linear = np.ascontiguousarray(linear, dtype=np.float64)
    n_chains, n = linear.shape
    sweeps = betas.shape[0]
    states = np.empty((n_chains, n), dtype=np.float64)
    tape = np.empty((n_chains, sweeps, n), dtype=np.float64)
    for c, key in enumerate(seed_keys):
        g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=key)))
        states[c] = (g.random(n) < 0.5).astype(np.float64)
        tape[c] = g.random((sweeps, n))
    prob_idx = np.ascontiguousarray(prob_idx, dtype=np.int64)
    quad_sym = np.ascontiguousarray(quad_sym, dtype=np.float64)
    # initial local fields, computed once and identically for both paths
    fields = linear + np.einsum("cij,cj->ci", quad_sym[prob_idx], states)
    best_states = states.copy()
    best_rel = np.zeros(n_chains)
    betas = np.ascontiguousarray(betas, dtype=np.float64)
    if HAVE_NUMBA:
        _sa_chains(states, fields, quad_sym, prob_idx, betas, tape, best_states, best_rel)
    else:
        _sa_chains_numpy(states, fields, quad_sym, prob_idx, betas, tape, best_states, best_rel)
    return best_states.astype(np.uint8)
