"""Chimera hardware-graph model, clique minor embedding, and embedded solving.

The hardware graph is a grid of 8-qubit bipartite unit cells: within a cell
the 4 "vertical" qubits (u=0) couple to the 4 "horizontal" qubits (u=1);
vertical qubits also couple to the same position in the cell above/below,
horizontal ones to the left/right.  Physical index of qubit (r, c, u, k) is
((r*cols + c)*2 + u)*4 + k.

A fully connected problem on n logical variables is embedded by chaining
physical qubits.  The deterministic construction used here is the diagonal
staircase: band b (4 chains at positions k=0..3) runs a horizontal wire
along row b from the diagonal cell rightward and a vertical wire up column
b, so every pair of chains crosses in a cell on or above the diagonal.  One
stub is dropped in the first and last band, and for n = 4m+1 an extra chain
saturates the strictly-lower triangle, giving capacity 4m+1 on a perfect
m x m grid.

Logical problems are pushed through an embedding by splitting biases evenly
along each chain, placing each logical coupling on its lowest-index
physical coupler, and tying chains ferromagnetically with strength xi.
Reads are unembedded by majority vote (ties fall to spin -1) and judged by
their logical energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import (
    EmbeddingMismatch,
    IndexOutOfRange,
    ParseError,
    TooManyLogicalQubits,
    UnsupportedMask,
)
from .core import SparseCode
from .qubo import AnnealSchedule, IsingProblem, SolveResult, ising_to_qubo

CELL = 4  # qubits per side of a unit cell


class HardwareGraph:
    """Chimera grid with optional inoperable qubits and couplers."""

    def __init__(
        self,
        grid_rows: int,
        grid_cols: int,
        inoperable_qubits: Iterable[int] = (),
        inoperable_couplers: Iterable[tuple[int, int]] = (),
    ):
        if grid_rows < 1 or grid_cols < 1:
            raise ValueError("grid must be at least 1x1")
        self.grid_rows = grid_rows
        self.grid_cols = grid_cols
        total = 8 * grid_rows * grid_cols
        bad_q = frozenset(int(q) for q in inoperable_qubits)
        for q in bad_q:
            if not 0 <= q < total:
                raise IndexOutOfRange(f"qubit {q} outside 0..{total - 1}")
        bad_c = frozenset(tuple(sorted((int(a), int(b)))) for a, b in inoperable_couplers)
        self.inoperable_qubits = bad_q
        perfect = self._perfect_couplers()
        for pair in bad_c:
            if pair not in perfect:
                raise IndexOutOfRange(f"{pair} is not a coupler of this graph")
        self.inoperable_couplers = bad_c
        self.couplers = frozenset(
            (a, b)
            for (a, b) in perfect
            if (a, b) not in bad_c and a not in bad_q and b not in bad_q
        )
        adj: dict[int, set[int]] = {q: set() for q in range(total) if q not in bad_q}
        for a, b in self.couplers:
            adj[a].add(b)
            adj[b].add(a)
        self.adjacency = {q: frozenset(nb) for q, nb in adj.items()}

    def qubit_index(self, r: int, c: int, u: int, k: int) -> int:
        return ((r * self.grid_cols + c) * 2 + u) * CELL + k

    def _perfect_couplers(self) -> frozenset[tuple[int, int]]:
        pairs = []
        q = self.qubit_index
        for r in range(self.grid_rows):
            for c in range(self.grid_cols):
                for k0 in range(CELL):
                    for k1 in range(CELL):
                        pairs.append((q(r, c, 0, k0), q(r, c, 1, k1)))
                if r + 1 < self.grid_rows:
                    for k in range(CELL):
                        pairs.append((q(r, c, 0, k), q(r + 1, c, 0, k)))
                if c + 1 < self.grid_cols:
                    for k in range(CELL):
                        pairs.append((q(r, c, 1, k), q(r, c + 1, 1, k)))
        return frozenset(tuple(sorted(p)) for p in pairs)

    @property
    def n_qubits(self) -> int:
        return 8 * self.grid_rows * self.grid_cols - len(self.inoperable_qubits)

    @property
    def n_couplers(self) -> int:
        return len(self.couplers)

    def has_qubit(self, q: int) -> bool:
        return q in self.adjacency

    def has_coupler(self, a: int, b: int) -> bool:
        return tuple(sorted((a, b))) in self.couplers


def build_chimera(
    rows: int,
    cols: int,
    inoperable_qubits: Iterable[int] = (),
    inoperable_couplers: Iterable[tuple[int, int]] = (),
) -> HardwareGraph:
    return HardwareGraph(rows, cols, inoperable_qubits, inoperable_couplers)


def load_mask(path) -> tuple[set[int], set[tuple[int, int]]]:
    """Read a mask file: one `q <index>` or `c <i> <j>` per line."""
    qubits: set[int] = set()
    couplers: set[tuple[int, int]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if parts[0] == "q" and len(parts) == 2:
                    qubits.add(int(parts[1]))
                elif parts[0] == "c" and len(parts) == 3:
                    couplers.add((int(parts[1]), int(parts[2])))
                else:
                    raise ValueError
            except ValueError:
                raise ParseError(lineno, f"expected 'q <i>' or 'c <i> <j>', got {line!r}") from None
    return qubits, couplers


@dataclass(frozen=True, eq=False)
class Embedding:
    """One nonempty physical chain per logical variable."""

    chains: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "chains", tuple(tuple(sorted(int(q) for q in ch)) for ch in self.chains)
        )
        if any(len(ch) == 0 for ch in self.chains):
            raise EmbeddingMismatch("every chain must be nonempty")

    @property
    def n(self) -> int:
        return len(self.chains)

    def total_qubits(self) -> int:
        return sum(len(ch) for ch in self.chains)

    @classmethod
    def identity(cls, n: int) -> "Embedding":
        return cls(tuple((i,) for i in range(n)))


def validate_embedding(
    embedding: Embedding,
    graph: HardwareGraph,
    pairs: Sequence[tuple[int, int]] | None = None,
) -> None:
    """Raise EmbeddingMismatch unless chains are disjoint, connected in the
    graph, and every required logical pair has an inter-chain coupler.

    ``pairs=None`` requires all pairs (a complete logical graph).
    """
    chains = embedding.chains
    seen: set[int] = set()
    for i, ch in enumerate(chains):
        chain = set(ch)
        if len(chain) != len(ch):
            raise EmbeddingMismatch(f"chain {i} repeats a qubit")
        if chain & seen:
            raise EmbeddingMismatch(f"chain {i} overlaps another chain")
        seen |= chain
        for q in ch:
            if not graph.has_qubit(q):
                raise EmbeddingMismatch(f"chain {i} uses missing qubit {q}")
        stack = [ch[0]]
        visited = {ch[0]}
        while stack:
            q = stack.pop()
            for nb in graph.adjacency[q]:
                if nb in chain and nb not in visited:
                    visited.add(nb)
                    stack.append(nb)
        if visited != chain:
            raise EmbeddingMismatch(f"chain {i} is not connected")
    if pairs is None:
        pairs = [(i, j) for i in range(len(chains)) for j in range(i + 1, len(chains))]
    for i, j in pairs:
        if not _inter_chain_couplers(chains[i], chains[j], graph):
            raise EmbeddingMismatch(f"no coupler joins chains {i} and {j}")


def _inter_chain_couplers(
    chain_a: Sequence[int], chain_b: Sequence[int], graph: HardwareGraph
) -> list[tuple[int, int]]:
    found = []
    sb = set(chain_b)
    for a in chain_a:
        for nb in graph.adjacency.get(a, ()):  # masked qubits simply have no entry
            if nb in sb:
                found.append(tuple(sorted((a, nb))))
    return sorted(set(found))


def _staircase_chains(n: int, m: int, cols: int) -> list[list[int]]:
    def q(r, c, u, k):
        return ((r * cols + c) * 2 + u) * CELL + k

    chains: list[list[int]] = []
    if n <= 4 * m:
        bands = (n + CELL - 1) // CELL
        for t in range(n):
            b, k = divmod(t, CELL)
            horizontal = [q(b, c, 1, k) for c in range(b, bands)]
            vertical = [q(r, b, 0, k) for r in range(0, b + 1)]
            if t == 0:
                chains.append(horizontal)  # its stub is redundant: siblings cross its wire
            elif bands >= 2 and b == bands - 1 and k == 0:
                chains.append(vertical)
            else:
                chains.append(horizontal + vertical)
        return chains
    # n == 4m + 1: full staircase plus one chain through the lower triangle
    if m == 1:
        chains = [[q(0, 0, 1, 0)]]
        chains += [[q(0, 0, 1, k), q(0, 0, 0, k)] for k in range(1, CELL)]
        chains.append([q(0, 0, 0, 0)])  # the stub orphaned by chain 0
        return chains
    for t in range(4 * m):
        b, k = divmod(t, CELL)
        chains.append(
            [q(b, c, 1, k) for c in range(b, m)] + [q(r, b, 0, k) for r in range(0, b + 1)]
        )
    extra: list[int] = []
    for b in range(m - 1):
        extra.extend(q(b + 1, b, u, k) for u in (0, 1) for k in range(CELL))
    for b in range(m - 2):
        extra.extend((q(b + 2, b, 0, 0), q(b + 2, b, 1, 0)))  # staircase connectors
    chains.append(extra)
    return chains


def embed_complete(n: int, graph: HardwareGraph) -> Embedding:
    """Deterministic embedding of the complete graph on n logical qubits.

    Capacity is 4m+1 with m = min(grid_rows, grid_cols).  No repair is
    attempted on masked graphs: if an inoperable qubit or coupler touches
    the construction, the embedding is refused.
    """
    if n < 1:
        raise ValueError("need at least one logical qubit")
    m = min(graph.grid_rows, graph.grid_cols)
    if n > 4 * m + 1:
        raise TooManyLogicalQubits(f"n={n} exceeds the capacity 4m+1={4 * m + 1} of a {m}x{m} grid")
    embedding = Embedding(tuple(tuple(ch) for ch in _staircase_chains(n, m, graph.grid_cols)))
    try:
        validate_embedding(embedding, graph)
    except EmbeddingMismatch as exc:
        raise UnsupportedMask(f"hardware mask breaks the clique construction: {exc}") from exc
    return embedding


@dataclass(frozen=True, eq=False)
class EmbeddedIsing:
    """A logical Ising problem pushed onto physical qubits.

    ``problem`` is expressed over compact indices 0..P-1; ``qubits`` maps
    each compact index to its physical qubit, and ``chains`` lists the
    compact indices of every logical variable's chain.
    """

    problem: IsingProblem
    qubits: tuple[int, ...]
    chains: tuple[tuple[int, ...], ...]


def embed_ising(
    ising: IsingProblem, embedding: Embedding, xi: float, graph: HardwareGraph
) -> EmbeddedIsing:
    """Split each bias evenly over its chain, place each logical coupling on
    the lowest-index physical coupler, and tie chains with coupling -xi."""
    if xi <= 0:
        raise ValueError("chain strength must be positive")
    if embedding.n != ising.n:
        raise EmbeddingMismatch(f"embedding has {embedding.n} chains, problem has {ising.n}")
    qubits = [q for ch in embedding.chains for q in ch]
    compact = {q: i for i, q in enumerate(qubits)}
    if len(compact) != len(qubits):
        raise EmbeddingMismatch("chains overlap")
    p = len(qubits)
    h = np.zeros(p)
    j = np.zeros((p, p))
    chains_compact = []
    for i, ch in enumerate(embedding.chains):
        share = ising.h[i] / len(ch)
        for q in ch:
            h[compact[q]] = share
        chains_compact.append(tuple(compact[q] for q in ch))
        for a_idx in range(len(ch)):
            for b_idx in range(a_idx + 1, len(ch)):
                if graph.has_coupler(ch[a_idx], ch[b_idx]):
                    ca, cb = sorted((compact[ch[a_idx]], compact[ch[b_idx]]))
                    j[ca, cb] -= xi
    for i in range(ising.n):
        for k in range(i + 1, ising.n):
            coupling = ising.j[i, k]
            if coupling == 0.0:
                continue
            options = _inter_chain_couplers(embedding.chains[i], embedding.chains[k], graph)
            if not options:
                raise EmbeddingMismatch(f"no coupler available for logical pair ({i}, {k})")
            a, b = options[0]
            ca, cb = sorted((compact[a], compact[b]))
            j[ca, cb] += coupling
    return EmbeddedIsing(
        IsingProblem(h, np.triu(j, k=1), offset=ising.offset),
        tuple(qubits),
        tuple(chains_compact),
    )


def unembed(physical_spins: Mapping[int, int], embedding: Embedding) -> np.ndarray:
    """Majority vote per chain; exact ties resolve to spin -1."""
    out = np.empty(embedding.n, dtype=np.int8)
    for i, ch in enumerate(embedding.chains):
        vote = sum(int(physical_spins[q]) for q in ch)
        out[i] = 1 if vote > 0 else -1
    return out


def _unembed_code_rows(codes: np.ndarray, chains: Sequence[Sequence[int]]) -> np.ndarray:
    """Majority vote over bit rows (R, P) -> (R, n); ties fall to 0."""
    out = np.empty((codes.shape[0], len(chains)), dtype=np.uint8)
    for i, ch in enumerate(chains):
        idx = np.fromiter(ch, dtype=np.int64)
        out[:, i] = (2 * codes[:, idx].sum(axis=1) > len(ch)).astype(np.uint8)
    return out


def chain_break_count(physical_code: np.ndarray, chains: Sequence[Sequence[int]]) -> int:
    """Number of chains whose physical bits disagree."""
    broken = 0
    for ch in chains:
        idx = np.fromiter(ch, dtype=np.int64)
        ones = int(physical_code[idx].sum())
        if 0 < ones < len(ch):
            broken += 1
    return broken


def default_chain_strengths(ising: IsingProblem, count: int = 10) -> list[float]:
    """Geometric ladder of strengths spanning 0.5x to 5x the coefficient scale."""
    scale = max(float(np.abs(ising.h).max(initial=0.0)), float(np.abs(ising.j).max(initial=0.0)))
    if scale == 0.0:
        scale = 1.0
    return list(np.geomspace(0.5 * scale, 5.0 * scale, count))


def solve_embedded(
    ising: IsingProblem,
    embedding: Embedding,
    graph: HardwareGraph,
    xi_list: Sequence[float] | None = None,
    schedule: AnnealSchedule = AnnealSchedule(),
) -> SolveResult:
    """Anneal the embedded problem for every chain strength; unembed every
    read and return the code with the lowest logical energy.

    The read for chain strength index i and repetition r consumes substream
    (schedule.seed, (i*reads + r,)), the same numbering solve_sa uses, so a
    singleton-chain embedding reproduces plain SA exactly.
    """
    if xi_list is None:
        xi_list = default_chain_strengths(ising)
    xi_list = list(xi_list)
    if not xi_list:
        raise ValueError("xi_list must be nonempty")
    reads = schedule.reads
    embedded = [embed_ising(ising, embedding, xi, graph) for xi in xi_list]
    p = len(embedded[0].qubits)
    quads = np.empty((len(xi_list), p, p))
    linears = np.empty((len(xi_list), p))
    for i, emb in enumerate(embedded):
        qb = ising_to_qubo(emb.problem)
        quads[i] = qb.quadratic + qb.quadratic.T
        linears[i] = qb.linear
    betas = schedule.betas()
    # chunk over chain strengths to bound the pre-drawn tape memory; the
    # global read numbering (xi index * reads + r) is unaffected
    per_chain_bytes = 8 * (schedule.sweeps + 2) * p
    xi_per_chunk = max(1, 256_000_000 // (per_chain_bytes * reads))
    phys_codes = np.empty((len(xi_list) * reads, p), dtype=np.uint8)
    for x0 in range(0, len(xi_list), xi_per_chunk):
        x1 = min(x0 + xi_per_chunk, len(xi_list))
        chain_linear = np.repeat(linears[x0:x1], reads, axis=0)
        prob_idx = np.repeat(np.arange(x1 - x0, dtype=np.int64), reads)
        keys = [(g,) for g in range(x0 * reads, x1 * reads)]
        phys_codes[x0 * reads : x1 * reads] = _kernels.sa_run_chains(
            chain_linear, quads[x0:x1], prob_idx, betas, keys, schedule.seed
        )
    logical = _unembed_code_rows(phys_codes, embedded[0].chains)
    spins = 2.0 * logical - 1.0
    energies = ising.offset + spins @ ising.h + np.einsum("ij,ij->i", spins @ ising.j, spins)
    best = int(np.argmin(energies))
    return SolveResult(
        SparseCode(logical[best]),
        float(energies[best]),
        reads_taken=len(xi_list) * reads,
        all_energies=energies,
    )
