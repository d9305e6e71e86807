"""Dictionary learning: alternating binary inference and batch SGD.

Training alternates two half-steps until the epoch-mean energy stops
moving: infer the best binary code for every input at the current
dictionary (delegated to a solver backend), then lower the reconstruction
energy in the dictionary by one epoch of minibatch gradient descent,

    phi <- project(phi - eta_t * dE/dphi),
    dE/dphi = -(1/n_b) sum_i (x_i - phi a_i) a_i^T,

with the learning rate decaying as eta_0 / (1 + t/T) over global batch
steps t.  The sparsity penalty does not touch the gradient; it only shapes
which codes the solver returns, and is tuned separately by bisection to a
target mean sparsity.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .chimera import Embedding, HardwareGraph, embed_complete, solve_embedded
from .core import Dictionary, SparseCode, project_columns_matrix
from .errors import BracketInvalid, DimensionMismatch, Empty
from .qubo import (
    AnnealSchedule,
    build_qubo,
    infer_batch_exhaustive,
    infer_batch_sa,
    qubo_to_ising,
)


def set_worker_threads(count: int) -> None:
    """Cap the thread pool used by the jit kernels (no-op without numba)."""
    if _kernels.HAVE_NUMBA:
        import numba

        numba.set_num_threads(max(1, min(count, numba.config.NUMBA_NUM_THREADS)))


class ExhaustiveSolver:
    """Exact enumeration backend (the oracle)."""

    name = "exhaustive"

    def infer(self, dictionary: Dictionary, xs: np.ndarray, lam: float) -> np.ndarray:
        return infer_batch_exhaustive(dictionary.matrix, xs, lam)


@dataclass(frozen=True)
class SaSolver:
    """Simulated-annealing backend; input s, read r uses substream (s, r)."""

    schedule: AnnealSchedule = AnnealSchedule()
    name = "sa"

    def infer(self, dictionary: Dictionary, xs: np.ndarray, lam: float) -> np.ndarray:
        return infer_batch_sa(dictionary.matrix, xs, lam, self.schedule)


class EmbeddedSaSolver:
    """SA on the problem minor-embedded into a Chimera graph.

    Each input runs the full chain-strength ladder; the clique embedding is
    built once per logical size and reused.
    """

    name = "embedded-sa"

    def __init__(
        self,
        graph: HardwareGraph,
        schedule: AnnealSchedule = AnnealSchedule(),
        xi_list: Sequence[float] | None = None,
    ):
        self.graph = graph
        self.schedule = schedule
        self.xi_list = list(xi_list) if xi_list is not None else None
        self._embeddings: dict[int, Embedding] = {}

    def _embedding(self, n: int) -> Embedding:
        if n not in self._embeddings:
            self._embeddings[n] = embed_complete(n, self.graph)
        return self._embeddings[n]

    def infer(self, dictionary: Dictionary, xs: np.ndarray, lam: float) -> np.ndarray:
        embedding = self._embedding(dictionary.n_q)
        out = np.empty((xs.shape[0], dictionary.n_q), dtype=np.uint8)
        for s, x in enumerate(xs):
            ising = qubo_to_ising(build_qubo(dictionary, x, lam))
            per_sample_seed = int(
                np.random.SeedSequence(self.schedule.seed, spawn_key=(s,)).generate_state(1)[0]
            )
            schedule = dataclasses.replace(self.schedule, seed=per_sample_seed)
            result = solve_embedded(ising, embedding, self.graph, self.xi_list, schedule)
            out[s] = result.best_code.bits
        return out


def solver_to_dict(solver) -> dict:
    """JSON-safe description of a solver backend."""
    kind = getattr(solver, "name", None)
    if kind == "exhaustive":
        return {"kind": "exhaustive"}
    if kind == "sa":
        return {"kind": "sa", "schedule": dataclasses.asdict(solver.schedule)}
    if kind == "embedded-sa":
        graph = solver.graph
        return {
            "kind": "embedded-sa",
            "schedule": dataclasses.asdict(solver.schedule),
            "graph": {
                "rows": graph.grid_rows,
                "cols": graph.grid_cols,
                "inoperable_qubits": sorted(graph.inoperable_qubits),
                "inoperable_couplers": sorted(list(p) for p in graph.inoperable_couplers),
            },
            "xi_list": solver.xi_list,
        }
    raise ValueError(f"solver {solver!r} is not serializable")


def solver_from_dict(payload: dict):
    kind = payload["kind"]
    if kind == "exhaustive":
        return ExhaustiveSolver()
    schedule = AnnealSchedule(**payload["schedule"])
    if kind == "sa":
        return SaSolver(schedule)
    if kind == "embedded-sa":
        g = payload["graph"]
        graph = HardwareGraph(
            g["rows"],
            g["cols"],
            g["inoperable_qubits"],
            [tuple(p) for p in g["inoperable_couplers"]],
        )
        return EmbeddedSaSolver(graph, schedule, payload.get("xi_list"))
    raise ValueError(f"unknown solver kind {kind!r}")


@dataclass(frozen=True)
class LearnConfig:
    """Hyperparameters for the alternating training loop."""

    lam: float = 0.1
    eta_initial: float = 0.01
    eta_decay_steps: int | None = None  # None: one epoch's batch count
    batch_size: int = 50
    max_outer_iters: int = 10
    converge_tol: float = 1e-3
    seed: int = 0
    solver: object = field(default_factory=ExhaustiveSolver)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.eta_initial <= 0:
            raise ValueError("eta_initial must be positive")
        if self.lam < 0:
            raise ValueError("sparsity penalty must be nonnegative")


@dataclass(frozen=True)
class TrainTrace:
    """Per-outer-iteration energy and sparsity, recorded at inference time."""

    energies: tuple[float, ...]
    sparsities: tuple[float, ...]
    outer_iterations: int


def _as_input_matrix(inputs, d: int | None = None) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if xs.size == 0:
        raise Empty("no inputs")
    if d is not None and xs.shape[1] != d:
        raise DimensionMismatch(f"inputs have dimension {xs.shape[1]}, expected {d}")
    return xs


def infer_codes(dictionary: Dictionary, inputs, lam: float, solver) -> list[SparseCode]:
    """Best code per input under the given backend."""
    xs = _as_input_matrix(inputs, dictionary.d)
    codes = solver.infer(dictionary, xs, lam)
    return [SparseCode(row) for row in codes]


def mean_energy(dictionary: Dictionary, xs: np.ndarray, codes: np.ndarray, lam: float) -> float:
    a = codes.astype(np.float64)
    resid = xs - a @ dictionary.matrix.T
    return float(0.5 * np.einsum("ij,ij->i", resid, resid).mean() + lam * a.sum(axis=1).mean())


def sparsity(codes) -> float:
    """Mean fraction of active bits over a batch of codes."""
    if len(codes) == 0:
        raise Empty("no codes")
    rows = np.stack([c.bits if isinstance(c, SparseCode) else np.asarray(c) for c in codes])
    return float(rows.mean())


def grad_dictionary(dictionary: Dictionary, batch_x, batch_codes) -> np.ndarray:
    """Gradient of the batch-mean energy with respect to the dictionary."""
    xs = _as_input_matrix(batch_x, dictionary.d)
    a = np.stack([c.bits if isinstance(c, SparseCode) else np.asarray(c) for c in batch_codes])
    a = a.astype(np.float64)
    if a.shape != (xs.shape[0], dictionary.n_q):
        raise DimensionMismatch(f"codes have shape {a.shape}, expected {(xs.shape[0], dictionary.n_q)}")
    resid = xs - a @ dictionary.matrix.T
    return -(resid.T @ a) / xs.shape[0]


def sgd_step(dictionary: Dictionary, gradient: np.ndarray, eta: float) -> Dictionary:
    """Gradient step followed by projection onto the column-norm bound."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != dictionary.matrix.shape:
        raise DimensionMismatch(f"gradient shape {g.shape} != dictionary {dictionary.matrix.shape}")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return project_columns_matrix(dictionary.matrix - eta * g)


def train_dictionary(
    inputs, initial_dictionary: Dictionary, config: LearnConfig
) -> tuple[Dictionary, TrainTrace]:
    """Alternate exact/approximate inference with one SGD epoch until the
    epoch-mean energy moves by less than converge_tol (relative), or the
    iteration cap is hit.  Deterministic given config.seed."""
    xs = _as_input_matrix(inputs, initial_dictionary.d)
    n_samples = xs.shape[0]
    phi = initial_dictionary
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(17,)))
    batches_per_epoch = max(1, n_samples // config.batch_size)
    decay_steps = config.eta_decay_steps or batches_per_epoch
    energies: list[float] = []
    sparsities: list[float] = []
    step = 0
    previous = None
    for _ in range(config.max_outer_iters):
        codes = config.solver.infer(phi, xs, config.lam)
        energy = mean_energy(phi, xs, codes, config.lam)
        energies.append(energy)
        sparsities.append(float(codes.mean()))
        if previous is not None and abs(energy - previous) <= config.converge_tol * max(
            abs(previous), 1e-12
        ):
            break
        previous = energy
        order = rng.permutation(n_samples)
        a = codes.astype(np.float64)
        for start in range(0, n_samples, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = xs[idx]
            ab = a[idx]
            grad = -((xb - ab @ phi.matrix.T).T @ ab) / idx.shape[0]
            eta = config.eta_initial / (1.0 + step / decay_steps)
            phi = project_columns_matrix(phi.matrix - eta * grad)
            step += 1
    return phi, TrainTrace(tuple(energies), tuple(sparsities), len(energies))


def tune_lambda(
    dictionary: Dictionary,
    inputs,
    target_sparsity: float,
    solver,
    bounds: tuple[float, float] | None = None,
    probe_size: int = 128,
    probe_seed: int = 0,
    tolerance: float = 0.02,
    max_iterations: int = 20,
) -> float:
    """Bisection on mean sparsity as a function of the penalty.

    Evaluated on a seeded probe subset.  Returns a penalty whose probe
    sparsity is within ``tolerance`` of the target, or the final bisection
    midpoint after ``max_iterations`` halvings.
    """
    if not 0.0 < target_sparsity < 1.0:
        raise ValueError("target sparsity must lie strictly between 0 and 1")
    xs = _as_input_matrix(inputs, dictionary.d)
    rng = np.random.default_rng(np.random.SeedSequence(probe_seed, spawn_key=(23,)))
    take = min(probe_size, xs.shape[0])
    probe = xs[rng.choice(xs.shape[0], size=take, replace=False)]
    if bounds is None:
        gram_diag = 0.5 * np.einsum("ij,ij->j", dictionary.matrix, dictionary.matrix)
        hi = float(max(0.0, (probe @ dictionary.matrix - gram_diag).max())) + 1e-6
        bounds = (0.0, hi)
    lo, hi = float(bounds[0]), float(bounds[1])

    def probe_sparsity(lam: float) -> float:
        return float(solver.infer(dictionary, probe, lam).mean())

    s_lo = probe_sparsity(lo)
    s_hi = probe_sparsity(hi)
    if not s_lo >= target_sparsity >= s_hi:
        raise BracketInvalid(
            f"sparsity({lo:g})={s_lo:.3f}, sparsity({hi:g})={s_hi:.3f} do not bracket {target_sparsity}"
        )
    for _ in range(max_iterations):
        mid = 0.5 * (lo + hi)
        s = probe_sparsity(mid)
        if abs(s - target_sparsity) <= tolerance:
            return mid
        if s > target_sparsity:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
