import numpy as np
import pytest

from annealreg.chimera import (
    Embedding,
    build_chimera,
    chain_break_count,
    default_chain_strengths,
    embed_complete,
    embed_ising,
    load_mask,
    solve_embedded,
    unembed,
    validate_embedding,
)
from annealreg.core import Dictionary
from annealreg.errors import (
    EmbeddingMismatch,
    IndexOutOfRange,
    ParseError,
    TooManyLogicalQubits,
    UnsupportedMask,
)
from annealreg.qubo import (
    AnnealSchedule,
    IsingProblem,
    build_qubo,
    ising_energy,
    qubo_to_ising,
    sa_reads,
    solve_exhaustive,
    solve_sa,
)


class TestGraph:
    def test_2x2_counts(self):
        g = build_chimera(2, 2)
        assert g.n_qubits == 32

    def test_16x16_counts(self):
        g = build_chimera(16, 16)
        assert g.n_qubits == 2048
        assert g.n_couplers == 6016

    def test_1x1_counts(self):
        g = build_chimera(1, 1)
        assert g.n_qubits == 8
        assert g.n_couplers == 16

    def test_degree_bound(self):
        g = build_chimera(3, 3)
        assert max(len(nb) for nb in g.adjacency.values()) <= 6

    def test_mask_removes_incident_couplers(self):
        g = build_chimera(1, 1, inoperable_qubits=[0])
        assert g.n_qubits == 7
        assert g.n_couplers == 12  # qubit 0 touched 4 of the 16 cell couplers
        assert not g.has_qubit(0)

    def test_mask_range_checks(self):
        with pytest.raises(IndexOutOfRange):
            build_chimera(1, 1, inoperable_qubits=[8])
        with pytest.raises(IndexOutOfRange):
            build_chimera(1, 1, inoperable_couplers=[(0, 1)])  # same-side pair, not an edge

    def test_mask_file_round_trip(self, tmp_path):
        path = tmp_path / "mask.txt"
        path.write_text("# comment\nq 3\nc 0 4\n\n")
        qubits, couplers = load_mask(path)
        assert qubits == {3} and couplers == {(0, 4)}
        bad = tmp_path / "bad.txt"
        bad.write_text("q 1\nz 9\n")
        with pytest.raises(ParseError) as err:
            load_mask(bad)
        assert err.value.line == 2


class TestEmbedComplete:
    def test_k6_on_2x2_is_valid_and_small(self):
        g = build_chimera(2, 2)
        emb = embed_complete(6, g)
        validate_embedding(emb, g)
        assert emb.total_qubits() <= 16

    def test_full_capacity_on_16x16(self):
        g = build_chimera(16, 16)
        emb = embed_complete(65, g)
        validate_embedding(emb, g)
        with pytest.raises(TooManyLogicalQubits):
            embed_complete(66, g)

    @pytest.mark.parametrize("m", [1, 2, 3, 5])
    def test_validity_for_all_sizes(self, m):
        g = build_chimera(m, m)
        for n in range(1, 4 * m + 2):
            validate_embedding(embed_complete(n, g), g)

    def test_masked_graph_refused_when_chain_broken(self):
        emb = embed_complete(6, build_chimera(2, 2))
        used = sorted({q for ch in emb.chains for q in ch})
        g_broken = build_chimera(2, 2, inoperable_qubits=[used[0]])
        with pytest.raises(UnsupportedMask):
            embed_complete(6, g_broken)

    def test_mask_outside_construction_is_tolerated(self):
        g = build_chimera(3, 3)
        emb = embed_complete(4, g)  # uses only the top-left cell region
        unused = sorted(set(range(72)) - {q for ch in emb.chains for q in ch})
        g_masked = build_chimera(3, 3, inoperable_qubits=[unused[-1]])
        validate_embedding(embed_complete(4, g_masked), g_masked)


class TestValidateEmbedding:
    def test_detects_overlap(self):
        g = build_chimera(1, 1)
        with pytest.raises(EmbeddingMismatch):
            validate_embedding(Embedding(((0, 4), (4, 1))), g)

    def test_detects_disconnection(self):
        g = build_chimera(2, 1)
        # two vertical qubits in the same column but non-adjacent rows... use
        # same-side qubits of one cell, which never couple
        with pytest.raises(EmbeddingMismatch):
            validate_embedding(Embedding(((0, 1),)), g)

    def test_detects_missing_pair_coupler(self):
        g = build_chimera(1, 1)
        with pytest.raises(EmbeddingMismatch):
            validate_embedding(Embedding(((0,), (1,))), g)  # both vertical


class TestEmbedIsing:
    def test_bias_split_and_chain_coupling(self):
        g = build_chimera(1, 1)
        ising = IsingProblem([1.0], np.zeros((1, 1)))
        emb = Embedding(((0, 4),))  # one vertical, one horizontal qubit
        phys = embed_ising(ising, emb, 2.0, g)
        assert np.allclose(phys.problem.h, [0.5, 0.5])
        assert phys.problem.j[0, 1] == -2.0

    def test_singleton_embedding_reproduces_the_problem(self):
        rng = np.random.default_rng(0)
        g = build_chimera(1, 1)
        j = np.zeros((2, 2))
        j[0, 1] = rng.normal()
        ising = IsingProblem(rng.normal(size=2), j, 0.3)
        emb = Embedding(((0,), (4,)))  # coupled vertical/horizontal singletons
        phys = embed_ising(ising, emb, 1.0, g)
        assert phys.problem.offset == ising.offset
        assert np.array_equal(phys.problem.h, ising.h)
        assert np.array_equal(phys.problem.j, ising.j)

    def test_chain_aligned_energy_identity(self):
        rng = np.random.default_rng(1)
        g = build_chimera(2, 2)
        n = 6
        ising = IsingProblem(rng.normal(size=n), np.triu(rng.normal(size=(n, n)), 1), -0.4)
        emb = embed_complete(n, g)
        for xi in (0.5, 1.0, 3.0):
            phys = embed_ising(ising, emb, xi, g)
            n_intra = sum(
                1
                for ch in emb.chains
                for i, a in enumerate(ch)
                for b in ch[i + 1 :]
                if g.has_coupler(a, b)
            )
            for _ in range(10):
                logical_spins = rng.choice([-1, 1], size=n)
                phys_spins = np.empty(len(phys.qubits), dtype=int)
                for i, chain in enumerate(phys.chains):
                    for c in chain:
                        phys_spins[c] = logical_spins[i]
                lhs = ising_energy(phys.problem, phys_spins)
                rhs = ising_energy(ising, logical_spins) - xi * n_intra
                assert abs(lhs - rhs) < 1e-9

    def test_wrong_size_rejected(self):
        g = build_chimera(1, 1)
        ising = IsingProblem(np.zeros(3), np.zeros((3, 3)))
        with pytest.raises(EmbeddingMismatch):
            embed_ising(ising, Embedding(((0,), (4,))), 1.0, g)


class TestUnembed:
    def test_intact_majority_and_tie(self):
        emb = Embedding(((0, 4, 1), (2, 6)))
        spins = {0: 1, 4: 1, 1: 1, 2: 1, 6: -1}
        out = unembed(spins, emb)
        assert out[0] == 1
        assert out[1] == -1  # exact tie falls to -1
        spins = {0: 1, 4: -1, 1: 1, 2: -1, 6: -1}
        out = unembed(spins, emb)
        assert out[0] == 1  # majority wins over one broken qubit
        assert out[1] == -1

    def test_unembed_inverts_aligned_embedding(self):
        g = build_chimera(2, 2)
        emb = embed_complete(5, g)
        rng = np.random.default_rng(3)
        logical = rng.choice([-1, 1], size=5)
        spins = {q: int(logical[i]) for i, ch in enumerate(emb.chains) for q in ch}
        assert np.array_equal(unembed(spins, emb), logical)


class TestSolveEmbedded:
    def test_singleton_chains_reproduce_plain_sa(self):
        # a 2-variable problem fits on one cell with singleton chains, so the
        # embedded solve must replay plain SA read for read
        rng = np.random.default_rng(4)
        g = build_chimera(1, 1)
        qb2 = build_qubo(Dictionary.random(2, 2, rng), rng.normal(size=2), 0.05)
        ising2 = qubo_to_ising(qb2)
        emb = Embedding(((0,), (4,)))  # one vertical + one horizontal qubit, coupled
        schedule = AnnealSchedule(sweeps=300, reads=6, seed=11)
        res_emb = solve_embedded(ising2, emb, g, [1.0, 2.0], schedule)
        res_sa = solve_sa(qb2, AnnealSchedule(sweeps=300, reads=12, seed=11))
        assert abs(res_emb.best_energy - res_sa.best_energy) < 1e-9
        assert res_emb.reads_taken == 12
        assert np.allclose(np.sort(res_emb.all_energies), np.sort(res_sa.all_energies), atol=1e-9)

    def test_reaches_exhaustive_optimum_on_small_problems(self):
        g = build_chimera(2, 2)
        emb = embed_complete(8, g)
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(900 + seed)
            phi = Dictionary.random(5, 8, rng)
            qb = build_qubo(phi, rng.normal(size=5), 0.05)
            res = solve_embedded(
                qubo_to_ising(qb), emb, g, None, AnnealSchedule(sweeps=500, reads=10, seed=seed)
            )
            if abs(res.best_energy - solve_exhaustive(qb).best_energy) < 1e-9:
                hits += 1
        assert hits >= 18

    def test_huge_chain_strength_prevents_breaks(self):
        rng = np.random.default_rng(5)
        g = build_chimera(2, 2)
        emb = embed_complete(6, g)
        ising = IsingProblem(rng.normal(size=6), np.triu(rng.normal(size=(6, 6)), 1))
        phys = embed_ising(ising, emb, 1000.0, g)
        from annealreg.qubo import ising_to_qubo

        qb = ising_to_qubo(phys.problem)
        codes, _ = sa_reads(qb, AnnealSchedule(sweeps=400, reads=30, seed=2))
        breaks = sum(chain_break_count(c, phys.chains) for c in codes)
        assert breaks == 0

    def test_break_fraction_nonincreasing_in_chain_strength(self):
        rng = np.random.default_rng(6)
        g = build_chimera(2, 2)
        emb = embed_complete(8, g)
        ising = IsingProblem(rng.normal(size=8), np.triu(rng.normal(size=(8, 8)) * 2.0, 1))
        from annealreg.qubo import ising_to_qubo

        fractions = []
        for xi in (0.25, 1.0, 4.0, 16.0):
            phys = embed_ising(ising, emb, xi, g)
            qb = ising_to_qubo(phys.problem)
            codes, _ = sa_reads(qb, AnnealSchedule(sweeps=200, reads=120, seed=7))
            broken = np.mean([chain_break_count(c, phys.chains) / len(phys.chains) for c in codes])
            fractions.append(broken)
        assert all(a >= b - 1e-9 for a, b in zip(fractions, fractions[1:]))

    def test_default_chain_strengths(self):
        ising = IsingProblem([2.0, 0.0], np.zeros((2, 2)))
        ladder = default_chain_strengths(ising)
        assert len(ladder) == 10
        assert np.isclose(ladder[0], 1.0) and np.isclose(ladder[-1], 10.0)
        zero = IsingProblem([0.0], np.zeros((1, 1)))
        assert np.isclose(default_chain_strengths(zero)[0], 0.5)
