import numpy as np
import pytest

from annealreg.core import Dictionary, Sample, StandardizationStats
from annealreg.data import SyntheticConfig, gen_synthetic, split
from annealreg.errors import Empty, TooFewPoints, ZeroVariance
from annealreg.learn import ExhaustiveSolver, LearnConfig
from annealreg.regress import (
    RegressionModel,
    evaluate,
    extend_dictionary,
    fit,
    fit_scaling,
    load_model,
    predict,
    predict_batch,
    pretrain,
    save_model,
    scaling_curve,
    sweep_nq,
)

REFERENCE_SCALING_POINTS = [
    (20, 0.41),
    (29, 0.375),
    (38, 0.319),
    (47, 0.29),
    (55, 0.273),
    (64, 0.254),
]


def identity_stats(d):
    return StandardizationStats(np.zeros(d + 1), np.ones(d + 1))


def two_atom_model(lam=0.01):
    """Columns are exactly the standardized (x, y) pairs of two samples."""
    cols = np.array(
        [
            [0.5, 0.5],
            [0.5, -0.5],
            [0.5, -0.5],
            [0.3, -0.3],
        ]
    )
    model = RegressionModel(
        identity_stats(3),
        Dictionary(cols),
        LearnConfig(lam=lam, solver=ExhaustiveSolver()),
        "off",
    )
    samples = [Sample([0.5, 0.5, 0.5], 0.3), Sample([0.5, -0.5, -0.5], -0.3)]
    return model, samples


class TestPretrain:
    def test_improves_reconstruction_over_random_start(self):
        rng = np.random.default_rng(0)
        samples = gen_synthetic(SyntheticConfig(n_samples=300, d=6, latent_dim=2, seed=3))
        xs = np.stack([s.x for s in samples])
        xs = (xs - xs.mean(0)) / xs.std(0, ddof=1)
        config = LearnConfig(lam=0.05, max_outer_iters=4, seed=1)
        trained, trace = pretrain(xs, 8, config)
        assert np.all(trained.column_norms() <= 1.0 + 1e-12)
        assert trace.energies[-1] < trace.energies[0]

    def test_overcompleteness_bookkeeping(self):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=(80, 20))
        config = LearnConfig(lam=0.1, max_outer_iters=1, seed=0)
        trained, _ = pretrain(xs, 20, config)
        assert trained.overcompleteness == 1.0

    def test_empty_inputs_rejected(self):
        with pytest.raises(Empty):
            pretrain(np.zeros((0, 4)), 5, LearnConfig())


class TestExtendDictionary:
    def test_appends_exact_zero_row(self):
        rng = np.random.default_rng(2)
        d = Dictionary.random(5, 7, rng)
        ext = extend_dictionary(d)
        assert ext.d == 6
        assert np.array_equal(ext.matrix[-1], np.zeros(7))
        assert np.array_equal(ext.matrix[:-1], d.matrix)

    def test_column_norms_unchanged(self):
        rng = np.random.default_rng(3)
        d = Dictionary.random(4, 9, rng)
        ext = extend_dictionary(d)
        assert np.max(np.abs(ext.column_norms() - d.column_norms())) < 1e-15


class TestPredict:
    def test_huge_penalty_returns_training_mean(self):
        rng = np.random.default_rng(4)
        train = [Sample(rng.normal(size=3), float(rng.normal() * 2 + 1)) for _ in range(40)]
        test_x = rng.normal(size=(10, 3))
        config = LearnConfig(lam=100.0, max_outer_iters=1, seed=0)
        model = fit(train, test_x, 4, config, pretrain_source="off")
        mean_y = np.mean([s.y for s in train])
        for x in test_x:
            assert predict(model, x) == pytest.approx(mean_y, abs=1e-12)

    def test_single_atom_recovers_target(self):
        model, samples = two_atom_model()
        for s in samples:
            assert abs(predict(model, s.x) - s.y) < 1e-8

    def test_affine_rescaling_of_targets_is_absorbed(self):
        rng = np.random.default_rng(5)
        samples = gen_synthetic(SyntheticConfig(n_samples=240, d=5, latent_dim=2, seed=9))
        train, test = split(samples, 0.5, seed=1)
        test_x = np.stack([s.x for s in test])
        config = LearnConfig(lam=0.08, max_outer_iters=3, seed=7)
        base = predict_batch(fit(train, test_x, 6, config), test_x)
        scaled_train = [Sample(s.x, 2.5 * s.y - 4.0) for s in train]
        scaled = predict_batch(fit(scaled_train, test_x, 6, config), test_x)
        assert np.max(np.abs(scaled - (2.5 * base - 4.0))) < 1e-8


class TestEvaluate:
    def test_perfect_predictions_give_zero(self):
        model, samples = two_atom_model()
        report = evaluate(model, samples)
        assert report.q_value == 0.0
        assert np.allclose(report.errors, 0.0, atol=1e-12)

    def test_constant_predictor_gives_one(self):
        rng = np.random.default_rng(6)
        train = [Sample(rng.normal(size=3), float(rng.normal())) for _ in range(30)]
        test = [Sample(rng.normal(size=3), float(rng.normal())) for _ in range(50)]
        config = LearnConfig(lam=1000.0, max_outer_iters=1, seed=0)
        model = fit(train, np.stack([s.x for s in test]), 4, config, pretrain_source="off")
        report = evaluate(model, test)
        assert abs(report.q_value - 1.0) < 1e-12

    def test_constant_truth_rejected(self):
        model, _ = two_atom_model()
        flat = [Sample([0.1, 0.2, 0.3], 1.0), Sample([0.3, 0.1, 0.0], 1.0)]
        with pytest.raises(ZeroVariance):
            evaluate(model, flat)


class TestFit:
    def test_learns_target_correlation_into_last_row(self):
        samples = gen_synthetic(SyntheticConfig(n_samples=400, d=6, latent_dim=2, seed=11))
        train, test = split(samples, 0.5, seed=2)
        test_x = np.stack([s.x for s in test])
        config = LearnConfig(max_outer_iters=4, seed=3)
        model = fit(train, test_x, 8, config, target_sparsity=0.2)
        assert np.abs(model.dictionary.matrix[-1]).max() > 1e-3
        assert evaluate(model, test).q_value < 1.0

    def test_constant_target_rejected_at_standardization(self):
        rng = np.random.default_rng(7)
        train = [Sample(rng.normal(size=3), 2.0) for _ in range(20)]
        with pytest.raises(ZeroVariance):
            fit(train, rng.normal(size=(5, 3)), 4, LearnConfig(), pretrain_source="off")

    def test_pretrain_sources_both_produce_models(self):
        samples = gen_synthetic(SyntheticConfig(n_samples=200, d=5, latent_dim=2, seed=13))
        train, test = split(samples, 0.5, seed=3)
        test_x = np.stack([s.x for s in test])
        config = LearnConfig(lam=0.08, max_outer_iters=2, seed=5)
        for source in ("combined", "test", "off"):
            model = fit(train, test_x, 6, config, pretrain_source=source)
            assert model.pretrain_source == source
            assert model.dictionary.d == 6

    def test_deterministic(self):
        samples = gen_synthetic(SyntheticConfig(n_samples=150, d=4, latent_dim=2, seed=17))
        train, test = split(samples, 0.5, seed=4)
        test_x = np.stack([s.x for s in test])
        config = LearnConfig(lam=0.1, max_outer_iters=2, seed=9)
        a = fit(train, test_x, 5, config)
        b = fit(train, test_x, 5, config)
        assert np.array_equal(a.dictionary.matrix, b.dictionary.matrix)
        ra, rb = evaluate(a, test), evaluate(b, test)
        assert np.array_equal(ra.predictions, rb.predictions)
        assert ra.q_value == rb.q_value


class TestSweep:
    def test_duplicate_sizes_give_identical_rows(self):
        samples = gen_synthetic(SyntheticConfig(n_samples=160, d=4, latent_dim=2, seed=19))
        train, test = split(samples, 0.5, seed=5)
        config = LearnConfig(lam=0.1, max_outer_iters=2, seed=11)
        rows = sweep_nq(train, test, [5, 5], config, target_sparsity=None)
        assert rows[0] == rows[1]

    def test_empty_size_list_rejected(self):
        with pytest.raises(Empty):
            sweep_nq([Sample([0.0], 1.0)], [Sample([0.0], 1.0)], [], LearnConfig())


class TestFitScaling:
    def test_exact_model_recovery(self):
        ns = np.array([8, 12, 16, 20, 30, 40, 64], dtype=float)
        qs = 0.2 + 0.5 * np.exp(-0.05 * ns)
        res = fit_scaling(list(zip(ns, qs)))
        assert abs(res.q_infinity - 0.2) < 1e-6
        assert abs(res.b - 0.5) < 1e-6
        assert abs(res.c - 0.05) < 1e-6

    def test_reference_point_windows(self):
        res = fit_scaling(REFERENCE_SCALING_POINTS)
        assert 0.15 <= res.q_infinity <= 0.21
        res_tail = fit_scaling(REFERENCE_SCALING_POINTS[1:])
        assert 0.20 <= res_tail.q_infinity <= 0.26

    def test_beats_constant_fit(self):
        qs = np.array([p[1] for p in REFERENCE_SCALING_POINTS])
        const_resid = float(((qs - qs.mean()) ** 2).sum())
        assert fit_scaling(REFERENCE_SCALING_POINTS).residual_sum <= const_resid

    def test_too_few_or_duplicate_points(self):
        with pytest.raises(TooFewPoints):
            fit_scaling([(10, 0.5), (20, 0.4)])
        with pytest.raises(TooFewPoints):
            fit_scaling([(10, 0.5), (10, 0.4), (20, 0.3)])

    def test_curve_evaluation(self):
        res = fit_scaling(REFERENCE_SCALING_POINTS)
        curve = scaling_curve(res, np.array([20, 64]))
        assert curve[0] > curve[1]


class TestPersistence:
    def test_round_trip_preserves_predictions(self, tmp_path):
        samples = gen_synthetic(SyntheticConfig(n_samples=120, d=4, latent_dim=2, seed=23))
        train, test = split(samples, 0.5, seed=6)
        test_x = np.stack([s.x for s in test])
        config = LearnConfig(lam=0.1, max_outer_iters=2, seed=13)
        model = fit(train, test_x, 5, config)
        save_model(model, tmp_path / "model")
        loaded = load_model(tmp_path / "model")
        assert np.array_equal(loaded.dictionary.matrix, model.dictionary.matrix)
        assert np.array_equal(loaded.stats.means, model.stats.means)
        assert np.array_equal(
            predict_batch(loaded, test_x), predict_batch(model, test_x)
        )
