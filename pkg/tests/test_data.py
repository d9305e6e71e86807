import numpy as np
import pytest

from annealreg.core import Sample
from annealreg.data import (
    DEFAULT_TRAIN_FRACTION,
    SyntheticConfig,
    gen_synthetic,
    load_csv,
    save_csv,
    split,
)
from annealreg.errors import DimensionMismatch, Empty, ParseError


class TestGenSynthetic:
    def test_same_seed_same_dataset(self):
        cfg = SyntheticConfig(n_samples=50, seed=99)
        a = gen_synthetic(cfg)
        b = gen_synthetic(cfg)
        assert all(np.array_equal(s.x, t.x) and s.y == t.y for s, t in zip(a, b))

    def test_different_seed_differs(self):
        a = gen_synthetic(SyntheticConfig(n_samples=10, seed=1))
        b = gen_synthetic(SyntheticConfig(n_samples=10, seed=2))
        assert not np.array_equal(a[0].x, b[0].x)

    def test_zero_samples(self):
        assert gen_synthetic(SyntheticConfig(n_samples=0)) == []

    def test_shapes_and_finiteness(self):
        samples = gen_synthetic(SyntheticConfig(n_samples=25, d=7, latent_dim=3, seed=5))
        assert len(samples) == 25
        assert all(s.d == 7 and s.y is not None for s in samples)

    def test_target_tracks_inputs(self):
        # the target is a readout of the same latent factors, so a linear
        # regression on x must explain most of its variance
        samples = gen_synthetic(SyntheticConfig(n_samples=2000, seed=8))
        xs = np.stack([s.x for s in samples])
        ys = np.array([s.y for s in samples])
        coef, *_ = np.linalg.lstsq(np.column_stack([xs, np.ones(len(xs))]), ys, rcond=None)
        resid = ys - np.column_stack([xs, np.ones(len(xs))]) @ coef
        assert resid.std() / ys.std() < 0.5

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SyntheticConfig(n_samples=10, latent_dim=30, d=20)
        with pytest.raises(ValueError):
            SyntheticConfig(n_samples=10, noise_sigma=0.0)


class TestCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        samples = [
            Sample(rng.normal(size=4) * 10.0 ** float(rng.integers(-8, 8)), float(rng.normal()))
            for _ in range(1000)
        ]
        path = tmp_path / "data.csv"
        save_csv(path, samples)
        back = load_csv(path)
        assert len(back) == 1000
        for s, t in zip(samples, back):
            assert np.array_equal(s.x, t.x)
            assert s.y == t.y

    def test_header_only_is_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("x1,x2,y\n")
        assert load_csv(path) == []

    def test_rows_without_target(self, tmp_path):
        path = tmp_path / "xonly.csv"
        path.write_text("x1,x2\n1.5,2.5\n")
        samples = load_csv(path)
        assert samples[0].y is None
        assert np.array_equal(samples[0].x, [1.5, 2.5])

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("x1,x2,y\n1,2,3\n1,2\n")
        with pytest.raises(DimensionMismatch):
            load_csv(path)

    def test_bad_number_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,y\n1,2\nx,3\n")
        with pytest.raises(ParseError) as err:
            load_csv(path)
        assert err.value.line == 3

    def test_unexpected_header_rejected(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ParseError):
            load_csv(path)

    def test_save_empty_rejected(self, tmp_path):
        with pytest.raises(Empty):
            save_csv(tmp_path / "x.csv", [])


class TestSplit:
    def test_reference_counts_at_default_fraction(self):
        samples = [Sample([float(i)], float(i)) for i in range(15616)]
        train, test = split(samples)
        assert len(train) == 6976
        assert len(test) == 8640

    def test_even_split(self):
        samples = [Sample([float(i)], float(i)) for i in range(10)]
        train, test = split(samples, 0.5, seed=3)
        assert len(train) == 5 and len(test) == 5

    def test_union_is_input_multiset(self):
        samples = [Sample([float(i)], float(i % 3)) for i in range(57)]
        train, test = split(samples, 0.3, seed=9)
        got = sorted(s.x[0] for s in train + test)
        assert got == [float(i) for i in range(57)]

    def test_deterministic(self):
        samples = [Sample([float(i)], 0.5 * i) for i in range(40)]
        a_train, _ = split(samples, 0.4, seed=11)
        b_train, _ = split(samples, 0.4, seed=11)
        assert [s.x[0] for s in a_train] == [s.x[0] for s in b_train]

    def test_bad_fraction_and_empty(self):
        with pytest.raises(ValueError):
            split([Sample([0.0], 0.0)], 1.0)
        with pytest.raises(Empty):
            split([], 0.5)

    def test_default_fraction_value(self):
        assert DEFAULT_TRAIN_FRACTION == pytest.approx(6976 / 15616)
