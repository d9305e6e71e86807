"""Regression by reconstruction: the seven-step inpainting pipeline.

A predictor is built in four moves: standardize all coordinates with
training-set statistics; learn a dictionary for the inputs alone
(pre-training); append a zero row for the target and continue training on
concatenated (x, y) vectors so the new row absorbs the input-target
correlation; keep the standardization and the extended dictionary as the
model.  To predict, a test input is standardized, padded with the
standardized target mean (zero), sparsely reconstructed, and the final
component of the reconstruction is read back through the inverse
standardization.

Prediction quality is summarized by Q = sigma(error) / sigma(truth):
0 is perfect, 1 is what the constant mean predictor scores.  The quality
as a function of the number of basis vectors is summarized by fitting
q_inf + b*exp(-c*n_q).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Dictionary,
    Sample,
    StandardizationStats,
    standardize_fit,
)
from .errors import DimensionMismatch, Empty, TooFewPoints, ZeroVariance
from .learn import (
    LearnConfig,
    TrainTrace,
    solver_from_dict,
    solver_to_dict,
    train_dictionary,
    tune_lambda,
)


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """Everything needed to predict: statistics, extended dictionary, config."""

    stats: StandardizationStats
    dictionary: Dictionary  # (D+1) x N_q
    config: LearnConfig
    pretrain_source: str = "combined"

    def __post_init__(self):
        if self.dictionary.d != self.stats.d + 1:
            raise DimensionMismatch(
                f"dictionary has {self.dictionary.d} rows, stats expect {self.stats.d + 1}"
            )

    @property
    def n_q(self) -> int:
        return self.dictionary.n_q


@dataclass(frozen=True, eq=False)
class PredictionReport:
    predictions: np.ndarray
    errors: np.ndarray
    q_value: float
    error_stddev: float
    truth_stddev: float
    mean_sparsity: float


@dataclass(frozen=True)
class ScalingFit:
    q_infinity: float
    b: float
    c: float
    residual_sum: float


@dataclass(frozen=True)
class SweepRow:
    n_q: int
    q_value: float
    mean_sparsity: float
    lam: float


def _sample_matrix(samples: Sequence[Sample], need_y: bool) -> tuple[np.ndarray, np.ndarray | None]:
    if len(samples) == 0:
        raise Empty("no samples")
    d = samples[0].d
    xs = np.empty((len(samples), d))
    ys = np.empty(len(samples)) if need_y else None
    for i, s in enumerate(samples):
        if s.d != d:
            raise DimensionMismatch("samples have inconsistent input dimension")
        xs[i] = s.x
        if need_y:
            if s.y is None:
                raise ValueError("sample is missing its target")
            ys[i] = s.y
    return xs, ys


def _standardize_x(stats: StandardizationStats, xs: np.ndarray) -> np.ndarray:
    if xs.shape[1] != stats.d:
        raise DimensionMismatch(f"inputs have dimension {xs.shape[1]}, stats expect {stats.d}")
    return (xs - stats.means[:-1]) / stats.stddevs[:-1]


def pretrain(x_vectors, n_q: int, config: LearnConfig, source_label: str = "combined") -> tuple[Dictionary, TrainTrace]:
    """Dictionary for the inputs alone, from a seeded random start."""
    xs = np.atleast_2d(np.asarray(x_vectors, dtype=np.float64))
    if xs.size == 0:
        raise Empty(f"no vectors to pre-train on (source {source_label!r})")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(101,)))
    initial = Dictionary.random(xs.shape[1], n_q, rng)
    return train_dictionary(xs, initial, config)


def extend_dictionary(dictionary: Dictionary) -> Dictionary:
    """Append a zero row for the target coordinate; column norms unchanged."""
    return Dictionary(np.vstack([dictionary.matrix, np.zeros(dictionary.n_q)]))


def fit(
    train_samples: Sequence[Sample],
    test_x,
    n_q: int,
    config: LearnConfig,
    pretrain_source: str = "combined",
    target_sparsity: float | None = None,
) -> RegressionModel:
    """Run the full training pipeline and return the deployable model.

    ``pretrain_source`` selects the vectors used for input-only
    pre-training: the test inputs, the combined train and test inputs, or
    "off" to start the extended dictionary from random entries.  When
    ``target_sparsity`` is given, the penalty is re-tuned by bisection
    before each training phase (on the phase's starting dictionary) and
    the tuned value is stored in the returned model's config.
    """
    if pretrain_source not in ("combined", "test", "off"):
        raise ValueError(f"unknown pretrain source {pretrain_source!r}")
    stats = standardize_fit(train_samples)
    xs_raw, ys_raw = _sample_matrix(train_samples, need_y=True)
    xs = _standardize_x(stats, xs_raw)
    ys = (ys_raw - stats.means[-1]) / stats.stddevs[-1]
    extended_inputs = np.column_stack([xs, ys])
    root = np.random.SeedSequence(config.seed)
    pre_seed, main_seed = (int(s.generate_state(1)[0]) for s in root.spawn(2))

    if pretrain_source == "off":
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(103,)))
        start = Dictionary.random(stats.d + 1, n_q, rng)
    else:
        test_std = _standardize_x(stats, np.atleast_2d(np.asarray(test_x, dtype=np.float64)))
        pre_inputs = test_std if pretrain_source == "test" else np.vstack([xs, test_std])
        rng = np.random.default_rng(np.random.SeedSequence(pre_seed, spawn_key=(101,)))
        pre_start = Dictionary.random(stats.d, n_q, rng)
        pre_config = dataclasses.replace(config, seed=pre_seed)
        if target_sparsity is not None:
            lam_pre = tune_lambda(pre_start, pre_inputs, target_sparsity, config.solver)
            pre_config = dataclasses.replace(pre_config, lam=lam_pre)
        pre_dict, _ = train_dictionary(pre_inputs, pre_start, pre_config)
        start = extend_dictionary(pre_dict)

    main_config = dataclasses.replace(config, seed=main_seed)
    if target_sparsity is not None:
        lam_main = tune_lambda(start, extended_inputs, target_sparsity, config.solver)
        main_config = dataclasses.replace(main_config, lam=lam_main)
    trained, _ = train_dictionary(extended_inputs, start, main_config)
    stored = dataclasses.replace(config, lam=main_config.lam)
    return RegressionModel(stats, trained, stored, pretrain_source)


def _predict_standardized(model: RegressionModel, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Standardized-scale predictions and the codes that produced them."""
    padded = np.column_stack([xs, np.zeros(xs.shape[0])])
    codes = model.config.solver.infer(model.dictionary, padded, model.config.lam)
    y_recon = codes.astype(np.float64) @ model.dictionary.matrix[-1]
    return y_recon, codes


def predict(model: RegressionModel, x) -> float:
    """Reconstructed target for one input, on the raw scale."""
    return float(predict_batch(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


def predict_batch(model: RegressionModel, xs) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    if not np.all(np.isfinite(xs)):
        raise ValueError("inputs must be finite")
    std = _standardize_x(model.stats, xs)
    y_std, _ = _predict_standardized(model, std)
    return y_std * model.stats.stddevs[-1] + model.stats.means[-1]


def evaluate(model: RegressionModel, test_samples: Sequence[Sample]) -> PredictionReport:
    """Prediction report over samples with known truth.

    Both standard deviations (error and truth) use the n-1 denominator and
    are taken over the same test samples.
    """
    xs, ys = _sample_matrix(test_samples, need_y=True)
    std = _standardize_x(model.stats, xs)
    y_std, codes = _predict_standardized(model, std)
    predictions = y_std * model.stats.stddevs[-1] + model.stats.means[-1]
    errors = ys - predictions
    truth_std = float(np.std(ys, ddof=1))
    if truth_std == 0.0:
        raise ZeroVariance(xs.shape[1], "test targets are constant")
    error_std = float(np.std(errors, ddof=1))
    return PredictionReport(
        predictions=predictions,
        errors=errors,
        q_value=error_std / truth_std,
        error_stddev=error_std,
        truth_stddev=truth_std,
        mean_sparsity=float(codes.mean()),
    )


def sweep_nq(
    train_samples: Sequence[Sample],
    test_samples: Sequence[Sample],
    nq_list: Sequence[int],
    config: LearnConfig,
    pretrain_source: str = "combined",
    target_sparsity: float | None = 0.2,
) -> list[SweepRow]:
    """Full pipeline per dictionary size, re-tuning the penalty each time."""
    if len(nq_list) == 0:
        raise Empty("no dictionary sizes requested")
    test_xs, _ = _sample_matrix(test_samples, need_y=True)
    rows = []
    for n_q in nq_list:
        model = fit(
            train_samples,
            test_xs,
            int(n_q),
            config,
            pretrain_source=pretrain_source,
            target_sparsity=target_sparsity,
        )
        report = evaluate(model, test_samples)
        rows.append(SweepRow(int(n_q), report.q_value, report.mean_sparsity, model.config.lam))
    return rows


def fit_scaling(points: Sequence[tuple[float, float]]) -> ScalingFit:
    """Least-squares fit of q_inf + b*exp(-c*n) to (n, q) points.

    The decay constant is located by a 512-point log grid search on
    [1e-4, 0.5] with the affine pair solved linearly at each candidate,
    then refined by golden-section around the best grid cell.
    """
    if len(points) < 3:
        raise TooFewPoints(f"need at least 3 points, got {len(points)}")
    ns = np.array([p[0] for p in points], dtype=np.float64)
    qs = np.array([p[1] for p in points], dtype=np.float64)
    if np.unique(ns).size != ns.size:
        raise TooFewPoints("points must have distinct n_q")

    def residual(c: float) -> tuple[np.ndarray, float]:
        design = np.column_stack([np.ones_like(ns), np.exp(-c * ns)])
        coef, *_ = np.linalg.lstsq(design, qs, rcond=None)
        r = qs - design @ coef
        return coef, float(r @ r)

    grid = np.geomspace(1e-4, 0.5, 512)
    losses = np.array([residual(c)[1] for c in grid])
    i = int(losses.argmin())
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c1 = hi - invphi * (hi - lo)
    c2 = lo + invphi * (hi - lo)
    f1 = residual(c1)[1]
    f2 = residual(c2)[1]
    while hi - lo > 1e-12 * max(1.0, lo):
        if f1 < f2:
            hi, c2, f2 = c2, c1, f1
            c1 = hi - invphi * (hi - lo)
            f1 = residual(c1)[1]
        else:
            lo, c1, f1 = c1, c2, f2
            c2 = lo + invphi * (hi - lo)
            f2 = residual(c2)[1]
    c = 0.5 * (lo + hi)
    coef, loss = residual(c)
    return ScalingFit(float(coef[0]), float(coef[1]), float(c), loss)


def scaling_curve(fitres: ScalingFit, ns: np.ndarray) -> np.ndarray:
    return fitres.q_infinity + fitres.b * np.exp(-fitres.c * np.asarray(ns, dtype=np.float64))


# --------------------------------------------------------------------------
# model persistence: a directory of stats.csv, dictionary.csv, config.json
# --------------------------------------------------------------------------


def _format_row(values) -> str:
    return ",".join(f"{float(v):.17g}" for v in values)


def save_model(model: RegressionModel, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "stats.csv"), "w", encoding="utf-8") as fh:
        fh.write(_format_row(model.stats.means) + "\n")
        fh.write(_format_row(model.stats.stddevs) + "\n")
    with open(os.path.join(directory, "dictionary.csv"), "w", encoding="utf-8") as fh:
        for row in model.dictionary.matrix:
            fh.write(_format_row(row) + "\n")
    cfg = model.config
    payload = {
        "lam": cfg.lam,
        "eta_initial": cfg.eta_initial,
        "eta_decay_steps": cfg.eta_decay_steps,
        "batch_size": cfg.batch_size,
        "max_outer_iters": cfg.max_outer_iters,
        "converge_tol": cfg.converge_tol,
        "seed": cfg.seed,
        "solver": solver_to_dict(cfg.solver),
        "pretrain_source": model.pretrain_source,
        "n_q": model.n_q,
        "d": model.stats.d,
    }
    with open(os.path.join(directory, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(directory: str) -> RegressionModel:
    with open(os.path.join(directory, "stats.csv"), "r", encoding="utf-8") as fh:
        means = np.array([float(v) for v in fh.readline().split(",")])
        stds = np.array([float(v) for v in fh.readline().split(",")])
    matrix = np.loadtxt(os.path.join(directory, "dictionary.csv"), delimiter=",", ndmin=2)
    with open(os.path.join(directory, "config.json"), "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    config = LearnConfig(
        lam=payload["lam"],
        eta_initial=payload["eta_initial"],
        eta_decay_steps=payload["eta_decay_steps"],
        batch_size=payload["batch_size"],
        max_outer_iters=payload["max_outer_iters"],
        converge_tol=payload["converge_tol"],
        seed=payload["seed"],
        solver=solver_from_dict(payload["solver"]),
    )
    return RegressionModel(
        StandardizationStats(means, stds), Dictionary(matrix), config, payload["pretrain_source"]
    )
