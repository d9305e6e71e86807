"""Regression by binary sparse coding on annealing backends."""

from .core import (
    Dictionary,
    Sample,
    SparseCode,
    StandardizationStats,
    project_columns,
    sc_energy,
    standardize_apply,
    standardize_fit,
    standardize_invert,
)
from .qubo import (
    AnnealSchedule,
    IsingProblem,
    QuboProblem,
    SolveResult,
    build_qubo,
    ising_energy,
    qubo_energy,
    qubo_to_ising,
    solve_exhaustive,
    solve_sa,
)
from .chimera import (
    Embedding,
    HardwareGraph,
    build_chimera,
    default_chain_strengths,
    embed_complete,
    embed_ising,
    solve_embedded,
    unembed,
)
from .learn import (
    EmbeddedSaSolver,
    ExhaustiveSolver,
    LearnConfig,
    SaSolver,
    TrainTrace,
    grad_dictionary,
    infer_codes,
    sgd_step,
    sparsity,
    train_dictionary,
    tune_lambda,
)
from .regress import (
    PredictionReport,
    RegressionModel,
    ScalingFit,
    evaluate,
    extend_dictionary,
    fit,
    fit_scaling,
    predict,
    predict_batch,
    pretrain,
    sweep_nq,
)
from .data import SyntheticConfig, gen_synthetic, load_csv, save_csv, split

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
