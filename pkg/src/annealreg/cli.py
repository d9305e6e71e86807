"""Command-line driver.

Every subcommand writes its artifacts into an output directory together
with ``manifest.json`` recording the command name, the fully resolved
arguments, and the package version.  ``annealreg replay manifest.json``
re-executes the recorded command; outputs are reproduced byte-for-byte
because every code path is seeded and files are written with canonical
formatting.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, data, learn, regress
from .chimera import build_chimera, load_mask
from .errors import (
    AnnealRegError,
    BracketInvalid,
    DimensionMismatch,
    Empty,
    EmbeddingMismatch,
    IndexOutOfRange,
    ParseError,
    TooFewPoints,
    TooFewSamples,
    TooLarge,
    TooManyLogicalQubits,
    UnsupportedMask,
    ZeroVariance,
)
from .qubo import AnnealSchedule

_DATA_ERRORS = (
    ParseError,
    DimensionMismatch,
    Empty,
    TooFewSamples,
    IndexOutOfRange,
    UnsupportedMask,
    EmbeddingMismatch,
    FileNotFoundError,
)
_NUMERICAL_ERRORS = (
    ZeroVariance,
    BracketInvalid,
    TooFewPoints,
    TooLarge,
    TooManyLogicalQubits,
    ValueError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's 2
        raise _UsageError(f"{self.prog}: {message}")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: str, command: str, args: dict, outputs: list[str], started: float) -> None:
    _write_json(
        os.path.join(out_dir, "manifest.json"),
        {
            "command": command,
            "arguments": args,
            "outputs": sorted(outputs),
            "duration_seconds": time.time() - started,
            "version": __version__,
        },
    )


def _build_solver(a: dict):
    schedule = AnnealSchedule(
        sweeps=a["sweeps"],
        beta_initial=a["beta_initial"],
        beta_final=a["beta_final"],
        reads=a["reads"],
        seed=a["solver_seed"],
    )
    if a["solver"] == "exhaustive":
        return learn.ExhaustiveSolver()
    if a["solver"] == "sa":
        return learn.SaSolver(schedule)
    bad_q, bad_c = (set(), set())
    if a.get("mask"):
        bad_q, bad_c = load_mask(a["mask"])
    graph = build_chimera(a["graph_rows"], a["graph_cols"], bad_q, bad_c)
    xi = [float(v) for v in a["xi"].split(",")] if a.get("xi") else None
    return learn.EmbeddedSaSolver(graph, schedule, xi)


def _build_config(a: dict) -> learn.LearnConfig:
    return learn.LearnConfig(
        lam=a["lam"],
        eta_initial=a["eta"],
        eta_decay_steps=a["eta_decay_steps"],
        batch_size=a["batch_size"],
        max_outer_iters=a["max_iters"],
        converge_tol=a["tol"],
        seed=a["seed"],
        solver=_build_solver(a),
    )


def _target(a: dict) -> float | None:
    return a["target_sparsity"] if a["target_sparsity"] > 0 else None


# --------------------------------------------------------------------------
# subcommands; each takes the resolved argument dict and returns outputs
# --------------------------------------------------------------------------


def _cmd_gen_data(a: dict) -> list[str]:
    cfg = data.SyntheticConfig(
        n_samples=a["n"],
        d=a["d"],
        latent_dim=a["latent"],
        noise_sigma=a["noise"],
        target_noise_sigma=a["target_noise"],
        seed=a["seed"],
    )
    samples = data.gen_synthetic(cfg)
    data.save_csv(os.path.join(a["out"], "data.csv"), samples)
    return ["data.csv"]


def _cmd_split(a: dict) -> list[str]:
    samples = data.load_csv(a["data"])
    train, test = data.split(samples, a["train_fraction"], a["seed"])
    data.save_csv(os.path.join(a["out"], "train.csv"), train)
    data.save_csv(os.path.join(a["out"], "test.csv"), test)
    return ["train.csv", "test.csv"]


def _cmd_fit(a: dict) -> list[str]:
    train = data.load_csv(a["train"])
    test = data.load_csv(a["test"])
    test_x = np.stack([s.x for s in test])
    model = regress.fit(
        train,
        test_x,
        a["nq"],
        _build_config(a),
        pretrain_source=a["pretrain"],
        target_sparsity=_target(a),
    )
    regress.save_model(model, a["out"])
    return ["stats.csv", "dictionary.csv", "config.json"]


def _cmd_predict(a: dict) -> list[str]:
    model = regress.load_model(a["model"])
    samples = data.load_csv(a["data"])
    xs = np.stack([s.x for s in samples])
    predictions = regress.predict_batch(model, xs)
    with open(os.path.join(a["out"], "predictions.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("yhat\n")
        for v in predictions:
            fh.write(f"{v:.17g}\n")
    return ["predictions.csv"]


def _load_predictions(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "yhat":
            raise ParseError(1, f"expected header 'yhat', got {header!r}")
        try:
            return np.array([float(line) for line in fh if line.strip()])
        except ValueError:
            raise ParseError(0, "bad number in predictions") from None


def _cmd_eval(a: dict) -> list[str]:
    predictions = _load_predictions(a["predictions"])
    truth_samples = data.load_csv(a["truth"])
    if any(s.y is None for s in truth_samples):
        raise Empty("truth file has no target column")
    truth = np.array([s.y for s in truth_samples])
    if truth.shape != predictions.shape:
        raise DimensionMismatch(
            f"{predictions.shape[0]} predictions vs {truth.shape[0]} truth rows"
        )
    errors = truth - predictions
    sigma_truth = float(np.std(truth, ddof=1))
    if sigma_truth == 0.0:
        raise ZeroVariance(0, "truth targets are constant")
    sigma_error = float(np.std(errors, ddof=1))
    _write_json(
        os.path.join(a["out"], "report.json"),
        {
            "n": int(truth.shape[0]),
            "q": sigma_error / sigma_truth,
            "error_stddev": sigma_error,
            "truth_stddev": sigma_truth,
            "error_mean": float(errors.mean()),
        },
    )
    centered = truth - truth.mean()
    span = max(float(np.abs(centered).max()), float(np.abs(errors).max()))
    edges = np.linspace(-span, span, a["bins"] + 1)
    truth_counts, _ = np.histogram(centered, bins=edges)
    error_counts, _ = np.histogram(errors, bins=edges)
    with open(os.path.join(a["out"], "histogram.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_left,bin_right,truth_count,error_count\n")
        for i in range(a["bins"]):
            fh.write(f"{edges[i]:.17g},{edges[i + 1]:.17g},{truth_counts[i]},{error_counts[i]}\n")
    return ["report.json", "histogram.csv"]


def _cmd_sweep(a: dict) -> list[str]:
    train = data.load_csv(a["train"])
    test = data.load_csv(a["test"])
    nq_list = [int(v) for v in a["nq"].split(",")]
    rows = regress.sweep_nq(
        train,
        test,
        nq_list,
        _build_config(a),
        pretrain_source=a["pretrain"],
        target_sparsity=_target(a),
    )
    with open(os.path.join(a["out"], "sweep.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("nq,q,sparsity,lambda\n")
        for row in rows:
            fh.write(f"{row.n_q},{row.q_value:.17g},{row.mean_sparsity:.17g},{row.lam:.17g}\n")
    return ["sweep.csv"]


def _load_points(path: str) -> list[tuple[float, float]]:
    """Read (nq, q) pairs; sweep tables with extra columns are accepted."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        columns = header.split(",")
        if columns[:2] != ["nq", "q"]:
            raise ParseError(1, f"expected a header starting 'nq,q', got {header!r}")
        points = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != len(columns):
                raise ParseError(lineno, f"expected {len(columns)} values, got {line.strip()!r}")
            try:
                points.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ParseError(lineno, f"bad number in {line.strip()!r}") from None
    return points


def _cmd_fit_scaling(a: dict) -> list[str]:
    points = _load_points(a["points"])
    result = regress.fit_scaling(points)
    _write_json(
        os.path.join(a["out"], "scaling.json"),
        {
            "q_infinity": result.q_infinity,
            "b": result.b,
            "c": result.c,
            "residual_sum": result.residual_sum,
        },
    )
    ns = np.arange(int(min(p[0] for p in points)), int(max(p[0] for p in points)) + 1)
    curve = regress.scaling_curve(result, ns)
    with open(os.path.join(a["out"], "curve.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("nq,q_fit\n")
        for n, q in zip(ns, curve):
            fh.write(f"{n},{q:.17g}\n")
    return ["scaling.json", "curve.csv"]


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "split": _cmd_split,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "fit-scaling": _cmd_fit_scaling,
}


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=["exhaustive", "sa", "embedded-sa"], default="exhaustive")
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--beta-initial", type=float, default=0.1)
    p.add_argument("--beta-final", type=float, default=50.0)
    p.add_argument("--reads", type=int, default=20)
    p.add_argument("--solver-seed", type=int, default=0)
    p.add_argument("--graph-rows", type=int, default=16)
    p.add_argument("--graph-cols", type=int, default=16)
    p.add_argument("--mask", default=None, help="hardware mask file (q/c lines)")
    p.add_argument("--xi", default=None, help="comma-separated chain strengths")


def _add_learn_flags(p: argparse.ArgumentParser, nq_list: bool = False) -> None:
    if nq_list:
        p.add_argument("--nq", required=True, help="comma-separated list of dictionary sizes")
    else:
        p.add_argument("--nq", type=int, required=True)
    p.add_argument("--pretrain", choices=["combined", "test", "off"], default="combined")
    p.add_argument("--target-sparsity", type=float, default=0.2, help="<= 0 disables tuning")
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--eta-decay-steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p)


def _make_parser() -> _Parser:
    parser = _Parser(prog="annealreg", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--latent", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--target-noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("split", help="shuffle and split a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--train-fraction", type=float, default=data.DEFAULT_TRAIN_FRACTION)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", help="train a regression model")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    _add_learn_flags(p)

    p = sub.add_parser("predict", help="predict targets for a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("eval", help="score predictions against truth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--bins", type=int, default=41)

    p = sub.add_parser("sweep", help="run the pipeline over several dictionary sizes")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    _add_learn_flags(p, nq_list=True)

    p = sub.add_parser("fit-scaling", help="fit the exponential decay of Q versus size")
    p.add_argument("--points", required=True, help="CSV with header nq,q")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("--manifest", required=True)

    for name, cmd in sub.choices.items():
        cmd.add_argument("--out", required=(name != "replay"), help="output directory")
        cmd.add_argument("--config", default=None, help="JSON file of flag defaults")
        cmd.add_argument("--threads", type=int, default=int(os.environ.get("ANNEALREG_THREADS", "0")))
    return parser


def _execute(command: str, args: dict) -> None:
    if args.get("threads"):
        learn.set_worker_threads(args["threads"])
    os.makedirs(args["out"], exist_ok=True)
    started = time.time()
    outputs = _COMMANDS[command](args)
    _write_manifest(args["out"], command, args, outputs, started)


def _apply_config_file(parser: _Parser, argv: list[str]) -> None:
    """Config-file values become subcommand defaults; explicit flags win."""
    try:
        path = argv[argv.index("--config") + 1]
    except IndexError:
        raise _UsageError("--config needs a path") from None
    with open(path, "r", encoding="utf-8") as fh:
        overrides = json.load(fh)
    subparsers = parser._subparsers._group_actions[0].choices
    known = {action.dest for sp in subparsers.values() for action in sp._actions}
    unknown = set(overrides) - known
    if unknown:
        raise _UsageError(f"unknown config keys: {sorted(unknown)}")
    for sp in subparsers.values():
        dests = {action.dest for action in sp._actions}
        sp.set_defaults(**{k: v for k, v in overrides.items() if k in dests})
        for action in sp._actions:  # a config value satisfies a required flag
            if action.dest in overrides:
                action.required = False


def run(argv: list[str]) -> int:
    parser = _make_parser()
    try:
        if "--config" in argv:
            _apply_config_file(parser, argv)
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_usage(sys.stderr)
            return 1
        args = vars(ns)
        command = args.pop("command")
        if command == "replay":
            with open(args["manifest"], "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
            recorded = dict(manifest["arguments"])
            if args.get("out"):
                recorded["out"] = args["out"]
            _execute(manifest["command"], recorded)
            return 0
        _execute(command, args)
        return 0
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except AnnealRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
