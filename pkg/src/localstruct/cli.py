"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
Log verbosity comes from the ``LOCALSTRUCT_LOG`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``...; default ``WARNING``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .core import Hyperparameters, validate_dataset
from .errors import (
    BackendError,
    CapacityError,
    DataError,
    DimensionError,
    InvalidOutputError,
    LocalStructError,
    NumericError,
)
from .experiment import ExperimentConfig, emit_results, run_experiment
from .files import load_dataset, load_model, output_to_json, read_json, save_dataset, save_model
from .inference import BACKENDS
from .losses import make_loss
from .synthetic import generate_synthetic
from .trainer import fit

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("localstruct")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cmd_validate(args) -> int:
    ds = load_dataset(args.data, validate=False)
    problems = validate_dataset(ds)
    if problems:
        for p in problems:
            print(p)
        return EXIT_DATA
    print(f"ok: n={ds.n} labeled={ds.labeled_count} d_x={ds.input_dim} outputs={ds.output_space.size}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = read_json(args.spec)
    if args.seed is not None:
        spec["seed"] = args.seed
    ds, _ = generate_synthetic(spec)
    save_dataset(ds, args.output)
    print(f"wrote {ds.n} points to {args.output}")
    return EXIT_OK


def _cmd_train(args) -> int:
    ds = load_dataset(args.data)
    k = args.k if args.k is not None else max(2, ds.n // 10)
    hp = Hyperparameters(k=min(k, ds.n), C=args.C, eta=args.eta, T=args.iters, eta_decay=args.eta_decay)
    report = fit(ds, hp, make_loss(args.loss, ds.output_space), args.backend, tol=args.tol)
    trace = report.objective_trace
    print(f"iterations={report.iterations_run} objective {trace[0]:.6g} -> {trace[-1]:.6g}")
    if args.output:
        model = report.model()
        model.hyperparameters = {
            "k": hp.k, "C": hp.C, "eta": hp.eta, "T": hp.T, "eta_decay": hp.eta_decay, "seed": args.seed,
        }
        save_model(model, args.output)
        print(f"model written to {args.output}")
    if args.imputed:
        rows = [
            {"index": i, "output": output_to_json(y), "labeled": i < ds.labeled_count}
            for i, y in enumerate(report.state.outputs)
        ]
        Path(args.imputed).write_text("".join(json.dumps(r) + "\n" for r in rows))
    return EXIT_OK


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.baseline:
        cfg.baseline = True
    if args.seed is not None:
        cfg.seed = args.seed
    rec = run_experiment(cfg)
    emit_results(rec, args.output, args.format)
    print(f"{rec.method}: mean loss {rec.mean:.6g} (std {rec.std:.6g}) over {len(rec.fold_losses)} folds")
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data, validate=False)
    if ds.output_space != model.space:
        raise DataError("dataset output space differs from the model's")
    loss = make_loss(model.loss_name, model.space)  # type: ignore[arg-type]
    out = open(args.output, "w") if args.output else sys.stdout
    total, scored = 0.0, 0
    try:
        for i, p in enumerate(ds.points):
            anchor = model.anchor_for(p.input)
            y = model.predict(p.input)
            row = {"index": i, "anchor": anchor, "prediction": output_to_json(y)}
            if p.truth is not None:
                row["loss"] = loss(p.truth, y)
                total += row["loss"]
                scored += 1
            out.write(json.dumps(row) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if scored:
        print(f"average loss {total / scored:.6g} over {scored} points with ground truth", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="localstruct", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a dataset file")
    p.add_argument("data")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic dataset from a JSON spec")
    p.add_argument("spec")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="fit local predictors on a dataset")
    p.add_argument("data")
    p.add_argument("--k", type=int, help="neighborhood size (default max(2, n/10))")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--eta-decay", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0, help="recorded in the model; training is deterministic")
    p.add_argument("--backend", choices=BACKENDS, default="auto")
    p.add_argument("--loss", default="default", help="tree, hamming, hamming_count or zero_one")
    p.add_argument("--tol", type=float, help="stop early below this relative objective change")
    p.add_argument("-o", "--output", help="model file to write")
    p.add_argument("--imputed", help="write final outputs of all training points (JSON lines)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("experiment", help="run a cross-validation experiment")
    p.add_argument("config")
    p.add_argument("--baseline", action="store_true", help="evaluate the single global predictor")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("predict", help="predict outputs with a trained model")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("-o", "--output", help="write JSON lines here instead of stdout")
    p.set_defaults(func=_cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("LOCALSTRUCT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, InvalidOutputError, DimensionError, CapacityError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (BackendError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LocalStructError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
