"""Cross-validated evaluation of the local method against a global baseline."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import DataPoint, Dataset, Hyperparameters
from .errors import DataError, LocalStructError
from .features import joint_feature
from .files import load_dataset, read_json
from .inference import AUTO, loss_augmented_argmax, predict, resolve_backend
from .losses import LossSpec, make_loss, max_loss
from .synthetic import generate_synthetic
from .trainer import fit

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    synthetic: dict[str, Any] | None = None
    k: int | None = None
    C: float = 1.0
    eta: float = 0.01
    eta_decay: float = 1.0
    T: int = 50
    folds: int = 10
    labeled_fraction: float = 0.5
    seed: int = 0
    baseline: bool = False
    loss: str = "default"
    backend: str = AUTO
    tol: float | None = None

    def __post_init__(self):
        if (self.dataset is None) == (self.synthetic is None):
            raise DataError("experiment config needs exactly one of 'dataset' or 'synthetic'")
        if self.folds < 2:
            raise DataError("folds must be >= 2")
        if not 0.0 < self.labeled_fraction <= 1.0:
            raise DataError("labeled_fraction must lie in (0, 1]")

    @classmethod
    def from_dict(cls, obj: dict[str, Any], base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise DataError("experiment config must be an object")
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown experiment config fields: {sorted(unknown)}")
        cfg = cls(**obj)
        if cfg.dataset is not None and base_dir is not None and not Path(cfg.dataset).is_absolute():
            cfg.dataset = str(base_dir / cfg.dataset)
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(read_json(path), path.parent)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class ResultsRecord:
    method: str
    fold_losses: list[float]
    fold_test_sizes: list[int]
    mean: float
    std: float
    wall_clock_seconds: float
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def standard_error(self) -> float:
        return self.std / math.sqrt(len(self.fold_losses))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ResultsRecord":
        return cls(**obj)


# -- data preparation ---------------------------------------------------------


def load_experiment_data(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset is not None:
        return load_dataset(cfg.dataset)
    return generate_synthetic(cfg.synthetic)[0]  # type: ignore[arg-type]


def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Random partition of ``range(n)`` into ``folds`` near-equal test folds."""
    if folds > n:
        raise DataError(f"cannot split {n} points into {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def split_labeled(train: np.ndarray, fraction: float, seed: int, fold: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, fold])
    perm = rng.permutation(train)
    l = max(1, int(round(fraction * len(train))))
    return np.sort(perm[:l]), np.sort(perm[l:])


def training_split(ds: Dataset, labeled: np.ndarray, unlabeled: np.ndarray) -> Dataset:
    """Labeled points first (keeping truth), then unlabeled ones with truth hidden."""
    points = [DataPoint(ds.points[i].input, ds.points[i].truth) for i in labeled]
    points += [DataPoint(ds.points[i].input, None) for i in unlabeled]
    return Dataset(points, len(labeled), ds.output_space)


def _require_truth(ds: Dataset) -> None:
    if ds.labeled_count != ds.n:
        raise DataError("cross-validation needs ground truth for every point")


def _hp(cfg: ExperimentConfig, n_train: int) -> Hyperparameters:
    k = cfg.k if cfg.k is not None else max(2, n_train // 10)
    return Hyperparameters(k=min(k, n_train), C=cfg.C, eta=cfg.eta, T=cfg.T, eta_decay=cfg.eta_decay)


# -- global baseline ----------------------------------------------------------


class GlobalLearner:
    """One structured-hinge predictor trained by sub-gradient descent on labeled data."""

    def __init__(self, space, loss: LossSpec, backend: str = AUTO):
        self.space = space
        self.loss = loss
        self.backend = resolve_backend(space, loss, backend)
        self.w: np.ndarray | None = None

    def fit(self, inputs: Sequence[np.ndarray], outputs: Sequence[Any], hp: Hyperparameters) -> "GlobalLearner":
        phis = [joint_feature(x, y, self.space) for x, y in zip(inputs, outputs)]
        w = np.zeros_like(phis[0])
        for t in range(1, hp.T + 1):
            diff = np.vstack(
                [
                    joint_feature(x, loss_augmented_argmax(w, x, y, self.loss, self.space, self.backend)[0], self.space)
                    - phi
                    for x, y, phi in zip(inputs, outputs, phis)
                ]
            )
            eta = hp.eta * hp.eta_decay ** (t - 1)
            w = w - eta * (diff.sum(axis=0) / len(inputs) + hp.C * w)
        self.w = w
        return self

    def predict(self, x: np.ndarray):
        assert self.w is not None, "fit first"
        return predict(self.w, x, self.space, self.backend)


# -- experiment runners -------------------------------------------------------


def _run(cfg: ExperimentConfig, ds: Dataset | None, method: str) -> ResultsRecord:
    start = time.perf_counter()
    ds = ds if ds is not None else load_experiment_data(cfg)
    _require_truth(ds)
    loss = make_loss(cfg.loss, ds.output_space)
    folds = fold_indices(ds.n, cfg.folds, cfg.seed)
    everything = np.arange(ds.n)
    fold_losses, sizes = [], []
    for f, test in enumerate(folds):
        try:
            train = np.setdiff1d(everything, test)
            labeled, unlabeled = split_labeled(train, cfg.labeled_fraction, cfg.seed, f)
            hp = _hp(cfg, len(train))
            if method == "local":
                report = fit(training_split(ds, labeled, unlabeled), hp, loss, cfg.backend, tol=cfg.tol)
                model = report.model()
                predictor = model.predict
            else:
                learner = GlobalLearner(ds.output_space, loss, cfg.backend).fit(
                    [ds.points[i].input for i in labeled], [ds.points[i].truth for i in labeled], hp
                )
                predictor = learner.predict
            total = 0.0
            for i in test:
                total += loss(ds.points[i].truth, predictor(ds.points[i].input))
        except LocalStructError as exc:
            raise type(exc)(f"fold {f}: {exc}") from exc
        fold_losses.append(total / len(test))
        sizes.append(int(len(test)))
        log.info("%s fold %d: average loss %.6f over %d test points", method, f, fold_losses[-1], len(test))

    losses = np.asarray(fold_losses)
    worst = max_loss(loss, ds.output_space)
    assert np.all((losses >= 0) & (losses <= worst + 1e-12)), "fold loss outside loss range"
    return ResultsRecord(
        method=method,
        fold_losses=[float(v) for v in losses],
        fold_test_sizes=sizes,
        mean=float(losses.mean()),
        std=float(losses.std(ddof=1)),
        wall_clock_seconds=time.perf_counter() - start,
        config=cfg.to_dict(),
    )


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> ResultsRecord:
    """K-fold evaluation of local predictors; runs the baseline when ``cfg.baseline`` is set."""
    return _run(cfg, dataset, "global" if cfg.baseline else "local")


def run_baseline_global(cfg: ExperimentConfig, dataset: Dataset | None = None) -> ResultsRecord:
    """Same folds and labeled splits, one global predictor trained on labeled points only."""
    return _run(cfg, dataset, "global")


# -- results output -----------------------------------------------------------


def _round(obj: Any) -> Any:
    if isinstance(obj, float):
        return float(f"{obj:.9g}") if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


CSV_HEADER = ("method", "fold", "test_size", "average_loss")


def emit_results(rec: ResultsRecord, path: str | Path, fmt: str = "json") -> None:
    """Write ``rec`` with sorted keys and floats rounded to 9 significant digits."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(_round(rec.to_dict()), indent=2, sort_keys=True) + "\n")
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for f, (size, value) in enumerate(zip(rec.fold_test_sizes, rec.fold_losses)):
                writer.writerow([rec.method, f, size, f"{value:.9g}"])
    else:
        raise ValueError(f"unknown results format {fmt!r}")


def load_results(path: str | Path) -> ResultsRecord:
    return ResultsRecord.from_dict(read_json(path))
