"""Joint training of per-point local predictors and unlabeled outputs.

Every training point ``i`` owns a linear predictor ``w_i`` fit on its k-nearest
neighborhood. Training alternates three phases per outer iteration:

1. refresh the loss-augmented targets ``z*[i, j]`` for all neighborhood pairs;
2. take one sub-gradient step on every ``w_i`` (all from the same snapshot);
3. re-impute each unlabeled output as the exact minimizer of its share of the
   objective, labeled outputs staying pinned to the ground truth.

With the exhaustive backend the trainer precomputes ``phi(x_j, y)`` for every
point and output once, so each neighborhood is processed as a single matrix
product. The dp backend falls back to per-pair lattice inference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    AugmentedTargets,
    Dataset,
    Hyperparameters,
    Neighborhood,
    PredictorBank,
    StructuredOutput,
    TrainingState,
    validate_dataset,
)
from .errors import ContractError, DataError, LocalStructError, NumericError
from .features import feature_dimension, feature_spec, joint_feature
from .inference import (
    AUTO,
    DEFAULT_ENUMERATION_CAP,
    EXHAUSTIVE,
    enumerate_outputs,
    impute_from_terms,
    loss_augmented_argmax,
    predict,
    resolve_backend,
)
from .losses import LossSpec, default_loss

log = logging.getLogger(__name__)


def build_neighborhoods(ds: Dataset, k: int, metric: str = "euclidean") -> list[Neighborhood]:
    """k nearest points of every point, anchor first, distance ties to the lower index."""
    n = ds.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, n={n}], got {k}")
    if metric != "euclidean":
        raise ValueError(f"unsupported metric {metric!r}")
    X = ds.input_matrix()
    sq = np.sum(X * X, axis=1)
    dist = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0))
    out = []
    for i in range(n):
        d = dist[i].copy()
        d[i] = -1.0
        order = np.argsort(d, kind="stable")[:k]
        out.append(Neighborhood(anchor=i, members=tuple(int(j) for j in order)))
    return out


class Problem:
    """A dataset bound to a loss and backend, with cached feature tables."""

    def __init__(
        self,
        dataset: Dataset,
        loss: LossSpec | None = None,
        backend: str = AUTO,
        cap: int = DEFAULT_ENUMERATION_CAP,
    ):
        problems = validate_dataset(dataset)
        if problems:
            raise DataError("invalid dataset: " + "; ".join(problems))
        self.dataset = dataset
        self.space = dataset.output_space
        self.loss = loss if loss is not None else default_loss(self.space)
        self.backend = resolve_backend(self.space, self.loss, backend)
        self.cap = cap
        self.m = feature_dimension(feature_spec(self.space, dataset.input_dim))
        self.inputs = dataset.inputs
        if self.backend == EXHAUSTIVE:
            self.outputs = list(enumerate_outputs(self.space, cap))
            self.index = {y: a for a, y in enumerate(self.outputs)}
            # tables[j, a] = phi(x_j, outputs[a])
            self.tables = np.stack(
                [np.vstack([joint_feature(x, y, self.space) for y in self.outputs]) for x in self.inputs]
            )
            self.loss_matrix = np.array([[self.loss(a, b) for b in self.outputs] for a in self.outputs])
        self._phi_cache: dict[tuple[int, StructuredOutput], np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def labeled_count(self) -> int:
        return self.dataset.labeled_count

    def phi(self, j: int, y: StructuredOutput) -> np.ndarray:
        if self.backend == EXHAUSTIVE:
            return self.tables[j, self.index[y]]
        key = (j, y)
        vec = self._phi_cache.get(key)
        if vec is None:
            if len(self._phi_cache) > 200_000:
                self._phi_cache.clear()
            vec = self._phi_cache[key] = joint_feature(self.inputs[j], y, self.space)
        return vec

    def codes(self, ys: Sequence[StructuredOutput]) -> np.ndarray:
        return np.fromiter((self.index[y] for y in ys), dtype=np.intp, count=len(ys))


def _covering(neighborhoods: Sequence[Neighborhood], n: int) -> list[list[int]]:
    cover: list[list[int]] = [[] for _ in range(n)]
    for nb in neighborhoods:
        for j in nb.members:
            cover[j].append(nb.anchor)
    return [sorted(c) for c in cover]


def initial_state(problem: Problem) -> TrainingState:
    """Zero predictors; unlabeled outputs copied from the nearest labeled point."""
    ds = problem.dataset
    l = ds.labeled_count
    outputs: list[StructuredOutput] = [p.truth for p in ds.points[:l]]  # type: ignore[misc]
    if ds.n > l:
        X = ds.input_matrix()
        d = ((X[l:, None, :] - X[None, :l, :]) ** 2).sum(axis=2)
        nearest = np.argmin(d, axis=1)
        outputs.extend(outputs[int(j)] for j in nearest)
    return TrainingState(predictors=PredictorBank.zeros(ds.n, problem.m), outputs=outputs)


def refresh_augmented_targets(
    problem: Problem, state: TrainingState, neighborhoods: Sequence[Neighborhood]
) -> AugmentedTargets:
    """Loss-augmented maximizer for every (anchor, member) pair under current weights."""
    aug = AugmentedTargets(iteration=state.iteration)
    W = state.predictors.weights
    if problem.backend == EXHAUSTIVE:
        ycodes = problem.codes(state.outputs)
        for nb in neighborhoods:
            i = nb.anchor
            js = np.asarray(nb.members)
            yc = ycodes[js]
            scores = problem.tables[js] @ W[i]
            rows = np.arange(len(js))
            values = (scores - scores[rows, yc][:, None]) + problem.loss_matrix[yc]
            zc = np.argmax(values, axis=1)
            aug.set_row(i, nb.members, [problem.outputs[a] for a in zc], values[rows, zc], zc)
        return aug
    for nb in neighborhoods:
        i = nb.anchor
        found = [
            loss_augmented_argmax(
                W[i], problem.inputs[j], state.outputs[j], problem.loss, problem.space,
                problem.backend, problem.cap,
            )
            for j in nb.members
        ]
        aug.set_row(i, nb.members, [z for z, _ in found], [v for _, v in found])
    return aug


def _row(problem: Problem, state: TrainingState, nb: Neighborhood):
    """Members of ``nb`` in ascending order with their targets (and target codes)."""
    aug = state.augmented
    if aug.iteration != state.iteration:
        raise ContractError(
            f"augmented targets are from iteration {aug.iteration}, state is at {state.iteration}"
        )
    try:
        members, targets = aug.row(nb.anchor)
    except KeyError:
        raise ContractError(f"no augmented targets for neighborhood {nb.anchor}") from None
    if members != nb.members and set(members) != set(nb.members):
        raise ContractError(f"augmented targets of neighborhood {nb.anchor} cover other members")
    order = np.argsort(members)
    js = np.asarray(members)[order]
    if problem.backend != EXHAUSTIVE:
        return js, [targets[r] for r in order], None
    codes = aug.codes(nb.anchor)
    if codes is None:
        codes = problem.codes(targets)
    return js, None, codes[order]


def feature_gap(
    problem: Problem,
    i: int,
    state: TrainingState,
    neighborhoods: Sequence[Neighborhood],
    ycodes: np.ndarray | None = None,
) -> np.ndarray:
    """``(1/k) sum_j [phi(x_j, z*_ij) - phi(x_j, y_j)]`` over neighborhood ``i``.

    Members are summed in ascending index order so that neighborhoods holding
    the same points give bit-identical results.
    """
    js, targets, zc = _row(problem, state, neighborhoods[i])
    if zc is not None:
        yc = ycodes[js] if ycodes is not None else problem.codes([state.outputs[j] for j in js])
        diff = problem.tables[js, zc] - problem.tables[js, yc]
    else:
        diff = np.vstack(
            [problem.phi(j, z) - problem.phi(j, state.outputs[j]) for j, z in zip(js, targets)]
        )
    return diff.sum(axis=0) / len(js)


def subgradient(
    problem: Problem,
    i: int,
    state: TrainingState,
    neighborhoods: Sequence[Neighborhood],
    C: float,
    ycodes: np.ndarray | None = None,
) -> np.ndarray:
    return feature_gap(problem, i, state, neighborhoods, ycodes) + C * state.predictors[i]


def local_objective(
    problem: Problem,
    i: int,
    w: np.ndarray,
    state: TrainingState,
    neighborhoods: Sequence[Neighborhood],
    C: float,
) -> float:
    """Per-predictor objective with targets frozen: ``w . gap + (C/2) |w|^2``."""
    gap = feature_gap(problem, i, state, neighborhoods)
    return float(w @ gap) + 0.5 * C * float(w @ w)


def update_weights(
    problem: Problem, state: TrainingState, neighborhoods: Sequence[Neighborhood], eta: float, C: float
) -> PredictorBank:
    """One sub-gradient step for every predictor, all computed from the current weights."""
    W = state.predictors.weights
    new = np.empty_like(W)
    ycodes = problem.codes(state.outputs) if problem.backend == EXHAUSTIVE else None
    for nb in neighborhoods:
        i = nb.anchor
        with np.errstate(over="ignore", invalid="ignore"):
            new[i] = W[i] - eta * subgradient(problem, i, state, neighborhoods, C, ycodes)
        if not np.all(np.isfinite(new[i])):
            raise NumericError(f"predictor {i} became non-finite after the update")
    return PredictorBank(new)


def update_outputs(
    problem: Problem, state: TrainingState, neighborhoods: Sequence[Neighborhood]
) -> list[StructuredOutput]:
    """Pin labeled outputs; impute unlabeled ones in ascending order."""
    ds = problem.dataset
    outputs = list(state.outputs)
    for i in range(ds.labeled_count):
        outputs[i] = ds.points[i].truth  # type: ignore[assignment]
    if ds.n == ds.labeled_count:
        return outputs
    cover = _covering(neighborhoods, ds.n)
    W = state.predictors.weights
    aug = state.augmented
    for i in range(ds.labeled_count, ds.n):
        anchors = cover[i]
        if not anchors:
            raise ContractError(f"point {i} is in no neighborhood")
        k = len(neighborhoods[anchors[0]].members)
        try:
            targets = [aug[a, i] for a in anchors]
        except KeyError as exc:
            raise ContractError(f"no augmented target for pair {exc.args[0]}") from None
        if problem.backend == EXHAUSTIVE:
            scores = problem.tables[i] @ W[anchors].T
            losses = problem.loss_matrix[:, problem.codes(targets)]
            costs = ((losses - scores) / k).sum(axis=1)
            outputs[i] = problem.outputs[int(np.argmin(costs))]
        else:
            outputs[i], _ = impute_from_terms(
                problem.inputs[i], [W[a] for a in anchors], targets, k,
                problem.loss, problem.space, problem.backend, problem.cap,
            )
    return outputs


def objective(
    problem: Problem, state: TrainingState, neighborhoods: Sequence[Neighborhood], C: float
) -> float:
    """Training objective evaluated with the stored augmented targets."""
    W = state.predictors.weights
    total = 0.0
    ycodes = problem.codes(state.outputs) if problem.backend == EXHAUSTIVE else None
    for nb in neighborhoods:
        w = W[nb.anchor]
        js, targets, zc = _row(problem, state, nb)
        if zc is not None:
            yc = ycodes[js]  # type: ignore[index]
            diff = problem.tables[js, zc] - problem.tables[js, yc]
            acc = float(np.sum(diff @ w)) + float(np.sum(problem.loss_matrix[yc, zc]))
        else:
            acc = 0.0
            for j, z in zip(js, targets):
                y = state.outputs[j]
                acc += float(w @ (problem.phi(j, z) - problem.phi(j, y))) + problem.loss(y, z)
        total += acc / len(js) + 0.5 * C * float(w @ w)
    return total


@dataclass
class TrainReport:
    iterations_run: int
    objective_trace: list[float]
    state: TrainingState
    neighborhoods: list[Neighborhood] = field(repr=False)
    problem: Problem = field(repr=False)

    def model(self) -> "LocalModel":
        return LocalModel.from_report(self)


def _check_labeled(problem: Problem, state: TrainingState, t: int) -> None:
    for i in range(problem.labeled_count):
        if state.outputs[i] != problem.dataset.points[i].truth:
            raise ContractError(f"iteration {t}: labeled point {i} lost its ground truth")


def fit(
    dataset: Dataset | Problem,
    hp: Hyperparameters,
    loss: LossSpec | None = None,
    backend: str = AUTO,
    tol: float | None = None,
    callback: Callable[[int, TrainingState], None] | None = None,
) -> TrainReport:
    """Train local predictors and impute unlabeled outputs.

    ``tol`` enables early stopping once the objective's relative change drops
    below it. ``callback(t, state)`` runs after every completed iteration.
    """
    problem = dataset if isinstance(dataset, Problem) else Problem(dataset, loss, backend)
    hp.check_against(problem.n)
    neighborhoods = build_neighborhoods(problem.dataset, hp.k)
    state = initial_state(problem)
    state.augmented = refresh_augmented_targets(problem, state, neighborhoods)
    state.objective_trace.append(objective(problem, state, neighborhoods, hp.C))

    for t in range(1, hp.T + 1):
        # Targets refreshed at the end of the previous iteration already match
        # the current weights and outputs, so they serve as this iteration's.
        state.iteration = t
        state.augmented.iteration = t
        eta = hp.eta * hp.eta_decay ** (t - 1)
        try:
            state.predictors = update_weights(problem, state, neighborhoods, eta, hp.C)
            state.outputs = update_outputs(problem, state, neighborhoods)
            _check_labeled(problem, state, t)
            state.augmented = refresh_augmented_targets(problem, state, neighborhoods)
        except LocalStructError as exc:
            raise type(exc)(f"iteration {t}: {exc}") from exc
        value = objective(problem, state, neighborhoods, hp.C)
        state.objective_trace.append(value)
        log.debug("iteration %d objective %.9g", t, value)
        if callback is not None:
            callback(t, state)
        if tol is not None:
            prev = state.objective_trace[-2]
            if abs(value - prev) <= tol * max(abs(prev), 1e-300):
                break

    return TrainReport(
        iterations_run=len(state.objective_trace) - 1,
        objective_trace=state.objective_trace,
        state=state,
        neighborhoods=neighborhoods,
        problem=problem,
    )


@dataclass
class LocalModel:
    """Trained predictors plus the anchor inputs used to route new points.

    A new point is scored with the predictor of its nearest training anchor
    (Euclidean, ties to the lower index).
    """

    anchors: np.ndarray
    weights: np.ndarray
    space: object
    backend: str = AUTO
    loss_name: str = "default"
    hyperparameters: dict = field(default_factory=dict)

    @classmethod
    def from_report(cls, report: TrainReport) -> "LocalModel":
        from .losses import loss_name

        problem = report.problem
        return cls(
            anchors=np.stack(problem.inputs),
            weights=report.state.predictors.weights.copy(),
            space=problem.space,
            backend=problem.backend,
            loss_name=loss_name(problem.loss),
        )

    def anchor_for(self, x: np.ndarray) -> int:
        flat = self.anchors.reshape(len(self.anchors), -1)
        d = np.sum((flat - np.asarray(x, dtype=float).ravel()) ** 2, axis=1)
        return int(np.argmin(d))

    def predict(self, x: np.ndarray) -> StructuredOutput:
        return predict(self.weights[self.anchor_for(x)], x, self.space, self.backend)  # type: ignore[arg-type]

