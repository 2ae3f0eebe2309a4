"""Exact inference over output spaces.

Three problems are solved, each by two interchangeable backends:

* prediction, ``argmax_y w . phi(x, y)``;
* loss-augmented inference, ``argmax_y' w . (phi(x, y') - phi(x, y)) + loss(y, y')``;
* output imputation, ``argmin_y sum_i (1/k) [loss(y, z_i) - w_i . phi(x, y)]``
  over the neighborhoods covering a point.

``"exhaustive"`` enumerates the output space and works for every space and
loss; ``"dp"`` runs max-sum over the label lattice of a sequence space. Ties
always resolve to the first output in canonical enumeration order (leaves in
tree pre-order, sequences lexicographic over the alphabet), so both backends
return identical outputs.

The whole-sequence 0-1 loss does not decompose over positions. The DP backend
handles it exactly by comparing the targets themselves against the best
sequence that avoids all of them, found on the lattice product with a prefix
trie of the avoided sequences.
"""

from __future__ import annotations

import itertools
from typing import Iterator, Sequence

import numpy as np

from .core import (
    Dataset,
    LabelSequence,
    Neighborhood,
    OutputSpace,
    SequenceSpace,
    StructuredOutput,
    Taxonomy,
    TaxonomyLeaf,
    TrainingState,
)
from .errors import BackendError, CapacityError, ContractError, DimensionError
from .features import feature_dimension, feature_spec, joint_feature, split_sequence_weights
from .losses import HammingLoss, LossSpec, SequenceZeroOneLoss

EXHAUSTIVE = "exhaustive"
SEQUENCE_DP = "dp"
AUTO = "auto"
BACKENDS = (AUTO, EXHAUSTIVE, SEQUENCE_DP)

DEFAULT_ENUMERATION_CAP = 10**6


def resolve_backend(space: OutputSpace, loss: LossSpec | None = None, backend: str = AUTO) -> str:
    """Pick a concrete backend and check it suits the space and loss."""
    if backend not in BACKENDS:
        raise BackendError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if backend == AUTO:
        return SEQUENCE_DP if isinstance(space, SequenceSpace) else EXHAUSTIVE
    if backend == SEQUENCE_DP:
        if not isinstance(space, SequenceSpace):
            raise BackendError("the dp backend only applies to sequence output spaces")
        if loss is not None and not isinstance(loss, (HammingLoss, SequenceZeroOneLoss)):
            raise BackendError(f"the dp backend cannot decompose loss {loss!r}")
    return backend


def enumerate_outputs(space: OutputSpace, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[StructuredOutput]:
    """Yield every output of ``space`` in canonical order."""
    size = space.size
    if size > cap:
        raise CapacityError(f"output space has {size} elements, above the enumeration cap {cap}")
    if isinstance(space, Taxonomy):
        return (TaxonomyLeaf(leaf) for leaf in space.leaves)
    return (
        LabelSequence(labels)
        for labels in itertools.product(space.alphabet, repeat=space.length)
    )


def _check_weights(w: np.ndarray, x: np.ndarray, space: OutputSpace) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    x = np.asarray(x)
    m = feature_dimension(feature_spec(space, int(x.shape[-1])))
    if w.shape != (m,):
        raise DimensionError(f"weight vector has shape {w.shape}, expected ({m},)")
    return w


def _feature_table(x: np.ndarray, space: OutputSpace, outputs: Sequence[StructuredOutput]) -> np.ndarray:
    return np.vstack([joint_feature(x, y, space) for y in outputs])


def _sort_key(y: StructuredOutput, space: OutputSpace):
    if isinstance(space, Taxonomy):
        return space.leaf_index[y.leaf_id]  # type: ignore[union-attr]
    return space.encode(y)  # type: ignore[arg-type]


# -- value functions shared by both backends ---------------------------------


def augmented_value(
    w: np.ndarray,
    x: np.ndarray,
    y_cur: StructuredOutput,
    y2: StructuredOutput,
    loss: LossSpec,
    space: OutputSpace,
) -> float:
    """``w . (phi(x, y2) - phi(x, y_cur)) + loss(y_cur, y2)``."""
    s2 = float(joint_feature(x, y2, space) @ w)
    s_cur = float(joint_feature(x, y_cur, space) @ w)
    return (s2 - s_cur) + loss(y_cur, y2)


def impute_cost(
    y: StructuredOutput,
    x: np.ndarray,
    weights: Sequence[np.ndarray],
    targets: Sequence[StructuredOutput],
    k: int,
    loss: LossSpec,
    space: OutputSpace,
) -> float:
    """Partial objective of one output: ``sum_i (1/k) [loss(y, z_i) - w_i . phi(x, y)]``."""
    phi = joint_feature(x, y, space)
    total = 0.0
    for w, z in zip(weights, targets):
        total += (loss(y, z) - float(phi @ w)) / k
    return total


# -- lattice dynamic programming --------------------------------------------


def _backward(node: np.ndarray, edge: np.ndarray) -> np.ndarray:
    """``best[t, a]``: best score of a suffix that starts at position t with label a."""
    L = node.shape[0]
    best = np.empty_like(node)
    best[L - 1] = node[L - 1]
    for t in range(L - 2, -1, -1):
        best[t] = node[t] + np.max(edge + best[t + 1][None, :], axis=1)
    return best


def best_path(node: np.ndarray, edge: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Max-sum path over an ``L x A`` lattice with ``A x A`` transition scores.

    Returns the lexicographically first optimal label path and its score.
    """
    best = _backward(node, edge)
    path = [int(np.argmax(best[0]))]
    for t in range(1, node.shape[0]):
        path.append(int(np.argmax(edge[path[-1]] + best[t])))
    return tuple(path), float(best[0, path[0]])


def best_path_avoiding(
    node: np.ndarray, edge: np.ndarray, avoid: set[tuple[int, ...]]
) -> tuple[int, ...] | None:
    """Lexicographically first max-sum path that is not in ``avoid``.

    Returns None when every path is avoided. While the prefix built so far is
    a prefix of some avoided path the search tracks it explicitly; once it
    leaves the trie, the ordinary suffix scores apply.
    """
    if not avoid:
        return best_path(node, edge)[0]
    L, A = node.shape
    best = _backward(node, edge)
    prefixes = {z[:t] for z in avoid for t in range(1, L + 1)}
    memo: dict[tuple[int, ...], float] = {}

    def options(q: tuple[int, ...]) -> list[float]:
        t = len(q)
        if t == 0:
            return [value((c,)) if (c,) in prefixes else float(best[0, c]) for c in range(A)]
        prev = q[-1]
        return [
            float(edge[prev, c]) + (value(q + (c,)) if q + (c,) in prefixes else float(best[t, c]))
            for c in range(A)
        ]

    def value(q: tuple[int, ...]) -> float:
        if q not in memo:
            t = len(q) - 1
            memo[q] = -np.inf if t == L - 1 else float(node[t, q[-1]]) + max(options(q))
        return memo[q]

    path: tuple[int, ...] = ()
    for t in range(L):
        if path in prefixes or t == 0:
            opts = np.asarray(options(path))
        else:
            opts = edge[path[-1]] + best[t]
        c = int(np.argmax(opts))
        if opts[c] == -np.inf:
            return None
        path += (c,)
    return path


def _lattice(w: np.ndarray, x: np.ndarray, space: SequenceSpace) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != space.length:
        raise DimensionError(f"sequence input must have shape ({space.length}, d_x), got {x.shape}")
    trans, emit = split_sequence_weights(w, space.n_labels, x.shape[1])
    return x @ emit.T, trans


def _mismatch_costs(targets: Sequence[tuple[int, ...]], space: SequenceSpace, loss: HammingLoss) -> np.ndarray:
    """``cost[t, a]``: summed per-position Hamming loss of label a against every target."""
    cost = np.zeros((space.length, space.n_labels))
    unit = 1.0 / space.length if loss.normalized else 1.0
    for z in targets:
        for t, zt in enumerate(z):
            cost[t] += unit
            cost[t, zt] -= unit
    return cost


# -- public operations ------------------------------------------------------


def predict(
    w: np.ndarray,
    x: np.ndarray,
    space: OutputSpace,
    backend: str = AUTO,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> StructuredOutput:
    """Highest-scoring output under ``w``."""
    w = _check_weights(w, x, space)
    backend = resolve_backend(space, None, backend)
    if backend == SEQUENCE_DP:
        node, edge = _lattice(w, x, space)  # type: ignore[arg-type]
        return space.decode(best_path(node, edge)[0])  # type: ignore[union-attr]
    outputs = list(enumerate_outputs(space, cap))
    scores = _feature_table(x, space, outputs) @ w
    return outputs[int(np.argmax(scores))]


def loss_augmented_argmax(
    w: np.ndarray,
    x: np.ndarray,
    y_cur: StructuredOutput,
    loss: LossSpec,
    space: OutputSpace,
    backend: str = AUTO,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> tuple[StructuredOutput, float]:
    """Most violating output ``z*`` for ``y_cur`` and the hinge bound it attains.

    The bound is never negative since ``y_cur`` itself scores 0.
    """
    w = _check_weights(w, x, space)
    space.check(y_cur)
    backend = resolve_backend(space, loss, backend)
    if backend == EXHAUSTIVE:
        outputs = list(enumerate_outputs(space, cap))
        scores = _feature_table(x, space, outputs) @ w
        s_cur = scores[outputs.index(y_cur)]
        values = (scores - s_cur) + np.array([loss(y_cur, y2) for y2 in outputs])
        best = int(np.argmax(values))
        return outputs[best], float(values[best])

    assert isinstance(space, SequenceSpace)
    node, edge = _lattice(w, x, space)
    cur = space.encode(y_cur)  # type: ignore[arg-type]
    if isinstance(loss, HammingLoss):
        path, _ = best_path(node + _mismatch_costs([cur], space, loss), edge)
        z = space.decode(path)
        return z, augmented_value(w, x, y_cur, z, loss, space)

    # 0-1 loss: either y_cur itself (value 0) or the best other sequence (+1).
    candidates = [cur]
    other = best_path_avoiding(node, edge, {cur})
    if other is not None:
        candidates.append(other)
    return _pick(
        candidates,
        lambda c: augmented_value(w, x, y_cur, space.decode(c), loss, space),
        space,
        maximize=True,
    )


def _pick(candidates, evaluate, space: SequenceSpace, maximize: bool):
    """Best candidate by value; ties go to the lexicographically first."""
    scored = [(evaluate(c), c) for c in candidates]
    if maximize:
        value, code = min(scored, key=lambda vc: (-vc[0], vc[1]))
    else:
        value, code = min(scored, key=lambda vc: (vc[0], vc[1]))
    return space.decode(code), value


def impute_from_terms(
    x: np.ndarray,
    weights: Sequence[np.ndarray],
    targets: Sequence[StructuredOutput],
    k: int,
    loss: LossSpec,
    space: OutputSpace,
    backend: str = AUTO,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> tuple[StructuredOutput, float]:
    """Minimize the partial objective of one output given its covering terms.

    ``weights[c]`` and ``targets[c]`` are the predictor and loss-augmented target
    of the c-th neighborhood containing the point.
    """
    if len(weights) != len(targets):
        raise DimensionError("weights and targets must pair up")
    if not weights:
        raise ContractError("a point must be covered by at least one neighborhood")
    weights = [_check_weights(w, x, space) for w in weights]
    backend = resolve_backend(space, loss, backend)
    if backend == EXHAUSTIVE:
        outputs = list(enumerate_outputs(space, cap))
        scores = _feature_table(x, space, outputs) @ np.column_stack(weights)
        losses = np.array([[loss(y, z) for z in targets] for y in outputs])
        costs = ((losses - scores) / k).sum(axis=1)
        best = int(np.argmin(costs))
        return outputs[best], float(costs[best])

    assert isinstance(space, SequenceSpace)
    w_sum = np.sum(weights, axis=0)
    node, edge = _lattice(w_sum, x, space)
    codes = [space.encode(z) for z in targets]  # type: ignore[arg-type]

    def cost(c: tuple[int, ...]) -> float:
        return impute_cost(space.decode(c), x, weights, targets, k, loss, space)

    if isinstance(loss, HammingLoss):
        path, _ = best_path(node - _mismatch_costs(codes, space, loss), edge)
        return space.decode(path), cost(path)

    # 0-1 loss: a target itself, or the best-scoring sequence matching none.
    distinct = set(codes)
    candidates = sorted(distinct)
    other = best_path_avoiding(node, edge, distinct)
    if other is not None:
        candidates.append(other)
    return _pick(candidates, cost, space, maximize=False)


def covering_anchors(i: int, neighborhoods: Sequence[Neighborhood]) -> list[int]:
    """Anchors (ascending) of the neighborhoods that contain point ``i``."""
    return [nb.anchor for nb in neighborhoods if i in nb.members]


def impute_output(
    i: int,
    dataset: Dataset,
    state: TrainingState,
    neighborhoods: Sequence[Neighborhood],
    loss: LossSpec,
    backend: str = AUTO,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> StructuredOutput:
    """Exact minimizer of unlabeled point ``i``'s share of the training objective."""
    if i < dataset.labeled_count:
        raise ContractError(f"point {i} is labeled; its output is fixed to the ground truth")
    anchors = covering_anchors(i, neighborhoods)
    if not anchors:
        raise ContractError(f"point {i} is in no neighborhood")
    try:
        targets = [state.augmented[(a, i)] for a in anchors]
    except KeyError as exc:
        raise ContractError(f"missing augmented target for pair {exc.args[0]}") from None
    k = len(neighborhoods[anchors[0]].members)
    y, _ = impute_from_terms(
        dataset.points[i].input,
        [state.predictors[a] for a in anchors],
        targets,
        k,
        loss,
        dataset.output_space,
        backend,
        cap,
    )
    return y
