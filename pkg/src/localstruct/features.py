"""Joint input/output feature maps.

Two maps are provided:

* tensor product for taxonomy outputs, ``phi(x, y) = outer(x, code(y)).ravel()``
  with the input index major;
* a linear-chain map for label sequences, made of an ``A x A`` transition
  histogram (first label major) followed by ``A`` emission blocks of size
  ``d_x`` holding the sum of the position inputs carrying each label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import LabelSequence, OutputSpace, SequenceSpace, StructuredOutput, Taxonomy, TaxonomyLeaf
from .errors import DimensionError, InvalidOutputError


@dataclass(frozen=True)
class TensorProduct:
    d_x: int
    d_y: int


@dataclass(frozen=True)
class SequenceFeatures:
    n_labels: int
    length: int
    d_x: int


FeatureMapSpec = Union[TensorProduct, SequenceFeatures]


def feature_dimension(spec: FeatureMapSpec) -> int:
    if isinstance(spec, TensorProduct):
        return spec.d_x * spec.d_y
    return spec.n_labels * spec.n_labels + spec.n_labels * spec.d_x


def feature_spec(space: OutputSpace, d_x: int) -> FeatureMapSpec:
    if isinstance(space, Taxonomy):
        return TensorProduct(d_x=d_x, d_y=space.d_y)
    return SequenceFeatures(n_labels=space.n_labels, length=space.length, d_x=d_x)


def joint_feature_tensor(x: np.ndarray, y: TaxonomyLeaf, space: Taxonomy) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"taxonomy input must be a vector, got shape {x.shape}")
    if not isinstance(y, TaxonomyLeaf):
        raise InvalidOutputError(f"expected a taxonomy leaf, got {y!r}")
    return np.outer(x, space.code(y.leaf_id)).ravel()


def joint_feature_sequence(x: np.ndarray, y: LabelSequence, space: SequenceSpace) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    labels = space.encode(y)
    if x.ndim != 2 or x.shape[0] != space.length:
        raise DimensionError(
            f"sequence input must have shape ({space.length}, d_x), got {x.shape}"
        )
    A, d_x = space.n_labels, x.shape[1]
    trans = np.zeros((A, A))
    for a, b in zip(labels[:-1], labels[1:]):
        trans[a, b] += 1.0
    emit = np.zeros((A, d_x))
    for t, a in enumerate(labels):
        emit[a] += x[t]
    return np.concatenate([trans.ravel(), emit.ravel()])


def joint_feature(x: np.ndarray, y: StructuredOutput, space: OutputSpace) -> np.ndarray:
    if isinstance(space, Taxonomy):
        return joint_feature_tensor(x, y, space)  # type: ignore[arg-type]
    return joint_feature_sequence(x, y, space)  # type: ignore[arg-type]


def split_sequence_weights(w: np.ndarray, n_labels: int, d_x: int) -> tuple[np.ndarray, np.ndarray]:
    """View a sequence weight vector as (transition ``A x A``, emission ``A x d_x``)."""
    w = np.asarray(w, dtype=float)
    expected = n_labels * n_labels + n_labels * d_x
    if w.shape != (expected,):
        raise DimensionError(f"weight vector has shape {w.shape}, expected ({expected},)")
    split = n_labels * n_labels
    return w[:split].reshape(n_labels, n_labels), w[split:].reshape(n_labels, d_x)
