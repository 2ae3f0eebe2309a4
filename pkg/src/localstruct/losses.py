"""Structured losses.

Each loss object is callable as ``loss(y, y2)``. Tree losses look up a
precomputed leaf-by-leaf table, so calls are O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .core import LabelSequence, OutputSpace, SequenceSpace, Taxonomy, TaxonomyLeaf
from .errors import DimensionError, InvalidOutputError


def tree_loss(y: TaxonomyLeaf, y2: TaxonomyLeaf, tax: Taxonomy) -> float:
    """Height of the lowest common ancestor of two leaves.

    Height counts edges on the longest downward path to a leaf, so equal
    leaves give 0.
    """
    tax.check(y)
    tax.check(y2)
    return float(tax.height[tax.lca(y.leaf_id, y2.leaf_id)])


def _check_lengths(y: LabelSequence, y2: LabelSequence) -> None:
    if not isinstance(y, LabelSequence) or not isinstance(y2, LabelSequence):
        raise InvalidOutputError("sequence losses take two label sequences")
    if len(y.labels) != len(y2.labels):
        raise DimensionError(f"sequence lengths differ: {len(y.labels)} vs {len(y2.labels)}")


def hamming_loss(y: LabelSequence, y2: LabelSequence, normalized: bool = True) -> float:
    _check_lengths(y, y2)
    mismatches = sum(a != b for a, b in zip(y.labels, y2.labels))
    return mismatches / len(y.labels) if normalized else float(mismatches)


def sequence_zero_one_loss(y: LabelSequence, y2: LabelSequence) -> float:
    _check_lengths(y, y2)
    return 0.0 if y.labels == y2.labels else 1.0


@dataclass(frozen=True, eq=False)
class TreeAncestorLoss:
    taxonomy: Taxonomy
    table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        tax = self.taxonomy
        leaves = tax.leaves
        table = np.array(
            [[tax.height[tax.lca(a, b)] for b in leaves] for a in leaves], dtype=float
        )
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def __call__(self, y: TaxonomyLeaf, y2: TaxonomyLeaf) -> float:
        idx = self.taxonomy.leaf_index
        try:
            return float(self.table[idx[y.leaf_id], idx[y2.leaf_id]])
        except (KeyError, AttributeError):
            raise InvalidOutputError(f"tree loss needs two leaves, got {y!r}, {y2!r}") from None

    @property
    def max_value(self) -> float:
        return float(self.taxonomy.height[self.taxonomy.root])


@dataclass(frozen=True)
class HammingLoss:
    normalized: bool = True

    def __call__(self, y: LabelSequence, y2: LabelSequence) -> float:
        return hamming_loss(y, y2, self.normalized)

    def max_value_for(self, length: int) -> float:
        return 1.0 if self.normalized else float(length)


@dataclass(frozen=True)
class SequenceZeroOneLoss:
    def __call__(self, y: LabelSequence, y2: LabelSequence) -> float:
        return sequence_zero_one_loss(y, y2)


LossSpec = Union[TreeAncestorLoss, HammingLoss, SequenceZeroOneLoss]


def default_loss(space: OutputSpace) -> LossSpec:
    if isinstance(space, Taxonomy):
        return TreeAncestorLoss(space)
    return HammingLoss(normalized=True)


def max_loss(loss: LossSpec, space: OutputSpace) -> float:
    """Upper bound on ``loss`` over ``space`` (attained for the built-in losses)."""
    if isinstance(loss, TreeAncestorLoss):
        return loss.max_value
    if isinstance(loss, HammingLoss):
        assert isinstance(space, SequenceSpace)
        if space.n_labels == 1:
            return 0.0
        return loss.max_value_for(space.length)
    if isinstance(loss, SequenceZeroOneLoss):
        return 0.0 if space.size == 1 else 1.0
    raise TypeError(f"unknown loss {loss!r}")


def make_loss(name: str, space: OutputSpace) -> LossSpec:
    """Look up a loss by its config/CLI name."""
    if name in ("tree", "tree_ancestor"):
        if not isinstance(space, Taxonomy):
            raise ValueError("tree loss needs a taxonomy output space")
        return TreeAncestorLoss(space)
    if not isinstance(space, SequenceSpace) and name != "default":
        raise ValueError(f"loss {name!r} needs a sequence output space")
    if name == "hamming":
        return HammingLoss(normalized=True)
    if name == "hamming_count":
        return HammingLoss(normalized=False)
    if name in ("zero_one", "0-1"):
        return SequenceZeroOneLoss()
    if name == "default":
        return default_loss(space)
    raise ValueError(f"unknown loss {name!r}")


def loss_name(loss: LossSpec) -> str:
    if isinstance(loss, TreeAncestorLoss):
        return "tree"
    if isinstance(loss, HammingLoss):
        return "hamming" if loss.normalized else "hamming_count"
    return "zero_one"
