import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import random_taxonomy
from localstruct.core import LabelSequence, SequenceSpace, Taxonomy, TaxonomyLeaf
from localstruct.errors import DimensionError, InvalidOutputError
from localstruct.inference import enumerate_outputs
from localstruct.losses import (
    HammingLoss,
    SequenceZeroOneLoss,
    TreeAncestorLoss,
    hamming_loss,
    max_loss,
    sequence_zero_one_loss,
    tree_loss,
)


def brute_force_tree_loss(tax: Taxonomy, a: str, b: str) -> int:
    """LCA by intersecting root paths; height by scanning every leaf below it."""

    def root_path(node):
        path = [node]
        while tax.parent[path[-1]] is not None:
            path.append(tax.parent[path[-1]])
        return path

    common = [n for n in root_path(a) if n in set(root_path(b))]
    lca = common[0]
    below = [leaf for leaf in tax.leaves if lca in root_path(leaf)]
    return max(root_path(leaf).index(lca) for leaf in below)


class TestTreeLoss:
    def test_same_leaf(self):
        tax = Taxonomy.balanced(3)
        assert tree_loss(TaxonomyLeaf("r.0.1.1"), TaxonomyLeaf("r.0.1.1"), tax) == 0

    def test_siblings_in_depth_one_tree(self):
        tax = Taxonomy("r", {"r": ["a", "b", "c"]})
        assert tree_loss(TaxonomyLeaf("a"), TaxonomyLeaf("c"), tax) == 1

    def test_different_top_branches_of_balanced_depth_three(self):
        tax = Taxonomy.balanced(3)
        oracle = brute_force_tree_loss(tax, "r.0.0.0", "r.1.1.0")
        assert oracle == 3
        assert tree_loss(TaxonomyLeaf("r.0.0.0"), TaxonomyLeaf("r.1.1.0"), tax) == oracle

    def test_matches_brute_force_on_random_trees(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            tax = random_taxonomy(rng)
            loss = TreeAncestorLoss(tax)
            for a, b in itertools.product(tax.leaves, repeat=2):
                expected = brute_force_tree_loss(tax, a, b)
                assert tree_loss(TaxonomyLeaf(a), TaxonomyLeaf(b), tax) == expected
                assert loss(TaxonomyLeaf(a), TaxonomyLeaf(b)) == expected

    def test_unbalanced_height_uses_longest_path(self):
        tax = Taxonomy("r", {"r": ["a", "m"], "m": ["b", "n"], "n": ["c", "d"]})
        assert tree_loss(TaxonomyLeaf("a"), TaxonomyLeaf("b"), tax) == 3
        assert tree_loss(TaxonomyLeaf("b"), TaxonomyLeaf("c"), tax) == 2

    def test_unknown_leaf(self):
        tax = Taxonomy.balanced(2)
        with pytest.raises(InvalidOutputError):
            tree_loss(TaxonomyLeaf("r.0"), TaxonomyLeaf("r.0.0"), tax)
        with pytest.raises(InvalidOutputError):
            TreeAncestorLoss(tax)(TaxonomyLeaf("x"), TaxonomyLeaf("r.0.0"))

    def test_bounded_by_root_height_and_symmetric(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            tax = random_taxonomy(rng)
            loss = TreeAncestorLoss(tax)
            assert np.all(loss.table <= tax.height[tax.root])
            np.testing.assert_array_equal(loss.table, loss.table.T)
            np.testing.assert_array_equal(np.diag(loss.table), 0)
            assert loss.table.max() == max_loss(loss, tax)


class TestSequenceLosses:
    def test_hamming_examples(self):
        assert hamming_loss(LabelSequence("abb"), LabelSequence("abb")) == 0
        assert hamming_loss(LabelSequence("abb"), LabelSequence("aba")) == pytest.approx(1 / 3)
        assert hamming_loss(LabelSequence("abb"), LabelSequence("baa")) == 1
        assert hamming_loss(LabelSequence("abb"), LabelSequence("baa"), normalized=False) == 3

    def test_zero_one_examples(self):
        assert sequence_zero_one_loss(LabelSequence("abc"), LabelSequence("abc")) == 0
        assert sequence_zero_one_loss(LabelSequence("abc"), LabelSequence("abb")) == 1
        assert sequence_zero_one_loss(LabelSequence("abc"), LabelSequence("bca")) == 1

    @pytest.mark.parametrize("fn", [hamming_loss, sequence_zero_one_loss])
    def test_length_mismatch(self, fn):
        with pytest.raises(DimensionError):
            fn(LabelSequence("ab"), LabelSequence("abc"))

    @pytest.mark.parametrize("loss", [HammingLoss(True), HammingLoss(False), SequenceZeroOneLoss()])
    def test_zero_on_diagonal_exhaustively(self, loss):
        space = SequenceSpace(("a", "b", "c"), 3)
        for y in enumerate_outputs(space):
            assert loss(y, y) == 0


labels = st.lists(st.sampled_from("abc"), min_size=1, max_size=7)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_sequence_losses_symmetric_and_bounded(data):
    a = data.draw(labels)
    b = data.draw(st.lists(st.sampled_from("abc"), min_size=len(a), max_size=len(a)))
    ya, yb = LabelSequence(a), LabelSequence(b)
    for loss in (HammingLoss(True), HammingLoss(False), SequenceZeroOneLoss()):
        assert loss(ya, yb) == loss(yb, ya)
    assert 0.0 <= hamming_loss(ya, yb) <= 1.0
    assert sequence_zero_one_loss(ya, yb) in (0.0, 1.0)
