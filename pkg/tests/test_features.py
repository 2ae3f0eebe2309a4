import numpy as np
import pytest

from instances import random_output, random_sequence_space, random_taxonomy
from localstruct.core import LabelSequence, SequenceSpace, Taxonomy, TaxonomyLeaf
from localstruct.errors import DimensionError, InvalidOutputError
from localstruct.features import (
    SequenceFeatures,
    TensorProduct,
    feature_dimension,
    joint_feature,
    joint_feature_sequence,
    joint_feature_tensor,
)


def three_leaf_tax():
    return Taxonomy("r", {"r": ["a", "b", "c"]})


class TestTensorProduct:
    def test_one_hot_example(self):
        phi = joint_feature_tensor(np.array([1.0, 0.0]), TaxonomyLeaf("b"), three_leaf_tax())
        np.testing.assert_array_equal(phi, [0, 1, 0, 0, 0, 0])

    def test_zero_input(self):
        phi = joint_feature_tensor(np.zeros(4), TaxonomyLeaf("c"), three_leaf_tax())
        np.testing.assert_array_equal(phi, np.zeros(12))

    def test_input_index_major(self):
        tax = Taxonomy("r", {"r": ["p", "q"]})
        phi = joint_feature_tensor(np.array([2.0, 3.0]), TaxonomyLeaf("p"), tax)
        np.testing.assert_array_equal(phi, [2, 0, 3, 0])

    def test_errors(self):
        with pytest.raises(InvalidOutputError):
            joint_feature_tensor(np.ones(2), TaxonomyLeaf("zz"), three_leaf_tax())
        with pytest.raises(DimensionError):
            joint_feature_tensor(np.ones((2, 2)), TaxonomyLeaf("a"), three_leaf_tax())

    def test_linear_in_input(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            tax = random_taxonomy(rng, random_codes=bool(rng.integers(2)))
            y = random_output(rng, tax)
            x1, x2 = rng.normal(size=(2, 4))
            a, b = rng.normal(size=2)
            lhs = joint_feature(a * x1 + b * x2, y, tax)
            rhs = a * joint_feature(x1, y, tax) + b * joint_feature(x2, y, tax)
            np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)

    def test_distinct_leaves_distinct_features(self):
        rng = np.random.default_rng(1)
        tax = random_taxonomy(rng, min_leaves=6)
        x = rng.normal(size=3)
        feats = {joint_feature(x, TaxonomyLeaf(leaf), tax).tobytes() for leaf in tax.leaves}
        assert len(feats) == tax.size


class TestSequenceFeatures:
    space = SequenceSpace(("a", "b"), 3)

    def test_direct_count(self):
        phi = joint_feature_sequence(np.ones((3, 1)), LabelSequence("aab"), self.space)
        # transitions aa ab ba bb, then emissions a, b
        np.testing.assert_array_equal(phi, [1, 1, 0, 0, 2, 1])

    def test_single_position_has_no_transitions(self):
        space = SequenceSpace(("a", "b", "c"), 1)
        phi = joint_feature_sequence(np.array([[0.5, -1.0]]), LabelSequence("c"), space)
        np.testing.assert_array_equal(phi[:9], 0)
        np.testing.assert_array_equal(phi[9:], [0, 0, 0, 0, 0.5, -1.0])

    def test_length_matches_dimension(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            space = random_sequence_space(rng)
            d_x = int(rng.integers(1, 4))
            phi = joint_feature(rng.normal(size=(space.length, d_x)), random_output(rng, space), space)
            assert phi.shape == (feature_dimension(SequenceFeatures(space.n_labels, space.length, d_x)),)

    def test_decomposes_over_positions_and_edges(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            space = random_sequence_space(rng)
            A, L, d_x = space.n_labels, space.length, int(rng.integers(1, 4))
            x = rng.normal(size=(L, d_x))
            y = random_output(rng, space)
            codes = space.encode(y)
            expected = np.zeros(A * A + A * d_x)
            for t in range(L):
                node = np.zeros((A, d_x))
                node[codes[t]] = x[t]
                expected[A * A:] += node.ravel()
                if t + 1 < L:
                    edge = np.zeros((A, A))
                    edge[codes[t], codes[t + 1]] = 1.0
                    expected[:A * A] += edge.ravel()
            np.testing.assert_allclose(joint_feature(x, y, space), expected, atol=1e-12)

    def test_errors(self):
        with pytest.raises(DimensionError):
            joint_feature_sequence(np.ones((2, 1)), LabelSequence("aab"), self.space)
        with pytest.raises(DimensionError):
            joint_feature_sequence(np.ones((3, 1)), LabelSequence("aa"), self.space)
        with pytest.raises(InvalidOutputError):
            joint_feature_sequence(np.ones((3, 1)), LabelSequence("aaz"), self.space)


@pytest.mark.parametrize(
    "spec,m",
    [(TensorProduct(10, 15), 150), (SequenceFeatures(3, 9, 4), 21), (TensorProduct(1, 1), 1)],
)
def test_feature_dimension(spec, m):
    assert feature_dimension(spec) == m
