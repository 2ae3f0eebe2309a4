"""Domain types: structured outputs, output spaces, datasets and training state.

Points are indexed from 0 in code. A dataset always stores its labeled points
first, so indices ``0 .. labeled_count - 1`` are labeled and the rest are not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DataError, DimensionError, InvalidOutputError

__all__ = [
    "TaxonomyLeaf",
    "LabelSequence",
    "StructuredOutput",
    "Taxonomy",
    "SequenceSpace",
    "OutputSpace",
    "DataPoint",
    "Dataset",
    "Neighborhood",
    "PredictorBank",
    "Hyperparameters",
    "AugmentedTargets",
    "TrainingState",
    "validate_dataset",
]


@dataclass(frozen=True)
class TaxonomyLeaf:
    leaf_id: str

    def __hash__(self) -> int:
        return hash(self.leaf_id)


@dataclass(frozen=True)
class LabelSequence:
    labels: tuple[str, ...]

    def __init__(self, labels: Iterable[str]):
        object.__setattr__(self, "labels", tuple(labels))

    def __len__(self) -> int:
        return len(self.labels)

    def __hash__(self) -> int:
        return hash(self.labels)


StructuredOutput = Union[TaxonomyLeaf, LabelSequence]


class Taxonomy:
    """A rooted tree whose leaves are the possible outputs.

    Each leaf carries an output code vector; all codes share the dimension
    ``d_y``. Without explicit codes the leaves are one-hot coded in pre-order.
    """

    def __init__(
        self,
        root: str,
        children: Mapping[str, Sequence[str]],
        codes: Mapping[str, Sequence[float]] | None = None,
    ):
        self.root = str(root)
        self.children: dict[str, tuple[str, ...]] = {
            str(k): tuple(str(c) for c in v) for k, v in children.items()
        }
        self.parent: dict[str, str | None] = {self.root: None}
        self.depth: dict[str, int] = {self.root: 0}
        order: list[str] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            order.append(node)
            kids = self.children.get(node, ())
            for kid in kids:
                if kid in self.parent:
                    raise DataError(f"taxonomy node {kid!r} appears more than once")
                self.parent[kid] = node
                self.depth[kid] = self.depth[node] + 1
            stack.extend(reversed(kids))
        unreachable = set(self.children) - set(self.parent)
        if unreachable:
            raise DataError(f"taxonomy nodes not reachable from root: {sorted(unreachable)}")
        self.nodes: tuple[str, ...] = tuple(order)
        self.leaves: tuple[str, ...] = tuple(n for n in order if not self.children.get(n))
        self.leaf_index = {leaf: i for i, leaf in enumerate(self.leaves)}

        self.height: dict[str, int] = {}
        for node in reversed(order):
            kids = self.children.get(node, ())
            self.height[node] = 1 + max(self.height[c] for c in kids) if kids else 0

        if codes is None:
            matrix = np.eye(len(self.leaves))
        else:
            extra = set(codes) - set(self.leaves)
            if extra:
                raise DataError(f"output codes given for non-leaf or unknown nodes: {sorted(extra)}")
            missing = [leaf for leaf in self.leaves if leaf not in codes]
            if missing:
                raise DataError(f"leaves without output code: {missing}")
            rows = [np.asarray(codes[leaf], dtype=float).ravel() for leaf in self.leaves]
            if len({r.shape[0] for r in rows}) != 1 or rows[0].shape[0] == 0:
                raise DataError("leaf output codes must share one positive dimension")
            matrix = np.vstack(rows)
        self.code_matrix = matrix
        self.code_matrix.setflags(write=False)

    @classmethod
    def from_nested(cls, tree: Mapping[str, Any]) -> "Taxonomy":
        """Build from ``{"id": ..., "children": [...], "code": [...]}`` nesting.

        ``code`` is only read on leaves; if any leaf has one, all must.
        """
        children: dict[str, list[str]] = {}
        codes: dict[str, list[float]] = {}

        def walk(node: Mapping[str, Any]) -> str:
            if "id" not in node:
                raise DataError("taxonomy node without 'id'")
            nid = str(node["id"])
            kids = node.get("children") or []
            if kids:
                children[nid] = [walk(k) for k in kids]
            elif node.get("code") is not None:
                codes[nid] = list(node["code"])
            return nid

        root = walk(tree)
        return cls(root, children, codes or None)

    def to_nested(self, include_codes: bool = True) -> dict[str, Any]:
        def walk(node: str) -> dict[str, Any]:
            out: dict[str, Any] = {"id": node}
            kids = self.children.get(node, ())
            if kids:
                out["children"] = [walk(k) for k in kids]
            elif include_codes:
                out["code"] = [float(v) for v in self.code_matrix[self.leaf_index[node]]]
            return out

        return walk(self.root)

    @classmethod
    def balanced(cls, depth: int, branching: int = 2) -> "Taxonomy":
        """Complete tree with ``branching ** depth`` leaves named by their path."""
        if depth < 1 or branching < 1:
            raise DataError("balanced taxonomy needs depth >= 1 and branching >= 1")
        children: dict[str, list[str]] = {}
        level = ["r"]
        for _ in range(depth):
            nxt = []
            for node in level:
                children[node] = [f"{node}.{b}" for b in range(branching)]
                nxt.extend(children[node])
            level = nxt
        return cls("r", children)

    @property
    def d_y(self) -> int:
        return int(self.code_matrix.shape[1])

    @property
    def size(self) -> int:
        return len(self.leaves)

    def is_leaf(self, node: str) -> bool:
        return node in self.leaf_index

    def code(self, leaf: str) -> np.ndarray:
        try:
            return self.code_matrix[self.leaf_index[leaf]]
        except KeyError:
            raise InvalidOutputError(f"unknown leaf {leaf!r}") from None

    def lca(self, a: str, b: str) -> str:
        for node in (a, b):
            if node not in self.parent:
                raise InvalidOutputError(f"unknown taxonomy node {node!r}")
        while self.depth[a] > self.depth[b]:
            a = self.parent[a]  # type: ignore[assignment]
        while self.depth[b] > self.depth[a]:
            b = self.parent[b]  # type: ignore[assignment]
        while a != b:
            a, b = self.parent[a], self.parent[b]  # type: ignore[assignment]
        return a

    def check(self, y: StructuredOutput) -> TaxonomyLeaf:
        if not isinstance(y, TaxonomyLeaf):
            raise InvalidOutputError(f"expected a taxonomy leaf, got {y!r}")
        if y.leaf_id not in self.leaf_index:
            raise InvalidOutputError(f"unknown leaf {y.leaf_id!r}")
        return y

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Taxonomy):
            return NotImplemented
        return (
            self.root == other.root
            and self.children == other.children
            and np.array_equal(self.code_matrix, other.code_matrix)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Taxonomy(root={self.root!r}, leaves={len(self.leaves)}, d_y={self.d_y})"


@dataclass(frozen=True)
class SequenceSpace:
    """All label sequences of a fixed length over an alphabet."""

    alphabet: tuple[str, ...]
    length: int

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(str(a) for a in self.alphabet))
        if not self.alphabet:
            raise DataError("sequence alphabet is empty")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise DataError("sequence alphabet has duplicate labels")
        if int(self.length) != self.length or self.length < 1:
            raise DataError(f"sequence length must be a positive integer, got {self.length!r}")
        object.__setattr__(self, "length", int(self.length))
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(self.alphabet)})

    @property
    def n_labels(self) -> int:
        return len(self.alphabet)

    @property
    def size(self) -> int:
        return self.n_labels**self.length

    def label_index(self, label: str) -> int:
        try:
            return self._index[label]  # type: ignore[attr-defined]
        except KeyError:
            raise InvalidOutputError(f"unknown label {label!r}") from None

    def encode(self, y: LabelSequence) -> tuple[int, ...]:
        self.check(y)
        return tuple(self._index[a] for a in y.labels)  # type: ignore[attr-defined]

    def decode(self, codes: Iterable[int]) -> LabelSequence:
        return LabelSequence(self.alphabet[c] for c in codes)

    def check(self, y: StructuredOutput) -> LabelSequence:
        if not isinstance(y, LabelSequence):
            raise InvalidOutputError(f"expected a label sequence, got {y!r}")
        if len(y.labels) != self.length:
            raise DimensionError(f"sequence length {len(y.labels)} != {self.length}")
        for a in y.labels:
            if a not in self._index:  # type: ignore[attr-defined]
                raise InvalidOutputError(f"unknown label {a!r}")
        return y


OutputSpace = Union[Taxonomy, SequenceSpace]


@dataclass(eq=False)
class DataPoint:
    """An input plus optional ground truth.

    Taxonomy inputs are vectors of shape ``(d_x,)``; sequence inputs hold one
    vector per position, shape ``(L, d_x)``.
    """

    input: np.ndarray
    truth: StructuredOutput | None = None

    def __post_init__(self):
        self.input = np.asarray(self.input, dtype=float)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DataPoint):
            return NotImplemented
        return (
            self.input.shape == other.input.shape
            and np.array_equal(self.input, other.input)
            and self.truth == other.truth
        )


@dataclass(eq=False)
class Dataset:
    points: list[DataPoint]
    labeled_count: int
    output_space: OutputSpace

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def inputs(self) -> list[np.ndarray]:
        return [p.input for p in self.points]

    @property
    def input_dim(self) -> int:
        """Per-position input dimension d_x."""
        return int(self.points[0].input.shape[-1])

    def input_matrix(self) -> np.ndarray:
        """Inputs flattened to one row per point, for distance computations."""
        return np.vstack([p.input.ravel() for p in self.points])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.labeled_count == other.labeled_count
            and self.output_space == other.output_space
            and self.points == other.points
        )


def validate_dataset(ds: Dataset) -> list[str]:
    """Return every invariant violation found in ``ds``; empty when valid."""
    problems: list[str] = []
    n = len(ds.points)
    space = ds.output_space
    if n == 0:
        return ["dataset has no points"]
    if not isinstance(ds.labeled_count, (int, np.integer)) or not 0 <= ds.labeled_count <= n:
        problems.append(f"labeled_count {ds.labeled_count!r} outside [0, {n}]")
    elif ds.labeled_count < 1:
        problems.append("no labeled points")

    expected_shape = None
    for i, p in enumerate(ds.points):
        x = p.input
        if isinstance(space, SequenceSpace):
            if x.ndim != 2 or x.shape[0] != space.length:
                problems.append(
                    f"point {i}: sequence input must have shape (L={space.length}, d_x), got {x.shape}"
                )
                continue
        elif x.ndim != 1:
            problems.append(f"point {i}: input must be a vector, got shape {x.shape}")
            continue
        if expected_shape is None:
            expected_shape = x.shape
        elif x.shape != expected_shape:
            problems.append(f"point {i}: input dimension {x.shape[-1]} != {expected_shape[-1]}")
        if x.size == 0:
            problems.append(f"point {i}: empty input")
        elif not np.all(np.isfinite(x)):
            problems.append(f"point {i}: non-finite input values")

    labeled = ds.labeled_count if isinstance(ds.labeled_count, (int, np.integer)) else 0
    for i, p in enumerate(ds.points):
        if i < labeled:
            if p.truth is None:
                problems.append(f"point {i}: labeled point missing truth")
                continue
        elif p.truth is not None:
            problems.append(f"point {i}: unlabeled point carries truth")
            continue
        if p.truth is not None:
            try:
                space.check(p.truth)
            except (InvalidOutputError, DimensionError) as exc:
                problems.append(f"point {i}: {exc}")
    return problems


@dataclass(frozen=True)
class Neighborhood:
    """The ``k`` nearest points to ``anchor``; ``members[0]`` is the anchor itself."""

    anchor: int
    members: tuple[int, ...]


class PredictorBank:
    """One weight vector per training point, stored as rows of an ``(n, m)`` array."""

    def __init__(self, weights: np.ndarray):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 2:
            raise DimensionError(f"predictor bank must be 2-D, got shape {weights.shape}")
        self.weights = weights

    @classmethod
    def zeros(cls, n: int, m: int) -> "PredictorBank":
        return cls(np.zeros((n, m)))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.weights[i]

    def copy(self) -> "PredictorBank":
        return PredictorBank(self.weights.copy())


@dataclass(frozen=True)
class Hyperparameters:
    k: int
    C: float = 1.0
    eta: float = 0.01
    T: int = 50
    eta_decay: float = 1.0

    def __post_init__(self):
        for name in ("C", "eta", "eta_decay"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if self.C < 0:
            raise ValueError("C must be >= 0")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError("T must be an integer >= 1")
        if not 0 < self.eta_decay <= 1:
            raise ValueError("eta_decay must lie in (0, 1]")

    def check_against(self, n: int) -> None:
        if self.k > n:
            raise ValueError(f"k={self.k} exceeds the number of points n={n}")


class AugmentedTargets:
    """Loss-augmented maximizers z*[i, j] for every neighborhood/member pair.

    Stored row by row: for each anchor ``i`` the members of its neighborhood,
    their targets and the hinge bound each target attains. Pairs are also
    reachable as ``aug[i, j]``. ``iteration`` stamps the outer iteration that
    produced the targets so stale ones can be detected.
    """

    def __init__(self, iteration: int = -1):
        self.iteration = iteration
        self._rows: dict[int, tuple[tuple[int, ...], list[StructuredOutput], np.ndarray]] = {}
        self._pos: dict[int, dict[int, int]] = {}
        self._codes: dict[int, np.ndarray] = {}

    def set_row(
        self,
        anchor: int,
        members: Sequence[int],
        targets: Sequence[StructuredOutput],
        bounds: Sequence[float],
        codes: np.ndarray | None = None,
    ) -> None:
        members = tuple(members)
        if len(targets) != len(members) or len(bounds) != len(members):
            raise DimensionError("members, targets and bounds must have equal length")
        self._rows[anchor] = (members, list(targets), np.asarray(bounds, dtype=float))
        self._pos[anchor] = {j: r for r, j in enumerate(members)}
        if codes is None:
            self._codes.pop(anchor, None)
        else:
            self._codes[anchor] = codes

    def row(self, anchor: int) -> tuple[tuple[int, ...], list[StructuredOutput]]:
        members, targets, _ = self._rows[anchor]
        return members, targets

    def codes(self, anchor: int) -> np.ndarray | None:
        """Target indices into the enumerated output list, when the producer cached them."""
        return self._codes.get(anchor)

    def bound(self, anchor: int, member: int) -> float:
        return float(self._rows[anchor][2][self._pos[anchor][member]])

    def __getitem__(self, key: tuple[int, int]) -> StructuredOutput:
        i, j = key
        try:
            return self._rows[i][1][self._pos[i][j]]
        except KeyError:
            raise KeyError(key) from None

    def __setitem__(self, key: tuple[int, int], z: StructuredOutput) -> None:
        i, j = key
        r = self._pos[i][j]
        self._rows[i][1][r] = z
        self._rows[i][2][r] = np.nan
        self._codes.pop(i, None)

    def __contains__(self, key: object) -> bool:
        if not isinstance(key, tuple) or len(key) != 2:
            return False
        i, j = key
        return i in self._pos and j in self._pos[i]

    def __len__(self) -> int:
        return sum(len(m) for m, _, _ in self._rows.values())

    def items(self):
        for i, (members, targets, _) in self._rows.items():
            for j, z in zip(members, targets):
                yield (i, j), z

    @property
    def table(self) -> dict[tuple[int, int], StructuredOutput]:
        return dict(self.items())


@dataclass
class TrainingState:
    predictors: PredictorBank
    outputs: list[StructuredOutput]
    augmented: AugmentedTargets = field(default_factory=AugmentedTargets)
    objective_trace: list[float] = field(default_factory=list)
    iteration: int = 0
