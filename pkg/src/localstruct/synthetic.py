"""Clustered synthetic datasets where each cluster follows its own linear rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import DataPoint, Dataset, LabelSequence, OutputSpace, SequenceSpace, Taxonomy, TaxonomyLeaf
from .errors import DataError
from .features import feature_dimension, feature_spec
from .inference import predict


@dataclass
class SyntheticSpec:
    """Generator settings.

    ``rule="opposed"`` gives cluster ``c`` the rule ``(-1)**c * w0`` for one
    shared random ``w0``; ``"independent"`` draws a fresh rule per cluster.
    Cluster centers sit at distance ``separation / 2`` from the origin along
    random directions (antipodal for two clusters). ``noise`` is the
    probability of replacing an output (or, for sequences, each label) with a
    uniformly random one.
    """

    clusters: int = 2
    points_per_cluster: int = 100
    d_x: int = 5
    output_space: dict[str, Any] = field(
        default_factory=lambda: {"type": "taxonomy", "depth": 3, "branching": 2}
    )
    noise: float = 0.0
    seed: int = 0
    rule: str = "opposed"
    separation: float = 6.0
    spread: float = 1.0

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise DataError(f"unknown synthetic spec fields: {sorted(unknown)}")
        return cls(**obj)

    def to_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def check(self) -> None:
        if self.clusters < 1 or self.points_per_cluster < 1 or self.d_x < 1:
            raise DataError("clusters, points_per_cluster and d_x must be positive")
        if not 0.0 <= self.noise <= 1.0:
            raise DataError("noise must lie in [0, 1]")
        if self.rule not in ("opposed", "independent"):
            raise DataError(f"unknown rule {self.rule!r}")
        if self.spread < 0 or self.separation < 0:
            raise DataError("spread and separation must be non-negative")


def cluster_rules(spec: SyntheticSpec, space: OutputSpace, rng: np.random.Generator) -> np.ndarray:
    m = feature_dimension(feature_spec(space, spec.d_x))
    if spec.rule == "opposed":
        w0 = rng.normal(size=m)
        return np.stack([w0 if c % 2 == 0 else -w0 for c in range(spec.clusters)])
    return rng.normal(size=(spec.clusters, m))


def _centers(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    u = rng.normal(size=(spec.clusters, spec.d_x))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if spec.clusters == 2:
        u[1] = -u[0]
    return 0.5 * spec.separation * u


def generate_synthetic(spec: SyntheticSpec | dict[str, Any]) -> tuple[Dataset, np.ndarray]:
    """Fully labeled dataset plus the cluster index of every point."""
    from .files import space_from_json

    if isinstance(spec, dict):
        spec = SyntheticSpec.from_dict(spec)
    spec.check()
    space = space_from_json(spec.output_space, "synthetic output_space")
    rng = np.random.default_rng(spec.seed)
    rules = cluster_rules(spec, space, rng)
    centers = _centers(spec, rng)

    points = []
    cluster_of = []
    for c in range(spec.clusters):
        for _ in range(spec.points_per_cluster):
            if isinstance(space, SequenceSpace):
                x = centers[c] + spec.spread * rng.normal(size=(space.length, spec.d_x))
            else:
                x = centers[c] + spec.spread * rng.normal(size=spec.d_x)
            y = predict(rules[c], x, space)
            y = _corrupt(y, space, spec.noise, rng)
            points.append(DataPoint(x, y))
            cluster_of.append(c)
    return Dataset(points, len(points), space), np.asarray(cluster_of)


def _corrupt(y, space: OutputSpace, noise: float, rng: np.random.Generator):
    if noise == 0.0:
        return y
    if isinstance(space, Taxonomy):
        if rng.random() < noise:
            return TaxonomyLeaf(space.leaves[rng.integers(space.size)])
        return y
    labels = [
        space.alphabet[rng.integers(space.n_labels)] if rng.random() < noise else a
        for a in y.labels
    ]
    return LabelSequence(labels)
