"""JSON file formats for datasets, trained models and output spaces.

Dataset file::

    {
      "format": "localstruct.dataset/1",
      "output_space": <space>,
      "labeled_count": 2,
      "points": [{"x": [...], "y": <output>}, ..., {"x": [...]}]
    }

``<space>`` is either ``{"type": "taxonomy", "tree": <node>}`` where a node is
``{"id": str, "children": [<node>, ...]}`` and leaves may carry
``"code": [float, ...]``, or ``{"type": "sequence", "alphabet": [str, ...],
"length": int}``. A taxonomy output is the leaf id; a sequence output is a
list of labels, and its input ``x`` is a list of per-position vectors.
Labeled points come first and carry ``y``; the rest must not.

Model file::

    {
      "format": "localstruct.model/1",
      "output_space": <space>, "backend": str, "loss": str,
      "hyperparameters": {...},
      "anchors": [<input>, ...], "weights": [[float, ...], ...]
    }
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .core import (
    DataPoint,
    Dataset,
    LabelSequence,
    OutputSpace,
    SequenceSpace,
    StructuredOutput,
    Taxonomy,
    TaxonomyLeaf,
    validate_dataset,
)
from .errors import DataError
from .trainer import LocalModel

DATASET_FORMAT = "localstruct.dataset/1"
MODEL_FORMAT = "localstruct.model/1"


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def space_to_json(space: OutputSpace) -> dict[str, Any]:
    if isinstance(space, Taxonomy):
        return {"type": "taxonomy", "tree": space.to_nested()}
    return {"type": "sequence", "alphabet": list(space.alphabet), "length": space.length}


def space_from_json(obj: Any, where: str = "output_space") -> OutputSpace:
    if not isinstance(obj, dict) or "type" not in obj:
        raise DataError(f"{where}: expected an object with a 'type' field")
    kind = obj["type"]
    try:
        if kind == "taxonomy":
            if "tree" in obj:
                return Taxonomy.from_nested(obj["tree"])
            return Taxonomy.balanced(int(obj["depth"]), int(obj.get("branching", 2)))
        if kind == "sequence":
            return SequenceSpace(tuple(obj["alphabet"]), int(obj["length"]))
    except KeyError as exc:
        raise DataError(f"{where}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}: {exc}") from None
    raise DataError(f"{where}: unknown output space type {kind!r}")


def output_to_json(y: StructuredOutput) -> Any:
    if isinstance(y, TaxonomyLeaf):
        return y.leaf_id
    return list(y.labels)


def output_from_json(obj: Any, space: OutputSpace, where: str) -> StructuredOutput:
    if isinstance(space, Taxonomy):
        if not isinstance(obj, str):
            raise DataError(f"{where}: taxonomy output must be a leaf id string")
        return TaxonomyLeaf(obj)
    if not isinstance(obj, list) or not all(isinstance(a, str) for a in obj):
        raise DataError(f"{where}: sequence output must be a list of labels")
    return LabelSequence(obj)


def dataset_to_json(ds: Dataset) -> dict[str, Any]:
    points = []
    for p in ds.points:
        rec: dict[str, Any] = {"x": p.input.tolist()}
        if p.truth is not None:
            rec["y"] = output_to_json(p.truth)
        points.append(rec)
    return {
        "format": DATASET_FORMAT,
        "output_space": space_to_json(ds.output_space),
        "labeled_count": ds.labeled_count,
        "points": points,
    }


def dataset_from_json(obj: Any, source: str = "<data>", validate: bool = True) -> Dataset:
    if not isinstance(obj, dict):
        raise DataError(f"{source}: top level must be an object")
    fmt = obj.get("format", DATASET_FORMAT)
    if fmt != DATASET_FORMAT:
        raise DataError(f"{source}: unsupported format {fmt!r}")
    space = space_from_json(obj.get("output_space"), f"{source}: output_space")
    raw_points = obj.get("points")
    if not isinstance(raw_points, list):
        raise DataError(f"{source}: 'points' must be a list")
    points = []
    for i, rec in enumerate(raw_points):
        where = f"{source}: points[{i}]"
        if not isinstance(rec, dict) or "x" not in rec:
            raise DataError(f"{where}: expected an object with 'x'")
        try:
            x = np.asarray(rec["x"], dtype=float)
        except (TypeError, ValueError):
            raise DataError(f"{where}.x: not a numeric array") from None
        truth = output_from_json(rec["y"], space, f"{where}.y") if rec.get("y") is not None else None
        points.append(DataPoint(x, truth))
    labeled = obj.get("labeled_count", sum(p.truth is not None for p in points))
    if not isinstance(labeled, int):
        raise DataError(f"{source}: labeled_count must be an integer")
    ds = Dataset(points, labeled, space)
    if validate:
        problems = validate_dataset(ds)
        if problems:
            raise DataError(f"{source}: invalid dataset: " + "; ".join(problems))
    return ds


def save_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataset_to_json(ds), indent=1) + "\n")


def load_dataset(path: str | Path, validate: bool = True) -> Dataset:
    return dataset_from_json(read_json(path), str(path), validate)


def save_model(model: LocalModel, path: str | Path) -> None:
    obj = {
        "format": MODEL_FORMAT,
        "output_space": space_to_json(model.space),  # type: ignore[arg-type]
        "backend": model.backend,
        "loss": model.loss_name,
        "hyperparameters": model.hyperparameters,
        "anchors": model.anchors.tolist(),
        "weights": model.weights.tolist(),
    }
    Path(path).write_text(json.dumps(obj) + "\n")


def load_model(path: str | Path) -> LocalModel:
    obj = read_json(path)
    if not isinstance(obj, dict) or obj.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not a {MODEL_FORMAT} file")
    try:
        anchors = np.asarray(obj["anchors"], dtype=float)
        weights = np.asarray(obj["weights"], dtype=float)
        space = space_from_json(obj["output_space"], f"{path}: output_space")
    except KeyError as exc:
        raise DataError(f"{path}: missing field {exc.args[0]!r}") from None
    if weights.ndim != 2 or len(anchors) != len(weights):
        raise DataError(f"{path}: anchors and weights must pair up one-to-one")
    return LocalModel(
        anchors=anchors,
        weights=weights,
        space=space,
        backend=obj.get("backend", "auto"),
        loss_name=obj.get("loss", "default"),
        hyperparameters=obj.get("hyperparameters", {}),
    )
