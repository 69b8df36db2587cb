"""Model contracts and loaders.

A model reaches the exporter in one of two ways:

- ``stub:FILE.json`` -- a declared-table stub, used for contract tests and
  dry runs. A captioner stub maps emitted-prefix keys to full next-token
  distributions; a classifier stub declares one posterior.
- ``module:factory`` -- any importable zero-argument factory returning a
  :class:`CaptionModel` or :class:`ClassifierModel`. This is the hook for
  real pretrained models; their weights, devices, and preprocessing stay
  entirely on the adapter's side of the line.

Captioner stub JSON:

    {"kind": "captioner",
     "tokens": ["<s>", "</s>", "a", "cat"],
     "eos": 1,
     "table": {"": [0.0, 0.1, 0.5, 0.4], "2": [0.0, 0.6, 0.1, 0.3]},
     "default": [0.0, 1.0, 0.0, 0.0]}

Table keys are space-joined emitted token ids ("" for the first step);
``default`` answers any prefix the table omits and may be left out, in
which case an unlisted prefix is an error.

Classifier stub JSON:

    {"kind": "classifier", "labels": ["cat", "dog"], "probs": [0.8, 0.2]}
"""

from __future__ import annotations

import abc
import importlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ExportError, InputError

STUB_PREFIX = "stub:"


class CaptionModel(abc.ABC):
    """What the export pipeline needs from a captioning model."""

    @property
    @abc.abstractmethod
    def tokens(self) -> tuple[str, ...]:
        """Output token inventory; ids are positions in this tuple."""

    @property
    @abc.abstractmethod
    def eos_id(self) -> int:
        """Id of the sequence-end token."""

    @abc.abstractmethod
    def encode_image(self, image: np.ndarray) -> object:
        """(h, w, 3) uint8 RGB pixels -> opaque conditioning state, computed
        once per image and passed back to every decoding step."""

    @abc.abstractmethod
    def next_distribution(self, encoded: object, prefix: Sequence[int]) -> Sequence[float]:
        """Probabilities over the whole inventory given the emitted prefix."""


class ClassifierModel(abc.ABC):
    """What the export pipeline needs from an image classifier."""

    @property
    @abc.abstractmethod
    def labels(self) -> tuple[str, ...]:
        """Class inventory, in posterior order."""

    @abc.abstractmethod
    def class_probs(self, image: np.ndarray) -> Sequence[float]:
        """Posterior over ``labels``; must sum to one."""


def _check_row(row, size: int, where: str) -> tuple[float, ...]:
    if not isinstance(row, list) or len(row) != size:
        raise InputError(f"{where}: expected a list of {size} probabilities")
    out = []
    for p in row:
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise InputError(f"{where}: non-numeric probability {p!r}")
        out.append(float(p))
    return tuple(out)


class TableStubCaptioner(CaptionModel):
    """Captioner with every distribution declared up front.

    The stub ignores pixel content: its job is to make the export pipeline
    fully predictable so the output can be checked against the table.
    """

    def __init__(self, obj: dict, source: str):
        tokens = obj.get("tokens")
        if not isinstance(tokens, list) or len(tokens) < 2:
            raise InputError(f"{source}: 'tokens' must list at least 2 token strings")
        if any(not isinstance(t, str) or not t for t in tokens):
            raise InputError(f"{source}: token strings must be non-empty")
        if len(set(tokens)) != len(tokens):
            raise InputError(f"{source}: duplicate token strings")
        eos = obj.get("eos")
        if not isinstance(eos, int) or isinstance(eos, bool) or not 0 <= eos < len(tokens):
            raise InputError(f"{source}: 'eos' must be a token id in 0..{len(tokens) - 1}")
        table = obj.get("table")
        if not isinstance(table, dict):
            raise InputError(f"{source}: 'table' must map prefix keys to distributions")
        self._tokens = tuple(tokens)
        self._eos = eos
        self._table = {
            key: _check_row(row, len(tokens), f"{source}: table[{key!r}]")
            for key, row in table.items()
        }
        self._default = (
            _check_row(obj["default"], len(tokens), f"{source}: default")
            if "default" in obj
            else None
        )
        self._source = source

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def eos_id(self) -> int:
        return self._eos

    def encode_image(self, image: np.ndarray) -> object:
        return None

    def next_distribution(self, encoded: object, prefix: Sequence[int]) -> Sequence[float]:
        key = " ".join(str(t) for t in prefix)
        dist = self._table.get(key, self._default)
        if dist is None:
            raise ExportError(f"{self._source}: no distribution for prefix {key!r}")
        return dist


class FixedStubClassifier(ClassifierModel):
    """Classifier that answers every image with one declared posterior."""

    def __init__(self, obj: dict, source: str):
        labels = obj.get("labels")
        if not isinstance(labels, list) or not labels:
            raise InputError(f"{source}: 'labels' must be a non-empty list")
        if any(not isinstance(lab, str) or not lab for lab in labels):
            raise InputError(f"{source}: labels must be non-empty strings")
        self._labels = tuple(labels)
        self._probs = _check_row(obj.get("probs"), len(labels), f"{source}: probs")

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    def class_probs(self, image: np.ndarray) -> Sequence[float]:
        return self._probs


def _load_stub(path: str) -> CaptionModel | ClassifierModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read stub {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"stub {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise InputError(f"stub {path} must be a JSON object")
    kind = obj.get("kind")
    if kind == "captioner":
        return TableStubCaptioner(obj, path)
    if kind == "classifier":
        return FixedStubClassifier(obj, path)
    raise InputError(f"stub {path}: 'kind' must be 'captioner' or 'classifier', got {kind!r}")


def load_model(identifier: str) -> CaptionModel | ClassifierModel:
    """Resolve a model identifier to a live adapter instance."""
    if identifier.startswith(STUB_PREFIX):
        return _load_stub(identifier[len(STUB_PREFIX):])
    module_name, sep, attr = identifier.partition(":")
    if not sep or not module_name or not attr:
        raise InputError(
            f"model identifier {identifier!r} must be 'stub:FILE.json' or 'module:factory'"
        )
    try:
        module = importlib.import_module(module_name)
    except ImportError as exc:
        raise InputError(f"cannot import adapter module {module_name!r}: {exc}") from exc
    try:
        factory = getattr(module, attr)
    except AttributeError as exc:
        raise InputError(f"module {module_name!r} has no attribute {attr!r}") from exc
    model = factory()
    if not isinstance(model, (CaptionModel, ClassifierModel)):
        raise InputError(
            f"{identifier!r} returned {type(model).__name__}, expected a"
            " CaptionModel or ClassifierModel"
        )
    return model
