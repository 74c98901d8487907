"""Readers for the two on-disk dataset formats.

* sparse JSON lines: ``{"features": ["tok", ...], "label": "name"}`` per line
* dense CSV: header row, a ``label`` column, every other column numeric

Both readers open ``.gz`` files transparently, report malformed lines by
line number and skip at most ``max_errors`` of them.
"""
from __future__ import annotations

import csv
import gzip
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import Dataset, Vocabulary
from .errors import ValidationError

log = logging.getLogger(__name__)

LABEL_COLUMN = "label"
FORMATS = ("jsonl", "csv")
FORMAT_ALIASES = {"sparse_jsonl": "jsonl", "dense_csv": "csv"}


@dataclass
class RawRecord:
    features: list
    label: str | None
    line: int


@dataclass
class ReadResult:
    records: list
    feature_names: list | None = None
    epsilon: float | None = None
    skipped: list = field(default_factory=list)


def _open_text(path):
    path = str(path)
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


class _ErrorBudget:
    def __init__(self, max_errors: int):
        self.max_errors = max_errors
        self.errors: list[ValidationError] = []

    def record(self, err: ValidationError):
        self.errors.append(err)
        if len(self.errors) > self.max_errors:
            raise err
        log.warning("skipping malformed record: %s", err)


def read_jsonl(path, max_errors: int = 0, require_label: bool = True) -> ReadResult:
    budget = _ErrorBudget(max_errors)
    records = []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(_parse_json_record(line, lineno, require_label))
            except ValidationError as err:
                budget.record(err)
    return ReadResult(records, skipped=budget.errors)


def _parse_json_record(line: str, lineno: int, require_label: bool) -> RawRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg})", line=lineno) from None
    if not isinstance(obj, dict):
        raise ValidationError("record is not a JSON object", line=lineno)
    feats = obj.get("features")
    if not isinstance(feats, list) or not all(isinstance(f, str) for f in feats):
        raise ValidationError("'features' must be a list of strings", line=lineno)
    label = obj.get("label")
    if label is None:
        if require_label:
            raise ValidationError("missing 'label'", line=lineno)
    elif isinstance(label, (str, int)) and not isinstance(label, bool):
        label = str(label)
    else:
        raise ValidationError("'label' must be a string", line=lineno)
    if require_label and not feats:
        raise ValidationError("training record has no features", line=lineno)
    return RawRecord(sorted(set(feats)), label, lineno)


def read_csv(path, epsilon: float | None = None, max_errors: int = 0,
             require_label: bool = True) -> ReadResult:
    """Read dense numeric rows and binarize them at ``epsilon``.

    When ``epsilon`` is None it is 128 if any value exceeds 1 (byte-range
    pixels) and 0.5 otherwise.
    """
    budget = _ErrorBudget(max_errors)
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return ReadResult([], [], epsilon)
        header = [h.strip() for h in header]
        has_label = LABEL_COLUMN in header
        if require_label and not has_label:
            raise ValidationError(f"no '{LABEL_COLUMN}' column in header", line=1)
        label_pos = header.index(LABEL_COLUMN) if has_label else None
        feat_pos = [k for k, h in enumerate(header) if k != label_pos]
        feature_names = [header[k] for k in feat_pos]
        if len(set(feature_names)) != len(feature_names):
            raise ValidationError("duplicate column names in header", line=1)
        width = len(header)
        rows, labels, lines = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                budget.record(ValidationError(
                    f"expected {width} fields, got {len(row)}", line=lineno))
                continue
            try:
                values = np.array([row[k] for k in feat_pos], dtype=float)
            except ValueError:
                budget.record(ValidationError("non-numeric feature value", line=lineno))
                continue
            if not np.isfinite(values).all():
                budget.record(ValidationError("non-finite feature value", line=lineno))
                continue
            label = row[label_pos].strip() if has_label else None
            if require_label and not label:
                budget.record(ValidationError("empty label", line=lineno))
                continue
            rows.append(values)
            labels.append(label or None)
            lines.append(lineno)
    if epsilon is None:
        epsilon = 128.0 if rows and max(float(r.max(initial=0.0)) for r in rows) > 1 else 0.5
    records = []
    names = np.asarray(feature_names, dtype=object)
    for values, label, lineno in zip(rows, labels, lines):
        active = names[values >= epsilon].tolist()
        records.append(RawRecord(active, label, lineno))
    return ReadResult(records, feature_names, float(epsilon), budget.errors)


def read_records(path, fmt: str, epsilon: float | None = None, max_errors: int = 0,
                 require_label: bool = True) -> ReadResult:
    fmt = FORMAT_ALIASES.get(fmt, fmt)
    if fmt == "jsonl":
        return read_jsonl(path, max_errors=max_errors, require_label=require_label)
    if fmt == "csv":
        return read_csv(path, epsilon=epsilon, max_errors=max_errors,
                        require_label=require_label)
    raise ValidationError(f"unknown format {fmt!r}")


def guess_format(path) -> str:
    name = str(path).lower().removesuffix(".gz")
    return "csv" if name.endswith(".csv") else "jsonl"


def load_training_set(path, fmt: str, epsilon: float | None = None,
                      max_errors: int = 0) -> tuple[Dataset, ReadResult]:
    """Read a labeled file and build its (frozen) vocabulary."""
    result = read_records(path, fmt, epsilon=epsilon, max_errors=max_errors)
    if not result.records:
        raise ValidationError("empty dataset")
    vocab = Vocabulary.build(result.records, feature_names=result.feature_names)
    examples = [vocab.encode(r) for r in result.records]
    return Dataset(examples, vocab), result


def encode_records(records, vocab: Vocabulary, require_label: bool) -> Dataset:
    return Dataset([vocab.encode(r, require_label=require_label) for r in records], vocab)
