"""Examples, vocabularies and the feature x class frequency matrix."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError


@dataclass(frozen=True)
class LabeledExample:
    """A set of active feature ids and a class id.

    ``features`` is normalised to a sorted tuple of unique ints. ``label``
    may be None for unlabeled prediction input.
    """

    features: tuple
    label: int | None = None

    def __post_init__(self):
        feats = tuple(sorted({int(f) for f in self.features}))
        object.__setattr__(self, "features", feats)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))


def _natural_key(name: str):
    try:
        return (0, int(name), name)
    except ValueError:
        return (1, 0, name)


class Vocabulary:
    """Bidirectional name <-> id maps for features and classes.

    Ids are dense: features in ``[0, M)``, classes in ``[0, W)``.
    """

    def __init__(self, feature_names: Sequence[str], class_names: Sequence[str]):
        self.feature_names = list(feature_names)
        self.class_names = list(class_names)
        self.feature_index = {n: i for i, n in enumerate(self.feature_names)}
        self.class_index = {n: j for j, n in enumerate(self.class_names)}
        if len(self.feature_index) != len(self.feature_names):
            raise ValidationError("duplicate feature names in vocabulary")
        if len(self.class_index) != len(self.class_names):
            raise ValidationError("duplicate class names in vocabulary")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.n_features, self.n_classes)

    @classmethod
    def build(cls, records, feature_names: Sequence[str] | None = None) -> "Vocabulary":
        """Collect a vocabulary from raw records.

        Feature names are sorted unless an explicit ordering is given (dense
        CSV columns). Class names sort numerically when they look like ints.
        """
        labels = set()
        feats = set()
        for rec in records:
            if rec.label is not None:
                labels.add(rec.label)
            if feature_names is None:
                feats.update(rec.features)
        if feature_names is None:
            feature_names = sorted(feats)
        return cls(feature_names, sorted(labels, key=_natural_key))

    def encode(self, rec, require_label: bool = True) -> LabeledExample:
        """Map a raw record to ids. Unknown features are dropped."""
        ids = [self.feature_index[f] for f in rec.features if f in self.feature_index]
        label = None
        if rec.label is not None:
            if rec.label not in self.class_index:
                raise ValidationError(f"unknown class {rec.label!r}", line=rec.line)
            label = self.class_index[rec.label]
        elif require_label:
            raise ValidationError("record has no label", line=rec.line)
        return LabeledExample(ids, label)

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (self.feature_names == other.feature_names
                and self.class_names == other.class_names)

    def __repr__(self):
        return f"Vocabulary(M={self.n_features}, W={self.n_classes})"


@dataclass
class Dataset:
    examples: list
    vocab: Vocabulary

    def __len__(self):
        return len(self.examples)

    def __iter__(self) -> Iterator[LabeledExample]:
        return iter(self.examples)

    @property
    def labels(self) -> np.ndarray:
        return np.fromiter((ex.label for ex in self.examples), dtype=np.int64,
                           count=len(self.examples))

    def indicator(self) -> sp.csr_matrix:
        """Binary n x M example-by-feature matrix."""
        return indicator_matrix(self.examples, self.vocab.n_features)


def indicator_matrix(examples: Sequence[LabeledExample], n_features: int) -> sp.csr_matrix:
    """Rows are examples, columns features; ids >= ``n_features`` are skipped."""
    lengths = np.fromiter((len(ex.features) for ex in examples), dtype=np.int64,
                          count=len(examples))
    indptr = np.zeros(len(examples) + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    indices = np.fromiter((f for ex in examples for f in ex.features),
                          dtype=np.int64, count=int(indptr[-1]))
    keep = (indices >= 0) & (indices < n_features)
    if not keep.all():
        row = np.repeat(np.arange(len(examples)), lengths)[keep]
        data = np.ones(int(keep.sum()))
        return sp.csr_matrix((data, (row, indices[keep])),
                             shape=(len(examples), n_features))
    data = np.ones(len(indices))
    return sp.csr_matrix((data, indices, indptr), shape=(len(examples), n_features))


@dataclass(frozen=True, eq=False)
class FrequencyMatrix:
    """Sparse co-occurrence counts ``N_ij`` with cached marginals.

    ``counts`` is an M x W CSR matrix of int64 with canonical (sorted,
    duplicate-free) indices and no explicit zeros.
    """

    counts: sp.csr_matrix
    row_marginals: np.ndarray = field(repr=False)
    col_marginals: np.ndarray = field(repr=False)
    total: int

    @classmethod
    def from_counts(cls, counts) -> "FrequencyMatrix":
        c = sp.csr_matrix(counts, dtype=np.int64)
        c.sum_duplicates()
        c.eliminate_zeros()
        c.sort_indices()
        if c.nnz and c.data.min() < 0:
            raise ValidationError("negative count")
        rows = np.asarray(c.sum(axis=1), dtype=np.int64).ravel()
        cols = np.asarray(c.sum(axis=0), dtype=np.int64).ravel()
        return cls(c, rows, cols, int(c.data.sum()))

    @classmethod
    def zeros(cls, dims) -> "FrequencyMatrix":
        return cls.from_counts(sp.csr_matrix(tuple(dims), dtype=np.int64))

    @property
    def dims(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def n_features(self) -> int:
        return self.counts.shape[0]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def nnz(self) -> int:
        return self.counts.nnz

    def merge(self, other: "FrequencyMatrix") -> "FrequencyMatrix":
        if self.dims != other.dims:
            raise ValidationError(f"dimension mismatch {self.dims} vs {other.dims}")
        return FrequencyMatrix.from_counts(self.counts + other.counts)

    def to_dense(self) -> np.ndarray:
        return self.counts.toarray()

    def __eq__(self, other):
        if not isinstance(other, FrequencyMatrix):
            return NotImplemented
        return (self.dims == other.dims and self.total == other.total
                and np.array_equal(self.counts.indptr, other.counts.indptr)
                and np.array_equal(self.counts.indices, other.counts.indices)
                and np.array_equal(self.counts.data, other.counts.data)
                and np.array_equal(self.row_marginals, other.row_marginals)
                and np.array_equal(self.col_marginals, other.col_marginals))


@dataclass(frozen=True)
class Binarizer:
    epsilon: float = 0.5
    layout: str = "dense_numeric"

    def __post_init__(self):
        if not math.isfinite(self.epsilon):
            raise ValidationError("epsilon must be finite")
        if self.layout not in ("dense_numeric", "sparse_tokens"):
            raise ValidationError(f"unknown layout {self.layout!r}")

    def __call__(self, raw) -> set:
        return binarize(raw, self.epsilon)


def binarize(raw, epsilon: float) -> set:
    """Indices of ``raw`` whose value reaches ``epsilon`` (inclusive)."""
    x = np.asarray(raw, dtype=float)
    if np.isnan(x).any():
        raise ValidationError("NaN in feature vector")
    return set(np.flatnonzero(x >= epsilon).tolist())


def _count_shard(examples: Sequence[LabeledExample], dims, offset: int) -> FrequencyMatrix:
    M, W = dims
    lengths = np.fromiter((len(ex.features) for ex in examples), dtype=np.int64,
                          count=len(examples))
    feats = np.fromiter((f for ex in examples for f in ex.features), dtype=np.int64,
                        count=int(lengths.sum()))
    labels = np.empty(len(examples), dtype=np.int64)
    for k, ex in enumerate(examples):
        if ex.label is None:
            raise ValidationError("example has no label", line=offset + k + 1)
        labels[k] = ex.label
    bad_label = (labels < 0) | (labels >= W)
    if bad_label.any():
        k = int(np.flatnonzero(bad_label)[0])
        raise ValidationError(f"class id {labels[k]} outside [0, {W})", line=offset + k + 1)
    bad_feat = (feats < 0) | (feats >= M)
    if bad_feat.any():
        pos = int(np.flatnonzero(bad_feat)[0])
        k = int(np.searchsorted(np.cumsum(lengths), pos, side="right"))
        raise ValidationError(f"feature id {feats[pos]} outside [0, {M})",
                              line=offset + k + 1)
    cls = np.repeat(labels, lengths)
    flat = np.bincount(feats * W + cls, minlength=M * W) if M * W <= 1 << 24 else None
    if flat is not None:
        return FrequencyMatrix.from_counts(sp.csr_matrix(flat.reshape(M, W)))
    coo = sp.coo_matrix((np.ones(len(feats), dtype=np.int64), (feats, cls)), shape=(M, W))
    return FrequencyMatrix.from_counts(coo)


def ingest(examples: Iterable[LabeledExample], dims, shards: int = 1,
           threads: int | None = None) -> FrequencyMatrix:
    """Count one event per (active feature, example label) pair.

    The stream is split into ``shards`` contiguous pieces that are counted
    independently (on up to ``threads`` workers) and merged in order, so
    the result does not depend on either number. Out-of-range ids raise
    :class:`ValidationError` carrying the 1-based record number.
    """
    examples = list(examples)
    dims = (int(dims[0]), int(dims[1]))
    if not examples:
        return FrequencyMatrix.zeros(dims)
    shards = max(1, min(int(shards), len(examples)))
    bounds = np.linspace(0, len(examples), shards + 1).astype(int)
    pieces = [(examples[a:b], dims, int(a)) for a, b in zip(bounds[:-1], bounds[1:])]
    if shards == 1:
        return _count_shard(*pieces[0])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda args: _count_shard(*args), pieces))
    result = parts[0]
    for part in parts[1:]:
        result = result.merge(part)
    return result


@dataclass(frozen=True)
class ConflictGroup:
    features: tuple
    indices: tuple
    labels: tuple


def find_conflicts(examples: Sequence[LabeledExample]) -> list[ConflictGroup]:
    """Groups of examples sharing a feature set but carrying different labels."""
    groups: dict[tuple, list[int]] = {}
    for k, ex in enumerate(examples):
        groups.setdefault(ex.features, []).append(k)
    out = []
    for feats, idx in groups.items():
        labels = tuple(examples[k].label for k in idx)
        if len(set(labels)) > 1:
            out.append(ConflictGroup(feats, tuple(idx), labels))
    out.sort(key=lambda g: g.indices[0])
    return out


def feature_group_stats(freq: FrequencyMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per feature: number of classes it was seen with, and its total count."""
    w_g = np.diff(freq.counts.indptr).astype(np.int64)
    return w_g, freq.row_marginals.copy()
