"""The trained artifact: information weights, class bias, scoring and prediction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Vocabulary, indicator_matrix
from .errors import ValidationError
from .info_math import EmergenceConfig

ACTIVATIONS = ("identity", "softmax")


@dataclass(frozen=True, eq=False)
class InfoModel:
    """Sparse M x W weights in bits plus a length-W bias vector.

    Instances are treated as immutable; training returns new models.
    ``provenance`` holds JSON-serialisable build metadata.
    """

    weights: sp.csr_matrix
    bias: np.ndarray
    vocab: Vocabulary
    emergence: EmergenceConfig = field(default_factory=EmergenceConfig)
    activation: str = "identity"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        w = sp.csr_matrix(self.weights, dtype=np.float64)
        w.sum_duplicates()
        w.sort_indices()
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", np.ascontiguousarray(self.bias, dtype=np.float64))
        if w.shape != self.vocab.dims:
            raise ValidationError(f"weights shape {w.shape} != vocabulary dims {self.vocab.dims}")
        if self.bias.shape != (self.vocab.n_classes,):
            raise ValidationError("bias length must equal the class count")
        if not (np.isfinite(w.data).all() and np.isfinite(self.bias).all()):
            raise ValidationError("weights and bias must be finite")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    @property
    def nnz(self) -> int:
        return self.weights.nnz

    def replace(self, **changes) -> "InfoModel":
        fields = dict(weights=self.weights, bias=self.bias, vocab=self.vocab,
                      emergence=self.emergence, activation=self.activation,
                      provenance=dict(self.provenance))
        fields.update(changes)
        return InfoModel(**fields)

    def with_bias(self, bias) -> "InfoModel":
        bias = np.broadcast_to(np.asarray(bias, dtype=np.float64), (self.n_classes,))
        return self.replace(bias=bias.copy())

    def __eq__(self, other):
        if not isinstance(other, InfoModel):
            return NotImplemented
        a, b = self.weights, other.weights
        return (a.shape == b.shape
                and np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices)
                and a.data.tobytes() == b.data.tobytes()
                and self.bias.tobytes() == other.bias.tobytes()
                and self.vocab == other.vocab
                and self.emergence == other.emergence
                and self.activation == other.activation
                and self.provenance == other.provenance)


@dataclass(frozen=True)
class Prediction:
    class_id: int
    score: float
    ranking: tuple
    probability: float | None = None


def score(model: InfoModel, features: Iterable[int]) -> np.ndarray:
    """Summed weights of the active features plus bias, per class.

    Feature ids outside the model are ignored.
    """
    M = model.n_features
    ids = sorted({int(f) for f in features if 0 <= int(f) < M})
    s = model.bias.copy()
    if ids:
        s += np.asarray(model.weights[ids].sum(axis=0)).ravel()
    return s


def score_many(model: InfoModel, examples: Sequence) -> np.ndarray:
    """Score matrix of shape (n_examples, W)."""
    if len(examples) == 0:
        return np.zeros((0, model.n_classes))
    X = indicator_matrix(examples, model.n_features)
    return np.asarray((X @ model.weights).todense()) + model.bias


def activate(scores: np.ndarray, activation: str) -> np.ndarray:
    """Apply the activation along the last axis.

    ``softmax`` is taken in base 2, so it reads as a probability over
    classes when scores are in bits.
    """
    if activation == "identity":
        return scores
    if activation == "softmax":
        z = np.exp2(scores - scores.max(axis=-1, keepdims=True))
        return z / z.sum(axis=-1, keepdims=True)
    raise ValidationError(f"unknown activation {activation!r}")


def argmax_lowest(values: np.ndarray) -> np.ndarray:
    # np.argmax already returns the first maximum, which is the lowest class id.
    return np.argmax(values, axis=-1)


def decide(scores: np.ndarray) -> np.ndarray:
    """Winning class per score row.

    Both activations are strictly increasing, so the argmax of the activated
    scores is the argmax of the raw scores. Taking it on the raw scores
    avoids ties that floating-point rounding of the softmax would create.
    """
    return argmax_lowest(scores)


def rank(scores: np.ndarray, k: int) -> tuple:
    order = np.lexsort((np.arange(len(scores)), -scores))[:k]
    return tuple((int(j), float(scores[j])) for j in order)


def predict(model: InfoModel, features: Iterable[int], k: int = 1) -> Prediction:
    if k < 1:
        raise ValidationError("k must be >= 1")
    s = score(model, features)
    j = int(decide(s))
    prob = float(activate(s, "softmax")[j]) if model.activation == "softmax" else None
    return Prediction(j, float(s[j]), rank(s, k), prob)


def predict_many(model: InfoModel, examples: Sequence) -> np.ndarray:
    """Predicted class ids for a batch."""
    return decide(score_many(model, examples))


def top_weights(model: InfoModel, n: int = 10) -> list[list[tuple[int, float]]]:
    """For every class, the ``n`` largest weights as (feature id, bits)."""
    csc = model.weights.tocsc()
    out = []
    for j in range(model.n_classes):
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        rows, vals = csc.indices[lo:hi], csc.data[lo:hi]
        order = np.lexsort((rows, -vals))[:n]
        out.append([(int(rows[o]), float(vals[o])) for o in order])
    return out


def inspect_text(model: InfoModel, n: int = 10) -> str:
    """Human-readable audit listing of the strongest weights per class."""
    v = model.vocab
    prov = model.provenance
    lines = [
        f"features (M): {model.n_features}",
        f"classes (W): {model.n_classes}",
        f"nonzero weights: {model.nnz}",
        f"emergence: {model.emergence.mode} (z={model.emergence.z}, psi_min={model.emergence.psi_min})",
        f"activation: {model.activation}",
    ]
    for key in ("N", "smoothing", "psi", "m_iterations", "built_at"):
        if key in prov:
            lines.append(f"{key}: {prov[key]}")
    if prov.get("psi_clamped"):
        lines.append(f"WARNING: global psi was clamped to 1 (raw value {prov.get('psi_raw')})")
    degenerate = prov.get("degenerate_features") or []
    if degenerate:
        names = ", ".join(v.feature_names[i] for i in degenerate[:20])
        more = f" (+{len(degenerate) - 20} more)" if len(degenerate) > 20 else ""
        lines.append(
            f"WARNING: {len(degenerate)} feature(s) seen in a single class have "
            f"per-group psi 0 and carry no weight: {names}{more}")
    for j, top in enumerate(top_weights(model, n)):
        lines.append("")
        lines.append(f"class {v.class_names[j]} (bias {model.bias[j]:.6f})")
        for i, w in top:
            lines.append(f"  {w:+.6f}\t{v.feature_names[i]}")
    return "\n".join(lines) + "\n"
