"""Closed-form weight construction (E-step) and F-measure driven correction (M-step)."""
from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import info_math
from .corpus import Dataset, FrequencyMatrix, Vocabulary, feature_group_stats, find_conflicts, ingest
from .errors import DomainError, ValidationError
from .info_math import EmergenceConfig
from .model import InfoModel, decide, score_many

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    emergence: EmergenceConfig = field(default_factory=EmergenceConfig)
    smoothing: float = 0.0
    beta: float = 1.0
    margin: float = 0.1
    max_m_iters: int = 10
    tolerance: float = 1e-6
    activation: str = "identity"
    shards: int = 1
    threads: int | None = None

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValidationError(f"beta must lie in (0, 1], got {self.beta}")
        if self.smoothing < 0 or not math.isfinite(self.smoothing):
            raise ValidationError("smoothing must be a finite value >= 0")
        if self.margin <= 0:
            raise ValidationError("margin must be > 0")
        if self.max_m_iters < 0:
            raise ValidationError("max_m_iters must be >= 0")
        if self.tolerance < 0:
            raise ValidationError("tolerance must be >= 0")


@dataclass
class EvalReport:
    class_names: list
    precision: list
    recall: list
    f_beta: list
    support: list
    confusion: list
    beta: float
    mean_f: float
    accuracy: float
    n: int

    def to_dict(self) -> dict:
        per_class = {
            name: {"precision": self.precision[j], "recall": self.recall[j],
                   "f_beta": self.f_beta[j], "support": self.support[j]}
            for j, name in enumerate(self.class_names)
        }
        return {
            "n": self.n,
            "beta": self.beta,
            "E_F_micro": self.mean_f,
            "accuracy": self.accuracy,
            "classes": self.class_names,
            "per_class": per_class,
            "confusion": self.confusion,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def f_beta(precision: float, recall: float, beta: float = 1.0) -> float:
    """Van Rijsbergen F-measure, ``(1 + b^2) P R / (b^2 P + R)``."""
    if beta <= 0:
        raise ValidationError("beta must be > 0")
    b2 = beta * beta
    denom = b2 * precision + recall
    if denom == 0:
        return 0.0
    return (1.0 + b2) * precision * recall / denom


def report_from_predictions(y_true, y_pred, class_names, beta: float = 1.0) -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ValidationError("empty dataset")
    W = len(class_names)
    confusion = np.bincount(y_true * W + y_pred, minlength=W * W).reshape(W, W)
    tp = np.diag(confusion)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    precision = [float(tp[j] / predicted[j]) if predicted[j] else 0.0 for j in range(W)]
    recall = [float(tp[j] / support[j]) if support[j] else 0.0 for j in range(W)]
    f = [f_beta(p, r, beta) for p, r in zip(precision, recall)]
    observed = [j for j in range(W) if support[j] > 0]
    mean_f = math.fsum(f[j] for j in observed) / len(observed)
    return EvalReport(
        class_names=list(class_names), precision=precision, recall=recall, f_beta=f,
        support=support.tolist(), confusion=confusion.tolist(), beta=beta,
        mean_f=mean_f, accuracy=float(tp.sum() / y_true.size), n=int(y_true.size))


def evaluate(model: InfoModel, dataset: Dataset, beta: float = 1.0) -> EvalReport:
    """Per-class precision, recall and F, and their unweighted mean over observed classes."""
    if len(dataset) == 0:
        raise ValidationError("empty dataset")
    y_true = dataset.labels
    if y_true.min() < 0 or y_true.max() >= model.n_classes:
        raise ValidationError("dataset label outside the model's classes")
    scores = score_many(model, dataset.examples)
    y_pred = decide(scores)
    return report_from_predictions(y_true, y_pred, model.vocab.class_names, beta)


def _smoothed_weights(freq: FrequencyMatrix, alpha: float, psi_rows: np.ndarray) -> sp.csr_matrix:
    M, W = freq.dims
    n_ij = freq.to_dense().astype(float) + alpha
    n_i = freq.row_marginals.astype(float) + alpha * W
    n_j = freq.col_marginals.astype(float) + alpha * M
    n = freq.total + alpha * M * W
    w = info_math.harkevich_info_array(n_ij, n_i[:, None], n_j[None, :], n)
    w *= psi_rows[:, None]
    out = sp.csr_matrix(w)
    out.eliminate_zeros()
    return out


def _resolve_psi(freq: FrequencyMatrix, emergence: EmergenceConfig):
    """Per-feature psi vector plus provenance notes."""
    M, W = freq.dims
    notes: dict = {}
    if emergence.mode == "none":
        return np.ones(M), notes
    if emergence.mode == "global":
        try:
            raw = info_math.psi_global(W, freq.total, emergence.z, clamp=False)
        except DomainError as exc:
            raise DomainError(f"global emergence (W={W}, N={freq.total}): {exc}") from exc
        psi = min(max(raw, 0.0), 1.0)
        notes.update(psi=psi, psi_raw=raw, psi_clamped=raw != psi)
        return np.full(M, psi), notes
    w_g, n_g = feature_group_stats(freq)
    psi = np.zeros(M)
    degenerate = []
    for i in range(M):
        if w_g[i] == 0:
            continue
        if w_g[i] == 1:
            # log2(2**1 - 1) = 0 whatever N_g is
            degenerate.append(i)
            value = 0.0
        else:
            try:
                value = info_math.psi_group(int(w_g[i]), int(n_g[i]), freq.total)
            except DomainError as exc:
                raise DomainError(f"feature {i}: {exc}") from exc
        psi[i] = max(value, emergence.psi_min)
    if degenerate:
        notes["degenerate_features"] = degenerate
    return psi, notes


def build_timestamp() -> str:
    """UTC build time, pinned by ``SOURCE_DATE_EPOCH`` when it is set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = time.gmtime(int(epoch)) if epoch else time.gmtime()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", t)


def e_step(freq: FrequencyMatrix, cfg: TrainConfig, vocab=None) -> InfoModel:
    """Build every weight in closed form from the counts.

    Each observed cell gets ``psi_i * log2(N_ij N / (N_i N_j))``; unobserved
    cells carry no weight unless smoothing fills them in.
    """
    M, W = freq.dims
    if vocab is None:
        vocab = Vocabulary([str(i) for i in range(M)], [str(j) for j in range(W)])
    if vocab.dims != (M, W):
        raise ValidationError(f"vocabulary dims {vocab.dims} != frequency dims {(M, W)}")
    if freq.total < 1:
        raise ValidationError("empty dataset")
    psi, notes = _resolve_psi(freq, cfg.emergence)
    if cfg.smoothing > 0:
        weights = _smoothed_weights(freq, cfg.smoothing, psi)
    else:
        c = freq.counts
        rows = np.repeat(np.arange(M), np.diff(c.indptr))
        data = info_math.harkevich_info_array(
            c.data, freq.row_marginals[rows], freq.col_marginals[c.indices], freq.total)
        data *= psi[rows]
        weights = sp.csr_matrix((data, c.indices.copy(), c.indptr.copy()), shape=(M, W))
        weights.eliminate_zeros()
    provenance = {
        "N": int(freq.total), "M": M, "W": W,
        "smoothing": float(cfg.smoothing),
        "built_at": build_timestamp(),
        "m_iterations": 0,
    }
    provenance.update(notes)
    return InfoModel(weights, np.zeros(W), vocab, emergence=cfg.emergence,
                     activation=cfg.activation, provenance=provenance)


@dataclass
class _Pass:
    weights: sp.csr_matrix
    corrections: int


def _correction_pass(model: InfoModel, dataset: Dataset, excluded: set, margin: float) -> _Pass:
    """One ordered sweep raising true-class weights of misclassified examples.

    Scores of later examples see the corrections made for earlier ones.
    """
    examples = dataset.examples
    base = score_many(model, examples)
    delta: dict[int, np.ndarray] = {}
    W = model.n_classes
    corrections = 0
    for k, ex in enumerate(examples):
        if k in excluded or not ex.features:
            continue
        s = base[k].copy()
        for i in ex.features:
            row = delta.get(i)
            if row is not None:
                s += row
        pred = int(decide(s))
        true = ex.label
        if pred == true:
            continue
        step = (s[pred] - s[true] + margin) / len(ex.features)
        for i in ex.features:
            row = delta.get(i)
            if row is None:
                row = delta[i] = np.zeros(W)
            row[true] += step
        corrections += 1
    if not delta:
        return _Pass(model.weights, 0)
    feats = np.fromiter(delta.keys(), dtype=np.int64, count=len(delta))
    rows = np.repeat(feats, W)
    cols = np.tile(np.arange(W), len(feats))
    vals = np.concatenate([delta[i] for i in feats])
    keep = vals != 0
    D = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=model.weights.shape)
    return _Pass(model.weights + D, corrections)


def m_step(model: InfoModel, train_set: Dataset, cfg: TrainConfig, history: list | None = None):
    """Corrective loop maximising the mean per-class F-measure on ``train_set``.

    Examples in conflict groups are left out of the corrections. A pass is
    kept only if it raises the mean F by more than ``cfg.tolerance``; the
    loop stops at the first rejected pass or after ``cfg.max_m_iters``
    accepted ones. Returns ``(model, report_before, report_after)``.
    One record per pass is appended to ``history`` and logged as JSON.
    """
    before = evaluate(model, train_set, cfg.beta)
    current, current_report = model, before
    excluded = {k for g in find_conflicts(train_set.examples) for k in g.indices}
    accepted = 0
    it = 0
    while accepted < cfg.max_m_iters:
        it += 1
        result = _correction_pass(current, train_set, excluded, cfg.margin)
        if result.corrections == 0:
            record = dict(iter=it, E_F_before=current_report.mean_f,
                          E_F_after=current_report.mean_f, corrections=0,
                          excluded_conflicts=len(excluded), accepted=False)
            _log_iteration(record, history)
            break
        candidate = current.replace(weights=result.weights)
        report = evaluate(candidate, train_set, cfg.beta)
        ok = report.mean_f > current_report.mean_f + cfg.tolerance
        record = dict(iter=it, E_F_before=current_report.mean_f, E_F_after=report.mean_f,
                      corrections=result.corrections, excluded_conflicts=len(excluded),
                      accepted=ok)
        _log_iteration(record, history)
        if not ok:
            break
        accepted += 1
        current, current_report = candidate, report
    if accepted:
        prov = dict(current.provenance)
        prov["m_iterations"] = int(prov.get("m_iterations", 0)) + accepted
        current = current.replace(provenance=prov)
    return current, before, current_report


def _log_iteration(record: dict, history):
    if history is not None:
        history.append(record)
    log.info(json.dumps(record, sort_keys=True))


def fit(dataset: Dataset, cfg: TrainConfig, history: list | None = None, bias=None):
    """Count, build weights, then run up to ``cfg.max_m_iters`` corrective passes.

    ``bias`` (scalar or length-W vector, default 0) is set before any
    correction. Returns the final model and its report on the training set.
    """
    if len(dataset) == 0:
        raise ValidationError("empty dataset")
    freq = ingest(dataset.examples, dataset.vocab.dims, shards=cfg.shards, threads=cfg.threads)
    model = e_step(freq, cfg, dataset.vocab)
    if bias is not None:
        model = model.with_bias(bias)
    if cfg.max_m_iters == 0:
        return model, evaluate(model, dataset, cfg.beta)
    model, _, after = m_step(model, dataset, cfg, history)
    return model, after
