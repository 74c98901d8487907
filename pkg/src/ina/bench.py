"""Wall-time scaling of counting + weight construction on synthetic data."""
from __future__ import annotations

import gc
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .corpus import LabeledExample, Vocabulary, ingest
from .training import TrainConfig, e_step

DEFAULT_SIZES = (10_000, 20_000, 40_000, 80_000)


@dataclass(frozen=True)
class BenchRow:
    n: int
    seconds: float
    total_events: int
    nonzero_weights: int


def synthetic_examples(n: int, n_features: int, n_classes: int, active: int,
                       seed: int) -> list[LabeledExample]:
    """Labeled examples whose features lean towards a per-class block.

    Half of each example's draws come from its class's block of the feature
    space and half uniformly from all of it, so the result is deterministic
    in ``seed`` and learnable.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(n_classes, size=n)
    block = max(1, n_features // n_classes)
    own = rng.integers(block, size=(n, (active + 1) // 2)) + (labels[:, None] * block) % n_features
    rand = rng.integers(n_features, size=(n, active // 2))
    feats = np.concatenate([own % n_features, rand], axis=1)
    return [LabeledExample(row, int(y)) for row, y in zip(feats.tolist(), labels.tolist())]


def log_log_slope(ns, seconds) -> float:
    if len(set(ns)) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(seconds, float)), 1)
    return float(slope)


def run(sizes=DEFAULT_SIZES, n_features: int = 1000, n_classes: int = 10, active: int = 20,
        seed: int = 0, repeats: int = 3, threads: int | None = 1) -> tuple[list[BenchRow], float]:
    """Median-of-``repeats`` timing of ingest + E-step for each size.

    Data generation happens outside the timed region; no I/O is timed.
    """
    vocab = Vocabulary([str(i) for i in range(n_features)], [str(j) for j in range(n_classes)])
    dims = vocab.dims
    shards = threads or 1
    cfg = TrainConfig(shards=shards, threads=threads)
    datasets = [synthetic_examples(n, n_features, n_classes, active, seed) for n in sizes]
    for examples in datasets:
        # warm-up pass, untimed
        e_step(ingest(examples, dims, shards=shards, threads=threads), cfg, vocab)
    # Sizes are interleaved within each repetition so that slow phases of the
    # host affect every size alike.
    times = [[] for _ in sizes]
    stats = [None] * len(sizes)
    for _ in range(repeats):
        for k, examples in enumerate(datasets):
            gc.disable()
            try:
                t0 = time.perf_counter()
                freq = ingest(examples, dims, shards=shards, threads=threads)
                model = e_step(freq, cfg, vocab)
                times[k].append(time.perf_counter() - t0)
            finally:
                gc.enable()
            stats[k] = (freq.total, model.nnz)
    rows = [BenchRow(n, statistics.median(t), *st) for n, t, st in zip(sizes, times, stats)]
    slope = log_log_slope([r.n for r in rows], [r.seconds for r in rows])
    return rows, slope


def to_csv(rows, slope: float) -> str:
    lines = ["n,seconds,total_events,nonzero_weights"]
    lines += [f"{r.n},{r.seconds:.6f},{r.total_events},{r.nonzero_weights}" for r in rows]
    lines.append(f"# log_log_slope,{slope:.4f}")
    return "\n".join(lines) + "\n"
