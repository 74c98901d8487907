import sys
from pathlib import Path

import numpy as np
import pytest

from ina.corpus import Dataset, LabeledExample, Vocabulary

DATA_DIR = Path(__file__).parent / "data"


def make_vocab(M, W):
    return Vocabulary([f"f{i}" for i in range(M)], [f"c{j}" for j in range(W)])


def identity_dataset(W):
    """One example per class whose single feature is that class's own."""
    return Dataset([LabeledExample([j], j) for j in range(W)], make_vocab(W, W))


def random_examples(rng, n, M, W, max_active=6):
    out = []
    for _ in range(n):
        k = int(rng.integers(1, max_active + 1))
        feats = rng.choice(M, size=min(k, M), replace=False)
        out.append(LabeledExample(feats.tolist(), int(rng.integers(W))))
    return out


def noisy_dataset(seed, n=150, M=25, W=4, noise=0.35):
    """Class-leaning features with random cross-talk; usually not separable by the E-step."""
    rng = np.random.default_rng(seed)
    block = M // W
    examples = []
    for _ in range(n):
        y = int(rng.integers(W))
        k = int(rng.integers(2, 6))
        own = rng.integers(block, size=k) + y * block
        stray = rng.integers(M, size=k)
        feats = np.where(rng.random(k) < noise, stray, own)
        examples.append(LabeledExample(feats.tolist(), y))
    return Dataset(examples, make_vocab(M, W))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for name in sorted(results):
            terminalreporter.write_line(results[name])
