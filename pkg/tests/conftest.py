import math
from collections import defaultdict

import numpy as np
import pytest


def markov_bits(p: float, n: int, rng: np.random.Generator) -> list[int]:
    """Symmetric binary Markov chain with flip probability ``p``, uniform start."""
    flips = rng.random(n) < p
    flips[0] = False
    return ((rng.integers(0, 2) + np.cumsum(flips)) % 2).tolist()


def naive_lz_log_loss(seq, alphabet_size: int, gamma: float) -> float:
    """Reference sequential log loss of the LZ78 transform, written from scratch.

    Phrases are kept as tuples in a set and per-context histograms in a dict;
    nothing is shared with the package's tree.
    """
    phrases = {()}
    counts = defaultdict(lambda: [0] * alphabet_size)
    ctx = ()
    bits = 0.0
    for s in seq:
        row = counts[ctx]
        p = (row[s] + gamma) / (sum(row) + alphabet_size * gamma)
        bits -= math.log2(p)
        row[s] += 1
        nxt = ctx + (s,)
        if nxt in phrases:
            ctx = nxt
        else:
            phrases.add(nxt)
            ctx = ()
    return bits


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ---------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    line = f"criterion {label}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
