"""Alphabets, token sequences, PMFs and the log-loss / empirical-entropy primitives."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .spa import SPA

PMF_TOL = 1e-9


class AlphabetError(ValueError):
    """A symbol or sequence does not fit the declared alphabet."""


@dataclass(frozen=True)
class Alphabet:
    """Dense integer alphabet ``0..size-1``."""

    size: int

    def __post_init__(self):
        if int(self.size) < 2:
            raise AlphabetError(f"alphabet size must be >= 2, got {self.size}")

    def validate(self, tokens: Iterable[int]) -> None:
        for tok in tokens:
            if not 0 <= tok < self.size:
                raise AlphabetError(f"symbol {tok} outside alphabet of size {self.size}")

    def __contains__(self, symbol: int) -> bool:
        return 0 <= symbol < self.size


@dataclass(frozen=True)
class TokenSequence:
    """An immutable token sequence bound to an alphabet.

    Most library functions accept any integer sequence; this wrapper is used
    where the alphabet has to travel with the data (token files, the CLI).
    """

    tokens: tuple[int, ...]
    alphabet: Alphabet

    def __post_init__(self):
        self.alphabet.validate(self.tokens)

    @classmethod
    def of(cls, tokens: Iterable[int], alphabet_size: int) -> "TokenSequence":
        return cls(tuple(int(t) for t in tokens), Alphabet(alphabet_size))

    @classmethod
    def from_string(cls, text: str, alphabet_size: int = 2) -> "TokenSequence":
        """``"00011001"`` style digit strings, handy in tests and examples."""
        return cls.of((int(c) for c in text), alphabet_size)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return TokenSequence(self.tokens[idx], self.alphabet)
        return self.tokens[idx]

    def concat(self, other: "TokenSequence") -> "TokenSequence":
        if other.alphabet != self.alphabet:
            raise AlphabetError("cannot concatenate sequences over different alphabets")
        return TokenSequence(self.tokens + other.tokens, self.alphabet)


def check_pmf(probs, size: int | None = None, tol: float = PMF_TOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("PMF must be one-dimensional")
    if size is not None and p.shape[0] != size:
        raise ValueError(f"PMF has {p.shape[0]} entries, expected {size}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("PMF entries must be finite and non-negative")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"PMF sums to {p.sum()!r}")
    return p


@dataclass(frozen=True)
class LogLossReport:
    total_bits: float
    length: int

    @property
    def per_symbol_bits(self) -> float:
        if self.length == 0:
            return 0.0
        return self.total_bits / self.length


def log_loss(spa: "SPA", seq: Sequence[int]) -> LogLossReport:
    """Cumulative log loss (bits) of ``spa`` on ``seq``.

    The SPA learns along the sequence as usual, but its state is restored
    afterwards, so the call leaves it untouched.  A zero probability gives
    an infinite total instead of raising.
    """
    if len(seq) == 0:
        raise ValueError("log loss needs a non-empty sequence")
    snap = spa.snapshot()
    total = 0.0
    try:
        for x in seq:
            p = spa.prob(x)
            if p <= 0.0:
                total = math.inf
            elif total != math.inf:
                total -= math.log2(p)
            spa.observe(x)
    finally:
        spa.restore(snap)
    return LogLossReport(total, len(seq))


def entropy_of_counts(counts: Iterable[int]) -> float:
    """Entropy in bits of the empirical distribution given by ``counts``."""
    c = np.asarray([v for v in counts if v > 0], dtype=np.float64)
    if c.size == 0:
        return 0.0
    p = c / c.sum()
    return float(-(p * np.log2(p)).sum())


def empirical_entropy_mu0(seq: Sequence[int]) -> float:
    """Zero-order empirical entropy of ``seq`` in bits/symbol."""
    if len(seq) == 0:
        raise ValueError("mu_0 of an empty sequence is undefined")
    return entropy_of_counts(Counter(seq).values())


def markov_entropy_mu_k(seq: Sequence[int], k: int) -> float:
    """Best per-symbol log loss of any order-``k`` Markov SPA on ``seq``.

    Timesteps ``t > k`` are bucketed by their length-``k`` context and each
    bucket pays its zero-order empirical entropy.  The first ``k`` symbols
    are free, and the total is normalized by the full length ``n``.
    """
    n = len(seq)
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < n, got k={k}, n={n}")
    if k == 0:
        return empirical_entropy_mu0(seq)
    seq = list(seq)
    buckets: dict[tuple, Counter] = defaultdict(Counter)
    for t in range(k, n):
        buckets[tuple(seq[t - k:t])][seq[t]] += 1
    total = 0.0
    for hist in buckets.values():
        size = sum(hist.values())
        total += size * entropy_of_counts(hist.values())
    return total / n


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)
