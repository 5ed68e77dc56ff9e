"""Sequential probability assignments and the inner-SPA families the LZ78 transform wraps."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .core import AlphabetError, check_pmf


class SPA(ABC):
    """A sequential probability assignment over ``0..alphabet_size-1``.

    ``next_dist`` is the PMF for the next symbol given everything observed so
    far.  ``snapshot``/``restore`` give callers a way to evaluate or roll out
    hypothetical continuations without leaving a trace.
    """

    alphabet_size: int

    @abstractmethod
    def next_dist(self) -> np.ndarray: ...

    def prob(self, symbol: int) -> float:
        return float(self.next_dist()[symbol])

    @abstractmethod
    def observe(self, symbol: int) -> None: ...

    @abstractmethod
    def reset(self) -> None: ...

    @abstractmethod
    def snapshot(self): ...

    @abstractmethod
    def restore(self, snap) -> None: ...

    def _check_symbol(self, symbol: int) -> None:
        if not 0 <= symbol < self.alphabet_size:
            raise AlphabetError(f"symbol {symbol} outside alphabet of size {self.alphabet_size}")


def dirichlet_dist(counts: np.ndarray, total: int, gamma: float) -> np.ndarray:
    """``(N(a) + gamma) / (total + A * gamma)`` for every symbol ``a``."""
    return (counts + gamma) / (total + counts.shape[0] * gamma)


class DirichletSPA(SPA):
    """Additive perturbation of the empirical distribution (Dirichlet(gamma) mixture)."""

    def __init__(self, alphabet_size: int, gamma: float = 0.5):
        if not gamma > 0:
            raise ValueError(f"gamma must be strictly positive, got {gamma}")
        if alphabet_size < 2:
            raise AlphabetError("alphabet size must be >= 2")
        self.alphabet_size = alphabet_size
        self.gamma = float(gamma)
        self.counts = np.zeros(alphabet_size, dtype=np.int64)
        self.total = 0

    def next_dist(self) -> np.ndarray:
        return dirichlet_dist(self.counts, self.total, self.gamma)

    def prob(self, symbol: int) -> float:
        return (int(self.counts[symbol]) + self.gamma) / (self.total + self.alphabet_size * self.gamma)

    def observe(self, symbol: int) -> None:
        self._check_symbol(symbol)
        self.counts[symbol] += 1
        self.total += 1

    def reset(self) -> None:
        self.counts[:] = 0
        self.total = 0

    def snapshot(self):
        return self.counts.copy(), self.total

    def restore(self, snap) -> None:
        counts, total = snap
        self.counts = counts.copy()
        self.total = total


class UniformSPA(SPA):
    """Assigns ``1/A`` to every symbol, always."""

    def __init__(self, alphabet_size: int):
        self.alphabet_size = alphabet_size

    def next_dist(self) -> np.ndarray:
        return np.full(self.alphabet_size, 1.0 / self.alphabet_size)

    def prob(self, symbol: int) -> float:
        return 1.0 / self.alphabet_size

    def observe(self, symbol: int) -> None:
        self._check_symbol(symbol)

    def reset(self) -> None:
        pass

    def snapshot(self):
        return None

    def restore(self, snap) -> None:
        pass


class StaticSPA(SPA):
    """A fixed iid PMF; ignores everything it observes."""

    def __init__(self, probs):
        self.probs = check_pmf(probs)
        self.alphabet_size = self.probs.shape[0]

    def next_dist(self) -> np.ndarray:
        return self.probs.copy()

    def prob(self, symbol: int) -> float:
        return float(self.probs[symbol])

    def observe(self, symbol: int) -> None:
        self._check_symbol(symbol)

    def reset(self) -> None:
        pass

    def snapshot(self):
        return None

    def restore(self, snap) -> None:
        pass


def uniform_spa(alphabet_size: int) -> UniformSPA:
    return UniformSPA(alphabet_size)


# Inner-SPA families.  A family builds one independent SPA per tree node.
# Count-based families (prediction is a function of the node's symbol
# histogram alone) let the transform skip per-node objects entirely and read
# the histogram the tree already keeps.


class SPAFamily(ABC):
    kind: str
    count_based: bool = False

    @abstractmethod
    def make(self, alphabet_size: int) -> SPA: ...

    def prob_from_counts(self, count: int, total: int, alphabet_size: int) -> float:
        raise NotImplementedError

    def dist_from_counts(self, counts: np.ndarray, total: int) -> np.ndarray:
        raise NotImplementedError

    def descriptor(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class DirichletFamily(SPAFamily):
    gamma: float = 0.5
    kind = "dirichlet"
    count_based = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be strictly positive, got {self.gamma}")

    def make(self, alphabet_size: int) -> DirichletSPA:
        return DirichletSPA(alphabet_size, self.gamma)

    def prob_from_counts(self, count: int, total: int, alphabet_size: int) -> float:
        return (count + self.gamma) / (total + alphabet_size * self.gamma)

    def dist_from_counts(self, counts: np.ndarray, total: int) -> np.ndarray:
        return dirichlet_dist(counts, total, self.gamma)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma}


@dataclass(frozen=True)
class UniformFamily(SPAFamily):
    kind = "uniform"
    count_based = True

    def make(self, alphabet_size: int) -> UniformSPA:
        return UniformSPA(alphabet_size)

    def prob_from_counts(self, count: int, total: int, alphabet_size: int) -> float:
        return 1.0 / alphabet_size

    def dist_from_counts(self, counts: np.ndarray, total: int) -> np.ndarray:
        return np.full(counts.shape[0], 1.0 / counts.shape[0])


@dataclass(frozen=True)
class GenericFamily(SPAFamily):
    """Wraps any ``alphabet_size -> SPA`` factory (e.g. a future CTW or n-gram SPA)."""

    factory: object = None
    kind = "generic"
    count_based = False

    def make(self, alphabet_size: int) -> SPA:
        return self.factory(alphabet_size)


def family_from_descriptor(desc: dict) -> SPAFamily:
    kind = desc.get("kind")
    if kind == "dirichlet":
        return DirichletFamily(float(desc["gamma"]))
    if kind == "uniform":
        return UniformFamily()
    raise ValueError(f"cannot rebuild inner-SPA family of kind {kind!r}")
