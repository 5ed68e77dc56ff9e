"""Sampling new sequences from a frozen LZ78-transform model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TokenSequence, check_pmf
from .transform import LZTransformSPA


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    length: int
    temperature: float = 1.0
    top_k: int | None = None
    min_context: int = 64
    seed_data: tuple[int, ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise GenerationError("length must be >= 0")
        if self.temperature < 0:
            raise GenerationError("temperature must be >= 0")
        if self.top_k is not None and self.top_k < 1:
            raise GenerationError("top_k must be >= 1")
        if self.min_context < 0:
            raise GenerationError("min_context must be >= 0")
        object.__setattr__(self, "seed_data", tuple(int(s) for s in self.seed_data))


def apply_temperature_topk(pmf, temperature: float, top_k: int | None = None) -> np.ndarray:
    """Sharpen or flatten by ``p**(1/T)``, then keep the ``top_k`` largest entries.

    ``T == 0`` is a point mass on the argmax.  Ties, both for the argmax and at
    the top-k boundary, go to the lowest symbol index.
    """
    p = check_pmf(pmf)
    A = p.shape[0]
    k = A if top_k is None else min(int(top_k), A)
    if k < 1:
        raise GenerationError("top_k must be >= 1")
    if temperature == 0:
        out = np.zeros(A)
        out[int(np.argmax(p))] = 1.0
        return out
    if temperature != 1:
        # work in log space so tiny probabilities survive small temperatures
        with np.errstate(divide="ignore"):
            logp = np.log(p) / temperature
        p = np.exp(logp - logp.max())
        p /= p.sum()
    if k == 1:
        out = np.zeros(A)
        out[int(np.argmax(p))] = 1.0
        return out
    if k < A:
        # stable sort on -p keeps lower indices first among equal values
        keep = np.argsort(-p, kind="stable")[:k]
        mask = np.zeros(A, dtype=bool)
        mask[keep] = True
        p = np.where(mask, p, 0.0)
        p /= p.sum()
    return p


def _sample(pmf: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(pmf)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), pmf.shape[0] - 1)


@dataclass
class GenerationTrace:
    tokens: TokenSequence
    seed_node: int
    backshifts: int
    root_fallbacks: int


def generate(model: LZTransformSPA, config: GenConfig) -> TokenSequence:
    return generate_traced(model, config).tokens


def generate_traced(model: LZTransformSPA, config: GenConfig) -> GenerationTrace:
    """Walk the frozen tree, sampling each symbol from the current node's PMF.

    ``seed_data`` is traversed first.  Whenever the walk stands on a node that
    saw no training symbols, the cursor goes back to the root and replays the
    last ``min(min_context, len(history))`` symbols (seed included); if that
    also ends on an unvisited node, generation continues from the root.  The
    model is never modified.
    """
    if not model.frozen:
        raise GenerationError("generation needs a frozen model")
    A = model.alphabet_size
    tree = model.tree
    for s in config.seed_data:
        if not 0 <= s < A:
            raise GenerationError(f"seed symbol {s} outside alphabet of size {A}")
    rng = np.random.default_rng(config.rng_seed)
    visits = tree.visits
    traverse = tree.traverse
    history: list[int] = list(config.seed_data)
    node = 0
    for s in history:
        node = traverse(node, s)
    seed_node = node
    backshifts = fallbacks = 0
    out: list[int] = []
    for _ in range(config.length):
        if visits[node] == 0:
            backshifts += 1
            node = 0
            span = min(config.min_context, len(history))
            for s in history[len(history) - span:]:
                node = traverse(node, s)
            if visits[node] == 0:
                fallbacks += 1
                node = 0
        pmf = apply_temperature_topk(model.dist_at(node), config.temperature, config.top_k)
        sym = _sample(pmf, rng)
        out.append(sym)
        history.append(sym)
        node = traverse(node, sym)
    return GenerationTrace(TokenSequence.of(out, A), seed_node, backshifts, fallbacks)


def cursor_after(model: LZTransformSPA, prefix: Sequence[int]) -> int:
    """Node reached by frozen traversal of ``prefix`` from the root."""
    node = 0
    for s in prefix:
        node = model.tree.traverse(node, s)
    return node
