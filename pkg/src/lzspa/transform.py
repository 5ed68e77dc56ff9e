"""The LZ78 transform: an independent inner SPA at every prefix-tree node."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import AlphabetError, LogLossReport
from .spa import SPA, DirichletFamily, SPAFamily, family_from_descriptor
from .tree import LZ78Tree, ParseCursor, deserialize_tree, serialize_tree


class FrozenModelError(RuntimeError):
    pass


def _tokens_of(seq, alphabet_size: int) -> Sequence[int]:
    alphabet = getattr(seq, "alphabet", None)
    if alphabet is not None and alphabet.size != alphabet_size:
        raise AlphabetError(f"sequence alphabet {alphabet.size} != model alphabet {alphabet_size}")
    return seq.tokens if hasattr(seq, "tokens") else seq


class LZTransformSPA(SPA):
    """``T^LZ{q}``: predicts with the inner SPA of the current LZ78 context node.

    Training grows the tree; after :meth:`freeze` the tree and all counts are
    read-only and a step into a missing child returns to the root.
    """

    def __init__(
        self,
        alphabet_size: int,
        family: SPAFamily | None = None,
        *,
        gamma: float | None = None,
        record_subsequences: bool = False,
        tree: LZ78Tree | None = None,
    ):
        if family is None:
            family = DirichletFamily(0.5 if gamma is None else gamma)
        elif gamma is not None:
            raise ValueError("pass either family or gamma, not both")
        self.alphabet_size = alphabet_size
        self.family = family
        self.tree = tree if tree is not None else LZ78Tree(alphabet_size, record_subsequences)
        if self.tree.alphabet_size != alphabet_size:
            raise AlphabetError("tree alphabet does not match model alphabet")
        self.node = 0
        self.frozen = False
        self.epochs_trained = 0
        self._states: dict[int, SPA] = {}

    @property
    def gamma(self) -> float | None:
        return getattr(self.family, "gamma", None)

    @property
    def cursor(self) -> ParseCursor:
        return ParseCursor(self.node, self.tree.depth[self.node])

    # -- training --------------------------------------------------------------

    def train(self, sequences: Iterable, epochs: int = 1) -> "LZTransformSPA":
        """Parse every sequence ``epochs`` times, in the given order."""
        if self.frozen:
            raise FrozenModelError("cannot train a frozen model")
        sequences = [_tokens_of(s, self.alphabet_size) for s in sequences]
        for _ in range(epochs):
            for seq in sequences:
                if self.family.count_based:
                    self.tree.train(seq)
                else:
                    self.node = 0
                    for s in seq:
                        self.observe(s)
        self.node = 0
        self.epochs_trained += epochs
        return self

    def freeze(self) -> "LZTransformSPA":
        self.frozen = True
        self.node = 0
        return self

    # -- SPA interface -------------------------------------------------------------

    def next_dist(self) -> np.ndarray:
        return self.dist_at(self.node)

    def dist_at(self, node: int) -> np.ndarray:
        if self.family.count_based:
            return self.family.dist_from_counts(self.tree.counts_row(node), self.tree.visits[node])
        state = self._states.get(node)
        if state is None:
            state = self.family.make(self.alphabet_size)
        return state.next_dist()

    def prob(self, symbol: int) -> float:
        node = self.node
        if self.family.count_based:
            A = self.alphabet_size
            return self.family.prob_from_counts(self.tree.count_of(node, symbol), self.tree.visits[node], A)
        state = self._states.get(node)
        return state.prob(symbol) if state is not None else self.family.make(self.alphabet_size).prob(symbol)

    def observe(self, symbol: int) -> None:
        """Advance by one symbol; grows the tree unless frozen."""
        if not 0 <= symbol < self.alphabet_size:
            raise AlphabetError(f"symbol {symbol} outside alphabet of size {self.alphabet_size}")
        if self.frozen:
            self.node = self.tree.traverse(self.node, symbol)
            return
        if not self.family.count_based:
            self._observe_inner(self.node, symbol)
        self.node = self.tree.grow_step(self.node, symbol)

    step = observe

    def _observe_inner(self, node: int, symbol: int) -> None:
        state = self._states.get(node)
        if state is None:
            state = self._states[node] = self.family.make(self.alphabet_size)
            self.tree.journal_call(lambda: self._states.pop(node, None))
        else:
            snap = state.snapshot()
            self.tree.journal_call(lambda: state.restore(snap))
        state.observe(symbol)

    def reset(self) -> None:
        """Return the cursor to the root (a sequence boundary); the tree is kept."""
        self.node = 0

    def snapshot(self):
        return self.tree.begin_journal(), self.node

    def restore(self, snap) -> None:
        mark, node = snap
        self.tree.rollback(mark)
        self.node = node

    # -- evaluation -----------------------------------------------------------------

    def sequential_log_loss(self, seq) -> float:
        """Total bits of ``-log2 q(x_t | x^{t-1})`` while learning along ``seq``.

        This mutates a non-frozen model exactly as training would (cursor
        starting at the root).  On a frozen model it is a pure evaluation.
        """
        tokens = _tokens_of(seq, self.alphabet_size)
        A = self.alphabet_size
        tree = self.tree
        hits, visits = tree.hits, tree.visits
        flat = tree.flat
        # falsy result = no child, for both child-table layouts
        lookup = tree.kids.__getitem__ if flat else tree.child.get
        log2 = math.log2
        total = 0.0
        node = 0
        fam = self.family
        if not fam.count_based:
            self.node = 0
            for s in tokens:
                total -= log2(self.prob(s))
                self.observe(s)
            self.node = 0
            return total
        dirichlet = isinstance(fam, DirichletFamily)
        g = fam.gamma if dirichlet else 0.0
        Ag = A * g
        if self.frozen:
            for s in tokens:
                if not 0 <= s < A:
                    raise AlphabetError(f"symbol {s} outside alphabet of size {A}")
                nxt = lookup(node * A + s) or 0
                c = hits[nxt] if nxt else 0
                if dirichlet:
                    total -= log2((c + g) / (visits[node] + Ag))
                else:
                    total -= log2(fam.prob_from_counts(c, visits[node], A))
                node = nxt
            return total
        if tree._journal is not None or tree.subsequences is not None or not dirichlet:
            for s in tokens:
                if not 0 <= s < A:
                    raise AlphabetError(f"symbol {s} outside alphabet of size {A}")
                total -= log2(fam.prob_from_counts(tree.count_of(node, s), visits[node], A))
                node = tree.grow_step(node, s)
            self.node = 0
            return total
        parent, edge, depth = tree.parent, tree.edge, tree.depth
        pad = [0] * A
        n = 0
        for s in tokens:
            if not 0 <= s < A:
                tree.symbols_parsed += n
                raise AlphabetError(f"symbol {s} outside alphabet of size {A}")
            key = node * A + s
            nxt = lookup(key)
            if not nxt:
                total -= log2(g / (visits[node] + Ag))
                visits[node] += 1
                if flat:
                    tree.kids[key] = len(visits)
                    tree.kids.extend(pad)
                else:
                    tree.child[key] = len(visits)
                parent.append(node)
                edge.append(s)
                depth.append(depth[node] + 1)
                visits.append(0)
                hits.append(1)
                node = 0
            else:
                c = hits[nxt]
                total -= log2((c + g) / (visits[node] + Ag))
                visits[node] += 1
                hits[nxt] = c + 1
                node = nxt
            n += 1
        tree.symbols_parsed += n
        self.node = 0
        return total

    def evaluate_log_loss(self, seq) -> LogLossReport:
        """Log loss of ``seq`` from the root with a private cursor; never mutates the model."""
        tokens = _tokens_of(seq, self.alphabet_size)
        if self.frozen:
            return LogLossReport(self.sequential_log_loss(tokens), len(tokens))
        saved = self.node
        snap = self.snapshot()
        try:
            total = self.sequential_log_loss(tokens)
        finally:
            self.restore(snap)
            self.node = saved
        return LogLossReport(total, len(tokens))

    def with_gamma(self, gamma: float) -> "LZTransformSPA":
        """A frozen Dirichlet view sharing this model's tree (the counts do not depend on gamma)."""
        view = LZTransformSPA(self.alphabet_size, DirichletFamily(gamma), tree=self.tree)
        view.epochs_trained = self.epochs_trained
        view.frozen = True
        return view

    def complexity_report(self) -> dict:
        """Cost of the transform as a sum of per-node inner-SPA costs."""
        tree = self.tree
        n = tree.symbols_parsed
        visits = np.asarray(tree.visits, dtype=np.int64)
        nodes = tree.phrase_count()
        scale = n / math.log2(n) if n > 1 else float("nan")
        return {
            "symbols": n,
            "nodes": nodes,
            # O(n)-time inner SPA: sum of subsequence lengths
            "time_linear_inner": int(visits.sum()),
            # O(1)-time per query inner SPA, charged once per node
            "time_unit_inner": nodes,
            # O(1)-memory inner SPA
            "memory_unit_inner": nodes,
            # O(m)-memory inner SPA (stores its subsequence)
            "memory_linear_inner": int(visits.sum()),
            "root_visits": int(visits[0]),
            "max_node_visits": int(visits.max()),
            "nodes_over_n_log_n": nodes / scale if n > 1 else float("nan"),
            "max_depth": tree.max_depth(),
        }

    # -- persistence -------------------------------------------------------------------

    def metadata(self) -> dict:
        return {
            "family": self.family.descriptor(),
            "epochs": self.epochs_trained,
            "frozen": self.frozen,
        }

    def to_bytes(self) -> bytes:
        if not self.family.count_based:
            raise ValueError("only count-based inner SPA families can be serialized")
        return serialize_tree(self.tree, self.metadata())

    @classmethod
    def from_bytes(cls, data: bytes) -> "LZTransformSPA":
        tree, meta = deserialize_tree(data)
        model = cls(tree.alphabet_size, family_from_descriptor(meta.get("family", {"kind": "dirichlet", "gamma": 0.5})),
                    tree=tree)
        model.epochs_trained = int(meta.get("epochs", 0))
        model.frozen = bool(meta.get("frozen", False))
        return model

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "LZTransformSPA":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass
class NodeLossBreakdown:
    per_node_bits: dict
    total_bits: float


def per_node_log_loss(seq: Sequence[int], family: SPAFamily, alphabet_size: int) -> NodeLossBreakdown:
    """Parse ``seq`` afresh and charge each symbol to its context node's own inner SPA.

    Every node gets a brand-new inner SPA fed only with its subsequence, so
    the sum over nodes reproduces the transform's sequential loss exactly.
    """
    tree = LZ78Tree(alphabet_size, record_subsequences=True)
    tree.train(seq)
    per_node = {}
    for node in range(tree.phrase_count()):
        sub = tree.subsequence(node)
        if not sub:
            continue
        spa = family.make(alphabet_size)
        bits = 0.0
        for s in sub:
            bits -= math.log2(spa.prob(s))
            spa.observe(s)
        per_node[node] = bits
    return NodeLossBreakdown(per_node, sum(per_node.values()))
