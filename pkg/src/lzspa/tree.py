"""LZ78 incremental parsing and the prefix tree it builds.

Node storage is flat: per-node lists for parent, edge symbol, depth, visit
count and ``hits``.  Child links are addressed by ``key = node * A + symbol``;
for small alphabets they live in a plain list with ``A`` slots per node
(``kids``), otherwise in a dict (``child``).  Either way a missing child reads
as 0, which is safe because the root is nobody's child.

A child exists exactly when its edge symbol has been emitted at the parent,
so the parent's histogram entry for that symbol is kept on the child
(``hits[child]``) and no second table is needed.  Node 0 is the root.
"""

from __future__ import annotations

import json
import struct
import zlib
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import AlphabetError, entropy_of_counts

MAGIC = b"LZSP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIQQI")

# alphabets up to this size use the list-backed child table
FLAT_ALPHABET_MAX = 16

# journal entry tags
_J_STEP = 0
_J_NODE = 1
_J_CALL = 2


class ModelFormatError(ValueError):
    code = 10


class FormatVersionError(ModelFormatError):
    code = 11


class TruncatedStreamError(ModelFormatError):
    code = 12


class ChecksumError(ModelFormatError):
    code = 13


@dataclass(frozen=True)
class ParseCursor:
    node: int = 0
    depth: int = 0


ROOT = ParseCursor()


@dataclass(frozen=True)
class TreeNode:
    """Read-only view of one node, for diagnostics."""

    index: int
    parent: int
    edge: int
    depth: int
    visit_count: int
    children: dict
    counts: dict


class LZ78Tree:
    def __init__(self, alphabet_size: int, record_subsequences: bool = False):
        if alphabet_size < 2:
            raise AlphabetError("alphabet size must be >= 2")
        self.alphabet_size = alphabet_size
        self.parent = [-1]
        self.edge = [-1]
        self.depth = [0]
        self.visits = [0]
        self.hits = [0]
        self.flat = alphabet_size <= FLAT_ALPHABET_MAX
        self.kids: list[int] | None = [0] * alphabet_size if self.flat else None
        self.child: dict[int, int] | None = None if self.flat else {}
        self.symbols_parsed = 0
        self.record_subsequences = record_subsequences
        self.subsequences: list[list[int]] | None = [[]] if record_subsequences else None
        self._journal: list | None = None

    # -- growth -----------------------------------------------------------

    def parse_step(self, cursor: ParseCursor, symbol: int, grow: bool = True) -> tuple[ParseCursor, bool]:
        """Parse one symbol at ``cursor``.

        With ``grow`` the node's histogram is updated and a missing child is
        created as a new leaf (phrase boundary, back to the root).  Without
        it the tree is only traversed: an existing child is entered, anything
        else returns to the root.
        """
        if not 0 <= symbol < self.alphabet_size:
            raise AlphabetError(f"symbol {symbol} outside alphabet of size {self.alphabet_size}")
        if not grow:
            nxt = self.traverse(cursor.node, symbol)
            return (ROOT if nxt == 0 else ParseCursor(nxt, self.depth[nxt])), False
        before = len(self.visits)
        nxt = self.grow_step(cursor.node, symbol)
        return ParseCursor(nxt, self.depth[nxt]), len(self.visits) > before

    def grow_step(self, node: int, symbol: int) -> int:
        """Integer-cursor form of ``parse_step(grow=True)``; returns the next node."""
        key = node * self.alphabet_size + symbol
        self.visits[node] += 1
        self.symbols_parsed += 1
        if self.subsequences is not None:
            self.subsequences[node].append(symbol)
        journal = self._journal
        nxt = self._lookup(key)
        if nxt:
            self.hits[nxt] += 1
            if journal is not None:
                journal.append((_J_STEP, nxt, node))
            return nxt
        self._add_node(node, symbol, key)
        if journal is not None:
            journal.append((_J_NODE, key, node))
        return 0

    def _add_node(self, parent: int, symbol: int, key: int) -> int:
        idx = len(self.visits)
        if self.flat:
            self.kids[key] = idx
            self.kids.extend([0] * self.alphabet_size)
        else:
            self.child[key] = idx
        self.parent.append(parent)
        self.edge.append(symbol)
        self.depth.append(self.depth[parent] + 1)
        self.visits.append(0)
        self.hits.append(1)
        if self.subsequences is not None:
            self.subsequences.append([])
        return idx

    def train(self, tokens: Iterable[int]) -> None:
        """Parse one training sequence starting from the root.

        The cursor is reset at sequence boundaries; a phrase left incomplete
        at the end updates counts but creates no leaf.
        """
        A = self.alphabet_size
        if self._journal is not None or self.subsequences is not None:
            node = 0
            for s in tokens:
                if not 0 <= s < A:
                    raise AlphabetError(f"symbol {s} outside alphabet of size {A}")
                node = self.grow_step(node, s)
            return
        hits = self.hits
        visits = self.visits
        parent = self.parent
        edge = self.edge
        depth = self.depth
        node = 0
        n = 0
        # the two loops differ only in the child-table access
        if self.flat:
            kids = self.kids
            pad = [0] * A
            for s in tokens:
                if not 0 <= s < A:
                    self.symbols_parsed += n
                    raise AlphabetError(f"symbol {s} outside alphabet of size {A}")
                key = node * A + s
                visits[node] += 1
                n += 1
                nxt = kids[key]
                if nxt:
                    hits[nxt] += 1
                    node = nxt
                else:
                    kids[key] = len(visits)
                    kids.extend(pad)
                    parent.append(node)
                    edge.append(s)
                    depth.append(depth[node] + 1)
                    visits.append(0)
                    hits.append(1)
                    node = 0
        else:
            child = self.child
            for s in tokens:
                if not 0 <= s < A:
                    self.symbols_parsed += n
                    raise AlphabetError(f"symbol {s} outside alphabet of size {A}")
                key = node * A + s
                visits[node] += 1
                n += 1
                nxt = child.get(key)
                if nxt is None:
                    child[key] = len(visits)
                    parent.append(node)
                    edge.append(s)
                    depth.append(depth[node] + 1)
                    visits.append(0)
                    hits.append(1)
                    node = 0
                else:
                    hits[nxt] += 1
                    node = nxt
        self.symbols_parsed += n

    def _lookup(self, key: int) -> int:
        return self.kids[key] if self.flat else self.child.get(key, 0)

    def traverse(self, node: int, symbol: int) -> int:
        """Frozen traversal: the child on ``symbol`` or the root if there is none."""
        key = node * self.alphabet_size + symbol
        return self.kids[key] if self.flat else self.child.get(key, 0)

    def links(self) -> Iterable[tuple[int, int]]:
        """Every ``(node * A + symbol, child)`` pair."""
        if self.flat:
            return ((k, c) for k, c in enumerate(self.kids) if c)
        return self.child.items()

    # -- undo journal -------------------------------------------------------

    def begin_journal(self) -> int:
        if self._journal is None:
            self._journal = []
        return len(self._journal)

    def journal_call(self, undo) -> None:
        if self._journal is not None:
            self._journal.append((_J_CALL, undo, None))

    def rollback(self, mark: int) -> None:
        """Undo every mutation recorded since ``mark``."""
        journal = self._journal
        while len(journal) > mark:
            tag, a, b = journal.pop()
            if tag == _J_CALL:
                a()
                continue
            if tag == _J_STEP:
                self.hits[a] -= 1
            else:
                if self.flat:
                    self.kids[a] = 0
                    del self.kids[len(self.kids) - self.alphabet_size:]
                else:
                    del self.child[a]
                self.parent.pop()
                self.edge.pop()
                self.depth.pop()
                self.visits.pop()
                self.hits.pop()
                if self.subsequences is not None:
                    self.subsequences.pop()
            self.visits[b] -= 1
            self.symbols_parsed -= 1
            if self.subsequences is not None:
                self.subsequences[b].pop()
        if mark == 0:
            self._journal = None

    # -- queries -------------------------------------------------------------

    def phrase_count(self) -> int:
        """Number of nodes including the root, i.e. completed phrases + 1."""
        return len(self.visits)

    def __len__(self) -> int:
        return len(self.visits)

    def count_of(self, node: int, symbol: int) -> int:
        """How many times ``symbol`` was emitted at ``node``: ``N(symbol | node)``."""
        c = self.traverse(node, symbol)
        return self.hits[c] if c else 0

    def children_of(self, node: int) -> dict[int, int]:
        A = self.alphabet_size
        base = node * A
        if self.flat:
            row = self.kids[base: base + A]
            return {a: c for a, c in enumerate(row) if c}
        get = self.child.get
        return {a: get(base + a) for a in range(A) if base + a in self.child}

    def counts_row(self, node: int) -> np.ndarray:
        row = np.zeros(self.alphabet_size, dtype=np.int64)
        hits = self.hits
        for a, c in self.children_of(node).items():
            row[a] = hits[c]
        return row

    def node_histograms(self) -> dict[int, dict[int, int]]:
        A = self.alphabet_size
        hist: dict[int, dict[int, int]] = defaultdict(dict)
        for key, c in self.links():
            hist[key // A][key % A] = self.hits[c]
        return hist

    def node(self, idx: int) -> TreeNode:
        children = self.children_of(idx)
        counts = {a: self.hits[c] for a, c in children.items()}
        return TreeNode(idx, self.parent[idx], self.edge[idx], self.depth[idx], self.visits[idx], children, counts)

    def path(self, idx: int) -> tuple[int, ...]:
        """Symbols on the root-to-node path, i.e. the phrase the node stands for."""
        out = []
        while idx > 0:
            out.append(self.edge[idx])
            idx = self.parent[idx]
        return tuple(reversed(out))

    def phrases(self) -> list[tuple[int, ...]]:
        """Completed phrases in creation order."""
        return [self.path(i) for i in range(1, len(self.visits))]

    def find(self, path: Sequence[int]) -> int | None:
        node = 0
        for s in path:
            if not 0 <= s < self.alphabet_size:
                return None
            node = self.traverse(node, s)
            if node == 0:
                return None
        return node

    def subsequence(self, idx: int) -> list[int]:
        if self.subsequences is None:
            raise RuntimeError("tree was built without record_subsequences=True")
        return list(self.subsequences[idx])

    def node_subsequence_entropy(self) -> float:
        """``(1/n) * sum_z |Y_z| * mu_0(Y_z)`` over all nodes."""
        if self.symbols_parsed == 0:
            return 0.0
        total = 0.0
        for node, hist in self.node_histograms().items():
            total += self.visits[node] * entropy_of_counts(hist.values())
        return total / self.symbols_parsed

    def max_depth(self) -> int:
        return max(self.depth)

    def depth_histogram(self) -> dict[int, int]:
        return {int(d): int(c) for d, c in zip(*np.unique(np.asarray(self.depth), return_counts=True))}

    def copy(self) -> "LZ78Tree":
        return deserialize_tree(serialize_tree(self))[0]

    # -- equality helpers ------------------------------------------------------

    def state_fingerprint(self) -> int:
        """CRC of the serialized tree; cheap mutation detector for tests."""
        # the stream already ends with its own CRC, and CRC(body + CRC(body)) is a constant
        return zlib.crc32(serialize_tree(self)[:-4])


def serialize_tree(tree: LZ78Tree, meta: dict | None = None) -> bytes:
    """Binary ``.lzspa`` encoding of ``tree`` plus a JSON metadata block.

    Layout (little endian): header ``magic, version u16, alphabet u32,
    nodes u64, symbols parsed u64, meta length u32``, the UTF-8 JSON
    metadata, then per-node arrays int64 parent, int32 edge, int64 visits,
    int64 hits, and a trailing CRC32 of everything before it.  Child links
    and depths are rebuilt from ``parent``/``edge`` on load.
    """
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    body = b"".join(
        [
            _HEADER.pack(MAGIC, FORMAT_VERSION, tree.alphabet_size, len(tree.visits),
                         tree.symbols_parsed, len(meta_bytes)),
            meta_bytes,
            np.asarray(tree.parent, dtype="<i8").tobytes(),
            np.asarray(tree.edge, dtype="<i4").tobytes(),
            np.asarray(tree.visits, dtype="<i8").tobytes(),
            np.asarray(tree.hits, dtype="<i8").tobytes(),
        ]
    )
    return body + struct.pack("<I", zlib.crc32(body))


def deserialize_tree(data: bytes) -> tuple[LZ78Tree, dict]:
    if len(data) < _HEADER.size:
        if data[:4] != MAGIC[: len(data[:4])]:
            raise FormatVersionError("not an .lzspa stream")
        raise TruncatedStreamError("stream shorter than header")
    magic, version, A, n_nodes, parsed, meta_len = _HEADER.unpack_from(data)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise FormatVersionError(f"unsupported model format (magic={magic!r}, version={version})")
    expected = _HEADER.size + meta_len + n_nodes * (8 + 4 + 8 + 8) + 4
    if len(data) < expected:
        raise TruncatedStreamError(f"stream has {len(data)} bytes, header promises {expected}")
    body, (crc,) = data[: expected - 4], struct.unpack_from("<I", data, expected - 4)
    if zlib.crc32(body) != crc:
        raise ChecksumError("model checksum mismatch")
    if A < 2 or n_nodes < 1:
        raise ModelFormatError("invalid header values")

    off = _HEADER.size
    meta = json.loads(data[off: off + meta_len].decode())
    off += meta_len

    def take(dtype, count, width):
        nonlocal off
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        off += count * width
        return arr

    parent = take("<i8", n_nodes, 8)
    edge = take("<i4", n_nodes, 4)
    visits = take("<i8", n_nodes, 8)
    hits = take("<i8", n_nodes, 8)

    tree = LZ78Tree(A)
    tree.parent = parent.tolist()
    tree.edge = edge.tolist()
    tree.visits = visits.tolist()
    tree.hits = hits.tolist()
    depth = [0] * n_nodes
    child = {}
    for i in range(1, n_nodes):
        p = tree.parent[i]
        depth[i] = depth[p] + 1
        child[p * A + tree.edge[i]] = i
    tree.depth = depth
    if tree.flat:
        kids = [0] * (n_nodes * A)
        for key, c in child.items():
            kids[key] = c
        tree.kids = kids
    else:
        tree.child = child
    tree.symbols_parsed = parsed
    return tree, meta
