"""Token files.

Two on-disk forms:

* raw bytes: the file is one sequence over ``A = 256``;
* integer text: a header line ``#lzspa-tokens A=<size>``, then one integer
  per line.  A blank line separates sequences.

``write_token_file`` always produces the canonical form, so reading and
rewriting a file it wrote is byte-exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import AlphabetError

HEADER = "#lzspa-tokens"
_HEADER_RE = re.compile(r"^#lzspa-tokens\s+A=(\d+)\s*$")


class TokenFileError(ValueError):
    pass


@dataclass
class TokenCorpus:
    sequences: list[list[int]]
    alphabet_size: int
    fmt: str

    def concatenated(self) -> list[int]:
        return [s for seq in self.sequences for s in seq]

    @property
    def lengths(self) -> list[int]:
        return [len(s) for s in self.sequences]


def detect_format(data: bytes) -> str:
    return "ints" if data.startswith(HEADER.encode()) else "bytes"


def parse_tokens(data: bytes, fmt: str = "auto") -> TokenCorpus:
    if fmt == "auto":
        fmt = detect_format(data)
    if fmt == "bytes":
        return TokenCorpus([list(data)], 256, "bytes")
    if fmt != "ints":
        raise TokenFileError(f"unknown token format {fmt!r}")
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise TokenFileError("integer token file is not ASCII") from exc
    lines = text.split("\n")
    m = _HEADER_RE.match(lines[0].strip())
    if not m:
        raise TokenFileError(f"missing header line '{HEADER} A=<size>'")
    A = int(m.group(1))
    if A < 2:
        raise AlphabetError("alphabet size must be >= 2")
    seqs: list[list[int]] = [[]]
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            if seqs[-1]:
                seqs.append([])
            continue
        try:
            tok = int(line)
        except ValueError as exc:
            raise TokenFileError(f"line {lineno}: not an integer: {line!r}") from exc
        if not 0 <= tok < A:
            raise AlphabetError(f"line {lineno}: token {tok} outside alphabet of size {A}")
        seqs[-1].append(tok)
    if len(seqs) > 1 and not seqs[-1]:
        seqs.pop()
    return TokenCorpus(seqs, A, "ints")


def read_token_file(path, fmt: str = "auto") -> TokenCorpus:
    return parse_tokens(Path(path).read_bytes(), fmt)


def format_tokens(sequences: Sequence[Sequence[int]], alphabet_size: int, fmt: str = "ints") -> bytes:
    for seq in sequences:
        for s in seq:
            if not 0 <= s < alphabet_size:
                raise AlphabetError(f"token {s} outside alphabet of size {alphabet_size}")
    if fmt == "bytes":
        if alphabet_size > 256:
            raise TokenFileError("raw-byte files need an alphabet of at most 256 symbols")
        if len(sequences) != 1:
            raise TokenFileError("raw-byte files hold exactly one sequence")
        return bytes(sequences[0])
    if fmt != "ints":
        raise TokenFileError(f"unknown token format {fmt!r}")
    parts = [f"{HEADER} A={alphabet_size}\n"]
    for i, seq in enumerate(sequences):
        if i:
            parts.append("\n")
        parts.extend(f"{s}\n" for s in seq)
    return "".join(parts).encode("ascii")


def write_token_file(path, sequences: Sequence[Sequence[int]], alphabet_size: int, fmt: str = "ints") -> None:
    Path(path).write_bytes(format_tokens(sequences, alphabet_size, fmt))


def read_labels_file(path) -> list[tuple[Path, str]]:
    """Tab- or whitespace-separated ``<token file> <label>`` lines; paths relative to the labels file."""
    path = Path(path)
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t") if "\t" in line else line.rsplit(None, 1)
        if len(parts) != 2:
            raise TokenFileError(f"{path}:{lineno}: expected '<file> <label>'")
        f = Path(parts[0].strip())
        out.append((f if f.is_absolute() else path.parent / f, parts[1].strip()))
    if not out:
        raise TokenFileError(f"{path}: no entries")
    return out
