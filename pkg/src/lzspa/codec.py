"""Lossless compression of token sequences by range coding any SPA's predictions.

The coder is a byte-oriented 64-bit range coder with carry propagation
(the LZMA scheme widened to 64 bits).  Every symbol gets an integer
frequency of at least 1 out of roughly 2**32, so no symbol is ever
unencodable even when the model's probability underflows.

Container layout (little endian)::

    magic    4s   b"LZAC"
    version  u8
    mode     u8   0 adaptive, 1 static (frozen model), 2 custom SPA
    alphabet u32
    n        u64  number of symbols
    gamma    f64  inner Dirichlet gamma (adaptive mode), else 0
    model    32s  SHA-256 of the frozen model file (static mode), else zeros
    paylen   u64
    payload  paylen bytes
    crc32    u32  over everything above
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .core import AlphabetError
from .spa import SPA
from .transform import LZTransformSPA

MAGIC = b"LZAC"
VERSION = 1
_HEAD = struct.Struct("<4sBBIQd32sQ")

PROB_TOTAL = 1 << 32
_MASK64 = (1 << 64) - 1
_TOP = 1 << 56
_FLUSH_BYTES = 9


class CodecError(ValueError):
    pass


class StreamChecksumError(CodecError):
    pass


class StreamTruncatedError(CodecError):
    pass


class ModelMismatchError(CodecError):
    pass


class Mode(IntEnum):
    ADAPTIVE = 0
    STATIC = 1
    CUSTOM = 2


def quantize(pmf: np.ndarray) -> np.ndarray:
    """Cumulative integer frequencies (length ``A + 1``) with every symbol >= 1."""
    A = pmf.shape[0]
    freqs = np.floor(pmf * float(PROB_TOTAL - A)).astype(np.int64) + 1
    cum = np.zeros(A + 1, dtype=np.int64)
    np.cumsum(freqs, out=cum[1:])
    return cum


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _MASK64
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def encode(self, cum_lo: int, cum_hi: int, total: int) -> None:
        r = self.range // total
        self.low += r * cum_lo
        self.range = r * (cum_hi - cum_lo)
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()

    def _shift_low(self) -> None:
        low = self.low
        if low < 0xFF00000000000000 or low > _MASK64:
            carry = low >> 64
            temp = self.cache
            while True:
                self.out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if not self.cache_size:
                    break
            self.cache = (low >> 56) & 0xFF
        self.cache_size += 1
        self.low = (low << 8) & _MASK64

    def finish(self) -> bytes:
        # Any value in [low, low + range) decodes correctly; pick the one with
        # the most trailing zero bytes, which the decoder supplies implicitly.
        step = 1 << 56
        self.low = -(-self.low // step) * step
        for _ in range(_FLUSH_BYTES):
            self._shift_low()
        # drop the initial zero cache byte and the seven zero bytes below the
        # rounded value's top byte; the decoder pads with zeros
        tail = self.out[len(self.out) - 7:]
        assert not any(tail)
        return bytes(self.out[1:len(self.out) - 7])


class RangeDecoder:
    def __init__(self, payload: bytes):
        self.data = payload
        self.pos = 0
        self.range = _MASK64
        code = 0
        for _ in range(_FLUSH_BYTES - 1):
            code = (code << 8) | self._next()
        self.code = code

    def _next(self) -> int:
        pos = self.pos
        self.pos = pos + 1
        return self.data[pos] if pos < len(self.data) else 0

    def decode(self, cum: np.ndarray) -> int:
        total = int(cum[-1])
        r = self.range // total
        target = min(self.code // r, total - 1)
        sym = int(np.searchsorted(cum, target, side="right")) - 1
        lo = int(cum[sym])
        self.code -= r * lo
        self.range = r * (int(cum[sym + 1]) - lo)
        while self.range < _TOP:
            self.code = ((self.code << 8) | self._next()) & _MASK64
            self.range <<= 8
        return sym


@dataclass(frozen=True)
class EncodedStream:
    mode: Mode
    alphabet_size: int
    length: int
    payload: bytes
    gamma: float = 0.0
    model_hash: bytes = b"\0" * 32

    @property
    def payload_bits(self) -> int:
        return 8 * len(self.payload)

    def to_bytes(self) -> bytes:
        body = _HEAD.pack(MAGIC, VERSION, int(self.mode), self.alphabet_size, self.length,
                          self.gamma, self.model_hash, len(self.payload)) + self.payload
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedStream":
        if len(data) < _HEAD.size + 4:
            raise StreamTruncatedError("stream shorter than its header")
        magic, version, mode, A, n, gamma, mhash, paylen = _HEAD.unpack_from(data)
        if magic != MAGIC or version != VERSION:
            raise CodecError(f"not an LZAC v{VERSION} stream")
        end = _HEAD.size + paylen
        if len(data) < end + 4:
            raise StreamTruncatedError("payload truncated")
        (crc,) = struct.unpack_from("<I", data, end)
        if zlib.crc32(data[:end]) != crc:
            raise StreamChecksumError("stream checksum mismatch")
        return cls(Mode(mode), A, n, bytes(data[_HEAD.size:end]), gamma, mhash)


def model_hash(model: LZTransformSPA) -> bytes:
    return hashlib.sha256(model.to_bytes()).digest()


def _mode_for(spa: SPA) -> Mode:
    if isinstance(spa, LZTransformSPA) and spa.frozen:
        return Mode.STATIC
    if (isinstance(spa, LZTransformSPA) and spa.tree.phrase_count() == 1 and spa.tree.symbols_parsed == 0
            and spa.gamma is not None):
        return Mode.ADAPTIVE
    return Mode.CUSTOM


def encode(spa: SPA, seq) -> EncodedStream:
    """Compress ``seq`` with the predictions of ``spa``.

    A fresh (untrained) Dirichlet LZ model gives an adaptive stream the
    decoder can rebuild from the header alone; a frozen model gives a static
    stream tied to that model by hash.  Any other SPA works too, but the
    decoder must be handed an identical one.  ``spa`` is left unchanged.
    """
    tokens = list(getattr(seq, "tokens", seq))
    A = spa.alphabet_size
    for s in tokens:
        if not 0 <= s < A:
            raise AlphabetError(f"symbol {s} outside alphabet of size {A}")
    mode = _mode_for(spa)
    enc = RangeEncoder()
    saved_node = getattr(spa, "node", None)
    if isinstance(spa, LZTransformSPA):
        spa.node = 0
    snap = spa.snapshot()
    try:
        for s in tokens:
            cum = quantize(spa.next_dist())
            enc.encode(int(cum[s]), int(cum[s + 1]), int(cum[-1]))
            spa.observe(s)
    finally:
        spa.restore(snap)
        if saved_node is not None:
            spa.node = saved_node
    payload = enc.finish() if tokens else b""
    gamma = float(spa.gamma) if mode is Mode.ADAPTIVE else 0.0
    mhash = model_hash(spa) if mode is Mode.STATIC else b"\0" * 32
    return EncodedStream(mode, A, len(tokens), payload, gamma, mhash)


def decode(stream: EncodedStream | bytes, spa: SPA | None = None) -> list[int]:
    """Invert :func:`encode`.  Adaptive streams need no model."""
    if isinstance(stream, (bytes, bytearray)):
        stream = EncodedStream.from_bytes(bytes(stream))
    if stream.mode is Mode.ADAPTIVE:
        if spa is None:
            spa = LZTransformSPA(stream.alphabet_size, gamma=stream.gamma)
    elif spa is None:
        raise ModelMismatchError(f"{stream.mode.name.lower()} stream needs the model it was encoded with")
    if spa.alphabet_size != stream.alphabet_size:
        raise ModelMismatchError("model alphabet does not match stream")
    if stream.mode is Mode.STATIC:
        if not (isinstance(spa, LZTransformSPA) and spa.frozen and model_hash(spa) == stream.model_hash):
            raise ModelMismatchError("model hash does not match stream")
    if stream.length == 0:
        return []
    dec = RangeDecoder(stream.payload)
    out = []
    saved_node = getattr(spa, "node", None)
    if isinstance(spa, LZTransformSPA):
        spa.node = 0
    snap = spa.snapshot()
    try:
        for _ in range(stream.length):
            s = dec.decode(quantize(spa.next_dist()))
            out.append(s)
            spa.observe(s)
    finally:
        spa.restore(snap)
        if saved_node is not None:
            spa.node = saved_node
    return out
