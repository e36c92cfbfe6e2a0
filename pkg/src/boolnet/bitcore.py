"""Bit-packed Boolean tensors and the XNOR/popcount forward kernel.

Encoding: bit 1 <-> True <-> +1, bit 0 <-> False <-> -1. Bits are packed
LSB-first into little-endian 64-bit words along the last axis; each row of
the last axis starts on a fresh word and unused bits in the final word are
kept at zero so that equality is a word-wise comparison.
"""
from __future__ import annotations

import struct
from functools import cached_property
from typing import BinaryIO, Sequence

import numpy as np

WORD_BITS = 64
MAGIC = b"BLT1"


def _n_words(n_bits: int) -> int:
    return (n_bits + WORD_BITS - 1) // WORD_BITS


def _last_word_mask(n_bits: int) -> np.uint64:
    rem = n_bits % WORD_BITS
    if rem == 0:
        return np.uint64(0xFFFFFFFFFFFFFFFF)
    return np.uint64((1 << rem) - 1)


class BooleanTensor:
    """Immutable packed tensor of +/-1 values."""

    __array_priority__ = 100

    def __init__(self, shape: Sequence[int], words: np.ndarray):
        shape = tuple(int(s) for s in shape)
        if len(shape) == 0:
            raise ValueError("BooleanTensor needs rank >= 1")
        if any(s < 0 for s in shape):
            raise ValueError(f"negative dimension in shape {shape}")
        expected = shape[:-1] + (_n_words(shape[-1]),)
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.shape != expected:
            raise ValueError(f"words shape {words.shape} does not match {expected} for shape {shape}")
        if shape[-1] % WORD_BITS and words.size:
            if np.any(words[..., -1] & ~_last_word_mask(shape[-1])):
                raise ValueError("padding bits must be zero")
        words.setflags(write=False)
        self._shape = shape
        self._words = words

    # -- construction -------------------------------------------------------

    @classmethod
    def from_bool(cls, bits) -> "BooleanTensor":
        bits = np.asarray(bits, dtype=bool)
        if bits.ndim == 0:
            raise ValueError("BooleanTensor needs rank >= 1")
        n = bits.shape[-1]
        n_words = _n_words(n)
        padded = np.zeros(bits.shape[:-1] + (n_words * WORD_BITS,), dtype=bool)
        padded[..., :n] = bits
        packed = np.packbits(padded, axis=-1, bitorder="little")
        words = packed.view("<u8").astype(np.uint64, copy=False)
        return cls(bits.shape, words.reshape(bits.shape[:-1] + (n_words,)))

    @classmethod
    def from_pm(cls, values) -> "BooleanTensor":
        values = np.asarray(values)
        if not np.all((values == 1) | (values == -1)):
            raise ValueError("from_pm expects entries in {-1, +1}")
        return cls.from_bool(values > 0)

    @classmethod
    def random(cls, shape: Sequence[int], rng: np.random.Generator) -> "BooleanTensor":
        return cls.from_bool(rng.integers(0, 2, size=tuple(shape)).astype(bool))

    @classmethod
    def full(cls, shape: Sequence[int], value: bool) -> "BooleanTensor":
        return cls.from_bool(np.full(tuple(shape), bool(value)))

    # -- accessors ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self._shape

    @property
    def words(self) -> np.ndarray:
        return self._words

    @property
    def size(self) -> int:
        return int(np.prod(self._shape))

    def to_bool(self) -> np.ndarray:
        n = self._shape[-1]
        raw = self._words.astype("<u8", copy=False).view(np.uint8)
        bits = np.unpackbits(raw, axis=-1, bitorder="little")
        return bits[..., :n].astype(bool).reshape(self._shape)

    def to_pm(self, dtype=np.int64) -> np.ndarray:
        return np.where(self.to_bool(), 1, -1).astype(dtype)

    @cached_property
    def columns(self) -> "BooleanTensor":
        """Transposed copy packed along the first axis (rank-2 only)."""
        if len(self._shape) != 2:
            raise ValueError("columns is defined for rank-2 tensors")
        return BooleanTensor.from_bool(self.to_bool().T)

    def __getitem__(self, index) -> "BooleanTensor":
        # leading-axis indexing only; the packed axis stays intact
        if len(self._shape) < 2:
            raise IndexError("row indexing needs rank >= 2")
        words = self._words[index]
        if isinstance(index, (int, np.integer)):
            return BooleanTensor(self._shape[1:], words)
        lead = np.empty(self._shape[0])[index].shape
        return BooleanTensor(lead + self._shape[1:], words)

    def _mask(self) -> np.ndarray:
        mask = np.full(self._words.shape[-1], 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
        if mask.size:
            mask[-1] = _last_word_mask(self._shape[-1])
        return mask

    # -- logic ----------------------------------------------------------------

    def __invert__(self) -> "BooleanTensor":
        return BooleanTensor(self._shape, ~self._words & self._mask())

    def __xor__(self, other: "BooleanTensor") -> "BooleanTensor":
        _check_same_shape(self, other)
        return BooleanTensor(self._shape, self._words ^ other._words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BooleanTensor):
            return NotImplemented
        return self._shape == other._shape and np.array_equal(self._words, other._words)

    def __hash__(self):
        return hash((self._shape, self._words.tobytes()))

    def __repr__(self) -> str:
        return f"BooleanTensor(shape={self._shape})"

    def padding_is_zero(self) -> bool:
        if self._shape[-1] % WORD_BITS == 0 or self._words.size == 0:
            return True
        return not np.any(self._words[..., -1] & ~_last_word_mask(self._shape[-1]))

    # -- serialization ----------------------------------------------------------

    def to_bytes(self) -> bytes:
        header = MAGIC + struct.pack("<I", len(self._shape))
        header += struct.pack(f"<{len(self._shape)}I", *self._shape)
        return header + self._words.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BooleanTensor":
        tensor, used = cls._read(memoryview(data))
        if used != len(data):
            raise ValueError(f"{len(data) - used} trailing bytes after tensor")
        return tensor

    @classmethod
    def _read(cls, buf: memoryview) -> tuple["BooleanTensor", int]:
        if bytes(buf[:4]) != MAGIC:
            raise ValueError("bad tensor magic")
        (rank,) = struct.unpack_from("<I", buf, 4)
        shape = struct.unpack_from(f"<{rank}I", buf, 8)
        offset = 8 + 4 * rank
        n_words = int(np.prod(shape[:-1], dtype=np.int64)) * _n_words(shape[-1])
        end = offset + 8 * n_words
        if end > len(buf):
            raise ValueError("truncated tensor payload")
        words = np.frombuffer(buf[offset:end], dtype="<u8").astype(np.uint64)
        return cls(shape, words.reshape(tuple(shape[:-1]) + (_n_words(shape[-1]),))), end

    def write(self, fh: BinaryIO) -> None:
        fh.write(self.to_bytes())


def read_tensors(data: bytes) -> list[BooleanTensor]:
    """Decode a concatenation of serialized tensors."""
    buf = memoryview(data)
    out = []
    pos = 0
    while pos < len(buf):
        tensor, used = BooleanTensor._read(buf[pos:])
        out.append(tensor)
        pos += used
    return out


def _check_same_shape(a: BooleanTensor, b: BooleanTensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def xnor(a: BooleanTensor, b: BooleanTensor) -> BooleanTensor:
    """Elementwise XNOR, i.e. the product in +/-1 encoding."""
    _check_same_shape(a, b)
    return BooleanTensor(a.shape, ~(a.words ^ b.words) & a._mask())


def forward_layer(x: BooleanTensor, w: BooleanTensor, w0: BooleanTensor) -> np.ndarray:
    """Integer pre-activations ``w0[j] + sum_i x[k,i] * w[i,j]`` for a [K, m] batch.

    Each dot product is ``m - 2 * popcount(x_row XOR w_col)``; padding bits are
    zero on both sides, so they never count as disagreements.
    """
    if len(x.shape) != 2 or len(w.shape) != 2 or len(w0.shape) != 1:
        raise ValueError("forward_layer expects x[K,m], w[m,n], w0[n]")
    K, m = x.shape
    if w.shape[0] != m:
        raise ValueError(f"inner dimension mismatch: x has {m} columns, w has {w.shape[0]} rows")
    n = w.shape[1]
    if w0.shape[0] != n:
        raise ValueError(f"bias length {w0.shape[0]} does not match {n} outputs")
    cols = w.columns.words  # [n, words]
    disagree = np.bitwise_count(x.words[:, None, :] ^ cols[None, :, :]).sum(axis=-1, dtype=np.int64)
    return (m - 2 * disagree) + w0.to_pm()[None, :]


def forward_reference(x: BooleanTensor, w: BooleanTensor, w0: BooleanTensor) -> np.ndarray:
    """Unpacked +/-1 integer matmul; the exact reference for ``forward_layer``."""
    if x.shape[1] != w.shape[0] or w.shape[1] != w0.shape[0]:
        raise ValueError("dimension mismatch")
    return x.to_pm() @ w.to_pm() + w0.to_pm()[None, :]


def binarize(p: np.ndarray) -> BooleanTensor:
    # 0 maps to True
    return BooleanTensor.from_bool(np.asarray(p) >= 0)
