"""Embedding tables and word2vec-format persistence.

Vectors are numpy float32 arrays of a shared dimensionality. Tables are
treated as immutable once loaded; transformations return new tables.
"""

from __future__ import annotations

import io
import math
import os
from typing import BinaryIO, Iterable, TextIO

import numpy as np

from .errors import DimensionError, FormatError, TruncationError

ZERO_NORM_EPSILON = 1e-12


class EmbeddingTable:
    """Token to vector map with a fixed dimensionality.

    ``normalized`` records whether every non-zero entry has been scaled to
    unit Euclidean norm. ``duplicate_count`` counts input words that were
    overwritten by a later occurrence during loading.
    """

    def __init__(self, dim: int, vectors: dict[str, np.ndarray] | None = None,
                 normalized: bool = False, duplicate_count: int = 0):
        if dim < 1:
            raise FormatError(f"embedding dimension must be positive, got {dim}")
        self.dim = dim
        self.vectors: dict[str, np.ndarray] = {}
        self.normalized = normalized
        self.duplicate_count = duplicate_count
        if vectors:
            for token, vec in vectors.items():
                self.set(token, vec)

    def set(self, token: str, vec) -> None:
        if not token:
            raise FormatError("empty token")
        arr = np.asarray(vec, dtype=np.float32)
        if arr.shape != (self.dim,):
            raise DimensionError(
                f"vector for {token!r} has length {arr.shape}, table dim is {self.dim}")
        self.vectors[token] = arr

    def lookup(self, token: str) -> np.ndarray | None:
        """Return the stored vector for ``token``, or None if absent."""
        return self.vectors.get(token)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def tokens(self) -> Iterable[str]:
        return self.vectors.keys()

    def __eq__(self, other) -> bool:
        # Equality is over dim and entry bits; the normalized flag is
        # metadata and entry order is irrelevant.
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        if self.dim != other.dim or self.vectors.keys() != other.vectors.keys():
            return False
        return all(self.vectors[t].tobytes() == other.vectors[t].tobytes()
                   for t in self.vectors)

    def __repr__(self) -> str:
        return f"EmbeddingTable(dim={self.dim}, entries={len(self.vectors)})"


def _format_f32(x: np.float32) -> str:
    # Shortest decimal that parses back to the identical 32-bit value.
    return np.format_float_positional(x, unique=True, trim="0")


def _read_header_fields(line: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise FormatError(f"malformed header {line!r}: expected '<vocab> <dim>'")
    try:
        vocab, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise FormatError(f"malformed header {line!r}: counts must be integers") from None
    if vocab < 0 or dim < 1:
        raise FormatError(f"malformed header {line!r}: vocab must be >= 0 and dim >= 1")
    return vocab, dim


def load_word2vec_binary(source: str | os.PathLike | bytes | BinaryIO,
                         normalize: bool = False) -> EmbeddingTable:
    """Load a word2vec binary file.

    The format is an ASCII header ``"<vocab> <dim>\\n"`` followed by
    ``vocab`` records, each a space-terminated word and ``dim``
    little-endian IEEE-754 float32 values, optionally followed by a single
    newline. Words are decoded as UTF-8 with lossy replacement; a later
    duplicate word overwrites the earlier entry.
    """
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()

    nl = data.find(b"\n")
    if nl < 0 or nl > 128:
        raise FormatError("malformed header: no newline found")
    try:
        header = data[:nl].decode("ascii")
    except UnicodeDecodeError:
        raise FormatError("malformed header: not ASCII") from None
    vocab, dim = _read_header_fields(header)

    offset = nl + 1
    if vocab == 0:
        if offset != len(data):
            raise FormatError("vocabulary declared empty but trailing bytes present")
        return EmbeddingTable(dim)

    table = EmbeddingTable(dim)
    rec_bytes = 4 * dim
    dups = 0
    for i in range(vocab):
        sep = data.find(b" ", offset)
        if sep < 0:
            raise TruncationError(f"truncated record at index {i}: no word terminator", i)
        word = data[offset:sep].decode("utf-8", errors="replace")
        if not word:
            raise FormatError(f"empty word in record at index {i}")
        offset = sep + 1
        if offset + rec_bytes > len(data):
            raise TruncationError(f"truncated record at index {i}: incomplete vector", i)
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += rec_bytes
        if offset < len(data) and data[offset:offset + 1] == b"\n":
            offset += 1
        if not np.isfinite(vec).all():
            raise FormatError(f"non-finite value in record at index {i} ({word!r})")
        if word in table.vectors:
            dups += 1
        table.set(word, vec)
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after final record")
    table.duplicate_count = dups
    if normalize:
        return normalize_all(table)
    return table


def load_word2vec_text(source: str | os.PathLike | TextIO,
                       normalize: bool = False) -> EmbeddingTable:
    """Load a word2vec text file: header line ``"<vocab> <dim>"`` then one
    ``"<word> <f1> ... <fdim>"`` line per entry."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8", errors="replace") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()

    if not lines:
        raise FormatError("malformed header: empty input")
    vocab, dim = _read_header_fields(lines[0])
    records = lines[1:]
    if vocab == 0:
        if any(line.strip() for line in records):
            raise FormatError("vocabulary declared empty but trailing lines present")
        return EmbeddingTable(dim)
    if len(records) < vocab:
        raise TruncationError(
            f"truncated record at index {len(records)}: "
            f"declared {vocab} records, found {len(records)}", len(records))
    if len(records) > vocab:
        raise FormatError(f"{len(records) - vocab} extra lines after final record")

    table = EmbeddingTable(dim)
    dups = 0
    for i, line in enumerate(records):
        line_no = i + 2
        parts = line.split(" ")
        if len(parts) != dim + 1:
            raise FormatError(
                f"line {line_no}: expected {dim} values, found {len(parts) - 1}")
        word = parts[0]
        if not word:
            raise FormatError(f"line {line_no}: empty word")
        try:
            vec = np.array([float(p) for p in parts[1:]], dtype=np.float32)
        except ValueError:
            raise FormatError(f"line {line_no}: malformed float value") from None
        if not np.isfinite(vec).all():
            raise FormatError(f"line {line_no}: non-finite value")
        if word in table.vectors:
            dups += 1
        table.set(word, vec)
    table.duplicate_count = dups
    if normalize:
        return normalize_all(table)
    return table


def save_word2vec_text(table: EmbeddingTable,
                       sink: str | os.PathLike | TextIO) -> None:
    """Write ``table`` in word2vec text format, entries in lexicographic
    token order. Reloading the output restores bit-identical float32
    values."""
    own = isinstance(sink, (str, os.PathLike))
    fh: TextIO = open(sink, "w", encoding="utf-8", newline="\n") if own else sink
    try:
        fh.write(f"{len(table)} {table.dim}\n")
        for token in sorted(table.vectors):
            if " " in token or "\n" in token:
                raise FormatError(
                    f"token {token!r} contains whitespace and cannot be serialized")
            vec = table.vectors[token]
            fh.write(token)
            for x in vec:
                fh.write(" ")
                fh.write(_format_f32(x))
            fh.write("\n")
    finally:
        if own:
            fh.close()


def dumps_word2vec_text(table: EmbeddingTable) -> str:
    buf = io.StringIO()
    save_word2vec_text(table, buf)
    return buf.getvalue()


def normalize_all(table: EmbeddingTable,
                  epsilon: float = ZERO_NORM_EPSILON) -> EmbeddingTable:
    """Scale every entry with norm > ``epsilon`` to unit length.

    Entries at or below the threshold are kept as-is. Idempotent: a table
    already carrying the normalized flag is returned unchanged.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if table.normalized:
        return table
    out = EmbeddingTable(table.dim, normalized=True,
                         duplicate_count=table.duplicate_count)
    for token, vec in table.vectors.items():
        v64 = vec.astype(np.float64)
        norm = math.sqrt(float(np.dot(v64, v64)))
        if norm > epsilon:
            out.vectors[token] = (v64 / norm).astype(np.float32)
        else:
            out.vectors[token] = vec.copy()
    return out


def cosine(a, b) -> float:
    """Cosine similarity of two equal-length vectors, clamped to [-1, 1].

    Returns 0.0 when either vector's norm is at or below 1e-12.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DimensionError(f"cosine of shapes {va.shape} and {vb.shape}")
    da = float(np.dot(va, va))
    db = float(np.dot(vb, vb))
    if math.sqrt(da) <= ZERO_NORM_EPSILON or math.sqrt(db) <= ZERO_NORM_EPSILON:
        return 0.0
    c = float(np.dot(va, vb)) / math.sqrt(da * db)
    return max(-1.0, min(1.0, c))
