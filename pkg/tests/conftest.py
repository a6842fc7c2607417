"""Shared fixtures and independent reference implementations.

The reference implementations here deliberately avoid the library's code
paths: the refinement oracle is a plain dict-and-loop version of the update
rule, and random tables are serialized with struct rather than the
library's writers.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np
import pytest

from embedrift import EmbeddingTable, TokenDocument, build_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def naive_refine(documents, pretrained, window_size, alpha, epochs,
                 normalize_pretrained=True, eps=1e-12):
    """Straight-line reference implementation of the window update loop."""
    half = (window_size - 1) // 2
    dim = pretrained.dim
    origin = {}
    for tok, vec in pretrained.vectors.items():
        v = vec.astype(np.float64)
        n = math.sqrt(float(np.dot(v, v)))
        if normalize_pretrained and n > eps:
            origin[tok] = (v / n).astype(np.float32)
        else:
            origin[tok] = vec.copy()
    current: dict[str, np.ndarray] = {}
    snapshots = []
    zero = np.zeros(dim, dtype=np.float32)

    def value(tok):
        return current.get(tok, origin.get(tok, zero))

    for epoch in range(1, epochs + 1):
        for doc in documents:
            toks = doc.tokens
            for t in range(len(toks)):
                raw = value(toks[t]).astype(np.float64)
                for p in range(max(0, t - half), min(len(toks), t + half + 1)):
                    if p != t:
                        raw = raw + alpha * value(toks[p]).astype(np.float64)
                n = math.sqrt(float(np.dot(raw, raw)))
                new = (raw / n).astype(np.float32) if n > eps else zero.copy()
                current[toks[t]] = new
                snapshots.append((toks[t], epoch, new))
    return current, snapshots


def random_table(rng, vocab_size, dim, unit=False):
    table = EmbeddingTable(dim)
    for i in range(vocab_size):
        v = rng.normal(size=dim).astype(np.float32)
        if unit:
            v = (v.astype(np.float64) / np.linalg.norm(v.astype(np.float64))).astype(np.float32)
        table.set(f"w{i}", v)
    return table


def random_corpus(rng, vocab_size, n_docs, max_len, min_len=1):
    docs = []
    for d in range(n_docs):
        length = int(rng.integers(min_len, max_len + 1))
        toks = [f"w{int(i)}" for i in rng.integers(0, vocab_size, size=length)]
        docs.append(TokenDocument(doc_id=f"d{d}", tokens=toks))
    return build_corpus(docs)


def w2v_binary_bytes(entries, dim, trailing_newline=True):
    """Serialize (word, floats) pairs in word2vec binary format by hand."""
    out = bytearray(f"{len(entries)} {dim}\n".encode("ascii"))
    for word, vec in entries:
        out += word.encode("utf-8") if isinstance(word, str) else word
        out += b" "
        out += struct.pack(f"<{dim}f", *[float(x) for x in vec])
        if trailing_newline:
            out += b"\n"
    return bytes(out)
