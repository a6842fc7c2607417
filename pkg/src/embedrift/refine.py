"""Iterative contextual refinement of token embeddings.

A fixed-width window slides over each document; at every position the
center token's embedding is replaced by the renormalized sum of its
current value and the learning-rate-scaled sum of its neighbors' current
values. Updates are online: later windows see the values written by
earlier ones. Every update is recorded in a trajectory log.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterator

import numpy as np

from .corpus import Corpus, TokenDocument
from .errors import ConfigError
from .store import EmbeddingTable, normalize_all
from .trajectory import RunHeader, TrajectoryLog


@dataclass
class RefineConfig:
    """Run parameters for :func:`refine`."""

    window_size: int = 13
    learning_rate: float = 0.01
    epochs: int = 1
    zero_norm_epsilon: float = 1e-12
    normalize_pretrained: bool = True

    def __post_init__(self):
        if self.window_size % 2 == 0:
            raise ConfigError(f"window size must be odd (got {self.window_size})")
        if self.window_size < 3:
            raise ConfigError(f"window size must be at least 3 (got {self.window_size})")
        if not math.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be finite and positive "
                              f"(got {self.learning_rate})")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1 (got {self.epochs})")
        if self.zero_norm_epsilon <= 0:
            raise ConfigError("zero-norm epsilon must be positive")

    def as_dict(self) -> dict:
        return {
            "window_size": self.window_size,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "zero_norm_epsilon": self.zero_norm_epsilon,
            "normalize_pretrained": self.normalize_pretrained,
        }


@dataclass
class ContextWindow:
    """One target position and its in-document neighbor positions."""

    doc_index: int
    target_pos: int
    neighbor_pos: list[int]


def context_windows(doc: TokenDocument, window_size: int,
                    doc_index: int = 0) -> Iterator[ContextWindow]:
    """Yield one window per token position, in document order.

    Neighbors are the up-to ``(window_size - 1) // 2`` positions on each
    side, truncated at the document boundaries. Windows never span
    documents.
    """
    if window_size % 2 == 0:
        raise ConfigError(f"window size must be odd (got {window_size})")
    if window_size < 3:
        raise ConfigError(f"window size must be at least 3 (got {window_size})")
    half = (window_size - 1) // 2
    n = len(doc.tokens)
    for t in range(n):
        lo = max(0, t - half)
        hi = min(n - 1, t + half)
        neighbors = list(range(lo, t)) + list(range(t + 1, hi + 1))
        yield ContextWindow(doc_index=doc_index, target_pos=t,
                            neighbor_pos=neighbors)


class EmbeddingState:
    """Mutable working embeddings for one refinement run.

    Rows cover every distinct corpus token, initialized from the origin
    table where an entry exists and from the zero vector otherwise, so a
    lookup always yields the most current value with origin fallback.
    """

    def __init__(self, origin: EmbeddingTable, corpus: Corpus,
                 zero_norm_epsilon: float = 1e-12):
        self.origin = origin
        self.corpus = corpus
        self.zero_norm_epsilon = zero_norm_epsilon
        self.updated_tokens: set[str] = set()
        vocab: dict[str, int] = {}
        for doc in corpus.documents:
            for tok in doc.tokens:
                if tok not in vocab:
                    vocab[tok] = len(vocab)
        self.vocab = vocab
        self.matrix = np.zeros((len(vocab), origin.dim), dtype=np.float32)
        for tok, row in vocab.items():
            vec = origin.lookup(tok)
            if vec is not None:
                self.matrix[row] = vec
        self._doc_ids_cache: dict[int, np.ndarray] = {}

    def doc_ids(self, doc_index: int) -> np.ndarray:
        ids = self._doc_ids_cache.get(doc_index)
        if ids is None:
            doc = self.corpus.documents[doc_index]
            ids = np.fromiter((self.vocab[t] for t in doc.tokens),
                              dtype=np.intp, count=len(doc.tokens))
            self._doc_ids_cache[doc_index] = ids
        return ids

    def current_vector(self, token: str) -> np.ndarray | None:
        row = self.vocab.get(token)
        if row is None:
            return self.origin.lookup(token)
        return self.matrix[row]

    @property
    def current(self) -> EmbeddingTable:
        """Materialize the working values as a table."""
        table = EmbeddingTable(self.origin.dim)
        for tok, row in self.vocab.items():
            table.vectors[tok] = self.matrix[row].copy()
        return table


def update_target(state: EmbeddingState, window: ContextWindow,
                  learning_rate: float, trajectory: TrajectoryLog) -> None:
    """Apply one window update in place and record a snapshot.

    The target's new value is ``current + learning_rate * sum(neighbors)``
    renormalized to unit length; a sum with norm at or below the zero-norm
    threshold leaves the zero vector and flags the snapshot.
    """
    ids = state.doc_ids(window.doc_index)
    matrix = state.matrix
    tid = ids[window.target_pos]
    if window.neighbor_pos:
        raw = matrix[ids[window.neighbor_pos]].sum(axis=0, dtype=np.float64)
        raw *= learning_rate
        raw += matrix[tid]
    else:
        raw = matrix[tid].astype(np.float64)
    norm = math.sqrt(float(np.dot(raw, raw)))
    if norm > state.zero_norm_epsilon:
        raw /= norm
        new = raw.astype(np.float32)
        zero = False
    else:
        new = np.zeros(matrix.shape[1], dtype=np.float32)
        zero = True
    state.matrix[tid] = new
    token = state.corpus.documents[window.doc_index].tokens[window.target_pos]
    state.updated_tokens.add(token)
    trajectory.record(token, new, zero)


def refine(corpus: Corpus, pretrained: EmbeddingTable, config: RefineConfig,
           emit_untouched: bool = False) -> tuple[EmbeddingTable, TrajectoryLog]:
    """Run the full refinement over ``corpus`` and return the refined table
    plus the trajectory log.

    Epochs chain: each pass continues from the previous pass's state. The
    refined table holds one entry per distinct corpus token (unit norm or,
    for never-imputed unknowns, the zero vector); ``emit_untouched`` also
    copies over origin entries for tokens absent from the corpus. An empty
    corpus yields a copy of the (optionally normalized) origin table and an
    empty log.
    """
    if config.normalize_pretrained:
        origin = normalize_all(pretrained, config.zero_norm_epsilon)
    else:
        origin = pretrained
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    state = EmbeddingState(origin, corpus, config.zero_norm_epsilon)
    log = TrajectoryLog(RunHeader(config=config.as_dict(),
                                  stats=corpus.stats.as_dict(),
                                  started_at=started))
    for epoch in range(1, config.epochs + 1):
        log.set_epoch(epoch)
        for doc_index in range(len(corpus.documents)):
            doc = corpus.documents[doc_index]
            for window in context_windows(doc, config.window_size, doc_index):
                update_target(state, window, config.learning_rate, log)
    log.header.duration_s = time.perf_counter() - t0

    if not corpus.documents:
        refined = EmbeddingTable(origin.dim, normalized=origin.normalized)
        for tok, vec in origin.vectors.items():
            refined.vectors[tok] = vec.copy()
        return refined, log

    refined = EmbeddingTable(origin.dim, normalized=True)
    for tok, row in state.vocab.items():
        refined.vectors[tok] = state.matrix[row].copy()
    if emit_untouched:
        for tok, vec in origin.vectors.items():
            if tok not in refined.vectors:
                refined.vectors[tok] = vec.copy()
    return refined, log
