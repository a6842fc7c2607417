"""Corpus ingestion: tagged-TSV loading and plain-text tokenization.

Part-of-speech tagging and lemmatization are expected to happen upstream;
the tagged-TSV reader consumes their output. The plain tokenizer is a
fallback that applies no POS filtering or lemma substitution.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import TextIO

from .errors import ParseError

DEFAULT_ALLOWED_POS = frozenset({"ADJ", "ADV", "NOUN", "PROPN", "VERB"})

# Alphanumeric runs (underscore excluded, so joined compounds split into
# their components); apostrophes kept only word-internal.
_WORD_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*", re.UNICODE)


@dataclass
class TokenDocument:
    doc_id: str
    tokens: list[str]


@dataclass
class CorpusStats:
    total_tokens: int = 0
    unique_tokens: int = 0
    documents: int = 0

    @property
    def mean_document_length(self) -> float:
        return self.total_tokens / self.documents if self.documents else 0.0

    def as_dict(self) -> dict:
        return {
            "total_tokens": self.total_tokens,
            "unique_tokens": self.unique_tokens,
            "documents": self.documents,
        }


@dataclass
class Corpus:
    documents: list[TokenDocument] = field(default_factory=list)
    stats: CorpusStats = field(default_factory=CorpusStats)


@dataclass
class FilterConfig:
    """Token filtering rules applied during ingestion."""

    allowed_pos: frozenset[str] = DEFAULT_ALLOWED_POS
    stopwords: frozenset[str] = frozenset()
    lowercase_except_propn: bool = True
    use_lemma: bool = True

    def __post_init__(self):
        if not self.allowed_pos:
            raise ValueError("allowed_pos must not be empty")
        self.allowed_pos = frozenset(self.allowed_pos)
        self.stopwords = frozenset(self.stopwords)


def compute_stats(documents: list[TokenDocument]) -> CorpusStats:
    total = 0
    unique: set[str] = set()
    for doc in documents:
        total += len(doc.tokens)
        unique.update(doc.tokens)
    return CorpusStats(total_tokens=total, unique_tokens=len(unique),
                       documents=len(documents))


def build_corpus(documents: list[TokenDocument]) -> Corpus:
    return Corpus(documents=documents, stats=compute_stats(documents))


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Recompute the stats record from the documents."""
    return compute_stats(corpus.documents)


def _emit(token: str, lemma: str, pos: str, cfg: FilterConfig) -> str | None:
    if pos not in cfg.allowed_pos:
        return None
    out = lemma if cfg.use_lemma else token
    if not (pos == "PROPN" and cfg.lowercase_except_propn):
        out = out.lower()
    if out.lower() in cfg.stopwords:
        return None
    return out


def load_tagged_tsv(source: str | os.PathLike | TextIO,
                    cfg: FilterConfig | None = None) -> Corpus:
    """Load a pre-tagged corpus.

    Input lines are ``token<TAB>lemma<TAB>pos``. A blank line closes the
    current document; a line starting with ``#doc `` names the next
    document (and closes the current one if it already has rows).
    Documents with no surviving tokens are dropped.
    """
    cfg = cfg or FilterConfig()
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()

    documents: list[TokenDocument] = []
    pending_id: str | None = None
    tokens: list[str] = []

    def flush():
        nonlocal pending_id, tokens
        if tokens:
            doc_id = pending_id if pending_id is not None else f"doc{len(documents)}"
            documents.append(TokenDocument(doc_id=doc_id, tokens=tokens))
        pending_id = None
        tokens = []

    for i, line in enumerate(lines):
        line_no = i + 1
        if not line.strip():
            flush()
            continue
        if line.startswith("#doc "):
            flush()
            pending_id = line[len("#doc "):].strip()
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"line {line_no}: expected 3 tab-separated fields, found {len(fields)}",
                line_no)
        token, lemma, pos = fields
        if not token or not lemma or not pos:
            raise ParseError(f"line {line_no}: empty field", line_no)
        out = _emit(token, lemma, pos, cfg)
        if out is not None:
            tokens.append(out)
    flush()
    return build_corpus(documents)


def tokenize_plain(text: str, cfg: FilterConfig | None = None,
                   doc_id: str = "") -> TokenDocument:
    """Tokenize raw text: split on non-alphanumeric boundaries, lowercase,
    drop stopwords and pure-digit tokens."""
    cfg = cfg or FilterConfig()
    tokens = []
    for match in _WORD_RE.finditer(text):
        tok = match.group().lower()
        if tok.isdigit() or tok in cfg.stopwords:
            continue
        tokens.append(tok)
    return TokenDocument(doc_id=doc_id, tokens=tokens)


def load_plain_text(source: str | os.PathLike | TextIO,
                    cfg: FilterConfig | None = None,
                    doc_prefix: str = "") -> Corpus:
    """Load plain text, one document per non-empty line."""
    cfg = cfg or FilterConfig()
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8", errors="replace") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()
    documents = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        doc = tokenize_plain(line, cfg, doc_id=f"{doc_prefix}line{i + 1}")
        if doc.tokens:
            documents.append(doc)
    return build_corpus(documents)


def load_stopwords(source: str | os.PathLike | TextIO) -> frozenset[str]:
    """Read a stopword list, one token per line, case-folded."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()
    return frozenset(line.strip().lower() for line in lines if line.strip())
