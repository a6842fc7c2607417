"""Update-history storage, drift statistics, and JSONL persistence."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .errors import EmbedriftError, ParseError, VersionError
from .store import EmbeddingTable, cosine, _format_f32

SCHEMA_VERSION = "1"


@dataclass
class Snapshot:
    """One post-update embedding state for a token occurrence."""

    token: str
    epoch: int
    occurrence: int
    position: int
    vector: np.ndarray
    zero: bool = False

    def __eq__(self, other) -> bool:
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (self.token == other.token and self.epoch == other.epoch
                and self.occurrence == other.occurrence
                and self.position == other.position and self.zero == other.zero
                and self.vector.tobytes() == other.vector.tobytes())


@dataclass
class RunHeader:
    config: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    # Timing is informational only and excluded from serialization and
    # equality so that repeated runs produce identical logs.
    started_at: str | None = field(default=None, compare=False)
    duration_s: float | None = field(default=None, compare=False)


class TrajectoryLog:
    """Append-only snapshot history plus run metadata.

    Snapshots are recorded in run order; ``record`` assigns the global
    position and the per-token, per-epoch occurrence ordinal.
    """

    def __init__(self, header: RunHeader | None = None):
        self.header = header or RunHeader()
        self.snapshots: list[Snapshot] = []
        self._epoch = 1
        self._occ_counts: dict[tuple[str, int], int] = {}

    def set_epoch(self, epoch: int) -> None:
        if epoch < 1:
            raise ValueError("epoch must be >= 1")
        self._epoch = epoch

    @property
    def epoch(self) -> int:
        return self._epoch

    def record(self, token: str, vector: np.ndarray, zero: bool = False) -> Snapshot:
        key = (token, self._epoch)
        occ = self._occ_counts.get(key, 0) + 1
        self._occ_counts[key] = occ
        snap = Snapshot(token=token, epoch=self._epoch, occurrence=occ,
                        position=len(self.snapshots), vector=vector, zero=zero)
        self.snapshots.append(snap)
        return snap

    def __len__(self) -> int:
        return len(self.snapshots)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrajectoryLog):
            return NotImplemented
        return self.header == other.header and self.snapshots == other.snapshots


def token_history(log: TrajectoryLog, token: str) -> list[Snapshot]:
    """All snapshots of ``token`` in run order; empty if never updated."""
    return [s for s in log.snapshots if s.token == token]


def drift(refined, origin: EmbeddingTable, token: str) -> float | None:
    """Cosine similarity between a token's latest vector and its original.

    ``refined`` may be an EmbeddingTable or a raw vector. Returns None when
    the token is missing from the origin table (no baseline to compare
    against) or, for table input, from the refined table.
    """
    if isinstance(refined, EmbeddingTable):
        vec = refined.lookup(token)
        if vec is None:
            return None
    else:
        vec = refined
    orig = origin.lookup(token)
    if orig is None:
        return None
    return cosine(vec, orig)


def mean_drift(refined: EmbeddingTable, origin: EmbeddingTable,
               tokens=None) -> float:
    """Arithmetic mean drift over tokens present in both tables.

    ``tokens`` defaults to every shared token. Raises if no requested token
    is present in both tables.
    """
    if tokens is None:
        tokens = [t for t in refined.tokens() if t in origin]
    values = []
    for token in tokens:
        if token in refined and token in origin:
            values.append(drift(refined, origin, token))
    if not values:
        raise EmbedriftError("mean drift over an empty set of shared tokens")
    return sum(values) / len(values)


def export_jsonl(log: TrajectoryLog, sink: str | os.PathLike | TextIO) -> None:
    """Write a log as JSONL: a header line then one line per snapshot.

    Header fields: schema_version, config, stats. Snapshot fields: token,
    epoch, occ, pos, vec, zero. Vector components are written as the
    shortest decimal that restores the identical 32-bit float.
    """
    own = isinstance(sink, (str, os.PathLike))
    fh: TextIO = open(sink, "w", encoding="utf-8", newline="\n") if own else sink
    try:
        header = {"schema_version": SCHEMA_VERSION, "config": log.header.config,
                  "stats": log.header.stats}
        fh.write(json.dumps(header, sort_keys=True))
        fh.write("\n")
        for snap in log.snapshots:
            head = json.dumps({"token": snap.token, "epoch": snap.epoch,
                               "occ": snap.occurrence, "pos": snap.position,
                               "zero": snap.zero}, sort_keys=True)
            vec = ",".join(_format_f32(x) for x in snap.vector)
            fh.write(f'{head[:-1]}, "vec": [{vec}]}}\n')
    finally:
        if own:
            fh.close()


def import_jsonl(source: str | os.PathLike | TextIO) -> TrajectoryLog:
    """Read a JSONL trajectory log written by :func:`export_jsonl`."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()
    if not lines:
        raise ParseError("line 1: missing header", 1)

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise ParseError("line 1: malformed header JSON", 1) from None
    if not isinstance(header, dict) or "schema_version" not in header:
        raise ParseError("line 1: header object missing schema_version", 1)
    if header["schema_version"] != SCHEMA_VERSION:
        raise VersionError(
            f"unsupported schema_version {header['schema_version']!r}, "
            f"expected {SCHEMA_VERSION!r}")

    log = TrajectoryLog(RunHeader(config=header.get("config", {}),
                                  stats=header.get("stats", {})))
    for i, line in enumerate(lines[1:]):
        line_no = i + 2
        if not line.strip():
            raise ParseError(f"line {line_no}: blank line", line_no)
        try:
            obj = json.loads(line)
            snap = Snapshot(token=obj["token"], epoch=int(obj["epoch"]),
                            occurrence=int(obj["occ"]), position=int(obj["pos"]),
                            vector=np.asarray(obj["vec"], dtype=np.float32),
                            zero=bool(obj["zero"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ParseError(f"line {line_no}: malformed snapshot", line_no) from None
        log.snapshots.append(snap)
        key = (snap.token, snap.epoch)
        log._occ_counts[key] = max(log._occ_counts.get(key, 0), snap.occurrence)
        log._epoch = max(log._epoch, snap.epoch)
    return log
