"""Nearest-neighbor queries, drift tables, and PCA trajectory projection."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnknownTokenError
from .store import ZERO_NORM_EPSILON, EmbeddingTable, cosine
from .trajectory import Snapshot, TrajectoryLog, token_history


@dataclass
class NeighborList:
    query: str
    entries: list[tuple[str, float]]


@dataclass
class PcaModel:
    """Top-k principal directions of a point set.

    ``components`` rows are orthonormal; ``explained_variance`` holds the
    matching eigenvalues of the sample covariance, sorted descending.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def transform(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=np.float64)
        return (x - self.mean) @ self.components.T


@dataclass
class ProjectedTrajectory:
    token: str
    k: int
    points: np.ndarray
    initial_point: np.ndarray
    final_point: np.ndarray
    origin_point: np.ndarray | None = None


def _score_chunk(tokens, table, query_vec):
    out = []
    for tok in tokens:
        vec = table.vectors[tok]
        if math.sqrt(float(np.dot(vec.astype(np.float64), vec.astype(np.float64)))) \
                <= ZERO_NORM_EPSILON:
            continue
        out.append((tok, cosine(query_vec, vec)))
    return out


def nearest_neighbors(table: EmbeddingTable, query_token: str, k: int,
                      threads: int = 1) -> NeighborList:
    """Rank every other non-zero entry by cosine similarity to the query.

    Returns the top ``k`` (or all, if fewer exist), ties broken by
    ascending token. ``threads`` > 1 shards the scan; the merged result is
    identical to the sequential one.
    """
    if k < 1:
        raise ConfigError(f"k must be at least 1 (got {k})")
    query_vec = table.lookup(query_token)
    if query_vec is None:
        raise UnknownTokenError(f"unknown token {query_token!r}", (query_token,))
    candidates = [t for t in table.tokens() if t != query_token]
    threads = max(1, int(threads))
    if threads == 1 or len(candidates) < 1024:
        scored = _score_chunk(candidates, table, query_vec)
    else:
        step = (len(candidates) + threads - 1) // threads
        chunks = [candidates[i:i + step] for i in range(0, len(candidates), step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(_score_chunk, chunks,
                             [table] * len(chunks), [query_vec] * len(chunks))
        scored = [pair for part in parts for pair in part]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return NeighborList(query=query_token, entries=scored[:k])


def compare_neighbors(refined: EmbeddingTable, original: EmbeddingTable,
                      query_token: str, k: int,
                      threads: int = 1) -> tuple[NeighborList, NeighborList]:
    """Neighbor lists for the same query in the refined and original tables."""
    if query_token not in refined:
        raise UnknownTokenError(
            f"token {query_token!r} not in refined table", (query_token,))
    if query_token not in original:
        raise UnknownTokenError(
            f"token {query_token!r} not in original table", (query_token,))
    return (nearest_neighbors(refined, query_token, k, threads),
            nearest_neighbors(original, query_token, k, threads))


def _jacobi_eigh(matrix: np.ndarray, tol: float = 1e-10,
                 max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm drops below ``tol`` or the
    sweep cap is hit. Returns (eigenvalues, eigenvector columns), unsorted.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float((a * a).sum() - (np.diag(a) ** 2).sum())))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                diff = float(a[q, q] - a[p, p])
                if abs(diff) > abs(apq) * 1e10:
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def _fix_signs(components: np.ndarray, threshold: float = 1e-9) -> np.ndarray:
    out = components.copy()
    for i in range(out.shape[0]):
        for x in out[i]:
            if abs(x) > threshold:
                if x < 0:
                    out[i] = -out[i]
                break
    return out


def pca_fit(points, k: int) -> PcaModel:
    """Fit a PCA model on a point set.

    Centers the points, eigendecomposes the sample covariance, and keeps
    the top ``k`` eigenpairs. Component signs are fixed so each component's
    first entry above 1e-9 in magnitude is positive.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ConfigError("PCA requires at least 2 points")
    n, dim = x.shape
    if not 1 <= k <= dim:
        raise ConfigError(f"k must be in [1, {dim}] (got {k})")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = _jacobi_eigh(cov)
    order = np.argsort(-eigvals, kind="stable")[:k]
    components = _fix_signs(eigvecs[:, order].T)
    variance = np.maximum(eigvals[order], 0.0)
    return PcaModel(mean=mean, components=components, explained_variance=variance)


def project_trajectories(log: TrajectoryLog, origin: EmbeddingTable,
                         tokens: list[str], k: int) -> list[ProjectedTrajectory]:
    """Project the snapshot histories of ``tokens`` into a shared k-D space.

    One PCA model is fitted on the union of all requested tokens'
    snapshots plus their origin vectors (where present); every trajectory
    is projected with it.
    """
    if k not in (2, 3):
        raise ConfigError(f"projection dimension must be 2 or 3 (got {k})")
    histories: dict[str, list[Snapshot]] = {}
    for token in tokens:
        history = token_history(log, token)
        if not history:
            raise UnknownTokenError(
                f"token {token!r} has no snapshots in the log", (token,))
        histories[token] = history

    collected: list[np.ndarray] = []
    for token in tokens:
        collected.extend(s.vector for s in histories[token])
    for token in tokens:
        vec = origin.lookup(token)
        if vec is not None:
            collected.append(vec)
    model = pca_fit(collected, k)

    out = []
    for token in tokens:
        pts = model.transform(np.stack([s.vector for s in histories[token]]))
        origin_vec = origin.lookup(token)
        origin_point = model.transform(origin_vec) if origin_vec is not None else None
        out.append(ProjectedTrajectory(token=token, k=k, points=pts,
                                       initial_point=pts[0], final_point=pts[-1],
                                       origin_point=origin_point))
    return out


def truncate_score(x: float) -> str:
    """Two decimal places, truncated toward zero (display only)."""
    s = f"{x:.12f}"
    return s[:s.index(".") + 3]


def render_neighbors_text(neighbors: NeighborList) -> str:
    lines = [f"query: {neighbors.query}"]
    width = max([len(t) for t, _ in neighbors.entries] + [5])
    lines.append(f"{'rank':>4}  {'token':<{width}}  score")
    for rank, (token, score) in enumerate(neighbors.entries, start=1):
        lines.append(f"{rank:>4}  {token:<{width}}  {truncate_score(score)}")
    return "\n".join(lines)


def render_comparison_text(refined: NeighborList, original: NeighborList) -> str:
    lines = [f"query: {refined.query}"]
    w1 = max([len(t) for t, _ in refined.entries] + [7])
    w2 = max([len(t) for t, _ in original.entries] + [8])
    lines.append(f"{'rank':>4}  {'refined':<{w1}}  {'score':<5}  "
                 f"{'original':<{w2}}  score")
    for i in range(max(len(refined.entries), len(original.entries))):
        left = refined.entries[i] if i < len(refined.entries) else ("", None)
        right = original.entries[i] if i < len(original.entries) else ("", None)
        ls = truncate_score(left[1]) if left[1] is not None else ""
        rs = truncate_score(right[1]) if right[1] is not None else ""
        lines.append(f"{i + 1:>4}  {left[0]:<{w1}}  {ls:<5}  "
                     f"{right[0]:<{w2}}  {rs}")
    return "\n".join(lines)


def neighbors_csv_rows(neighbors: NeighborList) -> list[list]:
    rows = [["query", "rank", "token", "score"]]
    for rank, (token, score) in enumerate(neighbors.entries, start=1):
        rows.append([neighbors.query, rank, token, float(score)])
    return rows


def trajectory_csv_rows(traj: ProjectedTrajectory,
                        history: list[Snapshot]) -> list[list]:
    """Rows (token, epoch, occ, c1, c2[, c3], role) for one trajectory.

    Every snapshot appears as a step row; the first and last snapshots are
    additionally emitted as initial and final rows, and the origin
    projection (when known) leads the block.
    """
    coord_names = [f"c{i + 1}" for i in range(traj.k)]
    rows: list[list] = [["token", "epoch", "occ", *coord_names, "role"]]

    def coords(point):
        return [float(c) for c in point]

    if traj.origin_point is not None:
        rows.append([traj.token, "", "", *coords(traj.origin_point), "origin"])
    first, last = history[0], history[-1]
    rows.append([traj.token, first.epoch, first.occurrence,
                 *coords(traj.initial_point), "initial"])
    for snap, point in zip(history, traj.points):
        rows.append([traj.token, snap.epoch, snap.occurrence,
                     *coords(point), "step"])
    rows.append([traj.token, last.epoch, last.occurrence,
                 *coords(traj.final_point), "final"])
    return rows
