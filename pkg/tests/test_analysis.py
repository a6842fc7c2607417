import numpy as np
import pytest

from embedrift import (
    ConfigError,
    EmbeddingTable,
    RunHeader,
    TrajectoryLog,
    UnknownTokenError,
    compare_neighbors,
    cosine,
    nearest_neighbors,
    pca_fit,
    project_trajectories,
)
from embedrift.analysis import (
    render_comparison_text,
    render_neighbors_text,
    trajectory_csv_rows,
    truncate_score,
)
from embedrift.trajectory import token_history


def brute_force_ranking(table, query, k):
    q = table.lookup(query)
    scored = []
    for tok, vec in table.vectors.items():
        if tok == query or float(np.linalg.norm(vec)) == 0.0:
            continue
        scored.append((tok, cosine(q, vec)))
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored[:k]


def random_points(rng, n, dim):
    return rng.normal(size=(n, dim)) * rng.uniform(0.5, 3.0, size=dim)


def sign_normalize(components, threshold=1e-9):
    out = components.copy()
    for i in range(out.shape[0]):
        for x in out[i]:
            if abs(x) > threshold:
                if x < 0:
                    out[i] = -out[i]
                break
    return out


def eigh_oracle(points, k):
    """Reference PCA via LAPACK on the sample covariance."""
    x = np.asarray(points, dtype=np.float64)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")[:k]
    return mean, sign_normalize(vecs[:, order].T), np.maximum(vals[order], 0.0)


class TestNearestNeighbors:
    def test_small_table(self):
        table = EmbeddingTable(2, {"q": (1, 0), "a": (1, 0), "b": (0, 1)})
        result = nearest_neighbors(table, "q", 2)
        assert result.entries == [("a", 1.0), ("b", 0.0)]

    def test_k_saturation(self):
        table = EmbeddingTable(2, {"q": (1, 0), "a": (1, 0), "b": (0, 1)})
        assert len(nearest_neighbors(table, "q", 99).entries) == 2

    def test_unknown_query(self):
        table = EmbeddingTable(2, {"a": (1, 0)})
        with pytest.raises(UnknownTokenError):
            nearest_neighbors(table, "zzz", 3)

    def test_k_must_be_positive(self):
        table = EmbeddingTable(2, {"a": (1, 0), "b": (0, 1)})
        with pytest.raises(ConfigError):
            nearest_neighbors(table, "a", 0)

    def test_zero_vectors_excluded(self):
        table = EmbeddingTable(2, {"q": (1, 0), "z": (0, 0), "b": (1, 1)})
        tokens = [t for t, _ in nearest_neighbors(table, "q", 10).entries]
        assert "z" not in tokens

    def test_tie_break_lexicographic(self):
        table = EmbeddingTable(2, {"q": (1, 0), "bb": (2, 0), "aa": (1, 0),
                                   "cc": (0.5, 0)})
        tokens = [t for t, _ in nearest_neighbors(table, "q", 3).entries]
        assert tokens == ["aa", "bb", "cc"]

    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(10)
        for _ in range(30):
            dim = int(rng.integers(2, 12))
            table = EmbeddingTable(dim)
            for i in range(int(rng.integers(2, 40))):
                table.set(f"w{i}", rng.normal(size=dim).astype(np.float32))
            query = f"w{int(rng.integers(0, len(table)))}"
            k = int(rng.integers(1, 12))
            got = nearest_neighbors(table, query, k)
            assert got.entries == brute_force_ranking(table, query, k)

    def test_query_scale_invariance_of_order(self):
        rng = np.random.default_rng(11)
        dim = 6
        base = {f"w{i}": rng.normal(size=dim).astype(np.float32) for i in range(20)}
        t1 = EmbeddingTable(dim, base)
        order1 = [t for t, _ in nearest_neighbors(t1, "w0", 19).entries]
        scaled = dict(base)
        scaled["w0"] = (base["w0"].astype(np.float64) * 37.5).astype(np.float32)
        t2 = EmbeddingTable(dim, scaled)
        order2 = [t for t, _ in nearest_neighbors(t2, "w0", 19).entries]
        assert order1 == order2

    def test_threaded_scan_identical(self):
        rng = np.random.default_rng(12)
        table = EmbeddingTable(8)
        for i in range(3000):
            table.set(f"w{i}", rng.normal(size=8).astype(np.float32))
        seq = nearest_neighbors(table, "w0", 25, threads=1)
        par = nearest_neighbors(table, "w0", 25, threads=4)
        assert seq == par

    def test_scores_non_increasing(self):
        rng = np.random.default_rng(13)
        table = EmbeddingTable(4)
        for i in range(50):
            table.set(f"w{i}", rng.normal(size=4).astype(np.float32))
        scores = [s for _, s in nearest_neighbors(table, "w3", 49).entries]
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert all(-1.0 <= s <= 1.0 for s in scores)


class TestCompareNeighbors:
    def test_identical_tables(self):
        table = EmbeddingTable(2, {"q": (1, 0), "a": (0.9, 0.1), "b": (0, 1)})
        left, right = compare_neighbors(table, table, "q", 2)
        assert left == right

    def test_rotated_query_changes_ranking(self):
        refined = EmbeddingTable(2, {"q": (0, 1), "a": (1, 0), "b": (0, 1)})
        original = EmbeddingTable(2, {"q": (1, 0), "a": (1, 0), "b": (0, 1)})
        left, right = compare_neighbors(refined, original, "q", 2)
        assert [t for t, _ in left.entries] != [t for t, _ in right.entries]

    def test_absent_token_names_table(self):
        has = EmbeddingTable(2, {"q": (1, 0), "x": (0, 1)})
        lacks = EmbeddingTable(2, {"x": (0, 1), "y": (1, 1)})
        with pytest.raises(UnknownTokenError, match="original"):
            compare_neighbors(has, lacks, "q", 1)
        with pytest.raises(UnknownTokenError, match="refined"):
            compare_neighbors(lacks, has, "q", 1)


class TestPcaFit:
    def test_collinear_points(self):
        points = np.array([[t, 2 * t, 0.0] for t in (0, 1, 2, 3)])
        model = pca_fit(points, 2)
        expected = np.array([1, 2, 0]) / np.sqrt(5)
        np.testing.assert_allclose(model.components[0], expected, atol=1e-9)
        total = model.explained_variance.sum()
        assert model.explained_variance[0] / total > 1.0 - 1e-12

    def test_axis_aligned_variances(self):
        points = np.array([[2.0, 0], [-2.0, 0], [0, 1.0], [0, -1.0]])
        model = pca_fit(points, 2)
        np.testing.assert_allclose(model.components, np.eye(2), atol=1e-12)
        assert model.explained_variance[0] > model.explained_variance[1]

    def test_full_rank_reconstruction(self):
        rng = np.random.default_rng(20)
        points = random_points(rng, 40, 6)
        model = pca_fit(points, 6)
        for x in points[:10]:
            coords = model.transform(x)
            recon = model.mean + coords @ model.components
            np.testing.assert_allclose(recon, x, atol=1e-5)

    def test_k_out_of_range(self):
        points = np.zeros((3, 4))
        with pytest.raises(ConfigError):
            pca_fit(points, 0)
        with pytest.raises(ConfigError):
            pca_fit(points, 5)

    def test_needs_two_points(self):
        with pytest.raises(ConfigError):
            pca_fit(np.zeros((1, 4)), 2)

    def test_identical_points(self):
        points = np.ones((5, 3)) * 2.5
        model = pca_fit(points, 3)
        gram = model.components @ model.components.T
        np.testing.assert_allclose(gram, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(model.explained_variance, 0.0, atol=1e-12)

    def test_matches_lapack_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            dim = int(rng.integers(2, 17))
            n = int(rng.integers(dim + 1, 201))
            k = int(rng.integers(1, dim + 1))
            points = random_points(rng, n, dim)
            model = pca_fit(points, k)
            mean, components, variance = eigh_oracle(points, k)
            np.testing.assert_allclose(model.mean, mean, atol=1e-9)
            np.testing.assert_allclose(model.explained_variance, variance,
                                       atol=1e-5, rtol=1e-5)
            np.testing.assert_allclose(model.components, components, atol=1e-5)

    def test_orthonormal_components_and_sorted_variance(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            dim = int(rng.integers(2, 17))
            points = random_points(rng, int(rng.integers(3, 200)), dim)
            k = int(rng.integers(1, dim + 1))
            model = pca_fit(points, k)
            gram = model.components @ model.components.T
            np.testing.assert_allclose(gram, np.eye(k), atol=1e-6)
            ev = model.explained_variance
            assert all(a >= b for a, b in zip(ev, ev[1:]))
            assert all(v >= 0 for v in ev)

    def test_mean_projects_to_zero(self):
        rng = np.random.default_rng(23)
        points = random_points(rng, 50, 8)
        model = pca_fit(points, 3)
        np.testing.assert_allclose(model.transform(points.mean(axis=0)),
                                   np.zeros(3), atol=1e-6)


def unit32(*values):
    v = np.asarray(values, dtype=np.float64)
    return (v / np.linalg.norm(v)).astype(np.float32)


def log_with(snapshots):
    log = TrajectoryLog(RunHeader())
    for token, vec in snapshots:
        log.record(token, np.asarray(vec, dtype=np.float32))
    return log


class TestProjectTrajectories:
    def test_identical_snapshots_project_identically(self):
        log = log_with([("a", unit32(1, 2, 3))] * 4)
        origin = EmbeddingTable(3, {"a": unit32(3, 2, 1)})
        (traj,) = project_trajectories(log, origin, ["a"], 2)
        assert traj.points.shape == (4, 2)
        for p in traj.points[1:]:
            np.testing.assert_allclose(p, traj.points[0], atol=1e-9)
        np.testing.assert_allclose(traj.initial_point, traj.points[0], atol=0)
        np.testing.assert_allclose(traj.final_point, traj.points[-1], atol=0)
        assert traj.origin_point is not None

    def test_reflected_trajectories_project_reflected(self):
        rng = np.random.default_rng(30)
        base = rng.normal(size=(6, 4))
        center = rng.normal(size=4)
        log = TrajectoryLog(RunHeader())
        for row in base:
            log.record("a", (center + row).astype(np.float32))
        for row in base:
            log.record("b", (center - row).astype(np.float32))
        origin = EmbeddingTable(4)
        ta, tb = project_trajectories(log, origin, ["a", "b"], 2)
        np.testing.assert_allclose(ta.points, -tb.points, atol=1e-5)

    def test_unknown_token(self):
        log = log_with([("a", unit32(1, 0))])
        with pytest.raises(UnknownTokenError):
            project_trajectories(log, EmbeddingTable(2), ["ghost"], 2)

    def test_bad_dims(self):
        log = log_with([("a", unit32(1, 0, 0))] * 3)
        with pytest.raises(ConfigError):
            project_trajectories(log, EmbeddingTable(3), ["a"], 4)

    def test_origin_point_absent_when_unknown(self):
        log = log_with([("a", unit32(1, 0, 0)), ("a", unit32(0, 1, 0))])
        (traj,) = project_trajectories(log, EmbeddingTable(3), ["a"], 2)
        assert traj.origin_point is None


class TestRendering:
    def test_truncate_not_round(self):
        assert truncate_score(0.989) == "0.98"
        assert truncate_score(0.98) == "0.98"
        assert truncate_score(-0.678) == "-0.67"
        assert truncate_score(1.0) == "1.00"

    def test_neighbors_text(self):
        table = EmbeddingTable(2, {"q": (1, 0), "a": (1, 0), "b": (0, 1)})
        text = render_neighbors_text(nearest_neighbors(table, "q", 2))
        assert "query: q" in text
        assert "1.00" in text

    def test_comparison_text_two_columns(self):
        table = EmbeddingTable(2, {"q": (1, 0), "a": (1, 0), "b": (0, 1)})
        left, right = compare_neighbors(table, table, "q", 2)
        text = render_comparison_text(left, right)
        assert "refined" in text and "original" in text

    def test_trajectory_rows_roles(self):
        log = log_with([("a", unit32(1, 0, 0)), ("a", unit32(0, 1, 0)),
                        ("a", unit32(0, 0, 1))])
        origin = EmbeddingTable(3, {"a": unit32(1, 1, 1)})
        (traj,) = project_trajectories(log, origin, ["a"], 2)
        rows = trajectory_csv_rows(traj, token_history(log, "a"))
        assert rows[0] == ["token", "epoch", "occ", "c1", "c2", "role"]
        roles = [r[-1] for r in rows[1:]]
        assert roles == ["origin", "initial", "step", "step", "step", "final"]

    def test_single_snapshot_initial_equals_final(self):
        log = log_with([("a", unit32(1, 2, 3))])
        origin = EmbeddingTable(3, {"a": unit32(1, 1, 1)})
        (traj,) = project_trajectories(log, origin, ["a"], 2)
        rows = trajectory_csv_rows(traj, token_history(log, "a"))
        initial = next(r for r in rows if r[-1] == "initial")
        final = next(r for r in rows if r[-1] == "final")
        assert initial[3:5] == final[3:5]
