import numpy as np
import pytest
import scipy.sparse as sp

from motifgcl.graphs import SparseGraph
from motifgcl.motifs import BUILTIN_MOTIFS
from motifgcl.semantic import (build_semantic_graphs, dense_topk_cosine,
                               masked_cosine, topk_rows)

from oracles import random_graph


def sparse_from_dense(a: np.ndarray) -> SparseGraph:
    return SparseGraph.from_scipy(sp.csr_matrix(a))


class TestMaskedCosine:
    def test_identical_rows_score_one(self):
        x = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]])
        mask = sparse_from_dense(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))
        out = masked_cosine(x, mask)
        assert out.get(0, 1) == pytest.approx(1.0)
        assert out.get(1, 0) == pytest.approx(1.0)

    def test_orthogonal_rows_score_zero(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        mask = sparse_from_dense(np.array([[0, 1], [1, 0]]))
        out = masked_cosine(x, mask)
        assert out.get(0, 1) == 0.0  # absent entry reads as zero

    def test_pairs_outside_mask_absent(self):
        x = np.ones((3, 2))
        mask = sparse_from_dense(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))
        out = masked_cosine(x, mask)
        assert out.get(0, 2) == 0.0
        assert out.nnz == 2

    def test_zero_norm_row_scores_zero(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0]])
        mask = sparse_from_dense(np.array([[0, 1], [1, 0]]))
        assert masked_cosine(x, mask).nnz == 0

    def test_negative_cosine_kept(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0]])
        mask = sparse_from_dense(np.array([[0, 1], [1, 0]]))
        assert masked_cosine(x, mask).get(0, 1) == pytest.approx(-1.0)

    def test_matches_dense_oracle_on_mask(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(20, 6))
        adj = random_graph(20, 0.3, rng)
        mask = sparse_from_dense(adj.astype(float))
        out = masked_cosine(x, mask).to_dense()
        xn = x / np.linalg.norm(x, axis=1, keepdims=True)
        dense = (xn @ xn.T) * adj
        assert np.allclose(out, dense)


class TestTopkRows:
    def test_keeps_k_largest(self):
        m = sparse_from_dense(np.array([[0.0, 0.9, 0.5, 0.1], [0, 0, 0, 0],
                                        [0, 0, 0, 0], [0, 0, 0, 0]]))
        out = topk_rows(m, 2)
        assert out.get(0, 1) == 0.9 and out.get(0, 2) == 0.5
        assert out.get(0, 3) == 0.0

    def test_row_shorter_than_k_kept_whole(self):
        m = sparse_from_dense(np.array([[0.0, 0.3], [0.0, 0.0]]))
        out = topk_rows(m, 5)
        assert out.get(0, 1) == 0.3

    def test_tie_at_cutoff_prefers_smaller_column(self):
        row = np.zeros((5, 5))
        row[0, [1, 2, 3, 4]] = [0.5, 0.9, 0.5, 0.5]
        out = topk_rows(sparse_from_dense(row), 2)
        # ties at 0.5: column 1 wins the final slot
        assert out.get(0, 2) == 0.9 and out.get(0, 1) == 0.5
        assert out.get(0, 3) == 0.0 and out.get(0, 4) == 0.0
        rerun = topk_rows(sparse_from_dense(row), 2)
        assert np.array_equal(out.to_dense(), rerun.to_dense())

    def test_not_symmetrized(self):
        m = sparse_from_dense(np.array([[0.0, 0.9], [0.0, 0.0]]))
        out = topk_rows(m, 1)
        assert out.get(0, 1) == 0.9 and out.get(1, 0) == 0.0


class TestBuildSemanticGraphs:
    def test_triangle_host_identical_features(self):
        g = SparseGraph.from_edges(3, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 1.0})
        sg = build_semantic_graphs(g, np.ones((3, 4)),
                                   [BUILTIN_MOTIFS["triangle"]], k=2)
        assert np.allclose(sg.graphs[0].to_dense(), np.ones((3, 3)) - np.eye(3))

    def test_motif_without_instances_yields_empty(self, caplog):
        g = SparseGraph.from_edges(3, {(0, 1): 1.0, (1, 2): 1.0})
        with caplog.at_level("WARNING"):
            sg = build_semantic_graphs(g, np.ones((3, 2)),
                                       [BUILTIN_MOTIFS["triangle"]], k=2)
        assert sg.graphs[0].nnz == 0
        assert any("no instances" in r.message for r in caplog.records)

    def test_k_equal_n_is_identity_of_masked_cosine(self):
        rng = np.random.default_rng(0)
        adj = random_graph(10, 0.5, rng)
        g = SparseGraph.from_scipy(sp.csr_matrix(adj.astype(float)))
        x = rng.normal(size=(10, 4))
        full = build_semantic_graphs(g, x, [BUILTIN_MOTIFS["triangle"]], k=10)
        from motifgcl.motifs import cooccurrence, enumerate_instances, nonzero_mask
        mask = nonzero_mask(cooccurrence(enumerate_instances(g, BUILTIN_MOTIFS["triangle"]), g))
        assert np.allclose(full.graphs[0].to_dense(), masked_cosine(x, mask).to_dense())

    def test_row_cardinality_and_mask_containment(self):
        rng = np.random.default_rng(1)
        adj = random_graph(16, 0.4, rng)
        g = SparseGraph.from_scipy(sp.csr_matrix(adj.astype(float)))
        x = rng.normal(size=(16, 5))
        k = 3
        sg = build_semantic_graphs(g, x, list(BUILTIN_MOTIFS.values()), k=k)
        from motifgcl.motifs import cooccurrence, enumerate_instances, nonzero_mask
        for pattern, graph in zip(BUILTIN_MOTIFS.values(), sg.graphs):
            assert np.max(np.diff(graph.row_ptr)) <= k if graph.nnz else True
            mask = nonzero_mask(cooccurrence(enumerate_instances(g, pattern), g))
            assert np.all(mask.to_dense()[graph.to_dense() != 0] == 1.0)

    def test_feature_scale_invariance(self):
        rng = np.random.default_rng(2)
        adj = random_graph(12, 0.5, rng)
        g = SparseGraph.from_scipy(sp.csr_matrix(adj.astype(float)))
        x = rng.normal(size=(12, 4))
        a = build_semantic_graphs(g, x, [BUILTIN_MOTIFS["triangle"]], k=3)
        b = build_semantic_graphs(g, 7.3 * x, [BUILTIN_MOTIFS["triangle"]], k=3)
        assert np.allclose(a.graphs[0].to_dense(), b.graphs[0].to_dense())


class TestDenseTopkCosine:
    def test_diagonal_excluded_and_rows_bounded(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(9, 4))
        out = dense_topk_cosine(x, 3)
        dense = out.to_dense()
        assert np.all(np.diag(dense) == 0.0)
        assert np.max(np.diff(out.row_ptr)) <= 3
