"""Dataset loaders, multi-order adjacency, augmentation and the synthetic tree."""

import json

import numpy as np
import pytest

from hygraph.data import (
    GraphDataset,
    Masks,
    build_multi_order,
    corrupt_features,
    generate_hierarchy,
    load_json_graph,
    load_planetoid_content,
    save_json_graph,
    stratified_split,
    symmetrize,
)
from hygraph.errors import ContractError, ParseError, SchemaError

CONTENT = "\n".join([
    "paper_a\t1\t0\t0\tml",
    "paper_b\t0\t2\t0\tdb",
    "paper_c\t0\t1\t1\tml",
]) + "\n"

CITES = "\n".join([
    "paper_a\tpaper_b",   # b cites a
    "paper_b\tpaper_c",   # c cites b
    "paper_x\tpaper_a",   # unknown endpoint, dropped
]) + "\n"


@pytest.fixture
def planetoid_dir(tmp_path):
    (tmp_path / "toy.content").write_text(CONTENT)
    (tmp_path / "toy.cites").write_text(CITES)
    return tmp_path


class TestPlanetoidLoader:
    def test_toy_files(self, planetoid_dir, caplog):
        with caplog.at_level("WARNING"):
            g = load_planetoid_content(planetoid_dir / "toy.content",
                                       planetoid_dir / "toy.cites")
        assert g.n == 3 and g.dim == 3 and g.classes == 2
        # edges are citing -> cited
        assert sorted(map(tuple, g.edges.tolist())) == [(1, 0), (2, 1)]
        # labels sorted alphabetically: db=0, ml=1
        np.testing.assert_array_equal(g.labels, [1, 0, 1])
        assert "dropped 1 citation" in caplog.text

    def test_l1_normalization(self, planetoid_dir):
        g = load_planetoid_content(planetoid_dir / "toy.content",
                                   planetoid_dir / "toy.cites")
        np.testing.assert_allclose(np.abs(g.features).sum(axis=1), 1.0)
        raw = load_planetoid_content(planetoid_dir / "toy.content",
                                     planetoid_dir / "toy.cites", normalize=False)
        assert raw.features[1, 1] == 2.0

    def test_malformed_line_reports_position(self, tmp_path):
        (tmp_path / "bad.content").write_text("only_two\tfields\n")
        (tmp_path / "bad.cites").write_text("")
        with pytest.raises(ParseError, match="bad.content:1"):
            load_planetoid_content(tmp_path / "bad.content", tmp_path / "bad.cites")

    def test_duplicate_id_rejected(self, tmp_path):
        (tmp_path / "dup.content").write_text("a\t1\tx\na\t2\tx\n")
        (tmp_path / "dup.cites").write_text("")
        with pytest.raises(ParseError, match="duplicate"):
            load_planetoid_content(tmp_path / "dup.content", tmp_path / "dup.cites")

    def test_nonnumeric_feature_rejected(self, tmp_path):
        (tmp_path / "nan.content").write_text("a\tone\tx\n")
        (tmp_path / "nan.cites").write_text("")
        with pytest.raises(ParseError, match="non-numeric"):
            load_planetoid_content(tmp_path / "nan.content", tmp_path / "nan.cites")


class TestJsonLoader:
    def test_round_trip(self, tmp_path, star_graph):
        g = star_graph.with_masks(stratified_split(star_graph.labels, seed=3,
                                                   fractions=(0.5, 0.25, 0.25)))
        path = tmp_path / "g.json"
        save_json_graph(g, path)
        back = load_json_graph(path)
        assert back.n == g.n and back.classes == g.classes
        np.testing.assert_array_equal(back.features, g.features)
        np.testing.assert_array_equal(back.edges, g.edges)
        np.testing.assert_array_equal(back.labels, g.labels)
        np.testing.assert_array_equal(back.masks.train, g.masks.train)

    def test_minimal_two_node(self, tmp_path):
        path = tmp_path / "mini.json"
        path.write_text(json.dumps({
            "n": 2, "features": [[0.0], [1.0]], "edges": [[0, 1]],
            "labels": None, "masks": None, "classes": 0,
        }))
        g = load_json_graph(path)
        assert g.n == 2 and g.labels is None

    def test_edge_out_of_range(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "n": 3, "features": [[0.0]] * 3, "edges": [[0, 5]], "classes": 0,
        }))
        with pytest.raises(SchemaError, match="out of range"):
            load_json_graph(path)

    def test_ragged_features(self, tmp_path):
        path = tmp_path / "ragged.json"
        path.write_text(json.dumps({
            "n": 2, "features": [[0.0], [1.0, 2.0]], "edges": [], "classes": 0,
        }))
        with pytest.raises(SchemaError, match="ragged"):
            load_json_graph(path)

    def test_missing_and_unknown_keys(self, tmp_path):
        path = tmp_path / "missing.json"
        path.write_text(json.dumps({"n": 1, "features": [[0.0]], "edges": []}))
        with pytest.raises(SchemaError, match="missing"):
            load_json_graph(path)
        path.write_text(json.dumps({
            "n": 1, "features": [[0.0]], "edges": [], "classes": 0, "extra": 1,
        }))
        with pytest.raises(SchemaError, match="unknown"):
            load_json_graph(path)


class TestMultiOrder:
    def test_exact_two_hop_on_path(self, path_graph):
        adj = build_multi_order(path_graph.edges, 3, K=2)
        two = adj.relation(2, "along").tocoo()
        assert sorted(zip(two.row.tolist(), two.col.tolist())) == [(0, 2)]

    def test_first_order_drops_self_loops(self):
        edges = np.array([[0, 1], [1, 1], [0, 1]])
        adj = build_multi_order(edges, 2, K=1)
        one = adj.relation(1, "along").tocoo()
        assert sorted(zip(one.row.tolist(), one.col.tolist())) == [(0, 1)]

    def test_rev_is_transpose(self, rng):
        edges = rng.integers(0, 10, size=(30, 2))
        adj = build_multi_order(edges, 10, K=3)
        for k in (1, 2, 3):
            a = adj.relation(k, "along").toarray()
            r = adj.relation(k, "rev").toarray()
            np.testing.assert_array_equal(r, a.T)
            assert np.diag(a).sum() == 0

    def test_loop_is_identity(self):
        adj = build_multi_order(np.zeros((0, 2)), 4, K=1)
        np.testing.assert_array_equal(adj.relation(1, "loop").toarray(), np.eye(4))

    def test_walks_may_revisit_start(self):
        # 0 <-> 1 plus 0 -> 2: the walk 0,1,0,2 makes (0, 2) reachable in 3 steps.
        edges = np.array([[0, 1], [1, 0], [0, 2]])
        adj = build_multi_order(edges, 3, K=3)
        three = adj.relation(3, "along").toarray()
        assert three[0, 2] == 1.0

    def test_prefix_consistency(self, rng):
        edges = rng.integers(0, 12, size=(40, 2))
        big = build_multi_order(edges, 12, K=4)
        small = build_multi_order(edges, 12, K=2)
        for k in (1, 2):
            np.testing.assert_array_equal(big.relation(k, "along").toarray(),
                                          small.relation(k, "along").toarray())

    def test_k_below_one_rejected(self):
        with pytest.raises(ContractError):
            build_multi_order(np.zeros((0, 2)), 3, K=0)


class TestCorruptFeatures:
    def test_deterministic(self, hierarchy_small):
        a = corrupt_features(hierarchy_small, seed=9)
        b = corrupt_features(hierarchy_small, seed=9)
        np.testing.assert_array_equal(a.features, b.features)

    def test_row_multiset_preserved(self, hierarchy_small):
        c = corrupt_features(hierarchy_small, seed=3)
        original = np.sort(hierarchy_small.features, axis=0)
        permuted = np.sort(c.features, axis=0)
        np.testing.assert_array_equal(original, permuted)

    def test_adjacency_unchanged(self, hierarchy_small):
        c = corrupt_features(hierarchy_small, seed=3)
        np.testing.assert_array_equal(c.edges, hierarchy_small.edges)
        np.testing.assert_array_equal(c.labels, hierarchy_small.labels)

    def test_inverse_permutation_restores(self, hierarchy_small):
        c = corrupt_features(hierarchy_small, seed=12)
        perm = np.random.default_rng(12).permutation(hierarchy_small.n)
        restored = np.empty_like(c.features)
        restored[perm] = c.features
        np.testing.assert_array_equal(restored, hierarchy_small.features)

    def test_needs_two_nodes(self):
        g = GraphDataset(n=1, features=np.zeros((1, 2)), edges=np.zeros((0, 2)))
        with pytest.raises(ContractError):
            corrupt_features(g, seed=0)


class TestHierarchy:
    def test_node_and_edge_counts(self):
        g = generate_hierarchy(depth=2, branching=3, classes=3, noise=0.5, seed=0)
        assert g.n == 13 and len(g.edges) == 12

    def test_zero_noise_collapses_classes(self):
        g = generate_hierarchy(depth=2, branching=2, classes=2, noise=0.0, seed=1)
        for cls in range(2):
            rows = g.features[g.labels == cls]
            assert np.ptp(rows, axis=0).max() == 0.0

    def test_deterministic(self):
        a = generate_hierarchy(depth=3, branching=2, classes=2, noise=1.0, seed=4)
        b = generate_hierarchy(depth=3, branching=2, classes=2, noise=1.0, seed=4)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.edges, b.edges)

    def test_classes_follow_depth_one_subtrees(self):
        g = generate_hierarchy(depth=3, branching=3, classes=3, noise=0.1, seed=0)
        # children of the root get distinct classes; descendants inherit
        assert g.labels[1] == 0 and g.labels[2] == 1 and g.labels[3] == 2
        for node in range(4, g.n):
            parent = g.edges[g.edges[:, 1] == node][0, 0]
            assert g.labels[node] == g.labels[parent]

    def test_contract_errors(self):
        with pytest.raises(ContractError):
            generate_hierarchy(depth=1, branching=3, classes=2, noise=0.1, seed=0)
        with pytest.raises(ContractError):
            generate_hierarchy(depth=2, branching=2, classes=3, noise=0.1, seed=0)


class TestSplitsAndMasks:
    def test_masks_disjoint_and_stratified(self):
        labels = np.repeat([0, 1, 2], 40)
        masks = stratified_split(labels, seed=0)
        assert (masks.train & masks.val).sum() == 0
        assert (masks.train & masks.test).sum() == 0
        for cls in range(3):
            cls_mask = labels == cls
            assert (masks.train & cls_mask).sum() == 28  # 70% of 40
            assert (masks.val & cls_mask).sum() == 4     # 10% of 40
            assert (masks.test & cls_mask).sum() == 8    # the rest

    def test_overlapping_masks_rejected(self):
        with pytest.raises(SchemaError, match="disjoint"):
            Masks(train=np.array([True, False]), val=np.array([True, False]),
                  test=np.array([False, False]))

    def test_symmetrize(self, path_graph):
        g = symmetrize(path_graph)
        assert sorted(map(tuple, g.edges.tolist())) == [(0, 1), (1, 0), (1, 2), (2, 1)]

    def test_dataset_validation(self):
        with pytest.raises(SchemaError):
            GraphDataset(n=2, features=np.zeros((3, 1)), edges=np.zeros((0, 2)))
        with pytest.raises(SchemaError):
            GraphDataset(n=2, features=np.zeros((2, 1)), edges=np.array([[0, 2]]))
        with pytest.raises(SchemaError):
            GraphDataset(n=2, features=np.zeros((2, 1)), edges=np.zeros((0, 2)),
                         labels=np.array([0, 3]), classes=2)
