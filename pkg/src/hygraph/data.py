"""Graph datasets: loaders, multi-order adjacency, augmentation, synthetic trees."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, ParseError, SchemaError

__all__ = [
    "Masks",
    "GraphDataset",
    "MultiOrderAdjacency",
    "load_planetoid_content",
    "load_json_graph",
    "save_json_graph",
    "build_multi_order",
    "corrupt_features",
    "generate_hierarchy",
    "stratified_split",
    "symmetrize",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Masks:
    """Disjoint boolean train/val/test node masks."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            arr = np.asarray(getattr(self, name), dtype=bool).ravel()
            object.__setattr__(self, name, arr)
        if not (self.train.shape == self.val.shape == self.test.shape):
            raise SchemaError("mask lengths differ")
        overlap = (self.train & self.val) | (self.train & self.test) | (self.val & self.test)
        if overlap.any():
            raise SchemaError("train/val/test masks must be disjoint")


@dataclass(frozen=True)
class GraphDataset:
    """Node features, directed edges and (optionally) labels and masks."""

    n: int
    features: np.ndarray            # (n, d) float64
    edges: np.ndarray               # (E, 2) int64, rows (src, dst)
    labels: np.ndarray | None = None
    masks: Masks | None = None
    classes: int = 0

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.n:
            raise SchemaError(f"features must have shape ({self.n}, d), got {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise SchemaError("features contain non-finite values")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= self.n):
            raise SchemaError(
                f"edge endpoint out of range [0, {self.n}): "
                f"({edges[:, 0].max(initial=0)}, {edges[:, 1].max(initial=0)})"
            )
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "edges", edges)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64).ravel()
            if labels.shape[0] != self.n:
                raise SchemaError("labels length must equal node count")
            if self.classes < 1:
                raise SchemaError("classes must be >= 1 when labels are present")
            if labels.size and (labels.min() < 0 or labels.max() >= self.classes):
                raise SchemaError(f"label outside [0, {self.classes})")
            object.__setattr__(self, "labels", labels)
        if self.masks is not None and self.masks.train.shape[0] != self.n:
            raise SchemaError("mask length must equal node count")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def with_masks(self, masks: Masks) -> "GraphDataset":
        return replace(self, masks=masks)


@dataclass(frozen=True)
class MultiOrderAdjacency:
    """Order-k relation matrices: along[k], rev[k] = along[k]^T, and self-loops."""

    K: int
    along: tuple
    rev: tuple
    loop: sp.csr_matrix

    def relation(self, k: int, branch: str) -> sp.csr_matrix:
        if not 1 <= k <= self.K:
            raise ContractError(f"order {k} outside [1, {self.K}]")
        if branch == "along":
            return self.along[k - 1]
        if branch == "rev":
            return self.rev[k - 1]
        if branch == "loop":
            return self.loop
        raise ContractError(f"unknown branch {branch!r}")


def _dedup_edges(edges: np.ndarray, drop_loops: bool = True) -> np.ndarray:
    if edges.size == 0:
        return edges.reshape(0, 2)
    if drop_loops:
        edges = edges[edges[:, 0] != edges[:, 1]]
    return np.unique(edges, axis=0)


def build_multi_order(edges: np.ndarray, n: int, K: int) -> MultiOrderAdjacency:
    """Boolean k-th powers of the directed adjacency, diagonal owned by A_loop.

    along[k](i, j) = 1 iff a directed walk of length exactly k runs i -> j
    (j != i); rev[k] is its transpose; loop is the identity.
    """
    if K < 1:
        raise ContractError(f"K must be >= 1, got {K}")
    edges = _dedup_edges(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    data = np.ones(edges.shape[0], dtype=np.float64)
    a1 = sp.csr_matrix((data, (edges[:, 0], edges[:, 1])), shape=(n, n))
    along = []
    walk = a1
    for k in range(1, K + 1):
        if k > 1:
            # Booleanize the running power but keep its diagonal: walks may
            # revisit their start node mid-way.
            walk = (walk @ a1).tocsr()
            walk.data = np.ones_like(walk.data)
        pruned = walk.copy()
        pruned.setdiag(0.0)
        pruned.eliminate_zeros()
        pruned.sort_indices()
        along.append(pruned)
    rev = []
    for mat in along:
        t = mat.T.tocsr()
        t.sort_indices()
        rev.append(t)
    loop = sp.identity(n, dtype=np.float64, format="csr")
    return MultiOrderAdjacency(K=K, along=tuple(along), rev=tuple(rev), loop=loop)


def load_planetoid_content(content_path, cites_path, normalize: bool = True) -> GraphDataset:
    """Load a citation graph from `.content` / `.cites` tab-separated files.

    Content rows are ``id <TAB> f1 .. fd <TAB> label``; cites rows are
    ``cited <TAB> citing``.  Edges are stored citing -> cited.  Citations
    whose endpoints never appear in the content file are dropped (their
    count is logged).  Features are L1-normalized per row by default, the
    usual treatment for bag-of-words corpora.
    """
    content_path, cites_path = Path(content_path), Path(cites_path)
    ids: dict[str, int] = {}
    rows: list[np.ndarray] = []
    raw_labels: list[str] = []
    dim: int | None = None
    with content_path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise ParseError(
                    f"expected 'id<TAB>features<TAB>label', got {len(parts)} fields",
                    str(content_path), lineno,
                )
            node_id, feat_str, label = parts[0], parts[1:-1], parts[-1]
            if node_id in ids:
                raise ParseError(f"duplicate node id {node_id!r}", str(content_path), lineno)
            if dim is None:
                dim = len(feat_str)
            elif len(feat_str) != dim:
                raise ParseError(
                    f"feature count {len(feat_str)} != {dim}", str(content_path), lineno
                )
            try:
                rows.append(np.array(feat_str, dtype=np.float64))
            except ValueError as exc:
                raise ParseError(f"non-numeric feature: {exc}", str(content_path), lineno)
            ids[node_id] = len(ids)
            raw_labels.append(label)

    if not rows:
        raise ParseError("content file is empty", str(content_path))
    features = np.vstack(rows)
    if normalize:
        sums = np.abs(features).sum(axis=1, keepdims=True)
        np.divide(features, sums, out=features, where=sums > 0)

    label_names = sorted(set(raw_labels))
    label_of = {name: i for i, name in enumerate(label_names)}
    labels = np.array([label_of[name] for name in raw_labels], dtype=np.int64)

    edges: list[tuple[int, int]] = []
    dropped = 0
    with cites_path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(
                    f"expected 'cited<TAB>citing', got {len(parts)} fields",
                    str(cites_path), lineno,
                )
            cited, citing = parts
            if cited not in ids or citing not in ids:
                dropped += 1
                continue
            edges.append((ids[citing], ids[cited]))
    if dropped:
        log.warning("%s: dropped %d citation(s) with unknown endpoints", cites_path, dropped)

    return GraphDataset(
        n=len(ids),
        features=features,
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        labels=labels,
        classes=len(label_names),
    )


_JSON_KEYS = {"n", "features", "edges", "labels", "masks", "classes"}


def load_json_graph(path) -> GraphDataset:
    """Load a graph from the JSON schema (see External Interfaces in README)."""
    path = Path(path)
    with path.open() as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", str(path))
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: top-level value must be an object")
    unknown = set(obj) - _JSON_KEYS
    if unknown:
        raise SchemaError(f"{path}: unknown keys {sorted(unknown)}")
    missing = {"n", "features", "edges", "classes"} - set(obj)
    if missing:
        raise SchemaError(f"{path}: missing keys {sorted(missing)}")

    n = obj["n"]
    feats = obj["features"]
    if not isinstance(feats, list) or len(feats) != n:
        raise SchemaError(f"{path}: features must be a list of {n} rows")
    lengths = {len(row) for row in feats}
    if len(lengths) > 1:
        raise SchemaError(f"{path}: ragged feature rows, lengths {sorted(lengths)}")

    masks = None
    if obj.get("masks") is not None:
        m = obj["masks"]
        if set(m) != {"train", "val", "test"}:
            raise SchemaError(f"{path}: masks must have exactly train/val/test")
        arrays = {}
        for name, idx in m.items():
            vec = np.zeros(n, dtype=bool)
            idx = np.asarray(idx, dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise SchemaError(f"{path}: mask index out of range in {name!r}")
            vec[idx] = True
            arrays[name] = vec
        masks = Masks(**arrays)

    try:
        return GraphDataset(
            n=n,
            features=np.asarray(feats, dtype=np.float64),
            edges=np.asarray(obj["edges"], dtype=np.int64).reshape(-1, 2),
            labels=None if obj.get("labels") is None else obj["labels"],
            masks=masks,
            classes=int(obj["classes"]),
        )
    except (SchemaError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def save_json_graph(g: GraphDataset, path) -> None:
    obj = {
        "n": g.n,
        "features": g.features.tolist(),
        "edges": g.edges.tolist(),
        "labels": None if g.labels is None else g.labels.tolist(),
        "masks": None if g.masks is None else {
            name: np.flatnonzero(getattr(g.masks, name)).tolist()
            for name in ("train", "val", "test")
        },
        "classes": g.classes,
    }
    Path(path).write_text(json.dumps(obj))


def corrupt_features(g: GraphDataset, seed: int) -> GraphDataset:
    """Row-shuffle the features under a seeded permutation; topology unchanged."""
    if g.n < 2:
        raise ContractError("feature corruption needs at least 2 nodes")
    perm = np.random.default_rng(seed).permutation(g.n)
    return replace(g, features=g.features[perm])


def generate_hierarchy(
    depth: int,
    branching: int,
    classes: int,
    noise: float,
    seed: int,
    dim: int = 16,
) -> GraphDataset:
    """Complete directed tree (root -> leaves) with subtree-aligned classes.

    Every node below the root inherits the class of its depth-1 ancestor
    (subtree index modulo ``classes``); the root takes class 0.  Features
    are the class mean plus Gaussian noise, all drawn from one seeded
    generator.
    """
    if depth < 2 or branching < 2:
        raise ContractError("hierarchy needs depth >= 2 and branching >= 2")
    if classes > branching:
        raise ContractError(f"classes ({classes}) cannot exceed branching ({branching})")
    if classes < 2:
        raise ContractError("hierarchy needs at least 2 classes")

    rng = np.random.default_rng(seed)
    parents: list[int] = [-1]
    subtree: list[int] = [-1]
    level_nodes = [0]
    for level in range(1, depth + 1):
        new_nodes = []
        for parent in level_nodes:
            for child_idx in range(branching):
                node = len(parents)
                parents.append(parent)
                subtree.append(child_idx if level == 1 else subtree[parent])
                new_nodes.append(node)
        level_nodes = new_nodes

    n = len(parents)
    labels = np.array([0 if s < 0 else s % classes for s in subtree], dtype=np.int64)
    edges = np.array([(parents[i], i) for i in range(1, n)], dtype=np.int64)
    means = rng.normal(size=(classes, dim))
    features = means[labels] + noise * rng.normal(size=(n, dim))
    return GraphDataset(n=n, features=features, edges=edges, labels=labels, classes=classes)


def stratified_split(
    labels: np.ndarray,
    seed: int,
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2),
) -> Masks:
    """Seeded per-class split into train/val/test with the given fractions."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ContractError(f"split fractions must sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    n = labels.shape[0]
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        m = idx.size
        n_train = max(1, int(round(fractions[0] * m)))
        n_val = int(round(fractions[1] * m))
        n_train = min(n_train, m)
        n_val = min(n_val, m - n_train)
        train[idx[:n_train]] = True
        val[idx[n_train:n_train + n_val]] = True
        test[idx[n_train + n_val:]] = True
    return Masks(train=train, val=val, test=test)


def symmetrize(g: GraphDataset) -> GraphDataset:
    """Union of the edge set with its reverse (deduplicated)."""
    if g.edges.size == 0:
        return g
    both = np.vstack([g.edges, g.edges[:, ::-1]])
    return replace(g, edges=_dedup_edges(both, drop_loops=False))
