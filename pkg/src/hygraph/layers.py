"""The multi-order curvature-attention encoder.

Pipeline per layer (all trainable math through the tensor substrate):
lift features to the manifold, log to the origin tangent space, run the
along/rev/loop branch convolutions for every order k with curvature-MLP
neighborhood attention, fuse branches elementwise, attend over orders,
exponentiate back to the manifold and translate by the layer's
hyperbolic bias.  The Euclidean bypass reuses the identical code path
with identity maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .data import GraphDataset, MultiOrderAdjacency, build_multi_order
from .errors import ContractError, ShapeError
from .manifolds import get_manifold
from .ricci import attention_logits, ollivier_ricci_edges
from .tensor import DiffNode, SparsePattern

__all__ = [
    "EncoderConfig",
    "RelationData",
    "PreparedGraph",
    "EncoderOutput",
    "init_encoder_params",
    "make_leaves",
    "branch_conv",
    "multi_order_fuse",
    "order_attention",
    "encoder_forward",
    "prepare_graph",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    """Shape and geometry of the encoder."""

    in_dim: int
    hidden_dim: int
    layers: int = 1
    orders: int = 1
    space: str = "poincare"
    curvature: float = -1.0
    attn_dim: int = 64
    mlp_hidden: int = 16

    def __post_init__(self):
        for name in ("in_dim", "hidden_dim", "layers", "orders", "attn_dim", "mlp_hidden"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")

    def layer_in_dim(self, layer: int) -> int:
        return self.in_dim if layer == 0 else self.hidden_dim


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_encoder_params(cfg: EncoderConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Seeded Glorot-uniform weights, zero biases, in a fixed creation order."""
    params: dict[str, np.ndarray] = {}
    for layer in range(cfg.layers):
        d_in = cfg.layer_in_dim(layer)
        for k in range(1, cfg.orders + 1):
            for branch in ("along", "rev", "loop"):
                stem = f"enc.l{layer}.k{k}.{branch}"
                params[f"{stem}.w"] = _glorot(rng, d_in, cfg.hidden_dim)
                params[f"{stem}.b"] = np.zeros((1, cfg.hidden_dim))
                if branch != "loop":
                    # The loop neighborhood is the singleton {i}; its softmax
                    # is identically 1, so it carries no attention MLP.
                    params[f"{stem}.mlp.w1"] = _glorot(rng, 1, cfg.mlp_hidden)
                    params[f"{stem}.mlp.b1"] = np.zeros((1, cfg.mlp_hidden))
                    params[f"{stem}.mlp.w2"] = _glorot(rng, cfg.mlp_hidden, 1)
                    params[f"{stem}.mlp.b2"] = np.zeros((1, 1))
        params[f"enc.l{layer}.att.w"] = _glorot(rng, cfg.hidden_dim, cfg.attn_dim)
        params[f"enc.l{layer}.att.v"] = _glorot(rng, cfg.attn_dim, 1)
        params[f"enc.l{layer}.bias"] = np.zeros((1, cfg.hidden_dim))
    return params


def make_leaves(params: dict[str, np.ndarray]) -> dict[str, DiffNode]:
    """Fresh leaf nodes over the parameter arrays for one forward pass."""
    return {name: DiffNode(arr) for name, arr in params.items()}


@dataclass(frozen=True)
class RelationData:
    """One relation's aggregation pattern plus its per-edge curvature."""

    pattern: SparsePattern
    kappa: np.ndarray  # (E, 1)


@dataclass(frozen=True)
class PreparedGraph:
    """Everything derived from topology once per (dataset, K, alpha)."""

    dataset: GraphDataset
    adjacency: MultiOrderAdjacency
    along: tuple
    rev: tuple
    alpha: float


def prepare_graph(g: GraphDataset, orders: int, alpha: float = 0.5) -> PreparedGraph:
    """Build order-k relations and their edge curvature maps."""
    adjacency = build_multi_order(g.edges, g.n, orders)
    along, rev = [], []
    for k in range(1, orders + 1):
        mat = adjacency.relation(k, "along")
        coo = mat.tocoo()
        edges_k = np.stack([coo.row, coo.col], axis=1).astype(np.int64)
        curv = ollivier_ricci_edges(edges_k, g.n, alpha)
        for branch, rel in (("along", mat), ("rev", adjacency.relation(k, "rev"))):
            pattern = SparsePattern.from_csr(rel)
            kappa = np.array(
                [curv.kappa(int(i), int(j)) for i, j in zip(pattern.rows, pattern.cols)],
                dtype=np.float64,
            ).reshape(-1, 1)
            (along if branch == "along" else rev).append(RelationData(pattern, kappa))
    return PreparedGraph(dataset=g, adjacency=adjacency, along=tuple(along),
                         rev=tuple(rev), alpha=alpha)


def branch_conv(
    x_tangent: DiffNode,
    relation: RelationData | None,
    w: DiffNode,
    b: DiffNode,
    mlp: tuple[DiffNode, DiffNode, DiffNode, DiffNode] | None = None,
):
    """ReLU of the attention-weighted affine aggregation over one relation.

    ``relation=None`` is the self-loop branch: the neighborhood is {i}
    with weight 1, reducing to a dense layer.  Nodes with no neighbors
    under the relation output ReLU(b) (empty sum plus bias).  Returns
    (output, neighbor weights or None).
    """
    transformed = T.matmul(x_tangent, w)
    if relation is None:
        return T.relu(T.add(transformed, b)), None
    logits = attention_logits(DiffNode(relation.kappa), *mlp)
    weights = T.neighbor_softmax(logits, relation.pattern)
    aggregated = T.weighted_neighbor_sum(weights, transformed, relation.pattern)
    return T.relu(T.add(aggregated, b)), weights


def multi_order_fuse(along_out: DiffNode, rev_out: DiffNode, loop_out: DiffNode) -> DiffNode:
    """Elementwise sum of the three branch outputs."""
    if not (along_out.shape == rev_out.shape == loop_out.shape):
        raise ShapeError(
            f"fuse: branch shapes differ: {along_out.shape}, {rev_out.shape}, {loop_out.shape}"
        )
    return T.add(T.add(along_out, rev_out), loop_out)


def order_attention(h_orders: list[DiffNode], w: DiffNode, v: DiffNode):
    """Per-node softmax over the K order representations.

    Scores are s_i^k = v^T tanh(W h_i^k); the weights across k sum to 1
    per node.  Returns (fused output, weights (n, K)).
    """
    if not h_orders:
        raise ContractError("order_attention: need at least one order")
    if len(h_orders) == 1:
        ones = DiffNode(np.ones((h_orders[0].rows, 1)))
        return h_orders[0], ones
    scores = [T.matmul(T.tanh(T.matmul(h, w)), v) for h in h_orders]
    stacked = scores[0]
    for s in scores[1:]:
        stacked = T.concat_cols(stacked, s)
    weights = T.softmax_rows(stacked)
    out = None
    for k, h in enumerate(h_orders):
        term = T.mul(T.slice_cols(weights, k, k + 1), h)
        out = term if out is None else T.add(out, term)
    return out, weights


@dataclass
class EncoderOutput:
    """Final manifold points, their tangent image, and attention diagnostics."""

    points: DiffNode
    tangent: DiffNode
    order_weights: list[DiffNode] = field(default_factory=list)
    neighbor_weights: dict = field(default_factory=dict)


def encoder_forward(
    prep: PreparedGraph,
    leaves: dict[str, DiffNode],
    cfg: EncoderConfig,
    features: np.ndarray | None = None,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> EncoderOutput:
    """Run the full encoder; ``features`` overrides the dataset's (for
    corrupted views sharing the same topology)."""
    feats = prep.dataset.features if features is None else features
    if feats.shape[1] != cfg.in_dim:
        raise ShapeError(f"features have dim {feats.shape[1]}, config says {cfg.in_dim}")
    manifold = get_manifold(cfg.space, cfg.curvature)
    if dropout and rng is None:
        raise ContractError("dropout requires a random generator")

    x_t = manifold.logmap0(manifold.lift(DiffNode(feats)))
    out = EncoderOutput(points=x_t, tangent=x_t)
    points = None
    for layer in range(cfg.layers):
        if dropout:
            keep = 1.0 - dropout
            mask = (rng.random(x_t.shape) < keep) / keep
            x_t = T.mul(x_t, DiffNode(mask))
        h_orders = []
        for k in range(1, cfg.orders + 1):
            branch_out = {}
            for branch in ("along", "rev", "loop"):
                stem = f"enc.l{layer}.k{k}.{branch}"
                if branch == "loop":
                    relation, mlp = None, None
                else:
                    relation = (prep.along if branch == "along" else prep.rev)[k - 1]
                    mlp = (leaves[f"{stem}.mlp.w1"], leaves[f"{stem}.mlp.b1"],
                           leaves[f"{stem}.mlp.w2"], leaves[f"{stem}.mlp.b2"])
                conv, alpha = branch_conv(
                    x_t, relation, leaves[f"{stem}.w"], leaves[f"{stem}.b"], mlp
                )
                branch_out[branch] = conv
                if alpha is not None:
                    out.neighbor_weights[(layer, k, branch)] = alpha
            h_orders.append(
                multi_order_fuse(branch_out["along"], branch_out["rev"], branch_out["loop"])
            )
        fused, weights = order_attention(
            h_orders, leaves[f"enc.l{layer}.att.w"], leaves[f"enc.l{layer}.att.v"]
        )
        out.order_weights.append(weights)
        points = manifold.expmap0(fused)
        bias_point = manifold.lift(leaves[f"enc.l{layer}.bias"])
        points = manifold.bias_translate(points, bias_point)
        x_t = manifold.logmap0(points)

    out.points = points
    out.tangent = x_t
    return out


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict) -> None:
    """Write parameters plus JSON metadata (shapes recorded for validation)."""
    path = Path(path)
    header = {
        "version": CHECKPOINT_VERSION,
        "meta": meta,
        "shapes": {name: list(arr.shape) for name, arr in params.items()},
    }
    arrays = {f"param/{name}": arr for name, arr in params.items()}
    np.savez(path, __header__=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
             **arrays)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Load a checkpoint; fails loudly on version or shape mismatches."""
    path = Path(path)
    with np.load(path) as blob:
        if "__header__" not in blob:
            raise ContractError(f"{path}: not a parameter checkpoint (missing header)")
        header = json.loads(bytes(blob["__header__"]).decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise ContractError(
                f"{path}: checkpoint version {header.get('version')} "
                f"!= supported {CHECKPOINT_VERSION}"
            )
        params = {}
        for key in blob.files:
            if not key.startswith("param/"):
                continue
            name = key[len("param/"):]
            arr = blob[key].astype(np.float64)
            expected = tuple(header["shapes"].get(name, ()))
            if tuple(arr.shape) != expected:
                raise ContractError(
                    f"{path}: shape {arr.shape} of {name!r} does not match "
                    f"recorded {expected}"
                )
            params[name] = arr
        missing = set(header["shapes"]) - set(params)
        if missing:
            raise ContractError(f"{path}: checkpoint is missing arrays {sorted(missing)}")
    return params, header["meta"]
