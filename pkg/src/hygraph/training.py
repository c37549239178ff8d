"""Training: supervised cross-entropy and unsupervised contrastive paths.

Both heads share the encoder.  The contrastive path scores nodes of the
clean and feature-corrupted views against a sigmoid readout of the clean
embeddings through a bilinear discriminator, with the usual binary
cross-entropy mutual-information objective.  The frozen-embedding linear
probe and the seeded k-means clusterer used to evaluate unsupervised
runs live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import GraphDataset, Masks, corrupt_features, stratified_split
from .errors import ContractError, GradientError
from .layers import (
    EncoderConfig,
    EncoderOutput,
    PreparedGraph,
    encoder_forward,
    init_encoder_params,
    make_leaves,
    prepare_graph,
)
from .metrics import f1_scores
from .optim import AdamState, adam_init, adam_step
from .tensor import DiffNode

__all__ = [
    "TrainConfig",
    "HistoryRecord",
    "FitResult",
    "init_params",
    "supervised_loss",
    "contrastive_loss",
    "supervised_step",
    "contrastive_step",
    "predict_classes",
    "fit",
    "linear_probe",
    "kmeans_cluster",
]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    task: str
    epochs: int = 200
    lr: float = 0.1
    seed: int = 0
    space: str = "poincare"
    curvature: float = -1.0
    orders: int = 2
    layers: int = 2
    hidden_dim: int = 512
    dropout: float = 0.0
    patience: int = 20
    idleness: float = 0.5
    attn_dim: int = 64
    mlp_hidden: int = 16

    def __post_init__(self):
        if self.task not in ("supervised", "unsupervised"):
            raise ContractError(f"unknown task {self.task!r}")
        if self.epochs < 0 or self.patience < 1 or self.lr <= 0:
            raise ContractError("epochs must be >= 0, patience >= 1, lr > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ContractError(f"dropout must lie in [0, 1), got {self.dropout}")

    def encoder_config(self, in_dim: int) -> EncoderConfig:
        return EncoderConfig(
            in_dim=in_dim,
            hidden_dim=self.hidden_dim,
            layers=self.layers,
            orders=self.orders,
            space=self.space,
            curvature=self.curvature,
            attn_dim=self.attn_dim,
            mlp_hidden=self.mlp_hidden,
        )


@dataclass(frozen=True)
class HistoryRecord:
    """One training epoch.  ``seconds`` is kept at 0.0: history files are
    reproducibility artifacts and must be bit-identical across reruns;
    wall time is reported in the run's metrics instead."""

    epoch: int
    loss: float
    val_metric: float
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"epoch": self.epoch, "loss": self.loss,
                "val_metric": self.val_metric, "seconds": self.seconds}


@dataclass
class FitResult:
    params: dict[str, np.ndarray]
    history: list[HistoryRecord]
    diverged: bool
    best_epoch: int
    prep: PreparedGraph
    encoder_config: EncoderConfig
    masks: Masks | None


def init_params(cfg: TrainConfig, g: GraphDataset, rng: np.random.Generator) -> dict:
    """Encoder parameters plus the task head (decoder or discriminator)."""
    params = init_encoder_params(cfg.encoder_config(g.dim), rng)
    if cfg.task == "supervised":
        if g.labels is None:
            raise ContractError("supervised training needs labels")
        limit = math.sqrt(6.0 / (cfg.hidden_dim + g.classes))
        params["dec.w"] = rng.uniform(-limit, limit, size=(cfg.hidden_dim, g.classes))
        params["dec.b"] = np.zeros((1, g.classes))
    else:
        limit = math.sqrt(6.0 / (2 * cfg.hidden_dim))
        params["disc.w"] = rng.uniform(-limit, limit, size=(cfg.hidden_dim, cfg.hidden_dim))
    return params


def decoder_logits(tangent: DiffNode, leaves: dict[str, DiffNode]) -> DiffNode:
    """Linear decode of tangent embeddings in Euclidean space."""
    return T.add(T.matmul(tangent, leaves["dec.w"]), leaves["dec.b"])


def supervised_loss(
    prep: PreparedGraph,
    leaves: dict[str, DiffNode],
    enc_cfg: EncoderConfig,
    masks: Masks,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[DiffNode, DiffNode, EncoderOutput]:
    """Mean cross-entropy over train-mask nodes; returns (loss, logits, out)."""
    out = encoder_forward(prep, leaves, enc_cfg, dropout=dropout, rng=rng)
    logits = decoder_logits(out.tangent, leaves)
    loss = T.masked_cross_entropy(logits, prep.dataset.labels, masks.train)
    return loss, logits, out


def contrastive_loss(
    prep: PreparedGraph,
    leaves: dict[str, DiffNode],
    enc_cfg: EncoderConfig,
    corrupted_features: np.ndarray,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[DiffNode, EncoderOutput, EncoderOutput]:
    """Binary InfoMax objective over clean positives and corrupted negatives.

    summary = sigmoid(mean of clean tangent rows); the discriminator
    scores sigmoid(e_i W summary); positives are pushed to 1, negatives
    to 0, averaged over N + M samples.
    """
    out = encoder_forward(prep, leaves, enc_cfg, dropout=dropout, rng=rng)
    out_neg = encoder_forward(prep, leaves, enc_cfg, features=corrupted_features,
                              dropout=dropout, rng=rng)
    summary = T.sigmoid(T.mean_of_rows(out.tangent))
    w_summary = T.matmul(leaves["disc.w"], T.transpose(summary))
    score_pos = T.matmul(out.tangent, w_summary)
    score_neg = T.matmul(out_neg.tangent, w_summary)
    n_total = score_pos.rows + score_neg.rows
    loss = T.scale(
        T.add(T.sum_all(T.softplus(T.neg(score_pos))), T.sum_all(T.softplus(score_neg))),
        1.0 / n_total,
    )
    return loss, out, out_neg


class DivergedLoss(ContractError):
    def __init__(self, value: float):
        super().__init__(f"loss became non-finite ({value})")
        self.value = value


def _apply_step(loss: DiffNode, leaves: dict, params: dict, state: AdamState,
                lr: float) -> None:
    T.backward(loss)
    grads = {name: leaves[name].adjoint for name in params}
    adam_step(params, grads, state, lr)


def supervised_step(
    prep: PreparedGraph,
    params: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
    masks: Masks,
    rng: np.random.Generator | None = None,
) -> float:
    """One forward/backward/Adam update; returns the (pre-update) loss."""
    leaves = make_leaves(params)
    loss, _, _ = supervised_loss(prep, leaves, cfg.encoder_config(prep.dataset.dim),
                                 masks, cfg.dropout, rng)
    value = loss.value.item()
    if not np.isfinite(value):
        raise DivergedLoss(value)
    _apply_step(loss, leaves, params, state, cfg.lr)
    return value


def contrastive_step(
    prep: PreparedGraph,
    params: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
    corrupted: GraphDataset,
    rng: np.random.Generator | None = None,
) -> float:
    """One contrastive update against the given corrupted view."""
    leaves = make_leaves(params)
    loss, _, _ = contrastive_loss(prep, leaves, cfg.encoder_config(prep.dataset.dim),
                                  corrupted.features, cfg.dropout, rng)
    value = loss.value.item()
    if not np.isfinite(value):
        raise DivergedLoss(value)
    _apply_step(loss, leaves, params, state, cfg.lr)
    return value


def predict_classes(prep: PreparedGraph, params: dict, enc_cfg: EncoderConfig) -> np.ndarray:
    """Hard class predictions from the supervised head (argmax of logits)."""
    leaves = make_leaves(params)
    out = encoder_forward(prep, leaves, enc_cfg)
    logits = decoder_logits(out.tangent, leaves)
    return np.argmax(logits.value, axis=1)


def fit(g: GraphDataset, cfg: TrainConfig) -> FitResult:
    """Full training loop with early stopping; reproducible under the seed.

    Supervised runs stop on validation Micro-F1, unsupervised runs on
    the contrastive loss itself (there is no validation split without
    labels); the best parameters are restored at the end.  A non-finite
    loss or gradient stops training and flags the result as diverged.
    """
    seq = np.random.SeedSequence(cfg.seed)
    rng_init, rng_drop, rng_corrupt, rng_split = (
        np.random.default_rng(s) for s in seq.spawn(4)
    )

    masks = g.masks
    if cfg.task == "supervised" and masks is None:
        if g.labels is None:
            raise ContractError("supervised training needs labels")
        masks = stratified_split(g.labels, seed=int(rng_split.integers(2 ** 31)))
        g = g.with_masks(masks)

    prep = prepare_graph(g, cfg.orders, cfg.idleness)
    enc_cfg = cfg.encoder_config(g.dim)
    params = init_params(cfg, g, rng_init)
    state = adam_init(params)

    history: list[HistoryRecord] = []
    maximize = cfg.task == "supervised"
    best_metric = -np.inf if maximize else np.inf
    best_params: dict[str, np.ndarray] | None = None
    best_epoch = 0
    since_best = 0
    diverged = False

    for epoch in range(1, cfg.epochs + 1):
        try:
            if cfg.task == "supervised":
                loss = supervised_step(prep, params, state, cfg, masks, rng_drop)
                preds = predict_classes(prep, params, enc_cfg)
                val_idx = masks.val if masks.val.any() else masks.train
                val_metric, _ = f1_scores(g.labels[val_idx], preds[val_idx])
            else:
                corrupted = corrupt_features(g, seed=int(rng_corrupt.integers(2 ** 31)))
                loss = contrastive_step(prep, params, state, cfg, corrupted, rng_drop)
                val_metric = loss
        except (DivergedLoss, GradientError):
            diverged = True
            break

        history.append(HistoryRecord(epoch=epoch, loss=loss, val_metric=float(val_metric)))
        improved = val_metric > best_metric if maximize else val_metric < best_metric
        if improved:
            best_metric = val_metric
            best_params = {name: arr.copy() for name, arr in params.items()}
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                break

    if best_params is not None:
        params = best_params
    return FitResult(params=params, history=history, diverged=diverged,
                     best_epoch=best_epoch, prep=prep, encoder_config=enc_cfg,
                     masks=masks)


def linear_probe(
    embeddings: np.ndarray,
    labels: np.ndarray,
    masks: Masks,
    seed: int,
    epochs: int = 500,
    lr: float = 0.01,
    patience: int = 25,
) -> np.ndarray:
    """Train a softmax layer on frozen embeddings; return predictions for all nodes.

    The embeddings enter as plain arrays, so no gradient can reach the
    encoder.  Early stopping watches the validation loss when a val mask
    is present.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    train_classes = np.unique(labels[masks.train])
    if train_classes.size < 2:
        raise ContractError("probe train mask covers fewer than 2 classes")
    classes = int(labels.max()) + 1
    dim = embeddings.shape[1]

    rng = np.random.default_rng(seed)
    limit = math.sqrt(6.0 / (dim + classes))
    params = {
        "probe.w": rng.uniform(-limit, limit, size=(dim, classes)),
        "probe.b": np.zeros((1, classes)),
    }
    state = adam_init(params)
    use_val = bool(masks.val.any())
    best = np.inf
    best_params = None
    since_best = 0
    for _ in range(epochs):
        leaves = make_leaves(params)
        logits = T.add(T.matmul(DiffNode(embeddings), leaves["probe.w"]), leaves["probe.b"])
        loss = T.masked_cross_entropy(logits, labels, masks.train)
        T.backward(loss)
        adam_step(params, {k: leaves[k].adjoint for k in params}, state, lr)
        if use_val:
            val = T.masked_cross_entropy(
                T.add(T.matmul(DiffNode(embeddings), DiffNode(params["probe.w"])),
                      DiffNode(params["probe.b"])),
                labels, masks.val,
            ).value.item()
            if val < best:
                best = val
                best_params = {k: v.copy() for k, v in params.items()}
                since_best = 0
            else:
                since_best += 1
                if since_best > patience:
                    break
    if best_params is not None:
        params = best_params
    return np.argmax(embeddings @ params["probe.w"] + params["probe.b"], axis=1)


def kmeans_cluster(
    embeddings: np.ndarray,
    clusters: int,
    seed: int,
    iters: int = 200,
) -> np.ndarray:
    """Lloyd's k-means with seeded farthest-point (k-means++ style) init."""
    x = np.asarray(embeddings, dtype=np.float64)
    n = x.shape[0]
    if clusters < 1 or clusters > n:
        raise ContractError(f"cluster count {clusters} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = [int(rng.integers(n))]
    d2 = ((x - x[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, clusters):
        nxt = int(np.argmax(d2))
        centers.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    means = x[centers].copy()
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(iters):
        dists = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(dists, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(clusters):
            members = x[assign == c]
            if members.shape[0]:
                means[c] = members.mean(axis=0)
    return assign
