"""Run orchestration: dataset resolution, training runs, ablation grids,
geometry self-checks and curvature dumps.  The HTTP service endpoints are
thin wrappers over these functions; every run leaves a reproducible
config.json snapshot next to its outputs."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .data import (
    GraphDataset,
    generate_hierarchy,
    load_json_graph,
    load_planetoid_content,
    stratified_split,
    symmetrize,
)
from .errors import ContractError
from .layers import (
    EncoderConfig,
    encoder_forward,
    load_checkpoint,
    make_leaves,
    prepare_graph,
    save_checkpoint,
)
from .manifolds import Curvature, Lorentz, LorentzPoint, PoincareBall, convert, geodesic_distance
from .metrics import classification_report, clustering_report
from .ricci import ollivier_ricci_edges
from .service.schemas import (
    AblateRequest,
    AblateResponse,
    CurvatureDumpRequest,
    CurvatureDumpResponse,
    DatasetRef,
    EvalRequest,
    EvalResponse,
    GeometryCheckRequest,
    GeometryCheckResponse,
    TrainRequest,
    TrainResponse,
)
from .training import (
    TrainConfig,
    fit,
    kmeans_cluster,
    linear_probe,
    predict_classes,
)

__all__ = [
    "DATA_DIR_ENV",
    "resolve_dataset",
    "run_train",
    "run_eval",
    "run_ablate",
    "run_geometry_check",
    "run_curvature_dump",
    "geometry_report",
    "GEOMETRY_TOLERANCES",
]

log = logging.getLogger(__name__)

DATA_DIR_ENV = "HYGRAPH_DATA_DIR"


def _data_root() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def resolve_dataset(ref: DatasetRef) -> GraphDataset:
    """Load the dataset a request points at (path, name, or synthetic)."""
    fmt = ref.format
    name = ref.dataset
    if fmt == "auto":
        if name == "hierarchy":
            fmt = "hierarchy"
        elif name.endswith(".json"):
            fmt = "json"
        else:
            fmt = "planetoid"

    if fmt == "hierarchy":
        h = ref.hierarchy
        g = generate_hierarchy(depth=h.depth, branching=h.branching, classes=h.classes,
                               noise=h.noise, seed=h.data_seed, dim=h.feature_dim)
    elif fmt == "json":
        path = Path(name)
        if not path.exists():
            path = _data_root() / name
        if not path.exists():
            raise FileNotFoundError(f"JSON graph not found: {name} (also tried {path})")
        g = load_json_graph(path)
    else:
        content = _find_planetoid(name)
        g = load_planetoid_content(content, content.with_suffix(".cites"))
    return symmetrize(g) if ref.symmetrize else g


def _find_planetoid(name: str) -> Path:
    candidates = []
    p = Path(name)
    if p.suffix == ".content":
        candidates.append(p)
    else:
        root = _data_root()
        candidates += [root / name / f"{name}.content", root / f"{name}.content",
                       p / f"{name}.content"]
    for cand in candidates:
        if cand.exists() and cand.with_suffix(".cites").exists():
            return cand
    tried = ", ".join(str(c) for c in candidates)
    raise FileNotFoundError(f"Planetoid dataset {name!r} not found (tried: {tried})")


def _train_config(req: TrainRequest) -> TrainConfig:
    return TrainConfig(
        task=req.task,
        epochs=req.epochs,
        lr=req.lr,
        seed=req.seed,
        space=req.space,
        curvature=req.curvature,
        orders=req.orders,
        layers=req.layers,
        hidden_dim=req.hidden_dim,
        dropout=req.dropout,
        patience=req.patience,
        idleness=req.idleness,
    )


def _embeddings(prep, params, enc_cfg: EncoderConfig) -> np.ndarray:
    leaves = make_leaves(params)
    return encoder_forward(prep, leaves, enc_cfg).tangent.value


def _evaluate(g: GraphDataset, prep, params, enc_cfg, task: str, eval_mode: str,
              seed: int) -> dict:
    """Task-appropriate metric report (empty when the dataset has no labels)."""
    if g.labels is None:
        return {}
    if task == "supervised":
        preds = predict_classes(prep, params, enc_cfg)
        masks = g.masks if g.masks is not None else stratified_split(g.labels, seed)
        return classification_report(g.labels[masks.test], preds[masks.test])
    emb = _embeddings(prep, params, enc_cfg)
    if eval_mode == "clustering":
        assign = kmeans_cluster(emb, g.classes, seed)
        return clustering_report(g.labels, assign)
    masks = g.masks if g.masks is not None else stratified_split(g.labels, seed)
    preds = linear_probe(emb, g.labels, masks, seed)
    return classification_report(g.labels[masks.test], preds[masks.test])


def _write_history(path: Path, history) -> None:
    with path.open("w") as fh:
        for record in history:
            fh.write(json.dumps(record.to_json()) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_train(req: TrainRequest) -> TrainResponse:
    started = time.monotonic()
    req = req.resolved()
    g = resolve_dataset(req.data)
    cfg = _train_config(req)

    run_dir = Path(req.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    config_path = run_dir / "config.json"
    _write_json(config_path, req.model_dump())

    result = fit(g, cfg)
    history_path = run_dir / "history.jsonl"
    _write_history(history_path, result.history)

    if result.diverged:
        log.error("training diverged after %d epochs", len(result.history))
        return TrainResponse(
            status="diverged", config=req, run_dir=str(run_dir),
            config_path=str(config_path), history_path=str(history_path),
            checkpoint_path=None, metrics_path=None,
            epochs_run=len(result.history), best_epoch=result.best_epoch,
            final_loss=result.history[-1].loss if result.history else None,
            metrics=None, wall_seconds=time.monotonic() - started,
        )

    checkpoint_path = run_dir / "params.npz"
    meta = {
        "task": req.task,
        "train_request": req.model_dump(),
        "in_dim": g.dim,
        "classes": g.classes,
    }
    save_checkpoint(checkpoint_path, result.params, meta)

    eval_graph = g if g.masks is not None or result.masks is None else g.with_masks(result.masks)
    metrics = _evaluate(eval_graph, result.prep, result.params, result.encoder_config,
                        req.task, req.eval_mode, req.seed)
    final_loss = result.history[-1].loss if result.history else None
    wall = time.monotonic() - started
    metrics_payload = {
        **metrics,
        "final_loss": final_loss,
        "epochs_run": len(result.history),
        "best_epoch": result.best_epoch,
        "wall_seconds": wall,
    }
    metrics_path = run_dir / "metrics.json"
    _write_json(metrics_path, metrics_payload)

    return TrainResponse(
        status="ok", config=req, run_dir=str(run_dir),
        config_path=str(config_path), history_path=str(history_path),
        checkpoint_path=str(checkpoint_path), metrics_path=str(metrics_path),
        epochs_run=len(result.history), best_epoch=result.best_epoch,
        final_loss=final_loss, metrics=metrics, wall_seconds=wall,
    )


def run_eval(req: EvalRequest) -> EvalResponse:
    started = time.monotonic()
    params, meta = load_checkpoint(req.checkpoint)
    g = resolve_dataset(req.data)
    train_req = TrainRequest.model_validate(meta["train_request"])
    if g.dim != meta["in_dim"]:
        raise ContractError(
            f"dataset feature dim {g.dim} != checkpoint's {meta['in_dim']}"
        )
    cfg = _train_config(train_req)
    prep = prepare_graph(g, cfg.orders, cfg.idleness)
    enc_cfg = cfg.encoder_config(g.dim)
    metrics = _evaluate(g, prep, params, enc_cfg, meta["task"], req.eval_mode, req.seed)
    metrics_path = None
    if req.out_dir is not None:
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "config.json", req.model_dump())
        metrics_path = out_dir / "metrics.json"
        _write_json(metrics_path, metrics)
    return EvalResponse(metrics=metrics, metrics_path=None if metrics_path is None
                        else str(metrics_path), task=meta["task"],
                        wall_seconds=time.monotonic() - started)


def _ablate_cell(req: AblateRequest, g: GraphDataset, k: int, dim: int, space: str,
                 seed: int) -> list[dict]:
    unsup = req.task == "unsupervised"
    cfg = TrainConfig(
        task=req.task, epochs=req.epochs, lr=req.lr, seed=seed, space=space,
        curvature=req.curvature, orders=k,
        layers=req.layers if req.layers is not None else (1 if unsup else 2),
        hidden_dim=dim,
        dropout=req.dropout if req.dropout is not None else (0.1 if unsup else 0.0),
        patience=req.patience, idleness=req.idleness,
    )
    base = {"k": k, "dim": dim, "space": space, "seed": seed}
    try:
        result = fit(g, cfg)
        if result.diverged:
            return [{**base, "metric": "", "value": "", "status": "diverged"}]
        eval_graph = g if g.masks is not None or result.masks is None \
            else g.with_masks(result.masks)
        metrics = _evaluate(eval_graph, result.prep, result.params,
                            result.encoder_config, req.task, req.eval_mode, seed)
        rows = [{**base, "metric": name, "value": value, "status": "ok"}
                for name, value in sorted(metrics.items())]
        return rows or [{**base, "metric": "", "value": "", "status": "no-labels"}]
    except Exception as exc:  # cell failures recorded, grid continues
        log.exception("ablation cell %s failed", base)
        return [{**base, "metric": "", "value": "", "status": f"error: {exc}"}]


def run_ablate(req: AblateRequest) -> AblateResponse:
    started = time.monotonic()
    if not (req.orders_grid and req.dim_grid and req.space_grid and req.seeds):
        raise ContractError("ablation grid must be nonempty in every dimension")
    g = resolve_dataset(req.data)
    cells = [(k, dim, space, seed)
             for k in req.orders_grid for dim in req.dim_grid
             for space in req.space_grid for seed in req.seeds]

    if req.jobs > 1:
        with ThreadPoolExecutor(max_workers=req.jobs) as pool:
            results = list(pool.map(lambda c: _ablate_cell(req, g, *c), cells))
    else:
        results = [_ablate_cell(req, g, *cell) for cell in cells]

    rows = [row for cell_rows in results for row in cell_rows]
    rows.sort(key=lambda r: (r["k"], r["dim"], r["space"], r["seed"], r["metric"]))
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "config.json", req.model_dump())
    csv_path = out_dir / "ablation.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["k", "dim", "space", "seed",
                                                "metric", "value", "status"])
        writer.writeheader()
        writer.writerows(rows)
    failures = sum(1 for cell_rows in results if cell_rows[0]["status"] != "ok")
    return AblateResponse(csv_path=str(csv_path), cells=len(cells), failures=failures,
                          rows=len(rows), wall_seconds=time.monotonic() - started)


GEOMETRY_TOLERANCES = {
    "poincare_tangent_roundtrip": 1e-9,
    "poincare_point_roundtrip": 1e-9,
    "poincare_bias_vs_mobius": 1e-8,
    "lorentz_tangent_roundtrip": 1e-9,
    "lorentz_point_roundtrip": 1e-9,
    "lorentz_constraint_chain": 1e-8,
    "conversion_distance": 1e-7,
    "conversion_self_inverse": 1e-9,
}


def geometry_report(model: str, curvature: float, trials: int, seed: int,
                    dim: int = 8) -> dict[str, float]:
    """Max errors of the manifold property suite on seeded random inputs."""
    if trials < 1:
        raise ContractError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(trials, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    tangents = directions * rng.uniform(1e-3, 3.0, size=(trials, 1))
    report: dict[str, float] = {}

    if model in ("poincare", "both"):
        ball = PoincareBall(curvature)
        points = ball.expmap0(tangents).value
        report["poincare_tangent_roundtrip"] = float(
            np.abs(ball.logmap0(points).value - tangents).max())
        report["poincare_point_roundtrip"] = float(
            np.abs(ball.expmap0(ball.logmap0(points).value).value - points).max())
        half = max(trials // 2, 1)
        x, b = points[:half], points[half:2 * half]
        if x.shape[0] == b.shape[0] and x.shape[0] > 0:
            via_transport = ball.bias_translate(x, b).value
            direct = ball.mobius_add(x, b).value
            report["poincare_bias_vs_mobius"] = float(np.abs(via_transport - direct).max())

    if model in ("lorentz", "both"):
        lor = Lorentz(curvature)
        points = lor.expmap0(tangents).value
        report["lorentz_tangent_roundtrip"] = float(
            np.abs(lor.logmap0(points).value - tangents).max())
        report["lorentz_point_roundtrip"] = float(
            np.abs(lor.expmap0(lor.logmap0(points).value).value - points).max())
        chain = points[: min(trials, 256)]
        chain_rng = np.random.default_rng(seed + 1)
        drift = 0.0
        for _ in range(20):
            w = chain_rng.normal(size=(dim, dim)) * (0.5 / np.sqrt(dim))
            chain = lor.matvec(chain, w).value
            bias = lor.expmap0(chain_rng.normal(size=(1, dim)) * 0.1).value
            chain = lor.bias_translate(chain, bias).value
            drift = max(drift, lor.violation(chain))
        report["lorentz_constraint_chain"] = float(drift)

    if model == "both":
        sample = min(trials, 64)
        cur = Curvature(curvature)
        l_pts = [LorentzPoint(row, cur) for row in Lorentz(curvature).expmap0(
            tangents[:sample]).value]
        p_pts = [convert(p, "poincare") for p in l_pts]
        dist_err = 0.0
        inv_err = 0.0
        for i in range(sample):
            back = convert(p_pts[i], "lorentz")
            inv_err = max(inv_err, float(np.abs(back.coords - l_pts[i].coords).max()))
            for j in range(i + 1, min(i + 5, sample)):
                d_l = geodesic_distance(l_pts[i], l_pts[j])
                d_p = geodesic_distance(p_pts[i], p_pts[j])
                dist_err = max(dist_err, abs(d_l - d_p))
        report["conversion_distance"] = dist_err
        report["conversion_self_inverse"] = inv_err

    return report


def run_geometry_check(req: GeometryCheckRequest) -> GeometryCheckResponse:
    started = time.monotonic()
    report = geometry_report(req.model, req.curvature, req.trials, req.seed, req.dim)
    failing = [name for name, err in report.items()
               if err > GEOMETRY_TOLERANCES[name]]
    return GeometryCheckResponse(
        ok=not failing,
        max_errors=report,
        tolerances={k: v for k, v in GEOMETRY_TOLERANCES.items() if k in report},
        failing=failing,
        wall_seconds=time.monotonic() - started,
    )


def run_curvature_dump(req: CurvatureDumpRequest) -> CurvatureDumpResponse:
    started = time.monotonic()
    g = resolve_dataset(req.data)
    curv = ollivier_ricci_edges(g.edges, g.n, req.alpha)
    out_path = Path(req.out_path)
    if out_path.parent != Path("."):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    pairs = curv.edges_sorted()
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "kappa"])
        for (i, j), kappa in pairs:
            writer.writerow([i, j, repr(kappa)])
    return CurvatureDumpResponse(csv_path=str(out_path), edges=len(pairs),
                                 wall_seconds=time.monotonic() - started)
