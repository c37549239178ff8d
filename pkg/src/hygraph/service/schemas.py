"""Pydantic request/response models for the HTTP service.

Unknown keys are rejected everywhere (``extra="forbid"``), so a typo in
a config never silently falls back to a default.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HierarchyParams(StrictModel):
    """Synthetic tree benchmark: complete directed tree, subtree classes."""

    depth: int = 4
    branching: int = 3
    classes: int = 3
    noise: float = 3.0
    feature_dim: int = 16
    data_seed: int = 0


class DatasetRef(StrictModel):
    """Where a graph comes from.

    ``dataset`` is a path or a name; names resolve under the data root
    (HYGRAPH_DATA_DIR or ./data).  ``format`` "auto" infers: the literal
    name "hierarchy" builds the synthetic tree, ``*.json`` loads the JSON
    graph schema, anything else is treated as a Planetoid content/cites
    pair.
    """

    dataset: str
    format: Literal["auto", "planetoid", "json", "hierarchy"] = "auto"
    symmetrize: bool = False
    hierarchy: HierarchyParams = Field(default_factory=HierarchyParams)


class TrainRequest(StrictModel):
    data: DatasetRef
    task: Literal["supervised", "unsupervised"]
    space: Literal["poincare", "lorentz", "euclidean"] = "poincare"
    orders: Optional[int] = None      # default: 4 unsupervised, 2 supervised
    layers: Optional[int] = None      # default: 1 unsupervised, 2 supervised
    hidden_dim: int = 512
    lr: float = 0.1
    epochs: int = 200
    seed: int = 0
    dropout: Optional[float] = None   # default: 0.1 unsupervised, 0.0 supervised
    patience: int = 20
    curvature: float = -1.0
    idleness: float = 0.5
    eval_mode: Literal["probe", "clustering"] = "probe"
    out_dir: str = "runs/train"

    def resolved(self) -> "TrainRequest":
        """Fill task-dependent defaults (Tables of the unsupervised and
        supervised protocols)."""
        unsup = self.task == "unsupervised"
        return self.model_copy(update={
            "orders": self.orders if self.orders is not None else (4 if unsup else 2),
            "layers": self.layers if self.layers is not None else (1 if unsup else 2),
            "dropout": self.dropout if self.dropout is not None else (0.1 if unsup else 0.0),
        })


class TrainResponse(StrictModel):
    status: Literal["ok", "diverged"]
    config: TrainRequest
    run_dir: str
    config_path: str
    history_path: str
    checkpoint_path: Optional[str]
    metrics_path: Optional[str]
    epochs_run: int
    best_epoch: int
    final_loss: Optional[float]
    metrics: Optional[dict]
    wall_seconds: float


class EvalRequest(StrictModel):
    checkpoint: str
    data: DatasetRef
    eval_mode: Literal["probe", "clustering"] = "probe"
    seed: int = 0
    out_dir: Optional[str] = None


class EvalResponse(StrictModel):
    metrics: dict
    metrics_path: Optional[str]
    task: str
    wall_seconds: float


class AblateRequest(StrictModel):
    data: DatasetRef
    task: Literal["supervised", "unsupervised"]
    orders_grid: list[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    dim_grid: list[int] = Field(default_factory=lambda: [64, 512])
    space_grid: list[Literal["poincare", "lorentz", "euclidean"]] = Field(
        default_factory=lambda: ["poincare"]
    )
    seeds: list[int] = Field(default_factory=lambda: [0])
    layers: Optional[int] = None
    lr: float = 0.1
    epochs: int = 200
    dropout: Optional[float] = None
    patience: int = 20
    curvature: float = -1.0
    idleness: float = 0.5
    eval_mode: Literal["probe", "clustering"] = "probe"
    jobs: int = 1
    out_dir: str = "runs/ablate"


class AblateResponse(StrictModel):
    csv_path: str
    cells: int
    failures: int
    rows: int
    wall_seconds: float


class GeometryCheckRequest(StrictModel):
    model: Literal["poincare", "lorentz", "both"] = "both"
    curvature: float = -1.0
    trials: int = 10000
    seed: int = 0
    dim: int = 8


class GeometryCheckResponse(StrictModel):
    ok: bool
    max_errors: dict
    tolerances: dict
    failing: list[str]
    wall_seconds: float


class CurvatureDumpRequest(StrictModel):
    data: DatasetRef
    alpha: float = 0.5
    out_path: str = "curvature.csv"


class CurvatureDumpResponse(StrictModel):
    csv_path: str
    edges: int
    wall_seconds: float


class HealthResponse(StrictModel):
    status: str
    version: str
