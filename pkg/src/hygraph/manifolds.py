"""Constant negative-curvature geometry: Poincaré ball and Lorentz models.

Two surfaces are exposed.  The model classes (:class:`PoincareBall`,
:class:`Lorentz`, :class:`EuclideanFlat`) operate on batches — rows are
points — and accept/return :class:`~hygraph.tensor.DiffNode`, so every
map is differentiable through the tensor substrate.  The typed point API
(:class:`PoincarePoint`, :class:`LorentzPoint`, plus the module-level
functions) wraps single points with validity checks and delegates to the
same batched formulas, so there is exactly one implementation of each
map.

Numerical guards: atanh arguments are clipped to 1 - 1e-12, acosh
arguments to 1 + 1e-12, norms to 1e-15; Poincaré points are projected to
norm <= (1 - 1e-5)/sqrt(|c|) and Lorentz points renormalized onto the
hyperboloid after every public operation.  The Lorentz log at the origin
uses an asinh form instead of acosh, which would lose half the mantissa
near the origin.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import BoundaryError, ContractError, ShapeError
from .tensor import DiffNode, as_node

__all__ = [
    "BALL_EPS",
    "LORENTZ_TOL",
    "Curvature",
    "PoincareBall",
    "Lorentz",
    "EuclideanFlat",
    "get_manifold",
    "PoincarePoint",
    "LorentzPoint",
    "TangentVector",
    "conformal_factor",
    "mobius_add",
    "exp_map_poincare",
    "log_map_poincare",
    "exp_map_lorentz",
    "log_map_lorentz",
    "lift_euclidean",
    "mobius_matvec",
    "parallel_transport_bias",
    "convert",
    "geodesic_distance",
]

BALL_EPS = 1e-5       # projection margin for the Poincaré ball
LORENTZ_TOL = 1e-8    # tolerated drift of the Minkowski constraint
# Cap on sqrt(|c|)*||v|| before cosh/sinh in the Lorentz exp maps.  Keeps
# cosh finite and, more importantly, keeps eps*cosh(arg)^2 below the 1e-8
# hyperboloid-constraint tolerance (cosh(8) ~ 1.5e3, so drift ~ 4e-10).
# The Poincaré ball has an intrinsic cap of the same order: its projection
# margin saturates distances at 2*atanh(1 - 1e-5) ~ 12.2.
MAX_TANGENT_ARG = 8.0
_MIN_DENOM = 1e-15

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Curvature:
    """Sectional curvature of the space; strictly negative."""

    c: float = -1.0

    def __post_init__(self):
        if not np.isfinite(self.c) or self.c >= 0:
            raise ContractError(f"curvature must be finite and < 0, got {self.c}")

    @property
    def sqrt_abs(self) -> float:
        return float(np.sqrt(-self.c))

    @property
    def radius(self) -> float:
        """Radius of the open ball realizing the space."""
        return 1.0 / self.sqrt_abs


_div = T.div
_clamp_min = T.clamp_min


def _ones_like(a) -> DiffNode:
    a = as_node(a)
    return DiffNode(np.ones_like(a.value))


class PoincareBall:
    """Gyrovector operations on the open ball ||x||^2 < -1/c."""

    name = "poincare"

    def __init__(self, curvature: Curvature | float = -1.0):
        self.curvature = curvature if isinstance(curvature, Curvature) else Curvature(curvature)
        self.c = self.curvature.c
        self.sc = self.curvature.sqrt_abs
        self.max_norm = (1.0 - BALL_EPS) / self.sc

    def point_dim(self, tangent_dim: int) -> int:
        return tangent_dim

    def project(self, x) -> DiffNode:
        """Pull stray rows back to norm <= (1 - 1e-5)/sqrt(|c|)."""
        x = as_node(x)
        n = T.row_norms(x)
        # scale = max_norm / max(n, max_norm): 1 inside the ball, shrink outside
        s = _div(DiffNode(np.full((x.rows, 1), self.max_norm)), _clamp_min(n, self.max_norm))
        return T.mul(x, s)

    def conformal_factor(self, x) -> DiffNode:
        """lambda_x = 2 / (1 + c ||x||^2), as an (n, 1) column."""
        x = as_node(x)
        sq = T.row_sums(T.mul(x, x))
        denom = _clamp_min(T.add(_ones_like(sq), T.scale(sq, self.c)), _MIN_DENOM)
        return _div(DiffNode(np.full((x.rows, 1), 2.0)), denom)

    def mobius_add(self, x, y) -> DiffNode:
        x, y = as_node(x), as_node(y)
        if x.shape[1] != y.shape[1]:
            raise ShapeError(f"mobius_add: dimension mismatch {x.shape} vs {y.shape}")
        c = self.c
        x2 = T.row_sums(T.mul(x, x))
        y2 = T.row_sums(T.mul(y, y))
        xy = T.row_sums(T.mul(x, y))
        cx = T.add(T.add(_ones_like(xy), T.scale(xy, -2.0 * c)), T.scale(y2, -c))
        cy = T.add(_ones_like(x2), T.scale(x2, c))
        num = T.add(T.mul(cx, x), T.mul(cy, y))
        den = T.add(T.add(_ones_like(xy), T.scale(xy, -2.0 * c)),
                    T.scale(T.mul(x2, y2), c * c))
        return self.project(_div(num, _clamp_min(den, _MIN_DENOM)))

    def expmap0(self, v) -> DiffNode:
        """Lift an origin tangent onto the ball: tanh(sc ||v||) v / (sc ||v||)."""
        v = as_node(v)
        n = T.row_norms(v)
        coef = _div(T.tanh(T.scale(n, self.sc)), T.scale(n, self.sc))
        return self.project(T.mul(v, coef))

    def logmap0(self, y) -> DiffNode:
        y = as_node(y)
        n = T.row_norms(y)
        coef = _div(T.artanh(T.scale(n, self.sc)), T.scale(n, self.sc))
        return T.mul(y, coef)

    def expmap(self, x, v) -> DiffNode:
        x, v = as_node(x), as_node(v)
        n = T.row_norms(v)
        lam = self.conformal_factor(x)
        arg = T.scale(T.mul(lam, n), self.sc / 2.0)
        coef = _div(T.tanh(arg), T.scale(n, self.sc))
        return self.mobius_add(x, T.mul(v, coef))

    def logmap(self, x, y) -> DiffNode:
        x, y = as_node(x), as_node(y)
        d = self.mobius_add(T.neg(x), y)
        n = T.row_norms(d)
        lam = self.conformal_factor(x)
        coef = _div(T.scale(T.artanh(T.scale(n, self.sc)), 2.0 / self.sc),
                    T.mul(lam, n))
        return T.mul(d, coef)

    def transport0(self, x, v) -> DiffNode:
        """Parallel transport of an origin tangent to x: v * lambda_o / lambda_x."""
        x, v = as_node(x), as_node(v)
        sq = T.row_sums(T.mul(x, x))
        return T.mul(v, T.add(_ones_like(sq), T.scale(sq, self.c)))

    def bias_translate(self, x, b) -> DiffNode:
        """x (+)_c b realized as exp_x(PT_{o->x}(log_o(b)))."""
        return self.expmap(x, self.transport0(x, self.logmap0(b)))

    def matvec(self, x, w) -> DiffNode:
        """Hyperbolic linear action: exp_o(log_o(x) @ w)."""
        return self.expmap0(T.matmul(self.logmap0(x), w))

    def lift(self, feats) -> DiffNode:
        """Euclidean feature rows read as origin tangents, lifted to the ball."""
        return self.expmap0(feats)

    def distance(self, x, y) -> DiffNode:
        n = T.row_norms(self.mobius_add(T.neg(x), y))
        return T.scale(T.artanh(T.scale(n, self.sc)), 2.0 / self.sc)

    def tangent0_norm(self, v) -> DiffNode:
        """Riemannian norm of an origin tangent (the lambda_o = 2 factor)."""
        return T.scale(T.row_norms(as_node(v)), 2.0)

    def violation(self, x: np.ndarray) -> float:
        """Largest excess of ||x|| over the projection radius (0 if inside)."""
        n = np.linalg.norm(np.atleast_2d(x), axis=1)
        return float(np.maximum(n - self.max_norm, 0.0).max(initial=0.0))


class Lorentz:
    """Operations on the upper hyperboloid sheet <x, x>_L = 1/c, x0 > 0.

    Manifold points carry an extra time coordinate; origin tangents are
    handled through their spatial part only (the time component of a
    tangent at the origin is identically zero).
    """

    name = "lorentz"

    def __init__(self, curvature: Curvature | float = -1.0):
        self.curvature = curvature if isinstance(curvature, Curvature) else Curvature(curvature)
        self.c = self.curvature.c
        self.sc = self.curvature.sqrt_abs

    def point_dim(self, tangent_dim: int) -> int:
        return tangent_dim + 1

    def origin(self, dim: int, rows: int = 1) -> np.ndarray:
        o = np.zeros((rows, dim + 1))
        o[:, 0] = 1.0 / self.sc
        return o

    def minkowski(self, x, y) -> DiffNode:
        """Minkowski inner product <x, y>_L per row, as an (n, 1) column."""
        x, y = as_node(x), as_node(y)
        sign = np.ones((1, x.cols))
        sign[0, 0] = -1.0
        return T.row_sums(T.mul(T.mul(x, DiffNode(sign)), y))

    def project(self, x) -> DiffNode:
        """Recompute the time coordinate from the spatial part."""
        x = as_node(x)
        s = T.slice_cols(x, 1, x.cols)
        t = T.sqrt(T.add(T.row_sums(T.mul(s, s)),
                         DiffNode(np.full((x.rows, 1), -1.0 / self.c))))
        return T.concat_cols(t, s)

    def _cap(self, vec: DiffNode, arg: DiffNode) -> tuple[DiffNode, DiffNode]:
        """Rescale (vec, arg) so arg <= MAX_TANGENT_ARG; cosh must stay finite."""
        if float(arg.value.max(initial=0.0)) > MAX_TANGENT_ARG:
            log.debug("lorentz exp map clamped a tangent of length %.3g",
                      float(arg.value.max()) / self.sc)
            s = _div(DiffNode(np.full((arg.rows, 1), MAX_TANGENT_ARG)),
                     _clamp_min(arg, MAX_TANGENT_ARG))
            return T.mul(vec, s), T.mul(arg, s)
        return vec, arg

    def expmap0(self, u) -> DiffNode:
        """Lift spatial origin tangents (n, d) to hyperboloid points (n, d+1)."""
        u = as_node(u)
        n = T.row_norms(u)
        u, arg = self._cap(u, T.scale(n, self.sc))
        t = T.scale(T.cosh(arg), 1.0 / self.sc)
        spatial = T.mul(u, _div(T.sinh(arg), arg))
        return self.project(T.concat_cols(t, spatial))

    def logmap0(self, y) -> DiffNode:
        """Spatial part of the origin log map; asinh form, stable near o."""
        y = as_node(y)
        s = T.slice_cols(y, 1, y.cols)
        n = T.row_norms(s)
        arg = T.scale(n, self.sc)
        return T.mul(s, _div(T.asinh(arg), arg))

    def expmap(self, x, v) -> DiffNode:
        """Exponential at x of a full-coordinate tangent v (with <x,v>_L = 0)."""
        x, v = as_node(x), as_node(v)
        n = T.sqrt(_clamp_min(self.minkowski(v, v), 0.0), floor=0.0)
        n = _clamp_min(n, _MIN_DENOM)
        v, arg = self._cap(v, T.scale(n, self.sc))
        out = T.add(T.mul(x, T.cosh(arg)), T.mul(v, _div(T.sinh(arg), arg)))
        return self.project(out)

    def logmap(self, x, y) -> DiffNode:
        x, y = as_node(x), as_node(y)
        beta = T.scale(self.minkowski(x, y), self.c)
        num = T.sub(y, T.mul(beta, x))
        root = T.sqrt(_clamp_min(T.sub(T.mul(beta, beta), _ones_like(beta)), 0.0),
                      floor=0.0)
        coef = _div(T.acosh(beta), _clamp_min(root, _MIN_DENOM))
        return T.mul(num, coef)

    def transport0(self, x, v) -> DiffNode:
        """Parallel transport of a full-coordinate origin tangent to x."""
        x, v = as_node(x), as_node(v)
        o = DiffNode(self.origin(x.cols - 1))
        coef = _div(T.scale(self.minkowski(x, v), -self.c),
                    T.add(_ones_like(T.slice_cols(x, 0, 1)),
                          T.scale(T.slice_cols(x, 0, 1), self.sc)))
        return T.add(v, T.mul(coef, T.add(o, x)))

    def bias_translate(self, x, b) -> DiffNode:
        """x (+)_c b via exp_x(PT_{o->x}(log_o(b)))."""
        x = as_node(x)
        u = self.logmap0(b)
        full = T.concat_cols(DiffNode(np.zeros((u.rows, 1))), u)
        return self.expmap(x, self.transport0(x, full))

    def matvec(self, x, w) -> DiffNode:
        """Hyperbolic linear action on the spatial coordinates."""
        return self.expmap0(T.matmul(self.logmap0(x), w))

    def lift(self, feats) -> DiffNode:
        """Prepend the zero time coordinate and exponentiate at the origin."""
        return self.expmap0(feats)

    def distance(self, x, y) -> DiffNode:
        """Geodesic distance via the difference vector (cancellation-free)."""
        d = T.sub(as_node(x), as_node(y))
        q = T.scale(_clamp_min(self.minkowski(d, d), 0.0), -self.c / 2.0)
        arg = T.sqrt(T.mul(q, T.add(q, DiffNode(np.full((q.rows, 1), 2.0)))), floor=0.0)
        return T.scale(T.asinh(arg), 1.0 / self.sc)

    def tangent0_norm(self, v) -> DiffNode:
        """Riemannian norm of a spatial origin tangent (plain Euclidean norm)."""
        return T.row_norms(as_node(v))

    def tangent_project(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Project v onto the tangent space at x (numpy helper)."""
        x, v = np.atleast_2d(x), np.atleast_2d(v)
        inner = self.minkowski(x, v).value
        return v - self.c * inner * x

    def violation(self, x: np.ndarray) -> float:
        """Largest drift |<x,x>_L - 1/c| over the given rows."""
        x = np.atleast_2d(x)
        inner = self.minkowski(x, x).value
        return float(np.abs(inner - 1.0 / self.c).max(initial=0.0))


class EuclideanFlat:
    """Identity bypass: the same pipeline with the geometry switched off."""

    name = "euclidean"

    def __init__(self, curvature: Curvature | float = -1.0):
        # The curvature is carried only so configs stay uniform.
        self.curvature = curvature if isinstance(curvature, Curvature) else Curvature(curvature)
        self.c = 0.0
        self.sc = 0.0

    def point_dim(self, tangent_dim: int) -> int:
        return tangent_dim

    def project(self, x) -> DiffNode:
        return as_node(x)

    def expmap0(self, v) -> DiffNode:
        return as_node(v)

    def logmap0(self, y) -> DiffNode:
        return as_node(y)

    def expmap(self, x, v) -> DiffNode:
        return T.add(x, v)

    def logmap(self, x, y) -> DiffNode:
        return T.sub(y, x)

    def transport0(self, x, v) -> DiffNode:
        return as_node(v)

    def bias_translate(self, x, b) -> DiffNode:
        return T.add(x, b)

    def matvec(self, x, w) -> DiffNode:
        return T.matmul(x, w)

    def lift(self, feats) -> DiffNode:
        return as_node(feats)

    def distance(self, x, y) -> DiffNode:
        return T.row_norms(T.sub(as_node(x), as_node(y)))

    def tangent0_norm(self, v) -> DiffNode:
        return T.row_norms(as_node(v))

    def violation(self, x: np.ndarray) -> float:
        return 0.0


def get_manifold(space: str, curvature: float = -1.0):
    """Build the manifold named by ``space`` (poincare | lorentz | euclidean)."""
    table = {"poincare": PoincareBall, "lorentz": Lorentz, "euclidean": EuclideanFlat}
    if space not in table:
        raise ContractError(f"unknown space {space!r}; expected one of {sorted(table)}")
    return table[space](curvature)


# ---------------------------------------------------------------------------
# Typed single-point API
# ---------------------------------------------------------------------------


def _as_row(vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64).reshape(1, -1)
    if not np.all(np.isfinite(arr)):
        raise ContractError("coordinates must be finite")
    return arr


@dataclass(frozen=True)
class PoincarePoint:
    """A point of the Poincaré ball; strictly inside ||x||^2 < -1/c."""

    coords: np.ndarray
    curvature: Curvature = Curvature()

    def __post_init__(self):
        row = _as_row(self.coords).ravel()
        if np.dot(row, row) >= -1.0 / self.curvature.c:
            raise ContractError(
                f"point with ||x|| = {np.linalg.norm(row):.6g} is outside the ball "
                f"of radius {self.curvature.radius:.6g}"
            )
        object.__setattr__(self, "coords", row)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def ball(self) -> PoincareBall:
        return PoincareBall(self.curvature)

    @classmethod
    def origin(cls, dim: int, curvature: Curvature = Curvature()) -> "PoincarePoint":
        return cls(np.zeros(dim), curvature)


@dataclass(frozen=True)
class LorentzPoint:
    """A point of the upper hyperboloid sheet; renormalized on construction."""

    coords: np.ndarray
    curvature: Curvature = Curvature()

    def __post_init__(self):
        row = _as_row(self.coords).ravel()
        if row.shape[0] < 2:
            raise ContractError("Lorentz points need at least a time and one space coordinate")
        if row[0] <= 0:
            raise ContractError("Lorentz time coordinate must be positive")
        model = Lorentz(self.curvature)
        inner = model.minkowski(row.reshape(1, -1), row.reshape(1, -1)).value.item()
        if abs(inner - 1.0 / self.curvature.c) > 1e-6:
            raise ContractError(
                f"<x,x>_L = {inner:.8g} is too far from 1/c = {1.0 / self.curvature.c:.8g}"
            )
        fixed = model.project(row.reshape(1, -1)).value.ravel()
        object.__setattr__(self, "coords", fixed)

    @property
    def dim(self) -> int:
        return self.coords.shape[0] - 1

    def model(self) -> Lorentz:
        return Lorentz(self.curvature)

    @classmethod
    def origin(cls, dim: int, curvature: Curvature = Curvature()) -> "LorentzPoint":
        return cls(Lorentz(curvature).origin(dim).ravel(), curvature)


ManifoldPoint = PoincarePoint | LorentzPoint


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector, by default anchored at the origin.

    Poincaré components have the ball dimension; Lorentz components are
    full coordinates (time first) and must be Minkowski-orthogonal to the
    base point.
    """

    components: np.ndarray
    model: str = "poincare"
    base: ManifoldPoint | None = None
    curvature: Curvature = Curvature()

    def __post_init__(self):
        row = _as_row(self.components).ravel()
        object.__setattr__(self, "components", row)
        if self.base is not None:
            object.__setattr__(self, "curvature", self.base.curvature)
        if self.model == "lorentz":
            lor = Lorentz(self.curvature)
            base = self.base.coords if self.base is not None \
                else lor.origin(row.shape[0] - 1).ravel()
            inner = lor.minkowski(base.reshape(1, -1), row.reshape(1, -1)).value.item()
            if abs(inner) > 1e-8 * max(1.0, float(np.linalg.norm(row))):
                raise ContractError(f"<base, v>_L = {inner:.3g}; vector is not tangent")

    def riemannian_norm(self) -> float:
        """Length of the vector under the model metric at its base point."""
        row = self.components.reshape(1, -1)
        if self.model == "poincare":
            ball = PoincareBall(self.curvature)
            base = self.base.coords.reshape(1, -1) if self.base is not None \
                else np.zeros_like(row)
            lam = ball.conformal_factor(base).value.item()
            return lam * float(np.linalg.norm(row))
        if self.model == "lorentz":
            lor = Lorentz(self.curvature)
            return float(np.sqrt(max(lor.minkowski(row, row).value.item(), 0.0)))
        return float(np.linalg.norm(row))


def conformal_factor(x: PoincarePoint) -> float:
    """lambda_x^c = 2 / (1 + c ||x||^2); positive on the open ball."""
    denom = 1.0 + x.curvature.c * float(np.dot(x.coords, x.coords))
    if denom <= 1e-12:
        raise BoundaryError(f"conformal factor denominator {denom:.3g} at the ball boundary")
    return 2.0 / denom


def mobius_add(x: PoincarePoint, y: PoincarePoint) -> PoincarePoint:
    if x.curvature != y.curvature or x.dim != y.dim:
        raise ContractError("mobius_add operands must share curvature and dimension")
    out = x.ball().mobius_add(x.coords.reshape(1, -1), y.coords.reshape(1, -1))
    return PoincarePoint(out.value.ravel(), x.curvature)


def exp_map_poincare(x: PoincarePoint, v: TangentVector) -> PoincarePoint:
    if v.model != "poincare":
        raise ContractError("tangent vector is not a Poincaré tangent")
    if float(np.linalg.norm(v.components)) < 1e-12:
        return x
    ball = x.ball()
    base = x.coords.reshape(1, -1)
    if np.allclose(base, 0.0):
        out = ball.expmap0(v.components.reshape(1, -1))
    else:
        out = ball.expmap(base, v.components.reshape(1, -1))
    return PoincarePoint(out.value.ravel(), x.curvature)


def log_map_poincare(x: PoincarePoint, y: PoincarePoint) -> TangentVector:
    ball = x.ball()
    base = x.coords.reshape(1, -1)
    if np.allclose(base, 0.0):
        out = ball.logmap0(y.coords.reshape(1, -1))
    else:
        out = ball.logmap(base, y.coords.reshape(1, -1))
    return TangentVector(out.value.ravel(), "poincare", x, x.curvature)


def exp_map_lorentz(x: LorentzPoint, v: TangentVector) -> LorentzPoint:
    if v.model != "lorentz":
        raise ContractError("tangent vector is not a Lorentz tangent")
    out = x.model().expmap(x.coords.reshape(1, -1), v.components.reshape(1, -1))
    return LorentzPoint(out.value.ravel(), x.curvature)


def log_map_lorentz(x: LorentzPoint, y: LorentzPoint) -> TangentVector:
    model = x.model()
    base = x.coords.reshape(1, -1)
    if np.allclose(base, model.origin(x.dim)):
        spatial = model.logmap0(y.coords.reshape(1, -1)).value.ravel()
        full = np.concatenate([[0.0], spatial])
    else:
        full = model.logmap(base, y.coords.reshape(1, -1)).value.ravel()
        full = model.tangent_project(base, full.reshape(1, -1)).ravel()
    return TangentVector(full, "lorentz", x, x.curvature)


def lift_euclidean(x, model: str, curvature: float = -1.0) -> ManifoldPoint:
    """Read a Euclidean vector as an origin tangent and lift it.

    Poincaré: exp_o(x).  Lorentz: exp_o((0, x)), the zero time coordinate
    prepended so the vector is tangent at the origin.
    """
    cur = Curvature(curvature)
    row = _as_row(x)
    if model == "poincare":
        return PoincarePoint(PoincareBall(cur).expmap0(row).value.ravel(), cur)
    if model == "lorentz":
        return LorentzPoint(Lorentz(cur).expmap0(row).value.ravel(), cur)
    raise ContractError(f"unknown model {model!r}")


def mobius_matvec(w: np.ndarray, x: ManifoldPoint) -> ManifoldPoint:
    """Apply a linear map through the origin tangent space: exp_o(log_o(x) W)."""
    w = np.asarray(w, dtype=np.float64)
    if isinstance(x, PoincarePoint):
        if w.shape[0] != x.dim:
            raise ShapeError(f"matvec: W has {w.shape[0]} rows, tangent dim is {x.dim}")
        out = x.ball().matvec(x.coords.reshape(1, -1), w)
        return PoincarePoint(out.value.ravel(), x.curvature)
    if w.shape[0] != x.dim:
        raise ShapeError(f"matvec: W has {w.shape[0]} rows, tangent dim is {x.dim}")
    out = x.model().matvec(x.coords.reshape(1, -1), w)
    return LorentzPoint(out.value.ravel(), x.curvature)


def parallel_transport_bias(x: ManifoldPoint, b: ManifoldPoint) -> ManifoldPoint:
    """x (+)_c b via exp_x(PT_{o->x}(log_o(b))), in either model."""
    if type(x) is not type(b) or x.curvature != b.curvature:
        raise ContractError("bias translation operands must share model and curvature")
    if isinstance(x, PoincarePoint):
        out = x.ball().bias_translate(x.coords.reshape(1, -1), b.coords.reshape(1, -1))
        return PoincarePoint(out.value.ravel(), x.curvature)
    out = x.model().bias_translate(x.coords.reshape(1, -1), b.coords.reshape(1, -1))
    return LorentzPoint(out.value.ravel(), x.curvature)


def convert(x: ManifoldPoint, target: str) -> ManifoldPoint:
    """Distance-preserving change of model (and identity within a model)."""
    sc = x.curvature.sqrt_abs
    if target == "poincare":
        if isinstance(x, PoincarePoint):
            return x
        spatial = x.coords[1:]
        return PoincarePoint(spatial / (1.0 + sc * x.coords[0]), x.curvature)
    if target == "lorentz":
        if isinstance(x, LorentzPoint):
            return x
        sq = float(np.dot(x.coords, x.coords))
        den = 1.0 + x.curvature.c * sq
        t = (2.0 - den) / (sc * den)
        return LorentzPoint(np.concatenate([[t], 2.0 * x.coords / den]), x.curvature)
    raise ContractError(f"unknown model {target!r}")


def geodesic_distance(x: ManifoldPoint, y: ManifoldPoint) -> float:
    if type(x) is not type(y) or x.curvature != y.curvature:
        raise ContractError("distance operands must share model and curvature")
    if isinstance(x, PoincarePoint):
        d = x.ball().distance(x.coords.reshape(1, -1), y.coords.reshape(1, -1))
    else:
        d = x.model().distance(x.coords.reshape(1, -1), y.coords.reshape(1, -1))
    return d.value.item()
