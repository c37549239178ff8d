"""Dense float64 matrices with reverse-mode automatic differentiation.

Every trainable quantity in the package is a :class:`DiffNode`: a 2-D
float64 array plus an adjoint of the same shape and a record of the
producing operation.  The differentiation record is dynamic — it is
rebuilt on every forward pass and torn down with the nodes — so there is
no global tape and no reset step.  ``backward`` walks the record once,
in reverse topological order, accumulating adjoints.

Conventions: everything is a matrix.  Scalars are (1, 1), vectors are
single rows (1, d) or single columns (n, 1).  Binary elementwise ops
broadcast a (1, d) row or an (n, 1) column against an (n, d) operand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, ShapeError

__all__ = [
    "DiffNode",
    "SparsePattern",
    "dense",
    "as_node",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "div",
    "clamp_min",
    "neg",
    "relu",
    "tanh",
    "sigmoid",
    "exp",
    "log",
    "sqrt",
    "softplus",
    "artanh",
    "asinh",
    "acosh",
    "cosh",
    "sinh",
    "row_norms",
    "row_sums",
    "sum_all",
    "mean_of_rows",
    "transpose",
    "concat_cols",
    "slice_cols",
    "softmax_rows",
    "masked_cross_entropy",
    "neighbor_softmax",
    "weighted_neighbor_sum",
    "backward",
]

_MIN_NORM = 1e-15
_ATANH_EPS = 1e-12
_ACOSH_EPS = 1e-12


def dense(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Validate ``data`` as a finite 2-D float64 matrix.

    1-D input becomes a single row; a bare scalar becomes (1, 1).
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"dense data must be at most 2-D, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise ShapeError(f"expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ShapeError(f"expected {cols} cols, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("dense data contains non-finite values")
    return arr


class DiffNode:
    """A value in the differentiation record.

    Attributes
    ----------
    value : np.ndarray
        The forward value, a 2-D float64 matrix.
    adjoint : np.ndarray
        d(loss)/d(value), same shape as ``value``.  Zero until a
        backward pass reaches this node.
    op : str
        Name of the producing operation (``"leaf"`` for inputs).
    parents : tuple[DiffNode, ...]
        Inputs of the producing operation.
    """

    __slots__ = ("value", "_adj", "parents", "op", "_backprop", "_done")

    def __init__(self, value, parents: tuple["DiffNode", ...] = (), op: str = "leaf",
                 backprop=None):
        self.value = value if isinstance(value, np.ndarray) and value.dtype == np.float64 \
            and value.ndim == 2 else dense(value)
        self._adj: np.ndarray | None = None
        self.parents = parents
        self.op = op
        self._backprop = backprop
        self._done = False

    @property
    def adjoint(self) -> np.ndarray:
        if self._adj is None:
            self._adj = np.zeros_like(self.value)
        return self._adj

    def accumulate(self, g: np.ndarray) -> None:
        if self._adj is None:
            self._adj = np.zeros_like(self.value)
        self._adj += g

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def __repr__(self) -> str:
        return f"DiffNode(op={self.op!r}, shape={self.value.shape})"

    # Operator sugar; the named functions below do the work.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)


def as_node(x) -> DiffNode:
    """Wrap arrays (or nested lists) as constant leaves; pass nodes through."""
    if isinstance(x, DiffNode):
        return x
    return DiffNode(dense(x))


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    out = g
    if shape[0] == 1 and g.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    if out.shape != shape:
        raise ShapeError(f"cannot reduce gradient {g.shape} to {shape}")
    return out


def _binary_shapes(a: DiffNode, b: DiffNode, op: str) -> None:
    sa, sb = a.shape, b.shape
    ok = all(sa[i] == sb[i] or sa[i] == 1 or sb[i] == 1 for i in (0, 1))
    if not ok:
        raise ShapeError(f"{op}: incompatible shapes {sa} and {sb}")


def matmul(a, b) -> DiffNode:
    """Matrix product with the standard reverse rules."""
    a, b = as_node(a), as_node(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    out = DiffNode(a.value @ b.value, (a, b), "matmul")

    def backprop(g):
        a.accumulate(g @ b.value.T)
        b.accumulate(a.value.T @ g)

    out._backprop = backprop
    return out


def add(a, b) -> DiffNode:
    a, b = as_node(a), as_node(b)
    _binary_shapes(a, b, "add")
    out = DiffNode(a.value + b.value, (a, b), "add")

    def backprop(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(g, b.shape))

    out._backprop = backprop
    return out


def sub(a, b) -> DiffNode:
    a, b = as_node(a), as_node(b)
    _binary_shapes(a, b, "sub")
    out = DiffNode(a.value - b.value, (a, b), "sub")

    def backprop(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(-g, b.shape))

    out._backprop = backprop
    return out


def mul(a, b) -> DiffNode:
    """Elementwise (Hadamard) product with row/column broadcasting."""
    a, b = as_node(a), as_node(b)
    _binary_shapes(a, b, "mul")
    out = DiffNode(a.value * b.value, (a, b), "mul")

    def backprop(g):
        a.accumulate(_unbroadcast(g * b.value, a.shape))
        b.accumulate(_unbroadcast(g * a.value, b.shape))

    out._backprop = backprop
    return out


def scale(a, s: float) -> DiffNode:
    a = as_node(a)
    s = float(s)
    out = DiffNode(a.value * s, (a,), "scale")
    out._backprop = lambda g: a.accumulate(g * s)
    return out


def div(a, b) -> DiffNode:
    """Elementwise a / b with row/column broadcasting; caller keeps b away from 0."""
    a, b = as_node(a), as_node(b)
    _binary_shapes(a, b, "div")
    out = DiffNode(a.value / b.value, (a, b), "div")

    def backprop(g):
        a.accumulate(_unbroadcast(g / b.value, a.shape))
        b.accumulate(_unbroadcast(-g * out.value / b.value, b.shape))

    out._backprop = backprop
    return out


def clamp_min(a, floor: float) -> DiffNode:
    """max(a, floor); gradient passes through only where a > floor."""
    a = as_node(a)
    floor = float(floor)
    out = DiffNode(np.maximum(a.value, floor), (a,), "clamp_min")
    out._backprop = lambda g: a.accumulate(g * (a.value > floor).astype(np.float64))
    return out


def neg(a) -> DiffNode:
    return scale(a, -1.0)


def _pointwise(a, name: str, fn, deriv) -> DiffNode:
    """Unary pointwise op; ``deriv`` maps (input, output) to d out/d in."""
    a = as_node(a)
    val = fn(a.value)
    out = DiffNode(val, (a,), name)
    out._backprop = lambda g: a.accumulate(g * deriv(a.value, val))
    return out


def relu(a) -> DiffNode:
    return _pointwise(a, "relu", lambda x: np.maximum(x, 0.0),
                      lambda x, y: (x > 0.0).astype(np.float64))


def tanh(a) -> DiffNode:
    return _pointwise(a, "tanh", np.tanh, lambda x, y: 1.0 - y * y)


def sigmoid(a) -> DiffNode:
    def fn(x):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    return _pointwise(a, "sigmoid", fn, lambda x, y: y * (1.0 - y))


def exp(a) -> DiffNode:
    return _pointwise(a, "exp", np.exp, lambda x, y: y)


def log(a, floor: float = 1e-300) -> DiffNode:
    """Natural log with a tiny floor so exact zeros do not produce -inf."""
    a = as_node(a)
    clipped = np.maximum(a.value, floor)
    out = DiffNode(np.log(clipped), (a,), "log")
    out._backprop = lambda g: a.accumulate(g / clipped)
    return out


def sqrt(a, floor: float = 0.0) -> DiffNode:
    a = as_node(a)
    clipped = np.maximum(a.value, floor)
    val = np.sqrt(clipped)
    out = DiffNode(val, (a,), "sqrt")
    out._backprop = lambda g: a.accumulate(g * 0.5 / np.maximum(val, _MIN_NORM))
    return out


def softplus(a) -> DiffNode:
    """log(1 + e^x), computed without overflow; derivative is sigmoid(x)."""

    def fn(x):
        return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def deriv(x, y):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    return _pointwise(a, "softplus", fn, deriv)


def artanh(a) -> DiffNode:
    """atanh with the argument clamped to (-1, 1); singular at the clamp."""
    a = as_node(a)
    clipped = np.clip(a.value, -1.0 + _ATANH_EPS, 1.0 - _ATANH_EPS)
    out = DiffNode(np.arctanh(clipped), (a,), "artanh")
    out._backprop = lambda g: a.accumulate(g / (1.0 - clipped * clipped))
    return out


def asinh(a) -> DiffNode:
    return _pointwise(a, "asinh", np.arcsinh,
                      lambda x, y: 1.0 / np.sqrt(1.0 + x * x))


def acosh(a) -> DiffNode:
    """acosh with the argument clamped to >= 1 + eps against round-off."""
    a = as_node(a)
    clipped = np.maximum(a.value, 1.0 + _ACOSH_EPS)
    out = DiffNode(np.arccosh(clipped), (a,), "acosh")
    out._backprop = lambda g: a.accumulate(g / np.sqrt(clipped * clipped - 1.0))
    return out


def cosh(a) -> DiffNode:
    return _pointwise(a, "cosh", np.cosh, lambda x, y: np.sinh(x))


def sinh(a) -> DiffNode:
    return _pointwise(a, "sinh", np.sinh, lambda x, y: np.cosh(x))


def row_norms(a, min_norm: float = _MIN_NORM) -> DiffNode:
    """Euclidean norm of each row as an (n, 1) column, clamped away from 0.

    The clamp keeps downstream divisions finite; the gradient of a clamped
    (near-zero) row is correspondingly near zero rather than singular.
    """
    a = as_node(a)
    raw = np.linalg.norm(a.value, axis=1, keepdims=True)
    val = np.maximum(raw, min_norm)
    out = DiffNode(val, (a,), "row_norms")
    out._backprop = lambda g: a.accumulate(g * a.value / val)
    return out


def row_sums(a) -> DiffNode:
    a = as_node(a)
    out = DiffNode(a.value.sum(axis=1, keepdims=True), (a,), "row_sums")
    out._backprop = lambda g: a.accumulate(np.broadcast_to(g, a.shape).copy())
    return out


def sum_all(a) -> DiffNode:
    a = as_node(a)
    out = DiffNode(np.array([[a.value.sum()]]), (a,), "sum_all")
    out._backprop = lambda g: a.accumulate(np.full_like(a.value, g[0, 0]))
    return out


def mean_of_rows(a) -> DiffNode:
    """Average the rows of (n, d) into a single (1, d) row."""
    a = as_node(a)
    n = a.rows
    out = DiffNode(a.value.mean(axis=0, keepdims=True), (a,), "mean_of_rows")
    out._backprop = lambda g: a.accumulate(np.broadcast_to(g / n, a.shape).copy())
    return out


def transpose(a) -> DiffNode:
    a = as_node(a)
    out = DiffNode(a.value.T.copy(), (a,), "transpose")
    out._backprop = lambda g: a.accumulate(g.T)
    return out


def concat_cols(a, b) -> DiffNode:
    a, b = as_node(a), as_node(b)
    if a.rows != b.rows:
        raise ShapeError(f"concat_cols: row counts differ, {a.shape} vs {b.shape}")
    out = DiffNode(np.hstack([a.value, b.value]), (a, b), "concat_cols")

    def backprop(g):
        a.accumulate(g[:, : a.cols])
        b.accumulate(g[:, a.cols:])

    out._backprop = backprop
    return out


def slice_cols(a, lo: int, hi: int) -> DiffNode:
    a = as_node(a)
    if not (0 <= lo < hi <= a.cols):
        raise ShapeError(f"slice_cols: [{lo}, {hi}) out of range for {a.shape}")
    out = DiffNode(a.value[:, lo:hi].copy(), (a,), "slice_cols")

    def backprop(g):
        full = np.zeros_like(a.value)
        full[:, lo:hi] = g
        a.accumulate(full)

    out._backprop = backprop
    return out


def softmax_rows(a) -> DiffNode:
    """Row-wise softmax with max subtraction; each output row sums to 1."""
    a = as_node(a)
    if a.value.size == 0:
        raise ContractError("softmax_rows: empty input")
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    val = e / e.sum(axis=1, keepdims=True)
    out = DiffNode(val, (a,), "softmax_rows")

    def backprop(g):
        inner = (g * val).sum(axis=1, keepdims=True)
        a.accumulate(val * (g - inner))

    out._backprop = backprop
    return out


def masked_cross_entropy(logits, labels: np.ndarray, mask: np.ndarray) -> DiffNode:
    """Mean cross-entropy of row-softmax(logits) against integer labels.

    Only rows where ``mask`` is True contribute.  Fused with the stable
    log-softmax so extreme logits neither overflow nor silently saturate
    the gradient.
    """
    logits = as_node(logits)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    mask = np.asarray(mask, dtype=bool).ravel()
    if labels.shape[0] != logits.rows or mask.shape[0] != logits.rows:
        raise ShapeError("masked_cross_entropy: labels/mask length must equal row count")
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ContractError("masked_cross_entropy: empty mask")
    z = logits.value[idx]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    val = -logp[np.arange(idx.size), labels[idx]].mean()
    out = DiffNode(np.array([[val]]), (logits,), "masked_cross_entropy")

    def backprop(g):
        p = np.exp(logp)
        p[np.arange(idx.size), labels[idx]] -= 1.0
        full = np.zeros_like(logits.value)
        full[idx] = p * (g[0, 0] / idx.size)
        logits.accumulate(full)

    out._backprop = backprop
    return out


@dataclass(frozen=True)
class SparsePattern:
    """Fixed sparsity pattern of an aggregation matrix, CSR-ordered.

    Edge e carries a message from column node ``cols[e]`` to row node
    ``rows[e]``; edges are stored grouped by row.  The transposed pattern
    (``t_*``) is precomputed so backward passes avoid per-step sorting.
    """

    shape: tuple[int, int]
    indptr: np.ndarray      # (n_rows + 1,)
    cols: np.ndarray        # (E,) column index per edge
    rows: np.ndarray        # (E,) row index per edge
    seg_starts: np.ndarray  # (G,) first edge of each nonempty row
    edge_seg: np.ndarray    # (E,) nonempty-row ordinal per edge
    t_indptr: np.ndarray
    t_cols: np.ndarray
    t_perm: np.ndarray      # data permutation mapping CSR order to CSC order

    @property
    def nnz(self) -> int:
        return int(self.cols.shape[0])

    @classmethod
    def from_csr(cls, m: sp.csr_matrix) -> "SparsePattern":
        m = m.tocsr().astype(np.float64)
        m.sort_indices()
        indptr = m.indptr.copy()
        cols = m.indices.astype(np.int64)
        counts = np.diff(indptr)
        rows = np.repeat(np.arange(m.shape[0], dtype=np.int64), counts)
        nonempty = np.flatnonzero(counts > 0)
        seg_starts = indptr[nonempty]
        edge_seg = np.repeat(np.arange(nonempty.size, dtype=np.int64), counts[nonempty])
        tagged = sp.csr_matrix(
            (np.arange(m.nnz, dtype=np.float64), m.indices, m.indptr), shape=m.shape
        )
        t = tagged.T.tocsr()
        t.sort_indices()
        return cls(
            shape=(int(m.shape[0]), int(m.shape[1])),
            indptr=indptr,
            cols=cols,
            rows=rows,
            seg_starts=seg_starts,
            edge_seg=edge_seg,
            t_indptr=t.indptr.copy(),
            t_cols=t.indices.astype(np.int64),
            t_perm=t.data.astype(np.int64),
        )


def neighbor_softmax(logits, pattern: SparsePattern) -> DiffNode:
    """Softmax of per-edge logits within each row's edge group.

    ``logits`` is (E, 1) in the pattern's CSR edge order.  For every row
    with at least one edge the returned weights sum to 1.
    """
    logits = as_node(logits)
    if logits.shape != (pattern.nnz, 1):
        raise ShapeError(
            f"neighbor_softmax: expected ({pattern.nnz}, 1) logits, got {logits.shape}"
        )
    if pattern.nnz == 0:
        return DiffNode(np.zeros((0, 1)), (logits,), "neighbor_softmax")
    flat = logits.value.ravel()
    seg_max = np.maximum.reduceat(flat, pattern.seg_starts)
    e = np.exp(flat - seg_max[pattern.edge_seg])
    seg_sum = np.add.reduceat(e, pattern.seg_starts)
    y = e / seg_sum[pattern.edge_seg]
    out = DiffNode(y.reshape(-1, 1), (logits,), "neighbor_softmax")

    def backprop(g):
        t = (y * g.ravel())
        seg_dot = np.add.reduceat(t, pattern.seg_starts)
        dl = t - y * seg_dot[pattern.edge_seg]
        logits.accumulate(dl.reshape(-1, 1))

    out._backprop = backprop
    return out


def weighted_neighbor_sum(weights, feats, pattern: SparsePattern) -> DiffNode:
    """out[i] = sum over edges (i <- j) of weights[e] * feats[j].

    ``weights`` is (E, 1) in CSR edge order, ``feats`` is (n_cols, d);
    rows of the output with no edges are zero.
    """
    weights, feats = as_node(weights), as_node(feats)
    if weights.shape != (pattern.nnz, 1):
        raise ShapeError(
            f"weighted_neighbor_sum: expected ({pattern.nnz}, 1) weights, got {weights.shape}"
        )
    if feats.rows != pattern.shape[1]:
        raise ShapeError(
            f"weighted_neighbor_sum: feats rows {feats.rows} != pattern cols {pattern.shape[1]}"
        )
    if pattern.nnz == 0:
        out = DiffNode(np.zeros((pattern.shape[0], feats.cols)), (weights, feats),
                       "weighted_neighbor_sum")
        out._backprop = lambda g: None
        return out
    mat = sp.csr_matrix((weights.value.ravel(), pattern.cols, pattern.indptr),
                        shape=pattern.shape)
    out = DiffNode(np.asarray(mat @ feats.value), (weights, feats), "weighted_neighbor_sum")

    def backprop(g):
        dw = (g[pattern.rows] * feats.value[pattern.cols]).sum(axis=1, keepdims=True)
        weights.accumulate(dw)
        mat_t = sp.csr_matrix(
            (weights.value.ravel()[pattern.t_perm], pattern.t_cols, pattern.t_indptr),
            shape=(pattern.shape[1], pattern.shape[0]),
        )
        feats.accumulate(np.asarray(mat_t @ g))

    out._backprop = backprop
    return out


def backward(loss: DiffNode) -> None:
    """Accumulate d(loss)/d(node) into every node reachable from ``loss``.

    ``loss`` must be scalar (1, 1).  Calling backward twice on the same
    record is an error; rebuild the forward pass instead.
    """
    if not isinstance(loss, DiffNode):
        raise ContractError("backward: loss must be a DiffNode")
    if loss.shape != (1, 1):
        raise ContractError(f"backward: loss must be scalar (1, 1), got {loss.shape}")
    if loss._done:
        raise ContractError("backward: already ran on this record; rebuild the forward pass")
    loss._done = True

    order: list[DiffNode] = []
    seen: set[int] = set()
    stack: list[tuple[DiffNode, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    loss.accumulate(np.ones((1, 1)))
    for node in reversed(order):
        if node._backprop is not None and node._adj is not None:
            node._backprop(node._adj)
