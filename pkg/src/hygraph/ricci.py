"""Ollivier–Ricci edge curvature via exact optimal transport.

kappa(i, j) = 1 - W1(m_i, m_j) / d(i, j), where m_v is the lazy random
walk measure (mass ``alpha`` at v, the rest spread uniformly over v's
neighbors), d is hop distance, and W1 is the exact earth-mover distance
between the two measures, solved as a small transportation LP.  The
graph is viewed as undirected; curvature depends only on topology, so
results are cached per edge set.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import tensor as T
from .errors import ContractError
from .tensor import DiffNode

__all__ = ["EdgeCurvature", "ollivier_ricci", "ollivier_ricci_edges", "attention_logits"]


@dataclass(frozen=True)
class EdgeCurvature:
    """kappa per undirected edge; both orientations are stored."""

    alpha: float
    values: dict = field(default_factory=dict)

    def kappa(self, i: int, j: int) -> float:
        try:
            return self.values[(i, j)]
        except KeyError:
            raise ContractError(f"no curvature for edge ({i}, {j})") from None

    def edges_sorted(self):
        """Unique undirected edges (i < j) with their curvature, sorted."""
        return [((i, j), k) for (i, j), k in sorted(self.values.items()) if i < j]


def _neighbor_lists(edges: np.ndarray, n: int) -> list[np.ndarray]:
    und: list[set] = [set() for _ in range(n)]
    for s, d in edges:
        if s != d:
            und[s].add(int(d))
            und[d].add(int(s))
    return [np.array(sorted(nbrs), dtype=np.int64) for nbrs in und]


def _bfs_distances(adj: list[np.ndarray], source: int) -> np.ndarray:
    dist = np.full(len(adj), -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _wasserstein(mu: np.ndarray, nu: np.ndarray, cost: np.ndarray) -> float:
    """Exact W1 between discrete measures (transportation LP).

    Constraints are assembled sparse: hub nodes in k-hop relation graphs
    can have supports of several hundred points, where a dense equality
    matrix would not fit in memory.
    """
    m, k = cost.shape
    if m == 1:
        return float(cost[0] @ nu)  # every unit leaves the single source
    if k == 1:
        return float(cost[:, 0] @ mu)
    row_idx = np.repeat(np.arange(m), k)
    col_idx = m + np.tile(np.arange(k), m)
    var_idx = np.arange(m * k)
    a_eq = sp.csr_matrix(
        (np.ones(2 * m * k), (np.concatenate([row_idx, col_idx]),
                              np.concatenate([var_idx, var_idx]))),
        shape=(m + k, m * k),
    )
    b_eq = np.concatenate([mu, nu])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise ContractError(f"transportation solve failed: {res.message}")
    return float(res.fun)


def _support(node: int, nbrs: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    deg = nbrs.shape[0]
    support = np.concatenate([[node], nbrs])
    mass = np.concatenate([[alpha], np.full(deg, (1.0 - alpha) / deg)])
    return support, mass


_CACHE: dict[tuple, EdgeCurvature] = {}
_CACHE_LIMIT = 32


def ollivier_ricci_edges(edges: np.ndarray, n: int, alpha: float = 0.5) -> EdgeCurvature:
    """Curvature of every (undirected) edge of the given edge set."""
    if not 0.0 <= alpha < 1.0:
        raise ContractError(f"idleness alpha must lie in [0, 1), got {alpha}")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    canon = np.unique(edges, axis=0) if edges.size else edges
    key = (hashlib.sha1(np.ascontiguousarray(canon).tobytes()).hexdigest(),
           int(n), float(alpha))
    cached = _CACHE.get(key)
    if cached is not None:
        return cached

    adj = _neighbor_lists(edges, n)
    pairs = sorted({(min(int(s), int(d)), max(int(s), int(d))) for s, d in edges if s != d})
    dist_cache: dict[int, np.ndarray] = {}

    def distances_from(u: int) -> np.ndarray:
        if u not in dist_cache:
            dist_cache[u] = _bfs_distances(adj, u)
        return dist_cache[u]

    values: dict[tuple[int, int], float] = {}
    for i, j in pairs:
        sup_i, mu = _support(i, adj[i], alpha)
        sup_j, nu = _support(j, adj[j], alpha)
        # Mass shared by both measures stays put under an optimal plan
        # (the cost is a metric), so only the surplus enters the LP.
        masses: dict[int, float] = {}
        for node, m in zip(sup_i, mu):
            masses[int(node)] = masses.get(int(node), 0.0) + m
        for node, m in zip(sup_j, nu):
            masses[int(node)] = masses.get(int(node), 0.0) - m
        src = [(node, m) for node, m in sorted(masses.items()) if m > 1e-15]
        dst = [(node, -m) for node, m in sorted(masses.items()) if m < -1e-15]
        if not src:
            w1 = 0.0
        else:
            cost = np.empty((len(src), len(dst)))
            for a, (u, _) in enumerate(src):
                d_u = distances_from(u)[[v for v, _ in dst]]
                if (d_u < 0).any():
                    raise ContractError(f"supports of edge ({i}, {j}) are disconnected")
                cost[a] = d_u
            w1 = _wasserstein(np.array([m for _, m in src]),
                              np.array([m for _, m in dst]), cost)
        hop = float(distances_from(i)[j])
        kappa = 1.0 - w1 / hop
        values[(i, j)] = kappa
        values[(j, i)] = kappa

    result = EdgeCurvature(alpha=alpha, values=values)
    if len(_CACHE) >= _CACHE_LIMIT:
        _CACHE.pop(next(iter(_CACHE)))
    _CACHE[key] = result
    return result


def ollivier_ricci(g, alpha: float = 0.5) -> EdgeCurvature:
    """Curvature of the dataset's base edges (order-1 relation graph)."""
    return ollivier_ricci_edges(g.edges, g.n, alpha)


def attention_logits(kappa, w1, b1, w2, b2) -> DiffNode:
    """Per-edge attention logit: a 1 -> hidden -> 1 tanh MLP over kappa.

    ``kappa`` is an (E, 1) column; the caller softmaxes the logits over
    each node's neighborhood.
    """
    hidden = T.tanh(T.add(T.matmul(kappa, w1), b1))
    return T.add(T.matmul(hidden, w2), b2)
