"""Sparse neighborhood graphs and degree-normalized spreading operators.

Two constructions: a k-NN graph with Gaussian kernel weights (bandwidth set
from the dataset-average squared distance to each point's k-th neighbor) and
a fixed-bandwidth graph with unit weights on strictly-closer-than-h pairs.
Both produce a symmetric affinity matrix with zero diagonal, from which the
symmetric (D^-1/2 A D^-1/2) or random-walk (D^-1 A) operator is derived.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sparse
from scipy.spatial import cKDTree

from .data import EmbeddedDataset

# Below this size every query runs the O(n^2 d) scan directly; above it a
# KD-tree proposes candidates and only tie-straddling rows are re-scanned.
_BRUTE_FORCE_LIMIT = 2048


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetric sparse affinity structure with zero diagonal."""

    n: int
    adjacency: sparse.csr_matrix  # symmetric, zero diagonal, sorted indices
    kind: str                     # "knn" or "epsilon"
    param: float                  # k for knn, h for epsilon
    sigma2: Optional[float] = None  # Gaussian bandwidth; None for unit weights

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()


@dataclass(frozen=True)
class NormalizedOperator:
    """Spreading operator S over a NeighborGraph; spectrum within [-1, 1]."""

    graph: NeighborGraph
    variant: str  # "symmetric" or "random_walk"
    degrees: np.ndarray = field(repr=False)
    S: sparse.csr_matrix = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n


def _pairwise_sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    # Direct (x - y)^2 accumulation: slower than the inner-product expansion
    # but free of cancellation, so ties are decided on exact differences.
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _knn_brute(X: np.ndarray, k: int):
    """Indices of the k nearest neighbors of every point (self excluded) and
    the corresponding squared distances, ordered by (distance, index)."""
    d2 = _pairwise_sq_dists(X, X)
    np.fill_diagonal(d2, np.inf)
    # argsort is stable, so equal distances fall back to ascending index
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    dist2 = np.take_along_axis(d2, order, axis=1)
    return order, dist2


def _knn_tree(X: np.ndarray, k: int):
    """Same contract as _knn_brute via a KD-tree, with tie repair."""
    n = X.shape[0]
    tree = cKDTree(X)
    # self always ranks among the nearest (distance 0); ask for one extra
    # candidate beyond it so boundary ties are detectable
    m = min(n, k + 2)
    dist, idx = tree.query(X, k=m, workers=-1)
    neighbors = np.empty((n, k), dtype=np.int64)
    dist2 = np.empty((n, k))
    for i in range(n):
        di, ji = dist[i], idx[i]
        keep = ji != i
        if keep.all():
            # duplicates of point i crowded self out; drop one zero-distance
            # entry so the neighbor count stays at m - 1
            keep[np.flatnonzero(di == 0.0)[-1:]] = False
        di, ji = di[keep], ji[keep]
        order = np.lexsort((ji, di))
        di, ji = di[order], ji[order]
        if len(di) <= k or not np.isfinite(di[k]) or di[k - 1] == di[k]:
            # tie (or truncation) at the k-th place: fall back to a full scan
            row = _pairwise_sq_dists(X[i : i + 1], X)[0]
            row[i] = np.inf
            full = np.argsort(row, kind="stable")[:k]
            neighbors[i] = full
            dist2[i] = row[full]
        else:
            neighbors[i] = ji[:k]
            dist2[i] = di[:k] ** 2
    return neighbors, dist2


def _knn_search(X: np.ndarray, k: int):
    if X.shape[0] <= _BRUTE_FORCE_LIMIT:
        return _knn_brute(X, k)
    return _knn_tree(X, k)


def build_knn_graph(dataset: EmbeddedDataset, k: int) -> NeighborGraph:
    """Gaussian-weighted k-NN graph, one-sided kernel symmetrized as (W+Wt)/2."""
    X = dataset.features
    n = X.shape[0]
    if not 1 <= k < n:
        raise GraphError(f"need 1 <= k < n, got k={k}, n={n}")
    neighbors, dist2 = _knn_search(X, k)
    # bandwidth: dataset-average squared distance to the k-th nearest neighbor
    sigma2 = float(dist2[:, k - 1].mean())
    if sigma2 <= 0.0:
        raise GraphError("kernel bandwidth is zero (coincident points)")
    rows = np.repeat(np.arange(n), k)
    w = np.exp(-dist2.ravel() / (2.0 * sigma2))
    W = sparse.coo_matrix((w, (rows, neighbors.ravel())), shape=(n, n)).tocsr()
    A = sparse.csr_matrix((W + W.T) / 2.0)
    A.sort_indices()
    return NeighborGraph(n=n, adjacency=A, kind="knn", param=float(k), sigma2=sigma2)


def build_epsilon_graph(dataset: EmbeddedDataset, h: float) -> NeighborGraph:
    """Unit-weight graph on pairs with ||x_i - x_j|| strictly below h."""
    if h <= 0:
        raise GraphError("bandwidth h must be positive")
    X = dataset.features
    n = X.shape[0]
    if n <= _BRUTE_FORCE_LIMIT:
        d2 = _pairwise_sq_dists(X, X)
        np.fill_diagonal(d2, np.inf)
        ii, jj = np.nonzero(d2 < h * h)
    else:
        tree = cKDTree(X)
        pairs = tree.query_pairs(h, output_type="ndarray")
        if len(pairs):
            # query_pairs includes the radius itself; enforce strict <
            diff = X[pairs[:, 0]] - X[pairs[:, 1]]
            pairs = pairs[np.einsum("ij,ij->i", diff, diff) < h * h]
        if len(pairs):
            ii = np.concatenate([pairs[:, 0], pairs[:, 1]])
            jj = np.concatenate([pairs[:, 1], pairs[:, 0]])
        else:
            ii = jj = np.array([], dtype=np.int64)
    A = sparse.coo_matrix(
        (np.ones(len(ii)), (ii, jj)), shape=(n, n)
    ).tocsr()
    A.sort_indices()
    return NeighborGraph(n=n, adjacency=A, kind="epsilon", param=float(h), sigma2=None)


def graph_from_adjacency(A, kind: str = "custom", param: float = 0.0,
                         sigma2: Optional[float] = None) -> NeighborGraph:
    """Wrap an explicit symmetric zero-diagonal affinity matrix."""
    A = sparse.csr_matrix(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape[1] != n:
        raise GraphError("adjacency must be square")
    if (A - A.T).count_nonzero():
        raise GraphError("adjacency must be exactly symmetric")
    if A.diagonal().any():
        raise GraphError("adjacency diagonal must be zero")
    A.sort_indices()
    return NeighborGraph(n=n, adjacency=A, kind=kind, param=param, sigma2=sigma2)


def normalize(graph: NeighborGraph, variant: str = "symmetric") -> NormalizedOperator:
    """Degree-normalize the affinity matrix; degree-0 rows/columns stay zero."""
    deg = graph.degrees()
    nz = deg > 0
    if variant == "symmetric":
        scale = np.zeros_like(deg)
        scale[nz] = 1.0 / np.sqrt(deg[nz])
        D = sparse.diags(scale)
        S = D @ graph.adjacency @ D
    elif variant == "random_walk":
        scale = np.zeros_like(deg)
        scale[nz] = 1.0 / deg[nz]
        S = sparse.diags(scale) @ graph.adjacency
    else:
        raise GraphError(f"unknown normalization {variant!r}")
    S = sparse.csr_matrix(S)
    S.sort_indices()
    return NormalizedOperator(graph=graph, variant=variant, degrees=deg, S=S)


def save_edge_list(graph: NeighborGraph, path) -> None:
    """Debug dump: one `i,j,weight` line per upper-triangle edge."""
    coo = sparse.triu(graph.adjacency, k=1).tocoo()
    with open(path, "w") as fh:
        fh.write("i,j,weight\n")
        for i, j, w in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i},{j},{float(w)!r}\n")
