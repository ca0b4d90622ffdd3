"""Stage 2: cluster series by their AR coefficient vectors.

Parameter matrices are ``d x n``: one column per series.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ClusterCountError, FormatError, RankError, ShapeError
from .numeric import kmeans, kmeans_exhaustive, seed_sequence, truncated_svd


@dataclass
class ClusterAssignment:
    """Labels in ``0..k-1`` for ``n`` series."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.k = int(self.k)
        if self.labels.ndim != 1:
            raise ShapeError("labels must be a vector")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")

    @property
    def n(self) -> int:
        return self.labels.size

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def clusters(self):
        """``(cluster_id, members)`` for every non-empty cluster, by id."""
        return [(c, self.members(c)) for c in range(self.k) if np.any(self.labels == c)]


def canonical(labels, k: int | None = None) -> ClusterAssignment:
    """Relabel clusters by order of first appearance."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(labels.size, dtype=np.int64)
    for i, lab in enumerate(labels.tolist()):
        out[i] = mapping.setdefault(lab, len(mapping))
    return ClusterAssignment(out, max(k or 0, len(mapping)))


def _check_k(X: np.ndarray, k: int):
    if X.ndim != 2:
        raise ShapeError("parameter matrix must be d x n")
    if k < 1 or k > X.shape[1]:
        raise RankError(f"k={k} outside [1, n={X.shape[1]}]")


def _solve_kmeans(points, k, seed, method, restarts):
    if method == "exhaustive":
        return kmeans_exhaustive(points, k).labels
    return kmeans(points, k, seed=seed, restarts=restarts).labels


def spectral_cluster(X, k: int, seed=0, method: str = "lloyd", restarts: int = 10) -> ClusterAssignment:
    """Truncated-SVD projection then k-means on the columns of ``S V^T``.

    The truncation rank is ``min(k, d, n)``; when ``k`` exceeds the
    dimension the projection keeps every direction and k-means still looks
    for ``k`` groups.
    """
    X = np.asarray(X, dtype=np.float64)
    _check_k(X, k)
    r = min(k, *X.shape)
    _, S, V = truncated_svd(X, r)
    Y = S[:, None] * V.T
    return ClusterAssignment(_solve_kmeans(Y.T, k, seed, method, restarts), k)


def lowrank_cluster(X, k: int, seed=0, method: str = "lloyd", restarts: int = 10) -> ClusterAssignment:
    """k-means on the columns of the rank-k approximant itself."""
    X = np.asarray(X, dtype=np.float64)
    _check_k(X, k)
    r = min(k, *X.shape)
    U, S, V = truncated_svd(X, r)
    Xk = (U * S) @ V.T
    return ClusterAssignment(_solve_kmeans(Xk.T, k, seed, method, restarts), k)


def random_assignment(n: int, k: int, seed=0) -> ClusterAssignment:
    """Uniformly random balanced assignment (sizes differ by at most one)."""
    if k < 1 or k > n:
        raise ClusterCountError(f"k={k} with n={n}")
    rng = np.random.default_rng(seed)
    return ClusterAssignment(rng.permutation(np.arange(n) % k), k)


# ----------------------------------------------------------- KNN graph partition

def knn_indices(points: np.ndarray, K: int, chunk: int = 256) -> np.ndarray:
    """``n x K`` nearest neighbours (self excluded), ties to the lower index."""
    n = points.shape[0]
    out = np.empty((n, K), dtype=np.int64)
    for start in range(0, n, chunk):
        block = points[start : start + chunk]
        diff = block[:, None, :] - points[None, :, :]
        d2 = np.einsum("bnp,bnp->bn", diff, diff)
        rows = np.arange(block.shape[0])
        d2[rows, start + rows] = np.inf
        out[start : start + block.shape[0]] = np.argsort(d2, axis=1, kind="stable")[:, :K]
    return out


def knn_graph(points: np.ndarray, K: int) -> np.ndarray:
    """Unweighted symmetric adjacency: edge if either endpoint lists the other."""
    n = points.shape[0]
    nbrs = knn_indices(points, K)
    A = np.zeros((n, n), dtype=np.float64)
    A[np.repeat(np.arange(n), K), nbrs.ravel()] = 1.0
    return np.maximum(A, A.T)


def _split_component(A: np.ndarray, k: int, seed) -> np.ndarray:
    size = A.shape[0]
    if k == 1:
        return np.zeros(size, dtype=np.int64)
    if k >= size:
        return np.arange(size, dtype=np.int64)
    deg = A.sum(axis=1)
    inv = 1.0 / np.sqrt(deg)
    L = np.eye(size) - inv[:, None] * A * inv[None, :]
    _, vecs = np.linalg.eigh(L)
    emb = vecs[:, :k]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.where(norms == 0, 1.0, norms)
    return kmeans(emb, k, seed=seed, restarts=10).labels


def _allocate(sizes: list, k: int) -> list:
    alloc = [1] * len(sizes)
    for _ in range(k - len(sizes)):
        best = max(
            (i for i in range(len(sizes)) if alloc[i] < sizes[i]),
            key=lambda i: (sizes[i] / alloc[i], -i),
        )
        alloc[best] += 1
    return alloc


def _rebalance(labels: np.ndarray, A: np.ndarray, points: np.ndarray, k: int, cap: int) -> np.ndarray:
    labels = labels.copy()
    sizes = np.bincount(labels, minlength=k)
    while sizes.max() > cap:
        src = int(np.argmax(sizes))
        inside = np.flatnonzero(labels == src)
        # edges from each member of src to every cluster
        links = np.zeros((inside.size, k))
        for c in range(k):
            links[:, c] = A[np.ix_(inside, np.flatnonzero(labels == c))].sum(axis=1)
        open_targets = np.flatnonzero(sizes < cap)
        best = None
        for row, v in enumerate(inside):
            for c in open_targets:
                if links[row, c] == 0:
                    continue
                key = (-(links[row, c] - links[row, src]), sizes[c], int(v), int(c))
                if best is None or key < best[0]:
                    best = (key, v, c)
        if best is None:
            centroid = points[inside].mean(axis=0)
            far = inside[np.argmax(np.sum((points[inside] - centroid) ** 2, axis=1))]
            tgt = int(open_targets[np.argmin(sizes[open_targets])])
            best = (None, far, tgt)
        _, v, c = best
        labels[v] = c
        sizes[src] -= 1
        sizes[c] += 1
    return labels


def knn_graph_partition(
    X, k: int, K: int = 11, seed=0, balanced: bool = True, slack: float = 1.3
) -> ClusterAssignment:
    """Partition the KNN graph of the parameter columns into ``k`` clusters.

    Each connected component is split with a normalized-Laplacian spectral
    embedding plus k-means; surplus components are merged smallest-first.
    With ``balanced`` the largest cluster is shrunk to at most
    ``ceil(slack * n / k)`` members by moving boundary vertices.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("parameter matrix must be d x n")
    points = X.T
    n = points.shape[0]
    if k < 1 or k > n:
        raise ClusterCountError(f"k={k} with n={n}")
    if not 1 <= K < n:
        raise ValueError(f"neighbour count K={K} must satisfy 1 <= K < n={n}")
    A = knn_graph(points, K)
    n_comp, comp = connected_components(csr_matrix(A), directed=False)
    groups = [np.flatnonzero(comp == c) for c in range(n_comp)]
    groups.sort(key=lambda g: g[0])

    labels = np.empty(n, dtype=np.int64)
    if len(groups) >= k:
        while len(groups) > k:
            order = sorted(range(len(groups)), key=lambda i: (groups[i].size, groups[i][0]))
            a, b = order[0], order[1]
            merged = np.sort(np.concatenate([groups[a], groups[b]]))
            groups = [g for i, g in enumerate(groups) if i not in (a, b)] + [merged]
            groups.sort(key=lambda g: g[0])
        for c, g in enumerate(groups):
            labels[g] = c
    else:
        alloc = _allocate([g.size for g in groups], k)
        seeds = seed_sequence(seed).spawn(len(groups))
        offset = 0
        for g, kc, s in zip(groups, alloc, seeds):
            labels[g] = offset + _split_component(A[np.ix_(g, g)], kc, s)
            offset += kc
    if balanced:
        labels = _rebalance(labels, A, points, k, math.ceil(slack * n / k))
    return canonical(labels, k)


# ---------------------------------------------------------------- evaluation

def _as_labels(c):
    return c.labels if isinstance(c, ClusterAssignment) else np.asarray(c)


def _confusion(c, c_ref):
    a = _as_labels(c)
    b = _as_labels(c_ref)
    if a.shape != b.shape:
        raise ShapeError(f"assignments of length {a.size} and {b.size}")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    K = max(ua.size, ub.size)
    conf = np.zeros((K, K), dtype=np.int64)
    np.add.at(conf, (ia, ib), 1)
    return conf


def clustering_error(c, c_ref, method: str = "auto") -> int:
    """Fewest label disagreements over all relabellings of ``c_ref``.

    ``auto`` enumerates every bijection for up to 8 labels and uses the
    Hungarian method on the confusion matrix beyond that; both are exact.
    """
    conf = _confusion(c, c_ref)
    K = conf.shape[0]
    n = int(conf.sum())
    if method == "exhaustive" or (method == "auto" and K <= 8):
        perms = np.array(list(itertools.permutations(range(K))))
        agree = conf[perms, np.arange(K)].sum(axis=1).max()
    else:
        r, col = linear_sum_assignment(conf, maximize=True)
        agree = conf[r, col].sum()
    return int(n - agree)


# ----------------------------------------------------------------------- I/O

def write_assignment(assignment: ClusterAssignment, series_ids, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series_id", "cluster"])
        for sid, lab in zip(series_ids, assignment.labels.tolist()):
            w.writerow([sid, lab])


def read_assignment(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["series_id", "cluster"]:
        raise FormatError(f"{path}: expected header series_id,cluster")
    ids = [r[0] for r in rows[1:]]
    labels = np.array([int(r[1]) for r in rows[1:]], dtype=np.int64)
    return ids, ClusterAssignment(labels, int(labels.max()) + 1 if labels.size else 0)
