"""Dense linear-algebra building blocks shared by every stage."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import kernels
from .errors import ClusterCountError, RankError, ShapeError, SingularDesignError, WeightError


@dataclass
class LinearFit:
    """Least-squares solution.

    ``coefficients`` has shape ``(p,)`` for a single target, ``(p, r)`` for
    ``r`` targets sharing one design; ``residual_norm`` follows suit.
    """

    coefficients: np.ndarray
    residual_norm: np.ndarray | float
    rank_deficient: bool


def _rank(design: np.ndarray) -> int:
    s = np.linalg.svd(design, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = s[0] * max(design.shape) * np.finfo(float).eps
    return int(np.sum(s > tol))


def solve_least_squares(design, targets, ridge: float = 0.0) -> LinearFit:
    """Minimize ``(1/N) ||X theta - y||^2 + ridge * ||theta||^2``.

    Targets may be a matrix, in which case every column is an independent
    problem on the same design (solved from a single factorization).
    ``ridge > 0`` solves the augmented system ``[X; sqrt(N*ridge) I]`` by QR.
    At ``ridge = 0`` a full-rank design is solved by QR and a rank-deficient
    one by the SVD minimum-norm solution.
    """
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"design must be 2-D, got shape {X.shape}")
    N, p = X.shape
    if N < 1 or p < 1:
        raise ShapeError(f"empty design {X.shape}")
    if y.ndim not in (1, 2) or y.shape[0] != N:
        raise ShapeError(f"targets {y.shape} do not match design {X.shape}")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    single = y.ndim == 1
    Y = y[:, None] if single else y

    deficient = N < p or _rank(X) < p
    if ridge > 0:
        A = np.vstack([X, np.sqrt(N * ridge) * np.eye(p)])
        B = np.vstack([Y, np.zeros((p, Y.shape[1]))])
        q, r = np.linalg.qr(A)
        coef = scipy.linalg.solve_triangular(r, q.T @ B)
    elif deficient:
        coef = np.linalg.pinv(X) @ Y
    else:
        q, r = np.linalg.qr(X)
        coef = scipy.linalg.solve_triangular(r, q.T @ Y)
    resid = np.linalg.norm(X @ coef - Y, axis=0)
    if single:
        return LinearFit(coef[:, 0], float(resid[0]), deficient)
    return LinearFit(coef, resid, deficient)


def truncated_svd(M, k: int):
    """Top-``k`` singular triplets ``(U, S, V)`` with ``M ~ U diag(S) V^T``.

    Signs are fixed so the largest-magnitude entry of each column of ``U`` is
    positive, which makes the output deterministic.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ShapeError("matrix must be 2-D")
    if not 1 <= k <= min(M.shape):
        raise RankError(f"k={k} outside [1, {min(M.shape)}]")
    U, S, Vt = np.linalg.svd(M, full_matrices=False)
    U, S, V = U[:, :k], S[:k], Vt[:k].T
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    return U * signs, S.copy(), V * signs


class KMeansResult(NamedTuple):
    labels: np.ndarray
    centers: np.ndarray
    objective: float


def kmeans_objective(points, labels, centers) -> float:
    points = np.asarray(points, dtype=np.float64)
    diff = points - np.asarray(centers)[np.asarray(labels)]
    return float(np.einsum("np,np->", diff, diff) / (2.0 * points.shape[0]))


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first center uniform, then proportional to D^2."""
    n = points.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((points - points[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass on existing centers; take the next unused point
            unused = np.setdiff1d(np.arange(n), idx)
            nxt = int(unused[0])
        else:
            nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[idx].copy()


def seed_sequence(seed) -> np.random.SeedSequence:
    """A fresh ``SeedSequence`` from an int, ``None`` or another sequence.

    Copying an existing sequence resets its spawn counter, so spawning from
    the same input always yields the same children.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def _restart_run(points, k, seed_seq, max_iters):
    rng = np.random.default_rng(seed_seq)
    init = kmeans_plusplus(points, k, rng)
    labels, centers, history, _ = kernels.lloyd(points, init, max_iters)
    return labels, centers, float(history[-1])


def kmeans(points, k: int, seed=0, restarts: int = 10, max_iters: int = 300, workers: int = 1) -> KMeansResult:
    """Best of ``restarts`` Lloyd runs with k-means++ seeding.

    ``points`` is ``n x p`` (one point per row). Restart ``r`` draws its
    seeding from the ``r``-th child of ``SeedSequence(seed)``, so the result
    does not depend on ``workers``. Ties in the objective go to the lowest
    restart index.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError("points must be an n x p matrix")
    n = points.shape[0]
    if k < 1 or k > n:
        raise ClusterCountError(f"k={k} with only {n} points")
    children = seed_sequence(seed).spawn(restarts)
    if workers > 1 and restarts > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            runs = list(ex.map(lambda s: _restart_run(points, k, s, max_iters), children))
    else:
        runs = [_restart_run(points, k, s, max_iters) for s in children]
    best = min(range(len(runs)), key=lambda r: (runs[r][2], r))
    labels, centers, obj = runs[best]
    return KMeansResult(labels, centers, obj)


def _partitions(n: int, k: int):
    """Restricted growth strings of length n using exactly k labels."""
    def rec(prefix, used):
        i = len(prefix)
        if i == n:
            if used == k:
                yield list(prefix)
            return
        if k - used > n - i:
            return
        for lab in range(min(used + 1, k)):
            prefix.append(lab)
            yield from rec(prefix, max(used, lab + 1))
            prefix.pop()
    yield from rec([], 0)


def kmeans_exhaustive(points, k: int) -> KMeansResult:
    """Exact k-means by enumerating every partition into k groups (small n)."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1 or k > n:
        raise ClusterCountError(f"k={k} with only {n} points")
    best = None
    for labels in _partitions(n, k):
        labels = np.asarray(labels)
        centers = np.stack([points[labels == c].mean(axis=0) for c in range(k)])
        obj = kmeans_objective(points, labels, centers)
        if best is None or obj < best.objective - 1e-12:
            best = KMeansResult(labels, centers, obj)
    return best


def empirical_covariance(samples, weights=None) -> np.ndarray:
    """``(1/T) sum_t w_t^2 x_t x_t^T`` over the rows ``x_t`` of ``samples``."""
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    T = X.shape[0]
    if T < 1:
        raise ShapeError("need at least one sample")
    if weights is None:
        return X.T @ X / T
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (T,):
        raise ShapeError(f"{w.shape[0] if w.ndim else 1} weights for {T} samples")
    if (w < 0).any():
        raise WeightError("weights must be nonnegative")
    Xw = X * w[:, None]
    return Xw.T @ Xw / T


def whiten_design(design) -> np.ndarray:
    """Return ``X C^{-1/2}`` so that ``(1/N) X'^T X' = I``."""
    X = np.asarray(design, dtype=np.float64)
    N, p = X.shape
    if N < p:
        raise SingularDesignError(f"cannot whiten {N} samples in {p} dimensions")
    C = empirical_covariance(X)
    evals, evecs = np.linalg.eigh(C)
    if evals[0] <= max(evals[-1], 1.0) * 1e-12:
        raise SingularDesignError("design covariance is singular")
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    return X @ inv_sqrt
