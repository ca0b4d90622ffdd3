"""Pure numpy implementations of the hot loops.

Semantics must match ``_ckernels.pyx`` exactly (up to floating point
summation order). See ``clusterconquer.kernels`` for the contracts.
"""
import numpy as np


def _assign(points, centers):
    # (n, k) squared distances; argmin keeps the lowest index on ties
    diff = points[:, None, :] - centers[None, :, :]
    d2 = np.einsum("nkp,nkp->nk", diff, diff)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(points.shape[0]), labels]


def _repair_empty(labels, dists, k):
    counts = np.bincount(labels, minlength=k)
    for c in range(k):
        if counts[c] > 0:
            continue
        candidates = np.flatnonzero(counts[labels] > 1)
        # farthest point from its own center; lowest index on ties
        i = candidates[np.argmax(dists[candidates])]
        counts[labels[i]] -= 1
        labels[i] = c
        dists[i] = 0.0
        counts[c] = 1


def _means(points, labels, k):
    p = points.shape[1]
    sums = np.zeros((k, p))
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k).astype(float)
    return sums / counts[:, None]


def lloyd(points, centers, max_iters):
    points = np.ascontiguousarray(points, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64, copy=True)
    n = points.shape[0]
    k = centers.shape[0]
    labels, dists = _assign(points, centers)
    history = [dists.sum() / (2.0 * n)]
    n_iter = 0
    while n_iter < max_iters:
        n_iter += 1
        _repair_empty(labels, dists, k)
        centers = _means(points, labels, k)
        diff = points - centers[labels]
        history.append(np.einsum("np,np->", diff, diff) / (2.0 * n))
        new_labels, new_dists = _assign(points, centers)
        if np.array_equal(new_labels, labels):
            break
        labels, dists = new_labels, new_dists
        if n_iter == max_iters:
            history.append(dists.sum() / (2.0 * n))
    return labels.astype(np.int64), centers, np.asarray(history), n_iter


def var_recursion(coef, buf, lags, start, stop, noise, lo, hi, clip):
    m = buf.shape[0]
    lags = np.asarray(lags, dtype=np.int64)
    for t in range(start, stop):
        lagged = buf[:, t - lags].reshape(m * lags.size)
        val = coef @ lagged
        if noise is not None:
            val = val + noise[:, t]
        if clip:
            val = np.minimum(hi, np.maximum(val, lo))
        buf[:, t] = val
    return buf
