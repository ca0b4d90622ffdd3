# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; see clusterconquer.kernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef void _assign(const double[:, ::1] points, const double[:, ::1] centers,
                  cnp.int64_t[::1] labels, double[::1] dists) noexcept nogil:
    cdef Py_ssize_t n = points.shape[0], k = centers.shape[0], p = points.shape[1]
    cdef Py_ssize_t i, c, j, best_c
    cdef double best, acc, diff
    for i in range(n):
        best = INFINITY
        best_c = 0
        for c in range(k):
            acc = 0.0
            for j in range(p):
                diff = points[i, j] - centers[c, j]
                acc += diff * diff
            if acc < best:
                best = acc
                best_c = c
        labels[i] = best_c
        dists[i] = best


cdef void _repair_empty(cnp.int64_t[::1] labels, double[::1] dists,
                        cnp.int64_t[::1] counts, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t n = labels.shape[0], i, c, far
    cdef double far_d
    for c in range(k):
        counts[c] = 0
    for i in range(n):
        counts[labels[i]] += 1
    for c in range(k):
        if counts[c] > 0:
            continue
        far = -1
        far_d = -1.0
        for i in range(n):
            if counts[labels[i]] > 1 and dists[i] > far_d:
                far_d = dists[i]
                far = i
        counts[labels[far]] -= 1
        labels[far] = c
        dists[far] = 0.0
        counts[c] = 1


cdef double _update(const double[:, ::1] points, cnp.int64_t[::1] labels,
                    cnp.int64_t[::1] counts, double[:, ::1] centers) noexcept nogil:
    cdef Py_ssize_t n = points.shape[0], k = centers.shape[0], p = points.shape[1]
    cdef Py_ssize_t i, c, j
    cdef double acc = 0.0, diff
    for c in range(k):
        for j in range(p):
            centers[c, j] = 0.0
    for i in range(n):
        c = labels[i]
        for j in range(p):
            centers[c, j] += points[i, j]
    for c in range(k):
        for j in range(p):
            centers[c, j] /= counts[c]
    for i in range(n):
        c = labels[i]
        for j in range(p):
            diff = points[i, j] - centers[c, j]
            acc += diff * diff
    return acc / (2.0 * n)


def lloyd(points, centers, Py_ssize_t max_iters):
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] ctr = np.array(centers, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = pts.shape[0], k = ctr.shape[0], i
    labels_arr = np.empty(n, dtype=np.int64)
    new_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef cnp.int64_t[::1] new_labels = new_arr
    cdef cnp.int64_t[::1] counts = np.zeros(k, dtype=np.int64)
    cdef double[::1] dists = np.empty(n)
    cdef double[::1] new_dists = np.empty(n)
    cdef double total
    cdef bint same
    cdef Py_ssize_t n_iter = 0

    _assign(pts, ctr, labels, dists)
    total = 0.0
    for i in range(n):
        total += dists[i]
    history = [total / (2.0 * n)]
    while n_iter < max_iters:
        n_iter += 1
        _repair_empty(labels, dists, counts, k)
        history.append(_update(pts, labels, counts, ctr))
        _assign(pts, ctr, new_labels, new_dists)
        same = True
        for i in range(n):
            if new_labels[i] != labels[i]:
                same = False
                break
        if same:
            break
        labels[:] = new_labels
        dists[:] = new_dists
        if n_iter == max_iters:
            total = 0.0
            for i in range(n):
                total += dists[i]
            history.append(total / (2.0 * n))
    return np.asarray(labels).copy(), np.asarray(ctr), np.asarray(history), n_iter


def var_recursion(coef, buf, lags, Py_ssize_t start, Py_ssize_t stop, noise,
                  double lo, double hi, bint clip):
    cdef double[:, ::1] cf = np.ascontiguousarray(coef, dtype=np.float64)
    cdef double[:, ::1] b = buf
    cdef cnp.int64_t[::1] lg = np.ascontiguousarray(lags, dtype=np.int64)
    cdef double[:, ::1] nz
    cdef bint has_noise = noise is not None
    if has_noise:
        nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t m = b.shape[0], d = lg.shape[0], t, u, v, l
    cdef double acc
    # scratch row so every series at time t reads only values before t
    cdef double[::1] row = np.empty(m)
    with nogil:
        for t in range(start, stop):
            for u in range(m):
                acc = 0.0
                for v in range(m):
                    for l in range(d):
                        acc += cf[u, v * d + l] * b[v, t - lg[l]]
                if has_noise:
                    acc += nz[u, t]
                if clip:
                    if acc > hi:
                        acc = hi
                    elif acc < lo:
                        acc = lo
                row[u] = acc
            for u in range(m):
                b[u, t] = row[u]
    return buf
