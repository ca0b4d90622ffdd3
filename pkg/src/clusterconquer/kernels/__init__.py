"""Hot inner loops, compiled when available.

Two kernels dominate runtime:

``lloyd(points, centers, max_iters)``
    Lloyd iterations from the given initial centers. Ties go to the lowest
    center index; an empty cluster takes the point farthest from its own
    center. Stops when the assignment no longer changes. Returns
    ``(labels, centers, history, n_iter)`` where ``history[0]`` is the
    objective ``(1/2n) sum ||y_i - eta_{kappa_i}||^2`` of the seeding and each
    later entry is the objective after an iteration.

``var_recursion(coef, buf, lags, start, stop, noise, lo, hi, clip)``
    In-place recursion ``buf[:, t] = coef @ vec(buf[:, t - lags])`` for
    ``start <= t < stop``, with optional additive noise and clipping to
    ``[lo, hi]``. ``coef`` is ``m x (m*d)``; its block ``v`` holds the
    coefficients on series ``v`` in ``lags`` order.

The compiled module is used unless ``CLUSTERCONQUER_BACKEND=python`` is set
or it failed to build.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("CLUSTERCONQUER_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

lloyd = _impl.lloyd
var_recursion = _impl.var_recursion

__all__ = ["BACKEND", "lloyd", "var_recursion"]
