"""Stage 1: one scalar autoregression per series."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dataset import LagSpec, Plan, RegressionSamples, TimeSeriesDataset, extract_ar_samples, lag_order
from .errors import ArgumentError
from .numeric import solve_least_squares
from .parallel import parallel_map


@dataclass
class ARParams:
    theta: np.ndarray
    series: str | int
    lag_spec: LagSpec | None
    rank_deficient: bool = False


def fit_ar(samples: RegressionSamples, ridge: float = 0.0, series=None) -> ARParams:
    """Least-squares AR fit; ``theta[j]`` multiplies lag ``lag_spec.lag_indices[j]``.

    Samples without a lag spec (plain regression designs) keep the design's
    column order.
    """
    if samples.n_samples < 1:
        raise ValueError("no samples to fit")
    fit = solve_least_squares(samples.design, samples.targets, ridge)
    coef = fit.coefficients
    if samples.lag_spec is not None:
        coef = lag_order(coef, samples.lag_spec.d)
    if series is None:
        series = samples.series[0] if samples.series else 0
    return ARParams(coef, series, samples.lag_spec, fit.rank_deficient)


def fit_all_ar(ds: TimeSeriesDataset, lag_spec: LagSpec, plan: Plan = "sliding", ridge: float = 1e-8, workers: int = 1):
    def one(i):
        return fit_ar(extract_ar_samples(ds, i, lag_spec, plan), ridge, series=ds.series_ids[i])

    return parallel_map(one, range(ds.n), workers)


def param_matrix(params) -> np.ndarray:
    """Stack coefficient vectors as the columns of a ``d x n`` matrix."""
    return np.column_stack([p.theta for p in params])


def normalize_params(params):
    """Columns scaled to unit l2 norm; returns ``(matrix, zero_norm_mask)``.

    All-zero vectors are left as zeros and flagged in the mask.
    """
    X = param_matrix(params) if not isinstance(params, np.ndarray) else np.asarray(params, dtype=np.float64)
    norms = np.linalg.norm(X, axis=0)
    zero = norms == 0.0
    out = X / np.where(zero, 1.0, norms)
    return out, zero


def forecast_ar(params, ds: TimeSeriesDataset, horizon: int) -> np.ndarray:
    """Recursive scalar-AR forecasts, ``n x horizon``."""
    if horizon < 1:
        raise ArgumentError("horizon must be at least 1")
    out = np.empty((ds.n, horizon))
    for i, p in enumerate(params):
        out[i] = recursive_forecast(p.theta[None, :], ds.values[i : i + 1], p.lag_spec, horizon)[0]
    return out


def recursive_forecast(coef: np.ndarray, history: np.ndarray, lag_spec: LagSpec, horizon: int) -> np.ndarray:
    """Advance ``m`` series jointly ``horizon`` steps.

    ``coef`` is ``m x (m*d)`` with blocks in lag order; ``history`` is
    ``m x T``. Predictions are fed back into the lag window.
    """
    L = lag_spec.max_lag
    if history.shape[1] < L:
        raise ValueError(f"need at least {L} past values to forecast")
    m = history.shape[0]
    buf = np.zeros((m, L + horizon))
    buf[:, :L] = history[:, history.shape[1] - L :]
    kernels.var_recursion(np.ascontiguousarray(coef, dtype=np.float64), buf, lag_spec.array, L, L + horizon, None, 0.0, 0.0, False)
    return buf[:, L:]
