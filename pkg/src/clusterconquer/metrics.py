"""Forecast error metrics and rolling-origin evaluation.

Metrics take actuals ``Y`` and predictions ``Y_hat`` of the same shape and
return fractions (multiply by 100 for percentages). A metric whose
denominator is empty (all-zero actuals for WAPE, no unmasked entries for
MAPE/SMAPE) is NaN rather than silently dropped.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import ArgumentError, ShapeError


def _pair(Y, Y_hat):
    Y = np.asarray(Y, dtype=np.float64)
    Y_hat = np.asarray(Y_hat, dtype=np.float64)
    if Y.shape != Y_hat.shape:
        raise ShapeError(f"actuals {Y.shape} vs predictions {Y_hat.shape}")
    return Y, Y_hat


def wape(Y, Y_hat) -> float:
    Y, Y_hat = _pair(Y, Y_hat)
    denom = np.abs(Y).sum()
    if denom == 0:
        return float("nan")
    return float(np.abs(Y - Y_hat).sum() / denom)


def mape(Y, Y_hat) -> float:
    Y, Y_hat = _pair(Y, Y_hat)
    mask = np.abs(Y) > 0
    if not mask.any():
        return float("nan")
    return float(np.sum(np.abs(Y - Y_hat)[mask] / np.abs(Y)[mask]) / mask.sum())


def smape(Y, Y_hat) -> float:
    Y, Y_hat = _pair(Y, Y_hat)
    denom = np.abs(Y) + np.abs(Y_hat)
    mask = denom > 0
    if not mask.any():
        return float("nan")
    return float(np.sum(2.0 * np.abs(Y - Y_hat)[mask] / denom[mask]) / mask.sum())


def mae(Y, Y_hat) -> float:
    Y, Y_hat = _pair(Y, Y_hat)
    return float(np.mean(np.abs(Y - Y_hat)))


def rmse(Y, Y_hat) -> float:
    Y, Y_hat = _pair(Y, Y_hat)
    return float(np.sqrt(np.mean((Y - Y_hat) ** 2)))


METRICS: dict[str, Callable] = {"WAPE": wape, "MAPE": mape, "SMAPE": smape, "MAE": mae, "RMSE": rmse}


@dataclass(frozen=True)
class EvalConfig:
    horizon: int = 24
    windows: int = 7
    metrics: tuple = ("WAPE", "MAPE", "SMAPE", "MAE", "RMSE")

    def __post_init__(self):
        if self.horizon < 1 or self.windows < 1:
            raise ArgumentError("horizon and windows must be at least 1")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ArgumentError(f"unknown metrics {sorted(unknown)}")

    def cutoffs(self, T: int) -> list:
        """Training lengths per window: ``T - (n_w - w + 1) * tau`` for ``w = 1..n_w``."""
        if self.horizon * self.windows >= T:
            raise ArgumentError(f"{self.windows} windows of {self.horizon} steps need more than T={T} points")
        return [T - (self.windows - w + 1) * self.horizon for w in range(1, self.windows + 1)]


@dataclass
class EvalResult:
    method: str
    cutoffs: list
    pooled: dict
    per_window: list
    actuals: np.ndarray = field(repr=False)
    forecasts: np.ndarray = field(repr=False)
    fit_seconds: list = field(default_factory=list)

    def rows(self):
        """``(method, window, metric, value)``; window ``"all"`` is pooled."""
        out = []
        for w, scores in enumerate(self.per_window, start=1):
            out += [(self.method, str(w), k, v) for k, v in scores.items()]
        out += [(self.method, "all", k, v) for k, v in self.pooled.items()]
        return out

    def nan_metrics(self) -> list:
        return [k for k, v in self.pooled.items() if np.isnan(v)]


def score(Y, Y_hat, names=("WAPE", "MAPE", "SMAPE", "MAE", "RMSE")) -> dict:
    return {name: METRICS[name](Y, Y_hat) for name in names}


def rolling_validate(
    ds: TimeSeriesDataset,
    fit_fn,
    cfg: EvalConfig,
    fit_mode: str = "refit",
    method: str = "model",
) -> EvalResult:
    """Rolling-origin evaluation over the last ``windows * horizon`` points.

    ``fit_fn(train_ds)`` must return a forecaster ``f(history_ds, horizon)``
    giving an ``n x horizon`` array. ``refit`` trains on each window's prefix;
    ``fixed`` trains once on the shortest prefix and only moves the forecast
    origin. Metrics pool every window's (actual, forecast) pairs.
    """
    if fit_mode not in ("refit", "fixed"):
        raise ArgumentError(f"unknown fit mode {fit_mode!r}")
    cuts = cfg.cutoffs(ds.T)
    tau = cfg.horizon
    actual = np.empty((ds.n, tau * cfg.windows))
    pred = np.empty_like(actual)
    per_window = []
    fit_seconds = []
    forecaster = None
    for w, cut in enumerate(cuts):
        history = ds.head(cut)
        if forecaster is None or fit_mode == "refit":
            t0 = time.perf_counter()
            forecaster = fit_fn(history)
            fit_seconds.append(time.perf_counter() - t0)
        f = np.asarray(forecaster(history, tau), dtype=np.float64)
        if f.shape != (ds.n, tau):
            raise ShapeError(f"forecaster returned {f.shape}, expected {(ds.n, tau)}")
        sl = slice(w * tau, (w + 1) * tau)
        actual[:, sl] = ds.values[:, cut : cut + tau]
        pred[:, sl] = f
        per_window.append(score(actual[:, sl], f, cfg.metrics))
    pooled = score(actual, pred, cfg.metrics)
    return EvalResult(method, cuts, pooled, per_window, actual, pred, fit_seconds)


def write_metric_table(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "window", "metric", "value"])
        for res in results:
            for row in res.rows():
                w.writerow([row[0], row[1], row[2], repr(float(row[3]))])
