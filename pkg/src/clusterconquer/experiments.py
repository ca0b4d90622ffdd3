"""Cluster-count sweeps and stage-3 timing runs."""
from __future__ import annotations

import dataclasses
import statistics

from .dataset import TimeSeriesDataset
from .local_ar import fit_all_ar
from .metrics import EvalConfig, rolling_validate
from .pipeline import PipelineConfig, sample_plan, fit_from_ar


class _ARCache:
    """Stage-1 fits keyed by training length; shared by every k of a sweep."""

    def __init__(self, config: PipelineConfig, workers: int):
        self.config = config
        self.workers = workers
        self._store = {}

    def get(self, ds: TimeSeriesDataset):
        if ds.T not in self._store:
            c = self.config
            self._store[ds.T] = fit_all_ar(ds, c.lag_spec, sample_plan(ds, c), c.ridge, self.workers)
        return self._store[ds.T]


def _evaluate(ds, cache, config, eval_cfg, method, workers):
    var_seconds = []

    def fit_fn(train):
        model = fit_from_ar(train, cache.get(train), config, workers)
        var_seconds.append(model.timings["var"])
        return model.forecaster(workers)

    res = rolling_validate(ds, fit_fn, eval_cfg, "refit", method)
    return res, sum(var_seconds)


def sweep_k(
    ds: TimeSeriesDataset,
    config: PipelineConfig,
    k_list,
    eval_cfg: EvalConfig = EvalConfig(),
    baselines: bool = True,
    workers: int = 1,
):
    """Rolling-validation scores for each ``k`` plus the two reference models.

    Returns ``(rows, results)``. Each row holds ``method``, ``k``, the pooled
    metrics and ``wall_time_fit`` (stage-3 seconds summed over windows).
    ``scalar-ar`` is the ``k = n`` model; ``random-clusters`` uses a random
    balanced assignment with the same ``k`` and a seed stream offset from
    ``config.seed``.
    """
    cache = _ARCache(config, workers)
    runs = [("cluster-and-conquer", k, dataclasses.replace(config, k=int(k))) for k in k_list]
    if baselines:
        runs.append(("scalar-ar", ds.n, dataclasses.replace(config, k=ds.n)))
        for k in k_list:
            if 1 < k < ds.n:
                rand = dataclasses.replace(config, k=int(k), cluster="random", seed=config.seed + 1_000_003)
                runs.append(("random-clusters", k, rand))
    rows, results = [], []
    for method, k, cfg in runs:
        res, secs = _evaluate(ds, cache, cfg, eval_cfg, method, workers)
        rows.append({"method": method, "k": int(k), **res.pooled, "wall_time_fit": secs})
        results.append(res)
    return rows, results


def time_var_fits(ds: TimeSeriesDataset, config: PipelineConfig, k_list, repeats: int = 5, workers: int = 1) -> dict:
    """Median stage-3 wall time per ``k`` over ``repeats`` fits on the full data.

    Stage 1 and the clustering run once per ``k`` and are excluded from the
    timing.
    """
    ar = fit_all_ar(ds, config.lag_spec, sample_plan(ds, config), config.ridge, workers)
    out = {}
    for k in k_list:
        cfg = dataclasses.replace(config, k=int(k))
        times = []
        for _ in range(repeats):
            times.append(fit_from_ar(ds, ar, cfg, workers).timings["var"])
        out[int(k)] = {"median": statistics.median(times), "runs": times}
    return out
