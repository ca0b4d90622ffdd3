"""Cluster-and-conquer forecasting for large panels of time series.

Fit a scalar autoregression per series, cluster the coefficient vectors,
then fit one vector autoregression per cluster.
"""
__version__ = "0.1.0"

from .clustering import ClusterAssignment, knn_graph_partition, spectral_cluster
from .dataset import LagSpec, TimeSeriesDataset, load_csv, write_csv
from .errors import ClusterConquerError
from .metrics import EvalConfig, rolling_validate
from .pipeline import PipelineConfig, PipelineModel, fit_pipeline, forecast, load_model, save_model

__all__ = [
    "ClusterAssignment",
    "ClusterConquerError",
    "EvalConfig",
    "LagSpec",
    "PipelineConfig",
    "PipelineModel",
    "TimeSeriesDataset",
    "fit_pipeline",
    "forecast",
    "knn_graph_partition",
    "load_csv",
    "load_model",
    "rolling_validate",
    "save_model",
    "spectral_cluster",
    "write_csv",
]
