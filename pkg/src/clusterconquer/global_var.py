"""Stage 3: one vector autoregression per cluster.

The joint problem for a cluster of ``m`` members,

    minimize (1/2T) sum_t || y^(t) - (I_m kron x^(t)^T) Gamma ||^2,

has a block-diagonal design, so it splits into ``m`` least-squares problems
that share the ``m*d``-wide design. Row ``u`` of ``ClusterVARModel.gamma``
is the solution for member ``u``; flattening ``gamma`` row-major gives the
stacked parameter vector ``Gamma``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAssignment
from .dataset import LagSpec, Plan, TimeSeriesDataset, extract_var_samples, lag_order
from .numeric import solve_least_squares
from .parallel import parallel_map


@dataclass
class ClusterVARModel:
    """Coefficients of one cluster.

    ``gamma`` is ``m x (m*d)``; block ``v`` of row ``u`` holds the
    coefficients of member ``u`` on the history of member ``v`` (in lag order
    when ``lag_spec`` is set). Block ``u`` of row ``u`` is the own-lag part.
    """

    members: np.ndarray
    gamma: np.ndarray
    lag_spec: LagSpec | None
    rank_deficient: bool = False

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def n_params(self) -> int:
        return self.gamma.size

    def flat(self) -> np.ndarray:
        return self.gamma.reshape(-1)


def solve_cluster(design: np.ndarray, targets: np.ndarray, ridge: float = 0.0):
    """Per-member solves on a shared design; returns ``(m x p, rank_deficient)``."""
    fit = solve_least_squares(design, targets, ridge)
    coef = fit.coefficients
    if coef.ndim == 1:
        coef = coef[:, None]
    return coef.T.copy(), fit.rank_deficient


def fit_cluster_var(
    ds: TimeSeriesDataset, members, lag_spec: LagSpec, plan: Plan = "sliding", ridge: float = 1e-8
) -> ClusterVARModel:
    samples = extract_var_samples(ds, members, lag_spec, plan)
    gamma, deficient = solve_cluster(samples.design, samples.targets, ridge)
    return ClusterVARModel(np.asarray(samples.series), lag_order(gamma, lag_spec.d), lag_spec, deficient)


def fit_all_var(
    ds: TimeSeriesDataset,
    assignment: ClusterAssignment,
    lag_spec: LagSpec,
    plan: Plan = "sliding",
    ridge: float = 1e-8,
    workers: int = 1,
):
    """One model per non-empty cluster, ordered by cluster id."""
    clusters = assignment.clusters()
    return parallel_map(lambda cm: fit_cluster_var(ds, cm[1], lag_spec, plan, ridge), clusters, workers)


def fit_dense_var(ds: TimeSeriesDataset, lag_spec: LagSpec, plan: Plan = "sliding", ridge: float = 1e-8) -> ClusterVARModel:
    """Single VAR over every series (the ``k = 1`` endpoint)."""
    return fit_cluster_var(ds, np.arange(ds.n), lag_spec, plan, ridge)


def joint_kron_solve(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Reference solve of the stacked ``I_m kron x^T`` system (small m only).

    Used to check the per-member decoupling; returns ``m x p`` like
    :func:`solve_cluster`.
    """
    N, p = design.shape
    m = targets.shape[1]
    Z = np.zeros((N * m, m * p))
    for t in range(N):
        Z[t * m : (t + 1) * m] = np.kron(np.eye(m), design[t][None, :])
    y = targets.reshape(-1)
    gamma, *_ = np.linalg.lstsq(Z, y, rcond=None)
    return gamma.reshape(m, p)


def fit_oracle_var(mlr, cluster: int, ridge: float = 0.0) -> ClusterVARModel:
    """VAR on the true members of ``cluster`` of an MLR instance."""
    members = np.flatnonzero(mlr.labels == cluster)
    return fit_mlr_var(mlr, members, ridge)


def fit_mlr_var(mlr, members, ridge: float = 0.0) -> ClusterVARModel:
    members = np.asarray(members)
    design = mlr.stacked_design(members)
    targets = mlr.y[members].T
    gamma, deficient = solve_cluster(design, targets, ridge)
    return ClusterVARModel(members, gamma, None, deficient)
