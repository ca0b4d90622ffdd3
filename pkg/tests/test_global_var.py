import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterconquer.clustering import ClusterAssignment
from clusterconquer.dataset import LagSpec, TimeSeriesDataset, extract_ar_samples, extract_var_samples
from clusterconquer.global_var import fit_all_var, fit_cluster_var, fit_dense_var, fit_oracle_var, joint_kron_solve, solve_cluster
from clusterconquer.local_ar import fit_all_ar, fit_ar
from clusterconquer.simgen import gen_mlr_instance


def test_singleton_equals_ar(rng):
    ds = TimeSeriesDataset(rng.normal(size=(3, 40)))
    lags = LagSpec((1, 2, 5))
    v = fit_cluster_var(ds, [1], lags)
    a = fit_ar(extract_ar_samples(ds, 1, lags), 1e-8)
    np.testing.assert_array_equal(v.gamma[0], a.theta)


def test_exact_var1_recovery(rng):
    A = np.array([[0.5, -0.2], [0.3, 0.4]])
    x = np.empty((2, 80))
    x[:, 0] = rng.normal(size=2)
    for t in range(1, 80):
        x[:, t] = A @ x[:, t - 1]
    v = fit_cluster_var(TimeSeriesDataset(x), [0, 1], LagSpec((1,)), ridge=0.0)
    np.testing.assert_allclose(v.gamma, A, atol=1e-8)


def test_lag_blocks_in_lag_order(rng):
    # x0_t = 0.5 x0_{t-1} + 0.2 x1_{t-2}; x1 is noise
    x = np.zeros((2, 300))
    x[1] = rng.normal(size=300)
    x[0, :2] = rng.normal(size=2)
    for t in range(2, 300):
        x[0, t] = 0.5 * x[0, t - 1] + 0.2 * x[1, t - 2]
    v = fit_cluster_var(TimeSeriesDataset(x), [0, 1], LagSpec((1, 2)), ridge=0.0)
    np.testing.assert_allclose(v.gamma[0], [0.5, 0.0, 0.0, 0.2], atol=1e-8)


def test_kronecker_oracle(rng):
    ds = TimeSeriesDataset(rng.normal(size=(3, 30)))
    s = extract_var_samples(ds, [0, 1, 2], LagSpec((1, 2)))
    split, _ = solve_cluster(s.design, s.targets)
    np.testing.assert_allclose(split, joint_kron_solve(s.design, s.targets), atol=1e-10)


def test_partition_endpoints(rng):
    ds = TimeSeriesDataset(rng.normal(size=(4, 30)))
    lags = LagSpec((1, 2))
    singles = fit_all_var(ds, ClusterAssignment(np.arange(4), 4), lags)
    ar = fit_all_ar(ds, lags)
    for v, a in zip(singles, ar):
        np.testing.assert_array_equal(v.gamma[0], a.theta)
    [dense] = fit_all_var(ds, ClusterAssignment(np.zeros(4, dtype=int), 1), lags)
    np.testing.assert_array_equal(dense.gamma, fit_dense_var(ds, lags).gamma)


def test_parallel_bit_identical(rng):
    ds = TimeSeriesDataset(rng.normal(size=(12, 50)))
    asg = ClusterAssignment(np.arange(12) % 3, 3)
    a = fit_all_var(ds, asg, LagSpec((1, 2)), workers=1)
    b = fit_all_var(ds, asg, LagSpec((1, 2)), workers=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.gamma, y.gamma)


def test_parameter_count_decreasing():
    n, d = 40, 3
    totals = []
    for k in (1, 2, 4, 5, 8, 10, 20, 40):
        m = n // k
        totals.append(k * m * m * d)
        assert totals[-1] == n * n * d // k
    assert all(b < a for a, b in zip(totals, totals[1:]))


def test_noiseless_oracle():
    inst = gen_mlr_instance(4, 2, 40, 2, 0.1, 0.0, 0.1, 1.0, isotropic=True, seed=2)
    for c in range(2):
        np.testing.assert_allclose(fit_oracle_var(inst, c).gamma, inst.true_gamma(c), atol=1e-10)


def test_error_decomposition_single_trial():
    inst = gen_mlr_instance(2, 1, 100, 3, 0.0, 1.0, 0.0, 1.0, isotropic=True, seed=5)
    est = fit_oracle_var(inst, 0)
    X = inst.stacked_design([0, 1])
    pinv_resid = (np.linalg.pinv(X) @ inst.eps[[0, 1]].T).T
    np.testing.assert_allclose(est.gamma - inst.true_gamma(0), pinv_resid, atol=1e-10)
    np.testing.assert_allclose(pinv_resid, (X.T @ inst.eps[[0, 1]].T).T / 100, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_row_order_invariance(seed):
    rng = np.random.default_rng(seed)
    s = extract_var_samples(TimeSeriesDataset(rng.normal(size=(2, 30))), [0, 1], LagSpec((1, 2)))
    perm = rng.permutation(s.n_samples)
    a, _ = solve_cluster(s.design, s.targets)
    b, _ = solve_cluster(s.design[perm], s.targets[perm])
    np.testing.assert_allclose(a, b, atol=1e-10)
