import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterconquer.clustering import clustering_error, spectral_cluster
from clusterconquer.errors import SingularDesignError
from clusterconquer.simgen import (
    GenConfig,
    SyntheticParams,
    draw_synthetic_params,
    gen_mlr_instance,
    gen_synthetic_ts,
    read_truth,
    separated_centers,
    simulate_from_params,
    write_truth,
)

small = st.builds(
    GenConfig,
    n=st.sampled_from([4, 6, 12]),
    k_true=st.sampled_from([1, 2]),
    d=st.integers(1, 5),
    T=st.integers(10, 60),
    period=st.integers(2, 12),
    seed=st.integers(0, 1000),
)


@settings(max_examples=40, deadline=None)
@given(small)
def test_values_clipped_and_norms_unit(cfg):
    ds, truth, params = gen_synthetic_ts(cfg)
    assert ds.values.shape == (cfg.n, cfg.T)
    assert np.all(np.abs(ds.values) <= 1.0)
    for i in range(cfg.n):
        v = params.series_coefficients(i)
        assert np.sum(np.abs(v) ** 2.5) ** (1 / 2.5) == pytest.approx(1.0, abs=1e-10)
    assert np.all(truth.sizes() == cfg.m)


def test_deterministic():
    cfg = GenConfig(n=20, k_true=4, d=3, T=50, seed=9)
    a, _, _ = gen_synthetic_ts(cfg)
    b, _, _ = gen_synthetic_ts(cfg)
    np.testing.assert_array_equal(a.values, b.values)


def test_k_must_divide_n():
    with pytest.raises(ValueError):
        GenConfig(n=200, k_true=7)


def test_copy_dynamics():
    cfg = GenConfig(n=2, k_true=1, d=3, T=12, period=5, noise_std=0.0)
    base = draw_synthetic_params(cfg)
    theta = np.array([1.0, 0.0, 0.0])
    coef = [np.zeros((2, 6))]
    coef[0][0, :3] = theta
    coef[0][1, 3:] = theta
    params = SyntheticParams(base.labels, base.members, base.centers, np.tile(theta, (2, 1)), coef, base.phases)
    x = simulate_from_params(params, cfg)
    assert np.all(np.abs(x) <= 1)
    np.testing.assert_array_equal(x[:, 3:], np.repeat(x[:, 2:3], 9, axis=1))


def test_truth_sidecar(tmp_path):
    cfg = GenConfig(n=6, k_true=2, d=2, T=20)
    ds, truth, params = gen_synthetic_ts(cfg)
    write_truth(params, ds.series_ids, tmp_path / "t.json")
    back = read_truth(tmp_path / "t.json")
    assert back["labels"] == truth.labels.tolist()
    assert back["series_ids"] == list(ds.series_ids)


class TestCenters:
    @pytest.mark.parametrize("k,d", [(3, 5), (4, 4), (4, 2), (9, 2), (5, 1)])
    def test_min_distance(self, k, d):
        C = separated_centers(k, d, 2.5)
        dist = [np.linalg.norm(C[a] - C[b]) for a in range(k) for b in range(a)]
        assert min(dist) == pytest.approx(2.5) and C.shape == (k, d)


class TestMLR:
    def test_noiseless(self):
        inst = gen_mlr_instance(6, 2, 20, 3, 0.0, 0.0, 0.0, 1.0, isotropic=False, seed=1)
        expect = np.einsum("itd,id->it", inst.x, inst.centers[inst.labels])
        np.testing.assert_allclose(inst.y, expect, atol=1e-14)

    def test_isotropic_cluster_design(self):
        inst = gen_mlr_instance(6, 2, 30, 3, 0.1, 0.1, 0.1, 1.0, isotropic=True, seed=1)
        for c in range(2):
            Z = inst.stacked_design(inst.members(c))
            np.testing.assert_allclose(Z.T @ Z / 30, np.eye(9), atol=1e-8)

    def test_isotropic_needs_samples(self):
        with pytest.raises(SingularDesignError):
            gen_mlr_instance(6, 2, 8, 3, 0.1, 0.1, 0.1, 1.0, isotropic=True)

    def test_observation_equation(self):
        inst = gen_mlr_instance(6, 2, 15, 2, 0.3, 0.2, 0.4, 1.0, isotropic=False, seed=4)
        for i in range(6):
            peers = inst.members(inst.labels[i])
            y = inst.x[i] @ inst.thetas[i] + inst.eps[i]
            for u, j in enumerate(peers):
                if j != i:
                    y = y + inst.x[j] @ inst.gammas[i, u]
            np.testing.assert_allclose(inst.y[i], y, atol=1e-12)

    @pytest.mark.slow
    def test_conditional_variance(self):
        inst = gen_mlr_instance(4, 2, 5, 2, 0.3, 0.2, 0.4, 1.0, isotropic=False, seed=3)
        rng = np.random.default_rng(0)
        draws = np.stack([inst.regenerate(rng).y for _ in range(100_000)])
        emp = draws.var(axis=0)
        for i in range(4):
            peers = [j for j in inst.members(inst.labels[i]) if j != i]
            expect = 0.09 * np.sum(inst.x[i] ** 2, axis=1) + 0.16 * sum(np.sum(inst.x[j] ** 2, axis=1) for j in peers) + 0.04
            np.testing.assert_allclose(emp[i], expect, rtol=0.1)

    def test_spectral_recovers_true_thetas(self):
        inst = gen_mlr_instance(20, 4, 30, 3, 1e-6, 0.0, 0.0, 100.0, isotropic=True, seed=8)
        assert clustering_error(spectral_cluster(inst.thetas.T, 4), inst.labels) == 0
