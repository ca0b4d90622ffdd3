import dataclasses
import struct

import numpy as np
import pytest

from clusterconquer.clustering import ClusterAssignment, clustering_error
from clusterconquer.dataset import LagSpec, TimeSeriesDataset
from clusterconquer.errors import ArgumentError, FormatError, ShapeError, VersionError
from clusterconquer.global_var import ClusterVARModel
from clusterconquer.local_ar import ARParams
from clusterconquer.pipeline import PipelineConfig, PipelineModel, fit_pipeline, forecast, load_model, save_model
from clusterconquer.simgen import GenConfig, gen_synthetic_ts


@pytest.fixture(scope="module")
def synth():
    return gen_synthetic_ts(GenConfig(n=24, k_true=3, d=3, T=200, period=6, seed=4))


def test_config_validation():
    with pytest.raises(ArgumentError):
        PipelineConfig(cluster="metis")
    with pytest.raises(ArgumentError):
        PipelineConfig(k=0)
    with pytest.raises(ArgumentError):
        PipelineConfig(k=30).resolve_k(20)
    assert PipelineConfig().resolve_k(95) == 9
    assert PipelineConfig().resolve_k(5) == 1


def test_stage_error_tagged(rng):
    ds = TimeSeriesDataset(rng.normal(size=(4, 30)))
    cfg = PipelineConfig(lags=(1,), k=2, block_mode="blocked", block_size=40)
    with pytest.raises(Exception, match="local AR"):
        fit_pipeline(ds, cfg)


def test_every_series_in_one_model(synth):
    ds, _, _ = synth
    model = fit_pipeline(ds, PipelineConfig(lags=(1, 2, 3), k=4))
    members = np.sort(np.concatenate([v.members for v in model.var_models]))
    np.testing.assert_array_equal(members, np.arange(ds.n))
    for v in model.var_models:
        assert len(set(model.assignment.labels[v.members])) == 1


def test_huge_separation_recovers(rng):
    T = 120
    x = np.empty((6, T))
    x[:, :1] = rng.uniform(-1, 1, (6, 1))
    coefs = [0.9, 0.9, 0.9, -0.9, -0.9, -0.9]
    for t in range(1, T):
        x[:, t] = np.array(coefs) * x[:, t - 1] + 0.1 * rng.normal(size=6)
    model = fit_pipeline(TimeSeriesDataset(x), PipelineConfig(lags=(1,), k=2, cluster="spectral", normalize=False))
    assert clustering_error(model.assignment, [0, 0, 0, 1, 1, 1]) == 0


def test_refit_identical(synth):
    ds, _, _ = synth
    cfg = PipelineConfig(lags=(1, 2, 3), k=3, cluster="spectral", seed=5)
    a, b = fit_pipeline(ds, cfg), fit_pipeline(ds, cfg, workers=3)
    assert a.config_fingerprint == b.config_fingerprint
    np.testing.assert_array_equal(a.assignment.labels, b.assignment.labels)
    for x, y in zip(a.var_models, b.var_models):
        np.testing.assert_array_equal(x.gamma, y.gamma)
    np.testing.assert_array_equal(forecast(a, ds, 5), forecast(b, ds, 5, workers=2))
    assert a.config_fingerprint != fit_pipeline(ds, dataclasses.replace(cfg, seed=6)).config_fingerprint


def _hand_model(gammas, members, n, lags=(1,)):
    ls = LagSpec(lags)
    labels = np.zeros(n, dtype=int)
    for c, mem in enumerate(members):
        labels[mem] = c
    var = [ClusterVARModel(np.asarray(m), np.asarray(g, float), ls) for g, m in zip(gammas, members)]
    ar = [ARParams(np.zeros(ls.d), i, ls) for i in range(n)]
    return PipelineModel(ls, ClusterAssignment(labels, len(members)), ar, var, "x")


def test_zero_coefficients():
    model = _hand_model([np.zeros((2, 2))], [[0, 1]], 2)
    np.testing.assert_array_equal(forecast(model, TimeSeriesDataset([[1.0, 2.0], [3.0, 4.0]]), 4), 0.0)


def test_geometric_singleton():
    model = _hand_model([[[0.5]]], [[0]], 1)
    np.testing.assert_array_equal(forecast(model, TimeSeriesDataset([[4.0, 1.0]]), 3), [[0.5, 0.25, 0.125]])


def test_joint_advancement():
    # x0' = x1, x1' = x0: a swap, advanced jointly
    model = _hand_model([[[0.0, 1.0], [1.0, 0.0]]], [[0, 1]], 2)
    np.testing.assert_array_equal(forecast(model, TimeSeriesDataset([[0.0, 1.0], [0.0, 2.0]]), 3), [[2, 1, 2], [1, 2, 1]])


def test_locality(synth, rng):
    ds, _, _ = synth
    model = fit_pipeline(ds, PipelineConfig(lags=(1, 2, 3), k=3))
    base = forecast(model, ds, 6)
    for i in (0, 7):
        same = model.assignment.labels == model.assignment.labels[i]
        vals = ds.values.copy()
        vals[~same] += rng.normal(size=vals[~same].shape)
        np.testing.assert_array_equal(forecast(model, TimeSeriesDataset(vals), 6)[same], base[same])


def test_forecast_errors(synth):
    ds, _, _ = synth
    model = fit_pipeline(ds, PipelineConfig(lags=(1, 2, 3), k=3))
    with pytest.raises(ArgumentError):
        forecast(model, ds, 0)
    with pytest.raises(ShapeError):
        forecast(model, ds.subset(range(5)), 2)


class TestModelFile:
    @pytest.fixture
    def saved(self, synth, tmp_path):
        ds, _, _ = synth
        model = fit_pipeline(ds, PipelineConfig(lags=(1, 3), k=3))
        path = tmp_path / "m.ccfm"
        save_model(model, path)
        return ds, model, path

    def test_round_trip(self, saved, tmp_path):
        ds, model, path = saved
        back = load_model(path)
        assert path.read_bytes()[:4] == b"CCFM"
        for a, b in zip(model.var_models, back.var_models):
            np.testing.assert_array_equal(a.gamma, b.gamma)
            np.testing.assert_array_equal(a.members, b.members)
        for a, b in zip(model.ar_params, back.ar_params):
            np.testing.assert_array_equal(a.theta, b.theta)
        assert back.config_fingerprint == model.config_fingerprint
        np.testing.assert_array_equal(forecast(back, ds, 4), forecast(model, ds, 4))
        save_model(back, tmp_path / "again.ccfm")
        assert (tmp_path / "again.ccfm").read_bytes() == path.read_bytes()

    @pytest.mark.parametrize("cut", [3, 10, 40, -8, -1])
    def test_truncated(self, saved, tmp_path, cut):
        _, _, path = saved
        bad = tmp_path / "bad.ccfm"
        bad.write_bytes(path.read_bytes()[:cut])
        with pytest.raises(FormatError):
            load_model(bad)

    def test_corrupt_payload(self, saved, tmp_path):
        _, _, path = saved
        blob = bytearray(path.read_bytes())
        blob[-3] ^= 0xFF
        (tmp_path / "bad.ccfm").write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_model(tmp_path / "bad.ccfm")

    def test_version(self, saved, tmp_path):
        _, _, path = saved
        blob = path.read_bytes()
        (tmp_path / "v99.ccfm").write_bytes(blob[:4] + struct.pack("<I", 99) + blob[8:])
        with pytest.raises(VersionError):
            load_model(tmp_path / "v99.ccfm")
