"""End-to-end cluster-and-conquer: AR per series, cluster, VAR per cluster.

Model file layout (all integers little-endian)::

    offset 0   4 bytes   magic b"CCFM"
    offset 4   uint32    format version (currently 1)
    offset 8   uint32    header length H
    offset 12  H bytes   UTF-8 JSON header (sorted keys) with shapes, lags,
                         labels, cluster membership, config and a CRC32 of
                         the payload
    offset 12+H          float64 payload: the n x d AR coefficient matrix,
                         then every cluster's m x (m*d) gamma, row-major,
                         in cluster-id order
"""
from __future__ import annotations

import hashlib
import json
import struct
import time
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .clustering import ClusterAssignment, knn_graph_partition, random_assignment, spectral_cluster
from .dataset import LagSpec, TimeSeriesDataset, default_block_size, make_blocks
from .errors import ArgumentError, ClusterConquerError, FormatError, ShapeError, VersionError
from .global_var import ClusterVARModel, fit_all_var
from .local_ar import ARParams, fit_all_ar, normalize_params, param_matrix, recursive_forecast

MAGIC = b"CCFM"
FORMAT_VERSION = 1
CLUSTER_METHODS = ("spectral", "knn-graph", "random", "none")


@dataclass(frozen=True)
class PipelineConfig:
    lags: tuple = (1,)
    k: int | str = "auto"
    cluster: str = "knn-graph"
    ridge: float = 1e-8
    seed: int = 0
    block_mode: str = "sliding"
    block_size: int | None = None
    placement: str = "last"
    normalize: bool = True
    knn_neighbors: int = 11
    balanced: bool = True
    restarts: int = 10

    def __post_init__(self):
        object.__setattr__(self, "lags", LagSpec(self.lags).lag_indices)
        if self.cluster not in CLUSTER_METHODS:
            raise ArgumentError(f"unknown clustering method {self.cluster!r}")
        if self.block_mode not in ("sliding", "blocked"):
            raise ArgumentError(f"unknown block mode {self.block_mode!r}")
        if self.ridge < 0:
            raise ArgumentError("ridge must be nonnegative")
        if not (self.k == "auto" or (isinstance(self.k, int) and self.k >= 1)):
            raise ArgumentError(f"k must be a positive integer or 'auto', got {self.k!r}")

    @property
    def lag_spec(self) -> LagSpec:
        return LagSpec(self.lags)

    def resolve_k(self, n: int) -> int:
        if self.cluster == "none":
            return n
        k = max(1, n // 10) if self.k == "auto" else int(self.k)
        if k > n:
            raise ArgumentError(f"k={k} exceeds the number of series n={n}")
        return k

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class PipelineModel:
    lag_spec: LagSpec
    assignment: ClusterAssignment
    ar_params: list
    var_models: list
    config_fingerprint: str
    config: dict = field(default_factory=dict)
    series_ids: tuple = ()
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.assignment.n

    def forecaster(self, workers: int = 1):
        return lambda history, horizon: forecast(self, history, horizon, workers)

    def n_params(self) -> int:
        return sum(v.n_params for v in self.var_models)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ClusterConquerError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def sample_plan(ds: TimeSeriesDataset, config: PipelineConfig):
    if config.block_mode == "sliding":
        return "sliding"
    lag_spec = config.lag_spec
    b = config.block_size or default_block_size(lag_spec)
    return make_blocks(ds.T, b, lag_spec, config.placement, config.seed)


def cluster_params(ar_params, config: PipelineConfig, n: int) -> ClusterAssignment:
    """Stage 2 on already fitted AR coefficients."""
    k = config.resolve_k(n)
    if k == n:
        return ClusterAssignment(np.arange(n), n)
    if k == 1:
        return ClusterAssignment(np.zeros(n, dtype=np.int64), 1)
    X = normalize_params(ar_params)[0] if config.normalize else param_matrix(ar_params)
    if config.cluster == "spectral":
        return spectral_cluster(X, k, seed=config.seed, restarts=config.restarts)
    if config.cluster == "knn-graph":
        K = min(config.knn_neighbors, n - 1)
        return knn_graph_partition(X, k, K=K, seed=config.seed, balanced=config.balanced)
    return random_assignment(n, k, seed=config.seed)


def fit_from_ar(ds: TimeSeriesDataset, ar_params, config: PipelineConfig, workers: int = 1) -> PipelineModel:
    """Stages 2 and 3, reusing stage-1 coefficients (e.g. for a k sweep)."""
    lag_spec = config.lag_spec
    plan = sample_plan(ds, config)
    t0 = time.perf_counter()
    assignment = _stage("clustering", cluster_params, ar_params, config, ds.n)
    t1 = time.perf_counter()
    var_models = _stage("global VAR", fit_all_var, ds, assignment, lag_spec, plan, config.ridge, workers)
    t2 = time.perf_counter()
    return PipelineModel(
        lag_spec,
        assignment,
        list(ar_params),
        var_models,
        config.fingerprint(),
        asdict(config),
        ds.series_ids,
        {"cluster": t1 - t0, "var": t2 - t1},
    )


def fit_pipeline(ds: TimeSeriesDataset, config: PipelineConfig, workers: int = 1) -> PipelineModel:
    lag_spec = config.lag_spec
    try:
        lag_spec.validate_for(ds.T)
    except ValueError as exc:
        raise ArgumentError(str(exc)) from exc
    config.resolve_k(ds.n)
    plan = _stage("local AR", sample_plan, ds, config)
    t0 = time.perf_counter()
    ar_params = _stage("local AR", fit_all_ar, ds, lag_spec, plan, config.ridge, workers)
    t1 = time.perf_counter()
    model = fit_from_ar(ds, ar_params, config, workers)
    model.timings["ar"] = t1 - t0
    return model


def forecast(model: PipelineModel, ds: TimeSeriesDataset, horizon: int, workers: int = 1) -> np.ndarray:
    """``n x horizon`` recursive forecasts; each cluster advances jointly."""
    if horizon < 1:
        raise ArgumentError("horizon must be at least 1")
    if ds.n != model.n:
        raise ShapeError(f"model has {model.n} series, dataset has {ds.n}")
    if ds.T < model.lag_spec.max_lag:
        raise ArgumentError(f"need at least {model.lag_spec.max_lag} time points to forecast")
    out = np.empty((ds.n, horizon))

    def one(v: ClusterVARModel):
        return recursive_forecast(v.gamma, ds.values[v.members], model.lag_spec, horizon)

    from .parallel import parallel_map

    for v, pred in zip(model.var_models, parallel_map(one, model.var_models, workers)):
        out[v.members] = pred
    return out


# -------------------------------------------------------------------- storage

def _encode(model: PipelineModel) -> bytes:
    d = model.lag_spec.d
    ar = np.vstack([p.theta for p in model.ar_params]).astype("<f8")
    blocks = [ar.tobytes()] + [np.ascontiguousarray(v.gamma, dtype="<f8").tobytes() for v in model.var_models]
    payload = b"".join(blocks)
    header = {
        "n": model.n,
        "d": d,
        "lags": list(model.lag_spec.lag_indices),
        "k": model.assignment.k,
        "labels": model.assignment.labels.tolist(),
        "series_ids": list(model.series_ids),
        "ar_rank_deficient": [bool(p.rank_deficient) for p in model.ar_params],
        "clusters": [
            {"members": v.members.tolist(), "rank_deficient": bool(v.rank_deficient)} for v in model.var_models
        ],
        "config": model.config,
        "config_fingerprint": model.config_fingerprint,
        "payload_bytes": len(payload),
        "payload_crc32": zlib.crc32(payload),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(hbytes)) + hbytes + payload


def save_model(model: PipelineModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_encode(model))


def load_model(path) -> PipelineModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a model file")
    version, hlen = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(blob) < 12 + hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from None
    payload = blob[12 + hlen :]
    if len(payload) != header.get("payload_bytes") or zlib.crc32(payload) != header.get("payload_crc32"):
        raise FormatError(f"{path}: payload truncated or corrupt")
    try:
        n, d = header["n"], header["d"]
        lag_spec = LagSpec(tuple(header["lags"]))
        values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
        ar = values[: n * d].reshape(n, d)
        ids = header["series_ids"]
        ar_params = [
            ARParams(ar[i].copy(), ids[i] if ids else i, lag_spec, flag)
            for i, flag in enumerate(header["ar_rank_deficient"])
        ]
        offset = n * d
        var_models = []
        for c in header["clusters"]:
            members = np.asarray(c["members"], dtype=np.int64)
            size = members.size * members.size * d
            gamma = values[offset : offset + size].reshape(members.size, members.size * d).copy()
            offset += size
            var_models.append(ClusterVARModel(members, gamma, lag_spec, c["rank_deficient"]))
        if offset != values.size:
            raise FormatError(f"{path}: payload size does not match header shapes")
        assignment = ClusterAssignment(np.asarray(header["labels"], dtype=np.int64), header["k"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: inconsistent header ({exc})") from None
    return PipelineModel(
        lag_spec, assignment, ar_params, var_models, header["config_fingerprint"], header["config"], tuple(ids)
    )
