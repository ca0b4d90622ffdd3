"""Synthetic data.

Two generators:

* :func:`gen_synthetic_ts` -- clustered, clipped linear time series. Each
  series depends on its own lags and on the lags of the other members of
  its cluster; values are clipped to ``[-1, 1]``.
* :func:`gen_mlr_instance` -- the i.i.d. mixed linear regression surrogate
  with fixed designs, used by :mod:`clusterconquer.theory`.

Randomness comes from ``numpy.random.SeedSequence(seed)``; every sub-draw has
its own spawned child (listed in each function), so changing one component
never shifts the stream of another.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .clustering import ClusterAssignment
from .dataset import TimeSeriesDataset
from .errors import SingularDesignError
from .numeric import seed_sequence, whiten_design


@dataclass(frozen=True)
class GenConfig:
    n: int = 200
    k_true: int = 10
    d: int = 10
    T: int = 1000
    period: int = 10
    noise_std: float = 1e-2
    theta_std: float = 1e-2
    p_norm: float = 2.5
    seed: int = 0

    def __post_init__(self):
        if min(self.n, self.k_true, self.d, self.T, self.period) < 1:
            raise ValueError("n, k_true, d, T and period must be positive")
        if self.n % self.k_true:
            raise ValueError(f"k_true={self.k_true} must divide n={self.n} for balanced clusters")
        if self.d >= self.T:
            raise ValueError("need d < T")

    @property
    def m(self) -> int:
        return self.n // self.k_true


@dataclass
class SyntheticParams:
    """Ground truth of a synthetic panel.

    ``coef[c]`` is the ``m x (m*d)`` coefficient matrix of cluster ``c``
    (members ``members[c]``, blocks in lag order ``1..d``); ``thetas`` and
    ``centers`` repeat the own-lag blocks for convenience.
    """

    labels: np.ndarray
    members: list
    centers: np.ndarray
    thetas: np.ndarray
    coef: list
    phases: np.ndarray

    def series_coefficients(self, i: int) -> np.ndarray:
        c = int(self.labels[i])
        u = int(np.flatnonzero(self.members[c] == i)[0])
        return self.coef[c][u]

    def to_json(self) -> str:
        return json.dumps(
            {
                "labels": self.labels.tolist(),
                "members": [m.tolist() for m in self.members],
                "centers": self.centers.tolist(),
                "thetas": self.thetas.tolist(),
                "coef": [c.tolist() for c in self.coef],
                "phases": self.phases.tolist(),
            },
            sort_keys=True,
        )


def _pnorm_mass(v: np.ndarray, p: float) -> float:
    return float(np.sum(np.abs(v) ** p))


def draw_synthetic_params(cfg: GenConfig) -> SyntheticParams:
    """Draw labels, centers, own-lag and cross-series coefficients.

    Child streams: 0 labels, 1 centers, 2 per-series offsets, 3 cross terms,
    4 phases. Each cluster center gets l_p mass ``1/m``; the cross-series
    block of every series is then scaled so that the series' whole
    coefficient vector has unit l_p norm.
    """
    ss = seed_sequence(cfg.seed).spawn(6)
    rng_lab, rng_ctr, rng_off, rng_x, rng_ph = (np.random.default_rng(s) for s in ss[:5])
    n, k, d, m, p = cfg.n, cfg.k_true, cfg.d, cfg.m, cfg.p_norm

    labels = rng_lab.permutation(np.repeat(np.arange(k), m))
    members = [np.flatnonzero(labels == c) for c in range(k)]

    z = rng_ctr.standard_normal((k, d))
    centers = z / ((np.sum(np.abs(z) ** p, axis=1, keepdims=True) * m) ** (1.0 / p))
    thetas = centers[labels] + cfg.theta_std * rng_off.standard_normal((n, d))

    coef = []
    for c in range(k):
        idx = members[c]
        block = np.zeros((m, m * d))
        cross = rng_x.standard_normal((m, m, d))
        for u, i in enumerate(idx):
            theta = thetas[i]
            own = _pnorm_mass(theta, p)
            others = [v for v in range(m) if v != u]
            if others and own < 1.0:
                g = cross[u, others]
                g = g * ((1.0 - own) / _pnorm_mass(g, p)) ** (1.0 / p)
                for v, row in zip(others, g):
                    block[u, v * d : (v + 1) * d] = row
            else:
                theta = theta / own ** (1.0 / p)
                thetas[i] = theta
            block[u, u * d : (u + 1) * d] = theta
        coef.append(block)
    phases = rng_ph.uniform(0.0, 2.0 * np.pi, size=k)
    return SyntheticParams(labels, members, centers, thetas, coef, phases)


def simulate_from_params(params: SyntheticParams, cfg: GenConfig) -> np.ndarray:
    """Run the clipped recursion; returns the ``n x T`` value matrix.

    The first ``d`` values of each series are ``sin(2 pi t / period + phase)``
    with one random phase per cluster. Noise uses child stream 5.
    """
    rng_noise = np.random.default_rng(seed_sequence(cfg.seed).spawn(6)[5])
    noise = cfg.noise_std * rng_noise.standard_normal((cfg.n, cfg.T))
    t = np.arange(1, cfg.d + 1)
    values = np.zeros((cfg.n, cfg.T))
    lags = np.arange(1, cfg.d + 1, dtype=np.int64)
    for c, idx in enumerate(params.members):
        buf = np.zeros((idx.size, cfg.T))
        buf[:, : cfg.d] = np.clip(np.sin(2 * np.pi * t / cfg.period + params.phases[c]), -1.0, 1.0)
        kernels.var_recursion(params.coef[c], buf, lags, cfg.d, cfg.T, np.ascontiguousarray(noise[idx]), -1.0, 1.0, True)
        values[idx] = buf
    return values


def gen_synthetic_ts(cfg: GenConfig):
    """Returns ``(dataset, true_assignment, params)``."""
    params = draw_synthetic_params(cfg)
    values = simulate_from_params(params, cfg)
    ds = TimeSeriesDataset(values, tuple(f"series_{i}" for i in range(cfg.n)), "synthetic")
    return ds, ClusterAssignment(params.labels, cfg.k_true), params


def write_truth(params: SyntheticParams, series_ids, path) -> None:
    """Ground-truth sidecar: JSON with labels and every coefficient."""
    payload = json.loads(params.to_json())
    payload["series_ids"] = list(series_ids)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)


def read_truth(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ------------------------------------------------------------------------ MLR

@dataclass
class MLRInstance:
    """Fixed-design mixed linear regression.

    ``x`` is ``n x T x d``; ``y`` is ``n x T``; ``gammas[i]`` is the ``m x d``
    matrix of cross coefficients of series ``i`` on every member of its
    cluster (member order), with a zero row at its own position.
    """

    x: np.ndarray
    y: np.ndarray
    labels: np.ndarray
    centers: np.ndarray
    thetas: np.ndarray
    gammas: np.ndarray
    eps: np.ndarray
    nu: float
    sigma: float
    tau: float
    k: int
    seed: object = None
    isotropic: bool = True

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def T(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[2]

    @property
    def m(self) -> int:
        return self.n // self.k

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def assignment(self) -> ClusterAssignment:
        return ClusterAssignment(self.labels, self.k)

    def stacked_design(self, members) -> np.ndarray:
        """``T x (m*d)`` rows ``(x_{i_1}^(t), ..., x_{i_m}^(t))``."""
        members = np.asarray(members)
        return self.x[members].transpose(1, 0, 2).reshape(self.T, members.size * self.d)

    def true_gamma(self, cluster: int) -> np.ndarray:
        """``m x (m*d)`` matrix of the stacked parameter: own theta on the diagonal block."""
        idx = self.members(cluster)
        m, d = idx.size, self.d
        G = self.gammas[idx].reshape(m, m * d).copy()
        for u, i in enumerate(idx):
            G[u, u * d : (u + 1) * d] = self.thetas[i]
        return G

    def regenerate(self, rng: np.random.Generator) -> "MLRInstance":
        """Fresh (theta, gamma, eps) draws with the designs held fixed."""
        thetas, gammas, eps = _draw_mlr_noise(rng, self.labels, self.centers, self.T, self.d, self.nu, self.sigma, self.tau, self.k)
        y = _mlr_observe(self.x, self.labels, thetas, gammas, eps, self.k)
        return MLRInstance(self.x, y, self.labels, self.centers, thetas, gammas, eps, self.nu, self.sigma, self.tau, self.k, None, self.isotropic)


def separated_centers(k: int, d: int, separation: float) -> np.ndarray:
    """``k`` centers in ``R^d`` with minimum pairwise distance ``separation``.

    ``k <= d``: scaled simplex vertices ``(separation / sqrt 2) e_c`` (every
    pair exactly at ``separation``). ``k > d``: the first ``k`` points of the
    integer lattice ``{0, 1, ...}^d`` scaled by ``separation``.
    """
    if k <= d:
        return separation / np.sqrt(2.0) * np.eye(d)[:k]
    side = int(np.ceil(k ** (1.0 / d)))
    while side**d < k:
        side += 1
    grid = np.array(np.meshgrid(*[np.arange(side)] * d, indexing="ij")).reshape(d, -1).T
    order = sorted(range(len(grid)), key=lambda r: (grid[r].max(), grid[r].sum(), tuple(grid[r])))
    return separation * grid[order[:k]].astype(float)


def _draw_mlr_noise(rng, labels, centers, T, d, nu, sigma, tau, k):
    n = labels.size
    m = n // k
    thetas = centers[labels] + nu * rng.standard_normal((n, d))
    gammas = tau * rng.standard_normal((n, m, d))
    for c in range(k):
        idx = np.flatnonzero(labels == c)
        for u, i in enumerate(idx):
            gammas[i, u] = 0.0
    eps = sigma * rng.standard_normal((n, T))
    return thetas, gammas, eps


def _mlr_observe(x, labels, thetas, gammas, eps, k):
    n, T, d = x.shape
    y = np.einsum("itd,id->it", x, thetas) + eps
    for c in range(k):
        idx = np.flatnonzero(labels == c)
        # cross terms: sum_{j != i} gamma_ij^T x_j^(t)
        y[idx] += np.einsum("umd,mtd->ut", gammas[idx], x[idx])
    return y


def gen_mlr_instance(
    n: int,
    k: int,
    T: int,
    d: int,
    nu: float,
    sigma: float,
    tau: float,
    separation: float,
    isotropic: bool = True,
    seed=0,
) -> MLRInstance:
    """Draw an MLR instance with balanced clusters of size ``m = n / k``.

    Child streams: 0 labels, 1 designs, 2 (theta, gamma, eps). With
    ``isotropic`` every cluster's stacked design is whitened so its
    empirical second moment is exactly the identity.
    """
    if k < 1 or n % k:
        raise ValueError(f"k={k} must divide n={n}")
    m = n // k
    if isotropic and T < m * d:
        raise SingularDesignError(f"isotropic design needs T >= m*d = {m * d}, got T={T}")
    ss = seed_sequence(seed).spawn(3)
    rng_lab, rng_x, rng_noise = (np.random.default_rng(s) for s in ss)
    labels = rng_lab.permutation(np.repeat(np.arange(k), m))
    x = rng_x.standard_normal((n, T, d))
    if isotropic:
        for c in range(k):
            idx = np.flatnonzero(labels == c)
            Z = x[idx].transpose(1, 0, 2).reshape(T, m * d)
            x[idx] = whiten_design(Z).reshape(T, m, d).transpose(1, 0, 2)
    centers = separated_centers(k, d, separation)
    thetas, gammas, eps = _draw_mlr_noise(rng_noise, labels, centers, T, d, nu, sigma, tau, k)
    y = _mlr_observe(x, labels, thetas, gammas, eps, k)
    return MLRInstance(x, y, labels, centers, thetas, gammas, eps, nu, sigma, tau, k, seed, isotropic)
