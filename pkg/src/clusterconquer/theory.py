"""Monte Carlo checks of the recovery and estimation guarantees.

Every check builds mixed-linear-regression instances from ``simgen``,
runs the estimator and returns a :class:`BoundReport` holding the per-trial
quantities, the empirical success rate and the rule used to decide ``passed``.
Trials take independent child seeds of one ``SeedSequence`` so a report is
reproducible from ``(seed, config)`` regardless of worker count.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import clustering_error, spectral_cluster
from .errors import ArgumentError, SingularDesignError
from .global_var import fit_mlr_var
from .numeric import seed_sequence, solve_least_squares
from .parallel import parallel_map
from .simgen import gen_mlr_instance


@dataclass
class BoundReport:
    claim: str
    trials: int
    successes: int
    theoretical_threshold: float
    passed: bool
    criterion: str
    config: dict = field(default_factory=dict)
    details: list = field(default_factory=list)
    probe: bool = False

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")

    @property
    def empirical_rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    def summary(self) -> dict:
        return {
            "record": "summary",
            "claim": self.claim,
            "trials": self.trials,
            "successes": self.successes,
            "empirical_rate": self.empirical_rate,
            "theoretical_threshold": self.theoretical_threshold,
            "pass": self.passed,
            "criterion": self.criterion,
            "probe": self.probe,
            "config": self.config,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps({"record": "trial", "claim": self.claim, **d}, sort_keys=True) for d in self.details]
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"


def _mc_slack(p: float, trials: int) -> float:
    """Binomial two-sigma allowance for a failure probability ``p``."""
    return 2.0 * math.sqrt(p / trials)


def _seeds(seed, trials):
    return seed_sequence(seed).spawn(trials)


def _within(err: float, bound: float) -> bool:
    # absorbs rounding when the bound is zero (noiseless runs)
    return err <= bound * (1.0 + 1e-9) + 1e-12


def _separation(s, threshold):
    """``s`` times the threshold; a zero threshold (no noise) uses unit scale."""
    return s * threshold if threshold > 0 else s


def _check_trials(trials):
    if trials < 1:
        raise ArgumentError("trials must be at least 1")


# ------------------------------------------------------------------ bounds

def separation_threshold(n, k, d, T, nu, sigma, tau, beta=1.0, rho=None) -> float:
    """Minimum center distance ``32 sqrt(lam) k sqrt((1+d/n)/beta) max(1, beta/rho)``.

    ``lam = nu^2 + (sigma^2 + tau^2/rho)/T`` and ``rho`` defaults to ``k/n``.
    """
    rho = k / n if rho is None else rho
    lam = nu**2 + (sigma**2 + tau**2 / rho) / T
    return 32.0 * math.sqrt(lam) * k * math.sqrt((1.0 + d / n) / beta) * max(1.0, beta / rho)


def var_error_bound(m, d, T, sigma, delta, k=1) -> float:
    """High-probability bound on ``||Gamma_hat - Gamma*||_2`` for one cluster (``k=1``)
    or the max over ``k`` clusters."""
    return math.sqrt(2.0) * math.sqrt(sigma**2 * m * m * d / T) + math.sqrt(3.0 * sigma**2 / T * math.log(k / delta))


# ------------------------------------------------------ AR decomposition

def _design_moments(inst, i):
    Xi = inst.x[i]
    T = inst.T
    S = Xi.T @ Xi / T
    try:
        S_inv = np.linalg.inv(S)
    except np.linalg.LinAlgError:
        raise SingularDesignError(f"series {i}: design second moment is singular") from None
    if np.linalg.cond(S) > 1e12:
        raise SingularDesignError(f"series {i}: design second moment is singular")
    return Xi, S, S_inv


def ar_covariance_formula(inst, i: int) -> np.ndarray:
    """Closed-form covariance of the AR estimate that treats the cross terms
    as independent over time:

        nu^2 I + (sigma^2/T) S^-1 + (tau^2/T) S^-1 S(rho) S^-1

    with ``S(rho) = (1/T) sum_t rho_t^2 x_i x_i^T`` and ``rho_t^2`` the squared
    norm of all same-cluster regressors at time ``t`` (series ``i`` included).
    """
    Xi, _, S_inv = _design_moments(inst, i)
    T, d = inst.T, inst.d
    peers = inst.members(inst.labels[i])
    rho2 = np.sum(inst.x[peers] ** 2, axis=(0, 2))
    S_rho = (Xi * rho2[:, None]).T @ Xi / T
    return inst.nu**2 * np.eye(d) + inst.sigma**2 / T * S_inv + inst.tau**2 / T * S_inv @ S_rho @ S_inv


def ar_covariance_exact(inst, i: int) -> np.ndarray:
    """Covariance of the AR estimate over fresh (theta, gamma, eps) with the
    designs held fixed: ``nu^2 I + (sigma^2/T) S^-1 + tau^2 sum_j S^-1 C_ij C_ij^T S^-1``,
    ``C_ij = (1/T) X_i^T X_j`` over the other members ``j``."""
    Xi, _, S_inv = _design_moments(inst, i)
    T, d = inst.T, inst.d
    out = inst.nu**2 * np.eye(d) + inst.sigma**2 / T * S_inv
    for j in inst.members(inst.labels[i]):
        if j == i:
            continue
        B = S_inv @ (Xi.T @ inst.x[j] / T)
        out += inst.tau**2 * B @ B.T
    return out


def replay_ar_estimates(inst, i: int, replays: int, seed=0, chunk: int = 2000) -> np.ndarray:
    """``replays x d`` least-squares estimates of series ``i`` with the design fixed.

    Each replay draws fresh ``theta_i ~ N(center, nu^2 I)``, cross
    coefficients ``gamma_ij ~ N(0, tau^2 I)`` and noise ``eps ~ N(0, sigma^2)``.
    """
    rng = np.random.default_rng(seed)
    T, d = inst.T, inst.d
    peers = [j for j in inst.members(inst.labels[i]) if j != i]
    Xi = inst.x[i]
    center = inst.centers[inst.labels[i]]
    out = np.empty((replays, d))
    for start in range(0, replays, chunk):
        r = min(chunk, replays - start)
        theta = center + inst.nu * rng.standard_normal((r, d))
        Y = Xi @ theta.T + inst.sigma * rng.standard_normal((T, r))
        for j in peers:
            Y += inst.x[j] @ (inst.tau * rng.standard_normal((d, r)))
        out[start : start + r] = solve_least_squares(Xi, Y).coefficients.T
    return out


def check_ar_decomposition(inst, replays: int = 10_000, seed=0, series=None, tolerance=None, reference="formula") -> BoundReport:
    """Compare the replayed covariance and mean of the AR estimates with the closed form.

    ``reference`` picks the matrix compared against: ``"formula"``
    (independent-over-time cross terms) or ``"exact"``. A series passes when
    the relative Frobenius error is at most ``tolerance`` (default
    ``3/sqrt(R) + 0.05``) and every coordinate of the mean is within three
    standard errors of its cluster center.
    """
    _check_trials(replays)
    tol = 3.0 / math.sqrt(replays) + 0.05 if tolerance is None else tolerance
    cov_fn = {"formula": ar_covariance_formula, "exact": ar_covariance_exact}[reference]
    series = range(inst.n) if series is None else series
    details = []
    children = _seeds(seed, inst.n)
    for i in series:
        target = cov_fn(inst, i)
        est = replay_ar_estimates(inst, i, replays, children[i])
        emp = np.cov(est, rowvar=False, ddof=1).reshape(inst.d, inst.d)
        rel = float(np.linalg.norm(emp - target) / np.linalg.norm(target))
        mean = est.mean(axis=0)
        se = np.sqrt(np.diag(emp) / replays)
        center = inst.centers[inst.labels[i]]
        z = np.abs(mean - center) / np.where(se > 0, se, np.inf)
        mean_ok = bool(np.all(np.where(se > 0, z <= 3.0, mean == center)))
        details.append(
            {
                "series": int(i),
                "relative_frobenius": rel,
                "max_mean_z": float(np.max(np.where(se > 0, z, 0.0))),
                "mean_ok": mean_ok,
                "success": bool(rel <= tol and mean_ok),
                "empirical_cov": emp.tolist(),
                "reference_cov": target.tolist(),
            }
        )
    successes = sum(d["success"] for d in details)
    return BoundReport(
        "ar_decomposition",
        len(details),
        successes,
        tol,
        successes == len(details),
        f"relative Frobenius <= {tol:.4g} against the {reference} covariance and mean within 3 SE, every series",
        {"replays": replays, "seed": _jsonable(seed), "reference": reference, "n": inst.n, "T": inst.T, "d": inst.d},
        details,
    )


# ------------------------------------------------------------- recovery

def _fit_thetas(inst) -> np.ndarray:
    """``d x n`` least-squares AR estimates (no ridge)."""
    return np.column_stack([solve_least_squares(inst.x[i], inst.y[i]).coefficients for i in range(inst.n)])


def check_exact_recovery(
    n=200,
    k=4,
    d=5,
    T=500,
    nu=0.1,
    sigma=0.1,
    tau=0.1,
    s=2.0,
    trials=100,
    beta=1.0,
    rho=None,
    seed=0,
    workers=1,
) -> BoundReport:
    """Spectral clustering of AR estimates with centers ``s`` times the threshold apart.

    Passes when the exact-recovery rate reaches ``1 - exp(-0.08 n)`` less a
    two-sigma allowance. Runs with ``s < 1`` are probes: reported, never failed.
    """
    _check_trials(trials)
    threshold = separation_threshold(n, k, d, T, nu, sigma, tau, beta, rho)
    sep = _separation(s, threshold)

    def trial(child):
        inst = gen_mlr_instance(n, k, T, d, nu, sigma, tau, sep, isotropic=True, seed=child)
        est = spectral_cluster(_fit_thetas(inst), k, seed=seed_sequence(child).spawn(4)[3])
        err = clustering_error(est, inst.labels)
        return {"clustering_error": err, "success": err == 0}

    details = parallel_map(trial, _seeds(seed, trials), workers)
    successes = sum(d["success"] for d in details)
    fail_p = math.exp(-0.08 * n)
    target = 1.0 - fail_p
    need = target - _mc_slack(max(fail_p, 1.0 / trials), trials)
    probe = s < 1
    return BoundReport(
        "exact_recovery",
        trials,
        successes,
        target,
        True if probe else successes / trials >= need,
        "probe (no pass rule)" if probe else f"recovery rate >= {need:.4g}",
        {"n": n, "k": k, "d": d, "T": T, "nu": nu, "sigma": sigma, "tau": tau, "s": s,
         "beta": beta, "rho": k / n if rho is None else rho, "separation": sep, "seed": _jsonable(seed)},
        details,
        probe,
    )


# ------------------------------------------------------------ VAR error

def oracle_identity_gap(inst, model, cluster_members) -> float:
    """Max deviation from ``Gamma_hat = Gamma* + (1/T) X^T eps`` on a whitened design."""
    X = inst.stacked_design(cluster_members)
    truth = inst.true_gamma(inst.labels[cluster_members[0]])
    pred = truth + (X.T @ inst.eps[cluster_members].T).T / inst.T
    return float(np.max(np.abs(model.gamma - pred)))


def check_var_bound(
    m=2, d=3, T=1000, sigma=1.0, delta=0.1, trials=500, nu=0.0, tau=0.0, seed=0, workers=1, bound_sigma=None
) -> BoundReport:
    """Oracle per-cluster VAR error against its high-probability bound.

    Each trial fits one cluster of ``m`` series on a fresh whitened design.
    Passes when the bound holds in at least ``1 - delta - 2 sqrt(delta/trials)``
    of trials, the mean squared error stays within ``1.1 sigma^2 m^2 d / T`` and
    the closed-form error identity holds to 1e-10. ``bound_sigma`` evaluates
    the bound at a noise level other than the simulated one.
    """
    _check_trials(trials)
    bs = sigma if bound_sigma is None else bound_sigma
    bound = var_error_bound(m, d, T, bs, delta)
    mse_limit = 1.1 * bs**2 * m * m * d / T

    def trial(child):
        inst = gen_mlr_instance(m, 1, T, d, nu, sigma, tau, 1.0, isotropic=True, seed=child)
        members = np.arange(m)
        model = fit_mlr_var(inst, members)
        err = float(np.linalg.norm(model.gamma - inst.true_gamma(0)))
        gap = oracle_identity_gap(inst, model, members)
        return {"error": err, "identity_gap": gap, "success": _within(err, bound)}

    details = parallel_map(trial, _seeds(seed, trials), workers)
    successes = sum(d["success"] for d in details)
    mse = float(np.mean([d["error"] ** 2 for d in details]))
    gap = max(d["identity_gap"] for d in details)
    need = 1.0 - delta - _mc_slack(delta, trials)
    ok = successes / trials >= need and _within(mse, mse_limit) and gap <= 1e-10
    return BoundReport(
        "var_bound",
        trials,
        successes,
        bound,
        ok,
        f"rate >= {need:.4g}, mse <= {mse_limit:.4g}, identity gap <= 1e-10",
        {"m": m, "d": d, "T": T, "sigma": sigma, "bound_sigma": bs, "delta": delta, "nu": nu, "tau": tau,
         "mse": mse, "mse_limit": mse_limit, "max_identity_gap": gap, "seed": _jsonable(seed)},
        details,
    )


def check_end_to_end(
    n=40,
    k=4,
    d=2,
    T=2000,
    nu=0.1,
    sigma=0.5,
    tau=0.1,
    delta=0.1,
    trials=200,
    s=1.0,
    beta=1.0,
    rho=None,
    seed=0,
    workers=1,
) -> BoundReport:
    """Full estimate-cluster-fit run on MLR instances.

    A trial succeeds when spectral clustering is exact and every cluster's
    VAR error is within the max-over-clusters bound (``log(k/delta)``).
    Passes when the rate reaches ``1 - delta - exp(-0.08 n) - 2 sqrt(delta/trials)``.
    """
    _check_trials(trials)
    m = n // k
    sep = _separation(s, separation_threshold(n, k, d, T, nu, sigma, tau, beta, rho))
    bound = var_error_bound(m, d, T, sigma, delta, k=k)

    def trial(child):
        inst = gen_mlr_instance(n, k, T, d, nu, sigma, tau, sep, isotropic=True, seed=child)
        est = spectral_cluster(_fit_thetas(inst), k, seed=seed_sequence(child).spawn(4)[3])
        cerr = clustering_error(est, inst.labels)
        worst = float("nan")
        if cerr == 0:
            errs = []
            for c, members in est.clusters():
                model = fit_mlr_var(inst, members)
                errs.append(np.linalg.norm(model.gamma - inst.true_gamma(inst.labels[members[0]])))
            worst = float(max(errs))
        return {"clustering_error": cerr, "max_error": worst, "success": bool(cerr == 0 and _within(worst, bound))}

    details = parallel_map(trial, _seeds(seed, trials), workers)
    successes = sum(d["success"] for d in details)
    need = 1.0 - delta - math.exp(-0.08 * n) - _mc_slack(delta, trials)
    return BoundReport(
        "end_to_end",
        trials,
        successes,
        bound,
        successes / trials >= need,
        f"rate >= {need:.4g}",
        {"n": n, "k": k, "d": d, "T": T, "nu": nu, "sigma": sigma, "tau": tau, "delta": delta, "s": s,
         "beta": beta, "rho": k / n if rho is None else rho, "separation": sep, "seed": _jsonable(seed)},
        details,
    )


def _jsonable(seed):
    return seed if isinstance(seed, (int, type(None))) else str(seed)
