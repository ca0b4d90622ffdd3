"""Command-line interface: ``clusterconquer <command> [options]``.

Usage errors exit with status 2, runtime failures with 1. Options may also
come from a ``--config`` file of ``key=value`` lines (keys are option names
with dashes or underscores); explicit flags win over the file, the file
over built-in defaults.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__, kernels
from .clustering import write_assignment
from .dataset import FIVEMIN_LAGS, HOURLY_LAGS, LagSpec, TimeSeriesDataset, load_csv, write_csv
from .errors import ArgumentError, ClusterConquerError
from .experiments import sweep_k, time_var_fits
from .metrics import EvalConfig, rolling_validate, write_metric_table
from .pipeline import PipelineConfig, fit_pipeline, forecast, load_model, save_model
from .simgen import GenConfig, gen_mlr_instance, gen_synthetic_ts, write_truth
from .theory import check_ar_decomposition, check_end_to_end, check_exact_recovery, check_var_bound


class UsageError(Exception):
    pass


# ----------------------------------------------------------------- parsing

def parse_lags(text: str) -> tuple:
    """``hourly``, ``fivemin`` or a comma list whose items may be ranges ``a-b``."""
    key = text.strip().lower()
    if key == "hourly":
        return tuple(int(v) for v in HOURLY_LAGS)
    if key == "fivemin":
        return tuple(int(v) for v in FIVEMIN_LAGS)
    out = []
    try:
        for part in key.split(","):
            if "-" in part:
                a, b = part.split("-")
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
        return LagSpec(tuple(out)).lag_indices
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid lag list {text!r}: {exc}") from None


def parse_k(text: str):
    if str(text).strip().lower() == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be an integer or 'auto', got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be at least 1")
    return k


def parse_int_list(text: str) -> list:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}") from None


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def read_config_file(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value file of option defaults")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=positive_int, default=os.cpu_count() or 1)


def _model_opts(p: argparse.ArgumentParser):
    p.add_argument("--data", help="panel CSV, one series per row")
    p.add_argument("--lags", type=parse_lags, default="hourly", help="hourly | fivemin | 1,2,3 | 1-20")
    p.add_argument("--k", type=parse_k, default="auto", help="number of clusters or 'auto' (n // 10)")
    p.add_argument("--cluster", choices=["spectral", "knn-graph", "random", "none"], default="knn-graph")
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--block-size", type=positive_int, default=None,
                   help="sample one point per block of this length instead of every valid time")
    p.add_argument("--knn-neighbors", type=positive_int, default=11)


def _eval_opts(p: argparse.ArgumentParser):
    p.add_argument("--horizon", type=positive_int, default=24)
    p.add_argument("--windows", type=positive_int, default=7)


def build_parser() -> argparse.ArgumentParser:
    return _build()[0]


def _build():
    subs = {}
    parser = argparse.ArgumentParser(prog="clusterconquer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = subs["simulate"] = sub.add_parser("simulate", help="write a synthetic clustered panel and its ground truth")
    _common(p)
    p.add_argument("--n", type=positive_int, default=200)
    p.add_argument("--k-true", type=positive_int, default=10)
    p.add_argument("--lag", type=positive_int, default=10)
    p.add_argument("--period", type=positive_int, default=10)
    p.add_argument("--T", type=positive_int, default=1000)
    p.add_argument("--noise-std", type=float, default=1e-2)

    p = subs["fit"] = sub.add_parser("fit", help="fit a model and save it")
    _common(p)
    _model_opts(p)

    p = subs["forecast"] = sub.add_parser("forecast", help="forecast from a saved model")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--model", help="model file written by 'fit'")
    p.add_argument("--horizon", type=positive_int, default=24)

    p = subs["evaluate"] = sub.add_parser("evaluate", help="rolling-origin evaluation")
    _common(p)
    _model_opts(p)
    _eval_opts(p)
    p.add_argument("--model", help="evaluate this saved model without refitting")

    p = subs["sweep-k"] = sub.add_parser("sweep-k", help="scores over a list of cluster counts plus baselines")
    _common(p)
    _model_opts(p)
    _eval_opts(p)
    p.add_argument("--k-list", type=parse_int_list, default="5,10,20,40")

    p = subs["bench-timing"] = sub.add_parser("bench-timing", help="median stage-3 fit time per cluster count")
    _common(p)
    _model_opts(p)
    p.add_argument("--k-list", type=parse_int_list, default="5,10,20,40")
    p.add_argument("--repeats", type=positive_int, default=5)

    p = subs["verify-theory"] = sub.add_parser("verify-theory", help="Monte Carlo checks of the recovery and error bounds")
    _common(p)
    p.add_argument("--trials", type=int, default=None, help="override the trial count of every check")
    p.add_argument("--replays", type=int, default=10_000)
    p.add_argument("--reference", choices=["formula", "exact"], default="formula",
                   help="covariance the AR replay is compared against")
    p.add_argument("--separation-multiplier", type=float, default=2.0)
    p.add_argument("--sigma-scale", type=float, default=1.0)
    return parser, subs


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = _build()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            values = read_config_file(known.config)
        except OSError as exc:
            parser.error(f"cannot read config file {known.config}: {exc.strerror}")
        except UsageError as exc:
            parser.error(str(exc))
        command = next((a for a in argv if not a.startswith("-")), None)
        if command in subs:
            sp = subs[command]
            dests = set(vars(sp.parse_args([])))
            unknown = sorted(set(values) - dests)
            if unknown:
                parser.error(f"unknown config keys: {', '.join(unknown)}")
            sp.set_defaults(**values)
    return parser.parse_args(argv)


# ------------------------------------------------------------------ helpers

def _load_data(path) -> TimeSeriesDataset:
    if not path:
        raise UsageError("--data is required")
    if not Path(path).exists():
        raise UsageError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for _, r in zip(range(2), csv.reader(fh))]
    # a non-numeric first cell on a data row means the rows carry ids
    try:
        float(rows[-1][0])
        id_column = False
    except (ValueError, IndexError):
        id_column = True
    return load_csv(path, id_column=id_column)


def _pipeline_config(args, n: int) -> PipelineConfig:
    k = args.k
    if isinstance(k, int) and k > n:
        raise UsageError(f"--k {k} exceeds the number of series ({n})")
    return PipelineConfig(
        lags=args.lags,
        k=k,
        cluster=args.cluster,
        ridge=args.ridge,
        seed=args.seed,
        block_mode="blocked" if args.block_size else "sliding",
        block_size=args.block_size,
        knn_neighbors=args.knn_neighbors,
    )


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _echo(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("workers", "config"):
            continue
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def _manifest(out: Path, command: str, args, outputs, extra=None):
    lines = [{"record": "config", "command": command, "config": _echo(args), "backend": kernels.BACKEND,
              "version": __version__, **(extra or {})}]
    lines += [{"record": "output", "path": Path(p).name, "sha256": _sha256(p)} for p in outputs]
    path = out / f"manifest-{command}.jsonl"
    path.write_text("".join(json.dumps(rec, sort_keys=True) + "\n" for rec in lines))


def _write_matrix(path, ids, matrix):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series_id", *[f"h{h}" for h in range(1, matrix.shape[1] + 1)]])
        for sid, row in zip(ids, matrix):
            w.writerow([sid, *[repr(float(v)) for v in row]])


# ----------------------------------------------------------------- commands

def cmd_simulate(args, out: Path) -> int:
    if args.n % args.k_true:
        raise UsageError(f"--k-true {args.k_true} must divide --n {args.n}")
    if args.lag > args.T:
        raise UsageError("--lag must not exceed --T")
    cfg = GenConfig(n=args.n, k_true=args.k_true, d=args.lag, T=args.T, period=args.period,
                    noise_std=args.noise_std, seed=args.seed)
    ds, truth, params = gen_synthetic_ts(cfg)
    data_path, truth_path, labels_path = out / "data.csv", out / "truth.json", out / "labels.csv"
    write_csv(ds, data_path, id_column=True)
    write_truth(params, ds.series_ids, truth_path)
    write_assignment(truth, ds.series_ids, labels_path)
    print(json.dumps({"gen_config": cfg.__dict__}, sort_keys=True))
    _manifest(out, "simulate", args, [data_path, truth_path, labels_path])
    return 0


def cmd_fit(args, out: Path) -> int:
    ds = _load_data(args.data)
    config = _pipeline_config(args, ds.n)
    model = fit_pipeline(ds, config, args.workers)
    model_path, labels_path = out / "model.ccfm", out / "assignment.csv"
    save_model(model, model_path)
    write_assignment(model.assignment, ds.series_ids, labels_path)
    _manifest(out, "fit", args, [model_path, labels_path],
              {"fingerprint": model.config_fingerprint, "k": model.assignment.k})
    return 0


def _open_model(path):
    if not path:
        raise UsageError("--model is required")
    if not Path(path).is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    return load_model(path)


def cmd_forecast(args, out: Path) -> int:
    model = _open_model(args.model)
    ds = _load_data(args.data)
    pred = forecast(model, ds, args.horizon, args.workers)
    path = out / "forecast.csv"
    _write_matrix(path, ds.series_ids, pred)
    _manifest(out, "forecast", args, [path], {"fingerprint": model.config_fingerprint})
    return 0


def cmd_evaluate(args, out: Path) -> int:
    model = _open_model(args.model) if args.model else None
    ds = _load_data(args.data)
    eval_cfg = EvalConfig(args.horizon, args.windows)
    if model is not None:
        res = rolling_validate(ds, lambda _train: model.forecaster(args.workers), eval_cfg, "fixed", "saved-model")
    else:
        config = _pipeline_config(args, ds.n)
        res = rolling_validate(
            ds, lambda train: fit_pipeline(train, config, args.workers).forecaster(args.workers), eval_cfg,
            "refit", "cluster-and-conquer",
        )
    path = out / "metrics.csv"
    write_metric_table([res], path)
    for name in res.nan_metrics():
        print(f"warning: {name} is NaN (empty denominator)", file=sys.stderr)
    _manifest(out, "evaluate", args, [path], {"cutoffs": res.cutoffs})
    return 0


def cmd_sweep_k(args, out: Path) -> int:
    ds = _load_data(args.data)
    bad = [k for k in args.k_list if k < 1 or k > ds.n]
    if bad:
        raise UsageError(f"cluster counts outside [1, {ds.n}]: {bad}")
    config = _pipeline_config(args, ds.n)
    rows, _ = sweep_k(ds, config, args.k_list, EvalConfig(args.horizon, args.windows), True, args.workers)
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "k", "WAPE", "MAPE", "SMAPE", "wall_time_fit"])
        for r in rows:
            w.writerow([r["method"], r["k"], repr(r["WAPE"]), repr(r["MAPE"]), repr(r["SMAPE"]), f"{r['wall_time_fit']:.6f}"])
    _manifest(out, "sweep-k", args, [])
    return 0


def cmd_bench_timing(args, out: Path) -> int:
    ds = _load_data(args.data)
    bad = [k for k in args.k_list if k < 1 or k > ds.n]
    if bad:
        raise UsageError(f"cluster counts outside [1, {ds.n}]: {bad}")
    config = _pipeline_config(args, ds.n)
    timings = time_var_fits(ds, config, args.k_list, args.repeats, args.workers)
    path = out / "timing.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "median_var_seconds", "repeats"])
        for k, t in timings.items():
            w.writerow([k, f"{t['median']:.6f}", len(t["runs"])])
    _manifest(out, "bench-timing", args, [])
    return 0


def cmd_verify_theory(args, out: Path) -> int:
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.replays < 1:
        raise UsageError("--replays must be at least 1")
    t = args.trials
    sig = args.sigma_scale
    inst = gen_mlr_instance(2, 1, 50, 2, 0.1, 0.1, 0.1, 1.0, isotropic=False, seed=args.seed)
    reports = [
        check_ar_decomposition(inst, args.replays, seed=args.seed, reference=args.reference),
        check_exact_recovery(sigma=0.1 * sig, s=args.separation_multiplier, trials=t or 100,
                             seed=args.seed, workers=args.workers),
        check_var_bound(sigma=1.0 * sig, trials=t or 500, seed=args.seed, workers=args.workers),
        check_end_to_end(sigma=0.5 * sig, trials=t or 200, seed=args.seed, workers=args.workers),
    ]
    path = out / "theory.jsonl"
    path.write_text("".join(r.to_jsonl() for r in reports))
    for r in reports:
        status = "PROBE" if r.probe else ("PASS" if r.passed else "FAIL")
        print(f"{status} {r.claim}: {r.successes}/{r.trials} ({r.criterion})")
    _manifest(out, "verify-theory", args, [path])
    return 0 if all(r.passed for r in reports) else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "sweep-k": cmd_sweep_k,
    "bench-timing": cmd_bench_timing,
    "verify-theory": cmd_verify_theory,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except (UsageError, ArgumentError) as exc:
        print(f"clusterconquer {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        msg = str(exc) if exc.filename is None else f"file not found: {exc.filename}"
        print(f"clusterconquer {args.command}: error: {msg}", file=sys.stderr)
        return 1
    except (ClusterConquerError, ValueError, OSError) as exc:
        print(f"clusterconquer {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
