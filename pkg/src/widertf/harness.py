"""Config-driven experiment harness: synthetic sweeps, bound curves, CSV.

A sweep fixes one scenario draw (transfer function and covariance structure)
per sweep, varies one parameter over a list of values, runs n_trials
Monte-Carlo realizations per value, and aggregates both error metrics with
95% confidence intervals. Bounds, when requested, are evaluated once per
sweep point at the true parameters.

RNG streams are derived from (base_seed, sweep point index, trial index), so
trials are reproducible in any execution order and the CSV is byte-identical
across runs with the same config and seed.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .covariance import SpectralSpatialCovariance, sample_covariance
from .crb import conditional_crb, unconditional_crb
from .rtf import covariance_whitening, normalize_rtf, svd_direct
from .scenario import (
    ScenarioConfig,
    build_truth,
    sample_realizations,
    sample_source,
    trial_rng,
)

__all__ = [
    "SweepSpec",
    "ResultRow",
    "CSV_COLUMNS",
    "run_sweep",
    "run_crb_curves",
    "write_csv",
    "max_workers",
]

SWEEPABLE = ("upsilon_f", "rho_f", "L", "snr_db")
METHODS = ("svd-direct", "cw", "svd-direct-orig-phase", "cw-orig-phase")

CSV_COLUMNS = [
    "scenario", "swept_parameter", "value", "method", "metric",
    "mean", "ci_lo", "ci_hi", "n_trials", "seed",
]

# RNG stream tags within a sweep point; trials use 1 + trial index.
_TRUTH_STREAM = 0
_COND_BOUND_STREAM = 1_000_000_007


@dataclass(frozen=True)
class SweepSpec:
    scenario: str                      # "equicorrelated" | "varcorrelated"
    swept_parameter: str               # one of SWEEPABLE
    values: tuple
    fixed: ScenarioConfig
    n_trials: int = 200
    methods: tuple = ("svd-direct", "cw")
    compute_bounds: bool = True
    base_seed: int = 0
    noise_covariance: str = "true"     # "true" | "estimated"

    def __post_init__(self):
        if self.scenario not in ("equicorrelated", "varcorrelated"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.swept_parameter not in SWEEPABLE:
            raise ValueError(f"swept_parameter must be one of {SWEEPABLE}")
        if not self.values:
            raise ValueError("values must be nonempty")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.noise_covariance not in ("true", "estimated"):
            raise ValueError("noise_covariance must be 'true' or 'estimated'")


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    swept_parameter: str
    value: float
    method: str
    metric: str
    mean: float
    ci_lo: float
    ci_hi: float
    n_trials: int
    seed: int

    def __post_init__(self):
        if not (self.ci_lo <= self.mean <= self.ci_hi):
            raise ValueError("confidence interval must bracket the mean")


def max_workers():
    """Worker-pool size; capped by the WIDERTF_MAX_WORKERS environment variable."""
    cap = os.environ.get("WIDERTF_MAX_WORKERS")
    if cap is None:
        return 1
    return max(1, int(cap))


def _point_config(spec, value):
    cfg = spec.fixed
    if spec.scenario == "equicorrelated" and cfg.powers != "equal":
        cfg = replace(cfg, powers="equal")
    if spec.scenario == "varcorrelated" and cfg.powers != "random-uniform":
        cfg = replace(cfg, powers="random-uniform")
    if spec.swept_parameter == "L":
        return replace(cfg, L=int(value))
    return replace(cfg, **{spec.swept_parameter: float(value)})


def _estimator(name):
    # Synthetic frames are independent realizations, so the orig-phase
    # variants coincide with the plain estimators here.
    return svd_direct if name.startswith("svd-direct") else covariance_whitening


def _run_trial(args):
    spec, point_index, trial, cfg = args
    rng = trial_rng(spec.base_seed, point_index, 1 + trial)
    truth = build_truth(cfg, trial_rng(spec.base_seed, _TRUTH_STREAM))
    X, V, _ = sample_realizations(truth, cfg.L, rng, return_source=True)
    Rx_hat = sample_covariance(X)
    if spec.noise_covariance == "estimated":
        Rv = sample_covariance(V)
    else:
        Rv = SpectralSpatialCovariance(K=truth.K, M=truth.M, matrix=truth.R_v)
    a_true = normalize_rtf(truth.a, truth.K, truth.M)
    out = {}
    for name in spec.methods:
        a_hat = _estimator(name)(Rx_hat, Rv, truth.K, truth.M)
        out[name] = (
            metrics.rmse_db(a_hat, a_true),
            metrics.hermitian_angle(a_hat, a_true),
        )
    return out


def _bound_rows(spec, point_index, value, cfg, truth):
    rows = []
    s = sample_source(truth, cfg.L, trial_rng(spec.base_seed, point_index, _COND_BOUND_STREAM))
    cond = conditional_crb(s, truth.R_v, truth.a, truth.K, truth.M)
    uncond = unconditional_crb(truth.a, truth.R_s, truth.R_v, cfg.L, truth.K, truth.M)
    for name, res in (("crb-conditional", cond), ("crb-unconditional", uncond)):
        db = metrics.bound_to_db(res.bounds)
        rows.append(ResultRow(
            scenario=spec.scenario, swept_parameter=spec.swept_parameter,
            value=float(value), method=name, metric="rmse_db",
            mean=db, ci_lo=db, ci_hi=db, n_trials=0, seed=spec.base_seed,
        ))
    return rows


def run_sweep(spec: SweepSpec):
    """Run the sweep and return the aggregated result rows."""
    rows = []
    workers = max_workers()
    for i, value in enumerate(spec.values):
        cfg = _point_config(spec, value)
        truth = build_truth(cfg, trial_rng(spec.base_seed, _TRUTH_STREAM))
        tasks = [(spec, i, t, cfg) for t in range(spec.n_trials)]
        if workers > 1 and spec.n_trials > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_trial, tasks, chunksize=8))
        else:
            results = [_run_trial(t) for t in tasks]
        for name in spec.methods:
            for metric_name, j in (("rmse_db", 0), ("hermitian_angle_rad", 1)):
                samples = [r[name][j] for r in results]
                if len(samples) >= 2:
                    mean, lo, hi = metrics.confidence_interval_95(samples)
                else:
                    mean = lo = hi = float(samples[0])
                rows.append(ResultRow(
                    scenario=spec.scenario, swept_parameter=spec.swept_parameter,
                    value=float(value), method=name, metric=metric_name,
                    mean=mean, ci_lo=lo, ci_hi=hi,
                    n_trials=spec.n_trials, seed=spec.base_seed,
                ))
        if spec.compute_bounds:
            rows.extend(_bound_rows(spec, i, value, cfg, truth))
    rows.sort(key=lambda r: (r.swept_parameter, r.value, r.method, r.metric))
    return rows


def run_crb_curves(spec: SweepSpec):
    """Bound curves only (no Monte-Carlo trials)."""
    rows = []
    for i, value in enumerate(spec.values):
        cfg = _point_config(spec, value)
        truth = build_truth(cfg, trial_rng(spec.base_seed, _TRUTH_STREAM))
        rows.extend(_bound_rows(spec, i, value, cfg, truth))
    rows.sort(key=lambda r: (r.swept_parameter, r.value, r.method, r.metric))
    return rows


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def write_csv(rows, path):
    """Write result rows with a fixed column order and 9 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def speech_rows_to_results(rows, swept_parameter="snr_db", value=0.0, seed=0):
    """Aggregate per-repetition speech metric rows into ResultRows."""
    by_method = {}
    for row in rows:
        by_method.setdefault(row["method"], []).append(row["hermitian_angle_rad"])
    out = []
    for method, samples in sorted(by_method.items()):
        if len(samples) >= 2:
            mean, lo, hi = metrics.confidence_interval_95(samples)
        else:
            mean = lo = hi = float(samples[0])
        out.append(ResultRow(
            scenario="speech", swept_parameter=swept_parameter, value=float(value),
            method=method, metric="hermitian_angle_rad",
            mean=mean, ci_lo=lo, ci_hi=hi, n_trials=len(samples), seed=seed,
        ))
    return out
