"""Error metrics and sweep statistics."""

from __future__ import annotations

import numpy as np

__all__ = [
    "RMSE_FLOOR_DB",
    "rmse_db",
    "hermitian_angle",
    "snr_db",
    "confidence_interval_95",
    "bound_to_db",
]

# Exact matches would give -inf dB; keep CSV numeric instead.
RMSE_FLOOR_DB = -300.0


def _check_compatible(a_hat, a):
    if (a_hat.K, a_hat.M, a_hat.ref_sensor) != (a.K, a.M, a.ref_sensor):
        raise ValueError("RTFs have mismatched (K, M, ref_sensor)")


def rmse_db(a_hat, a):
    """10 log10 sqrt(||a_hat - a||^2 / KM), floored at -300 dB."""
    _check_compatible(a_hat, a)
    mse = np.sum(np.abs(a_hat.values - a.values) ** 2) / (a.K * a.M)
    if mse <= 0.0:
        return RMSE_FLOOR_DB
    return max(10.0 * np.log10(np.sqrt(mse)), RMSE_FLOOR_DB)


def hermitian_angle(a_hat, a, mask=None):
    """Mean per-bin angle acos(|a_hat_k^H a_k| / (||a_hat_k|| ||a_k||)).

    Bins where either vector has zero norm (or where ``mask`` is False) are
    excluded from the average.
    """
    _check_compatible(a_hat, a)
    K, M = a.K, a.M
    angles = []
    for k in range(K):
        if mask is not None and not mask[k]:
            continue
        u = a_hat.values[k * M:(k + 1) * M]
        v = a.values[k * M:(k + 1) * M]
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            continue
        c = np.clip(abs(np.vdot(u, v)) / (nu * nv), 0.0, 1.0)
        angles.append(np.arccos(c))
    if not angles:
        raise ValueError("no bins left to average the Hermitian angle over")
    return float(np.mean(angles))


def snr_db(R_d, R_v):
    """10 log10(trace(R_d) / trace(R_v))."""
    tr_d = np.trace(R_d).real
    tr_v = np.trace(R_v).real
    if tr_d <= 0.0 or tr_v <= 0.0:
        raise ValueError("SNR undefined for non-positive traces")
    return 10.0 * np.log10(tr_d / tr_v)


def confidence_interval_95(samples):
    """Normal-approximation 95% CI: mean +/- 1.96 * std / sqrt(n)."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 2:
        raise ValueError("need at least two samples for a confidence interval")
    mean = float(np.mean(samples))
    half = 1.96 * float(np.std(samples, ddof=1)) / np.sqrt(n)
    return mean, mean - half, mean + half


def bound_to_db(bounds):
    """Map per-entry variance bounds to the RMSE dB scale.

    10 log10 sqrt(mean per-entry bound), so bound curves share units with
    :func:`rmse_db`.
    """
    mean_bound = float(np.mean(bounds))
    if mean_bound <= 0.0:
        return RMSE_FLOOR_DB
    return max(10.0 * np.log10(np.sqrt(mean_bound)), RMSE_FLOOR_DB)
