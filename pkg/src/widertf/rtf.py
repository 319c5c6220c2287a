"""RTF estimators: wideband SVD-direct and the narrowband CW baseline.

Both consume a noisy and a noise-only spectral-spatial covariance and return
a relative transfer function, i.e. the transfer function normalized so the
reference-sensor entry in every frequency bin equals one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .covariance import SpectralSpatialCovariance, estimate_target_covariance
from .scenario import stacked_index

__all__ = [
    "Rtf",
    "DegenerateReferenceError",
    "normalize_rtf",
    "svd_direct",
    "covariance_whitening",
]

# Per-bin relative threshold below which the reference entry counts as zero.
_REF_TOL = 1e-12
# A row block this far below the full matrix norm carries no usable signal.
_ZERO_BLOCK_TOL = 1e-12
# Principal generalized eigenvalue this close to 1 means no dominant target.
_LOW_CONFIDENCE_MARGIN = 1e-6


class DegenerateReferenceError(ValueError):
    """Reference-sensor entry vanishes in some frequency bin."""

    def __init__(self, bin_index):
        self.bin_index = bin_index
        super().__init__(f"reference entry is numerically zero at bin {bin_index}")


@dataclass(frozen=True)
class Rtf:
    K: int
    M: int
    ref_sensor: int
    values: np.ndarray  # (KM,) complex, reference entries exactly 1
    undetermined: np.ndarray = field(default=None, repr=False)   # (K,) bool
    low_confidence: np.ndarray = field(default=None, repr=False)  # (K,) bool

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.K * self.M,):
            raise ValueError(f"values must have shape ({self.K * self.M},)")
        ref_idx = np.arange(self.K) * self.M + self.ref_sensor
        if not np.all(vals[ref_idx] == 1.0):
            raise ValueError("reference-sensor entries must equal 1 exactly")
        object.__setattr__(self, "values", vals)
        for name in ("undetermined", "low_confidence"):
            flags = getattr(self, name)
            flags = np.zeros(self.K, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
            object.__setattr__(self, name, flags)

    def bin(self, k):
        return self.values[k * self.M:(k + 1) * self.M]


def _normalize_bin(a_k, r, k):
    ref = a_k[r]
    if abs(ref) < _REF_TOL * np.linalg.norm(a_k):
        raise DegenerateReferenceError(k)
    out = a_k / ref
    out[r] = 1.0
    return out


def normalize_rtf(a, K, M, ref_sensor=0, **flags):
    """Divide every frequency bin by its reference-sensor entry."""
    a = np.asarray(a, dtype=complex)
    if a.shape != (K * M,):
        raise ValueError(f"expected transfer function of length {K * M}")
    values = np.empty_like(a)
    for k in range(K):
        values[k * M:(k + 1) * M] = _normalize_bin(a[k * M:(k + 1) * M].copy(), ref_sensor, k)
    return Rtf(K=K, M=M, ref_sensor=ref_sensor, values=values, **flags)


def svd_direct(Rx_hat, Rv_hat, K, M, ref_sensor=0) -> Rtf:
    """Wideband estimator: per-bin SVD of the row blocks of the recovered
    target covariance.

    The recovered KM x KM target covariance is split into K row blocks of
    shape M x KM; the left principal singular vector of block k estimates the
    transfer function at bin k up to scale, which the normalization removes.
    Bins whose block is numerically zero are returned as all-ones and flagged
    undetermined.
    """
    R_d = estimate_target_covariance(Rx_hat, Rv_hat, K)
    total_norm = np.linalg.norm(R_d.matrix)
    values = np.empty(K * M, dtype=complex)
    undetermined = np.zeros(K, dtype=bool)
    for k in range(K):
        block = R_d.matrix[k * M:(k + 1) * M, :]
        if np.linalg.norm(block) < _ZERO_BLOCK_TOL * max(total_norm, np.finfo(float).tiny):
            values[k * M:(k + 1) * M] = 1.0
            undetermined[k] = True
            continue
        u, _, _ = linalg.svd(block)
        values[k * M:(k + 1) * M] = _normalize_bin(u[:, 0].copy(), ref_sensor, k)
    return Rtf(K=K, M=M, ref_sensor=ref_sensor, values=values, undetermined=undetermined)


def covariance_whitening(Rx_hat, Rv_hat, K, M, ref_sensor=0) -> Rtf:
    """Narrowband baseline: per-bin GEVD of the diagonal M x M blocks.

    The principal right generalized eigenvector u1 of (Rx(k,k), Rv(k,k)) is
    mapped back through Rv(k,k) (the left-eigenvector direction), then
    normalized by the reference entry. Bins where the principal generalized
    eigenvalue does not exceed 1 are flagged low-confidence.
    """
    if Rx_hat.K != K or Rx_hat.M != M:
        raise ValueError("Rx_hat dimensions disagree with (K, M)")
    values = np.empty(K * M, dtype=complex)
    low_confidence = np.zeros(K, dtype=bool)
    for k in range(K):
        d, u, q = linalg.gevd_hpsd(Rx_hat.block(k, k), Rv_hat.block(k, k))
        a_k = q[:, 0]  # Rv(k,k) @ u1
        values[k * M:(k + 1) * M] = _normalize_bin(a_k.copy(), ref_sensor, k)
        if d[0] <= 1.0 + _LOW_CONFIDENCE_MARGIN:
            low_confidence[k] = True
    return Rtf(K=K, M=M, ref_sensor=ref_sensor, values=values, low_confidence=low_confidence)
