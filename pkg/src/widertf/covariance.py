"""Spectral-spatial covariance estimation and target-covariance recovery.

The KM x KM covariances carry (K, M) metadata so that the M x M bifrequency
block of any two frequency bins can be addressed directly. Estimation from
overlapping STFT frames uses the phase-adjusted estimator; the rank-limited
target covariance is recovered from the GEVD of the (noisy, noise) pencil.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .scenario import FrameBlock

__all__ = [
    "SpectralSpatialCovariance",
    "sample_covariance",
    "phase_adjusted_covariance",
    "estimate_target_covariance",
]


@dataclass(frozen=True)
class SpectralSpatialCovariance:
    K: int
    M: int
    matrix: np.ndarray  # (KM, KM) Hermitian

    def __post_init__(self):
        mat = linalg.as_hermitian(self.matrix, name="spectral-spatial covariance")
        if mat.shape[0] != self.K * self.M:
            raise ValueError(
                f"matrix order {mat.shape[0]} does not match K*M = {self.K * self.M}"
            )
        object.__setattr__(self, "matrix", mat)

    def block(self, i, j):
        """M x M bifrequency block between frequency bins i and j (0-based)."""
        M = self.M
        return self.matrix[i * M:(i + 1) * M, j * M:(j + 1) * M]


def sample_covariance(X: FrameBlock) -> SpectralSpatialCovariance:
    """Plain sample covariance (1/L) sum_l x(l) x(l)^H."""
    if X.L < 1:
        raise ValueError("need at least one frame")
    # frames rows are x(l)^T, so sum_l x(l) x(l)^H = frames^T conj(frames).
    mat = X.frames.T @ X.frames.conj() / X.L
    return SpectralSpatialCovariance(K=X.K, M=X.M, matrix=mat)


def phase_adjusted_covariance(X: FrameBlock) -> SpectralSpatialCovariance:
    """Sample covariance of phase-adjusted frames.

    Each frame l (l = 1..L, first frame of the analyzed segment is l = 1) at
    bin k is rotated by exp(-j 2 pi l R k / fft_size) before the outer
    products, referencing all frames' phases to a common origin. Diagonal
    blocks coincide with the plain estimator; off-diagonal blocks acquire the
    factor exp(-j 2 pi l R (k1 - k2) / fft_size).
    """
    if not X.has_frame_meta:
        raise ValueError(
            "phase-adjusted estimation needs frame metadata (block_shift, fft_size)"
        )
    if X.L < 1:
        raise ValueError("need at least one frame")
    ell = np.arange(1, X.L + 1)
    k = np.repeat(np.arange(X.K), X.M)
    phase = np.exp(-2j * np.pi * np.outer(ell, k) * X.block_shift / X.fft_size)
    adjusted = X.frames * phase
    mat = adjusted.T @ adjusted.conj() / X.L
    return SpectralSpatialCovariance(K=X.K, M=X.M, matrix=mat)


def estimate_target_covariance(Rx_hat, Rv_hat, K) -> SpectralSpatialCovariance:
    """Recover the rank-<=K target covariance from the (Rx, Rv) pencil.

    Keeps the K largest generalized eigenpairs of ``Rx u = Rv u d`` (with
    U^H Rv U = I, Q = Rv U) and returns ``Q_x max(D_x - I, 0) Q_x^H``.
    """
    if not isinstance(Rx_hat, SpectralSpatialCovariance):
        raise TypeError("Rx_hat must be a SpectralSpatialCovariance")
    if Rx_hat.K != Rv_hat.K or Rx_hat.M != Rv_hat.M:
        raise ValueError("Rx_hat and Rv_hat dimensions differ")
    KM = Rx_hat.K * Rx_hat.M
    if not (1 <= K <= KM):
        raise ValueError(f"K must lie in [1, {KM}], got {K}")
    d, u, q = linalg.gevd_hpsd(Rx_hat.matrix, Rv_hat.matrix)
    q_x = q[:, :K]
    gains = np.clip(d[:K] - 1.0, 0.0, None)
    mat = (q_x * gains) @ q_x.conj().T
    return SpectralSpatialCovariance(K=Rx_hat.K, M=Rx_hat.M, matrix=mat)
