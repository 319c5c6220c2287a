"""Synthetic ground-truth scenarios and realization sampling.

A scenario fixes the transfer function ``a`` and the second-order statistics
of target and noise over K frequency bins and M sensors. Vectors are stacked
frequency-major: entry ``k*M + m`` (0-based) is frequency bin k, sensor m.

Two families are implemented:

* equicorrelated: unit powers everywhere, constant inter-frequency
  correlation coefficients (rho_f for the target, upsilon_f for the noise),
* varcorrelated: powers drawn uniformly per bin/sensor, cross terms set to
  the correlation coefficient times the geometric mean of the powers.

White sensor noise 40 dB (configurable) below the target power is folded
into both the noise covariance and the draws, so estimators and bounds see
a consistent noise model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg

__all__ = [
    "ScenarioConfig",
    "ScenarioTruth",
    "ScenarioInvalidError",
    "FrameBlock",
    "stacked_index",
    "random_atf",
    "build_equicorrelated",
    "build_varcorrelated",
    "build_truth",
    "scale_to_snr",
    "sample_realizations",
    "trial_rng",
]


class ScenarioInvalidError(ValueError):
    """Requested scenario has no valid (PSD) covariance model."""


@dataclass(frozen=True)
class ScenarioConfig:
    M: int = 2
    K: int = 5
    L: int = 1000
    snr_db: float = -5.0
    rho_f: float = 0.25
    upsilon_f: float = 0.25
    powers: str = "equal"  # "equal" | "random-uniform"
    epsilon: float = 0.01
    sensor_noise_snr_db: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.L < 1:
            raise ValueError("M, K and L must be positive")
        if not (0.0 <= self.rho_f <= 1.0 and 0.0 <= self.upsilon_f <= 1.0):
            raise ValueError("correlation coefficients must lie in [0, 1]")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.powers not in ("equal", "random-uniform"):
            raise ValueError(f"unknown powers mode {self.powers!r}")


@dataclass(frozen=True)
class ScenarioTruth:
    """Ground truth bundle for one synthetic configuration."""

    K: int
    M: int
    a: np.ndarray          # (KM,) transfer function, frequency-major
    R_sbar: np.ndarray     # (K, K) source spectral covariance
    R_s: np.ndarray        # (KM, KM) = R_sbar kron ones(M, M)
    R_v: np.ndarray        # (KM, KM) total noise covariance (incl. sensor noise)
    R_d: np.ndarray        # (KM, KM) target covariance at the sensors
    R_x: np.ndarray        # (KM, KM) = R_d + R_v
    V2: float              # structured-noise scale applied to reach the SNR
    sensor_noise_var: float


@dataclass(frozen=True)
class FrameBlock:
    """L observation frames of length KM, optionally with STFT metadata."""

    K: int
    M: int
    frames: np.ndarray  # (L, KM) complex
    block_shift: int | None = None
    fft_size: int | None = None

    @property
    def L(self):
        return self.frames.shape[0]

    @property
    def has_frame_meta(self):
        return self.block_shift is not None and self.fft_size is not None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=complex)
        if frames.ndim != 2 or frames.shape[1] != self.K * self.M:
            raise ValueError(
                f"frames must have shape (L, {self.K * self.M}), got {frames.shape}"
            )
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain NaN or Inf")
        object.__setattr__(self, "frames", frames)


def stacked_index(k, m, M):
    """0-based position of (frequency k, sensor m) in a stacked vector."""
    return k * M + m


def trial_rng(seed, *stream):
    """Independent RNG stream derived from (seed, stream indices).

    Counter-based derivation so parallel trials are reproducible in any
    execution order.
    """
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream)))


def _complex_normal(rng, size):
    """Circularly symmetric unit-variance complex Gaussian draws."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def random_atf(M, K, rng, ref_sensor=0, min_ref_abs=1e-3):
    """Random transfer function with Re/Im parts i.i.d. uniform on (-1, 1).

    Entries at the reference sensor with modulus below ``min_ref_abs`` are
    redrawn so that normalization by the reference stays well conditioned.
    """
    a = rng.uniform(-1.0, 1.0, size=K * M) + 1j * rng.uniform(-1.0, 1.0, size=K * M)
    for k in range(K):
        i = stacked_index(k, ref_sensor, M)
        while abs(a[i]) < min_ref_abs:
            a[i] = rng.uniform(-1.0, 1.0) + 1j * rng.uniform(-1.0, 1.0)
    return a


def scale_to_snr(R_d, R_v_unit, snr_db):
    """Noise scale V^2 so that 10 log10(tr R_d / tr(V^2 R_v_unit)) = snr_db."""
    tr_d = np.trace(R_d).real
    tr_v = np.trace(R_v_unit).real
    if tr_d <= 0.0 or tr_v <= 0.0:
        raise ScenarioInvalidError("zero-trace covariance, SNR scaling undefined")
    return tr_d / (tr_v * 10.0 ** (snr_db / 10.0))


def _check_psd(mat, name):
    w = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
    if w[0] < -1e-10 * max(w[-1], np.finfo(float).tiny):
        raise ScenarioInvalidError(f"{name} is not positive semidefinite")


def _assemble(cfg, rng, a, R_sbar, R_v_unit):
    """Common tail: scale noise to SNR and add the sensor-noise floor."""
    K, M = cfg.K, cfg.M
    _check_psd(R_sbar, "source spectral covariance")
    _check_psd(R_v_unit, "noise covariance")
    R_s = np.kron(R_sbar, np.ones((M, M)))
    A = np.diag(a)
    R_d = A @ R_s @ A.conj().T
    V2 = scale_to_snr(R_d, R_v_unit, cfg.snr_db)
    # White sensor noise, sensor_noise_snr_db below the trace-average target
    # power. Added after SNR scaling: the configured SNR refers to the
    # structured noise only.
    sensor_var = (np.trace(R_d).real / (K * M)) * 10.0 ** (-cfg.sensor_noise_snr_db / 10.0)
    R_v = V2 * R_v_unit + sensor_var * np.eye(K * M)
    R_x = R_d + R_v
    return ScenarioTruth(
        K=K, M=M, a=a, R_sbar=R_sbar, R_s=R_s, R_v=R_v, R_d=R_d, R_x=R_x,
        V2=V2, sensor_noise_var=sensor_var,
    )


def build_equicorrelated(cfg, rng=None):
    """Unit powers, constant inter-frequency correlations."""
    if cfg.powers != "equal":
        raise ValueError("equicorrelated scenario requires powers='equal'")
    rng = rng if rng is not None else trial_rng(cfg.seed, 0)
    K, M = cfg.K, cfg.M
    a = random_atf(M, K, rng)
    R_sbar = np.full((K, K), cfg.rho_f, dtype=complex)
    np.fill_diagonal(R_sbar, 1.0)
    # Same-sensor cross-frequency correlation, zero across sensors.
    upsilon = np.full((K, K), cfg.upsilon_f, dtype=complex)
    np.fill_diagonal(upsilon, 1.0)
    R_v_unit = np.kron(upsilon, np.eye(M))
    return _assemble(cfg, rng, a, R_sbar, R_v_unit)


def build_varcorrelated(cfg, rng=None):
    """Per-bin random powers, correlations scaled by geometric means."""
    if cfg.powers != "random-uniform":
        raise ValueError("varcorrelated scenario requires powers='random-uniform'")
    rng = rng if rng is not None else trial_rng(cfg.seed, 0)
    K, M = cfg.K, cfg.M
    a = random_atf(M, K, rng)

    sig2 = rng.uniform(cfg.epsilon, 0.5, size=K)
    R_sbar = cfg.rho_f * np.sqrt(np.outer(sig2, sig2)).astype(complex)
    np.fill_diagonal(R_sbar, sig2)

    v2 = rng.uniform(cfg.epsilon, 0.5, size=K * M)
    R_v_unit = np.zeros((K * M, K * M), dtype=complex)
    for m in range(M):
        idx = np.arange(K) * M + m
        block = cfg.upsilon_f * np.sqrt(np.outer(v2[idx], v2[idx]))
        block[np.diag_indices(K)] = v2[idx]
        R_v_unit[np.ix_(idx, idx)] = block
    return _assemble(cfg, rng, a, R_sbar, R_v_unit)


def build_truth(cfg, rng=None):
    """Dispatch on cfg.powers."""
    if cfg.powers == "equal":
        return build_equicorrelated(cfg, rng)
    return build_varcorrelated(cfg, rng)


def sample_source(truth, L, rng):
    """Draw L source frames s(l) = sbar(l) kron ones(M), shape (L, KM)."""
    S_half = linalg.psd_sqrt(truth.R_sbar)
    sbar = _complex_normal(rng, (L, truth.K)) @ S_half.T
    return np.repeat(sbar, truth.M, axis=1)


def _sample_noise(truth, L, rng):
    V_half = linalg.psd_sqrt(truth.R_v - truth.sensor_noise_var * np.eye(truth.K * truth.M))
    v = _complex_normal(rng, (L, truth.K * truth.M)) @ V_half.T
    v += np.sqrt(truth.sensor_noise_var) * _complex_normal(rng, (L, truth.K * truth.M))
    return v


def sample_realizations(truth, L, rng, return_source=False):
    """Draw L noisy frames and L independent noise-only frames.

    Returns ``(X, V_only)`` FrameBlocks, or ``(X, V_only, s_frames)`` with
    the source realizations used in X when ``return_source`` is set (the
    conditional bound is evaluated at those realizations).
    """
    s = sample_source(truth, L, rng)
    d = s * truth.a[np.newaxis, :]
    x = d + _sample_noise(truth, L, rng)
    v_only = _sample_noise(truth, L, rng)
    X = FrameBlock(K=truth.K, M=truth.M, frames=x)
    V = FrameBlock(K=truth.K, M=truth.M, frames=v_only)
    if return_source:
        return X, V, s
    return X, V
