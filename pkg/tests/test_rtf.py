"""RTF estimators: normalization, exact recovery, degenerate cases."""

import numpy as np
import pytest

from widertf.covariance import SpectralSpatialCovariance
from widertf.metrics import hermitian_angle
from widertf.rtf import (
    DegenerateReferenceError,
    Rtf,
    covariance_whitening,
    normalize_rtf,
    svd_direct,
)
from widertf.scenario import ScenarioConfig, build_truth, trial_rng


def test_normalize_rtf_reference_entries_are_one():
    rng = trial_rng(0, 0)
    K, M = 3, 2
    a = rng.standard_normal(K * M) + 1j * rng.standard_normal(K * M)
    out = normalize_rtf(a, K, M, ref_sensor=1)
    for k in range(K):
        assert out.values[k * M + 1] == 1.0
        assert np.allclose(out.bin(k), a[k * M:(k + 1) * M] / a[k * M + 1])


def test_normalize_rtf_degenerate_reference():
    a = np.array([0.0, 1.0], dtype=complex)
    with pytest.raises(DegenerateReferenceError) as exc:
        normalize_rtf(a, 1, 2)
    assert exc.value.bin_index == 0


def test_rtf_dataclass_validation():
    with pytest.raises(ValueError, match="reference-sensor"):
        Rtf(K=1, M=2, ref_sensor=0, values=np.array([2.0, 1.0], dtype=complex))
    with pytest.raises(ValueError, match="shape"):
        Rtf(K=2, M=2, ref_sensor=0, values=np.ones(3, dtype=complex))


def _two_bin_target_covariance(a, s1, s2, s12):
    # R_d for K=2, M=2 assembled from the source covariance blocks
    # [[s1, s12], [s12*, s2]] kron ones(2,2), conjugated by diag(a).
    R_sbar = np.array([[s1, s12], [np.conj(s12), s2]], dtype=complex)
    R_s = np.kron(R_sbar, np.ones((2, 2)))
    A = np.diag(a)
    return A @ R_s @ A.conj().T


def test_svd_direct_exact_two_bin_construction():
    rng = trial_rng(1, 0)
    a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    R_d = _two_bin_target_covariance(a, 1.0, 0.8, 0.5)
    R_v = np.eye(4, dtype=complex)
    Rx = SpectralSpatialCovariance(2, 2, R_d + R_v)
    Rv = SpectralSpatialCovariance(2, 2, R_v)
    a_hat = svd_direct(Rx, Rv, 2, 2)
    a_true = normalize_rtf(a, 2, 2)
    assert np.allclose(a_hat.values, a_true.values, atol=1e-10)


def test_svd_direct_exact_without_spectral_correlation():
    # sigma_12 = 0: diagonal blocks are rank-1 on their own, recovery holds.
    rng = trial_rng(2, 0)
    a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    R_d = _two_bin_target_covariance(a, 1.0, 0.8, 0.0)
    R_v = np.eye(4, dtype=complex)
    Rx = SpectralSpatialCovariance(2, 2, R_d + R_v)
    Rv = SpectralSpatialCovariance(2, 2, R_v)
    a_hat = svd_direct(Rx, Rv, 2, 2)
    assert np.allclose(a_hat.values, normalize_rtf(a, 2, 2).values, atol=1e-10)


def test_both_estimators_exact_on_model_truth():
    for seed in range(5):
        cfg = ScenarioConfig(M=3, K=3, rho_f=0.5, upsilon_f=0.4)
        truth = build_truth(cfg, trial_rng(seed, 0))
        Rx = SpectralSpatialCovariance(cfg.K, cfg.M, truth.R_x)
        Rv = SpectralSpatialCovariance(cfg.K, cfg.M, truth.R_v)
        a_true = normalize_rtf(truth.a, cfg.K, cfg.M)
        for est in (svd_direct, covariance_whitening):
            a_hat = est(Rx, Rv, cfg.K, cfg.M)
            assert hermitian_angle(a_hat, a_true) < 1e-8


def test_covariance_whitening_rank1_plus_identity():
    # R_x(k,k) = s^2 a a^H + I with R_v = I: the principal direction is a.
    rng = trial_rng(3, 0)
    K, M = 2, 3
    a = rng.standard_normal(K * M) + 1j * rng.standard_normal(K * M)
    R_x = np.zeros((K * M, K * M), dtype=complex)
    for k in range(K):
        sl = slice(k * M, (k + 1) * M)
        R_x[sl, sl] = 2.0 * np.outer(a[sl], a[sl].conj()) + np.eye(M)
    Rx = SpectralSpatialCovariance(K, M, R_x)
    Rv = SpectralSpatialCovariance(K, M, np.eye(K * M))
    a_hat = covariance_whitening(Rx, Rv, K, M)
    assert np.allclose(a_hat.values, normalize_rtf(a, K, M).values, atol=1e-10)
    assert not a_hat.low_confidence.any()


def test_covariance_whitening_no_signal_flags_low_confidence():
    # A vanishingly weak target keeps the principal generalized eigenvalue
    # within the no-signal margin of 1, so every bin is flagged.
    rng = trial_rng(11, 0)
    a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    R_x = np.eye(4, dtype=complex)
    for k in range(2):
        sl = slice(2 * k, 2 * k + 2)
        R_x[sl, sl] += 1e-9 * np.outer(a[sl], a[sl].conj())
    Rx = SpectralSpatialCovariance(2, 2, R_x)
    Rv = SpectralSpatialCovariance(2, 2, np.eye(4))
    a_hat = covariance_whitening(Rx, Rv, 2, 2)
    assert a_hat.low_confidence.all()


def test_svd_direct_zero_signal_flags_undetermined():
    Rv = SpectralSpatialCovariance(2, 2, np.eye(4))
    a_hat = svd_direct(Rv, Rv, 2, 2)
    assert a_hat.undetermined.all()
    assert np.allclose(a_hat.values, 1.0)


def test_reference_sensor_selection():
    rng = trial_rng(4, 0)
    a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    R_d = _two_bin_target_covariance(a, 1.0, 1.0, 0.6)
    Rx = SpectralSpatialCovariance(2, 2, R_d + np.eye(4))
    Rv = SpectralSpatialCovariance(2, 2, np.eye(4))
    a_hat = svd_direct(Rx, Rv, 2, 2, ref_sensor=1)
    assert np.allclose(a_hat.values, normalize_rtf(a, 2, 2, ref_sensor=1).values,
                       atol=1e-10)


def test_dimension_mismatch_rejected():
    Rv = SpectralSpatialCovariance(2, 2, np.eye(4))
    with pytest.raises(ValueError):
        covariance_whitening(Rv, Rv, 3, 2)
