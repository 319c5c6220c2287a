"""Quick invariant battery behind the ``selftest`` CLI subcommand.

A trimmed-down version of the full test suite: exact recovery with true
covariances, the target-covariance rank bound, Jacobian finite differences,
and the conditional-vs-unconditional bound ordering.
"""

from __future__ import annotations

import numpy as np

from .covariance import SpectralSpatialCovariance, estimate_target_covariance
from .crb import conditional_crb, rtf_jacobian, unconditional_crb
from .metrics import hermitian_angle
from .rtf import covariance_whitening, normalize_rtf, svd_direct
from .scenario import ScenarioConfig, build_truth, sample_source, trial_rng


def _check_rank_bound():
    for seed in range(5):
        cfg = ScenarioConfig(M=3, K=4, powers="random-uniform", seed=seed)
        truth = build_truth(cfg)
        w = np.linalg.eigvalsh(truth.R_d)[::-1]
        if w[cfg.K] > 1e-10 * w[0]:
            return False
    return True


def _check_exact_recovery():
    for seed in range(5):
        cfg = ScenarioConfig(M=2, K=3, rho_f=0.5, upsilon_f=0.4, seed=seed)
        truth = build_truth(cfg)
        Rx = SpectralSpatialCovariance(truth.K, truth.M, truth.R_x)
        Rv = SpectralSpatialCovariance(truth.K, truth.M, truth.R_v)
        a_true = normalize_rtf(truth.a, truth.K, truth.M)
        for est in (svd_direct, covariance_whitening):
            a_hat = est(Rx, Rv, truth.K, truth.M)
            if hermitian_angle(a_hat, a_true) > 1e-7:
                return False
    return True


def _check_jacobian():
    rng = trial_rng(7, 0)
    K, M = 2, 3
    a = rng.uniform(0.2, 1.0, K * M) + 1j * rng.uniform(0.2, 1.0, K * M)
    J = rtf_jacobian(a, K, M)
    h = 1e-6

    def g(vec):
        return normalize_rtf(vec, K, M).values

    J_fd = np.zeros_like(J)
    for q in range(K * M):
        # d/da = 0.5 (d/dx - i d/dy) with central differences over 2h.
        for part, w in ((1.0, 0.25), (1j, -0.25j)):
            e = np.zeros(K * M, dtype=complex)
            e[q] = part * h
            J_fd[:, q] += w * (g(a + e) - g(a - e)) / h
    return np.linalg.norm(J - J_fd) <= 1e-6 * np.linalg.norm(J)


def _check_bound_ordering():
    for seed in range(3):
        cfg = ScenarioConfig(M=2, K=3, L=500, powers="random-uniform", seed=seed)
        truth = build_truth(cfg)
        s = sample_source(truth, cfg.L, trial_rng(seed, 99))
        cond = conditional_crb(s, truth.R_v, truth.a, truth.K, truth.M)
        uncond = unconditional_crb(truth.a, truth.R_s, truth.R_v, cfg.L, truth.K, truth.M)
        if np.any(cond.bounds > uncond.bounds + 1e-10):
            return False
    return True


CHECKS = [
    ("target covariance rank bound", _check_rank_bound),
    ("exact recovery from true covariances", _check_exact_recovery),
    ("RTF Jacobian vs finite differences", _check_jacobian),
    ("conditional <= unconditional bounds", _check_bound_ordering),
]


def run(verbose=False):
    ok = True
    for name, check in CHECKS:
        passed = check()
        ok = ok and passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
