"""Cramér-Rao bounds: Jacobian, closed forms, scaling laws, oracle checks."""

import numpy as np
import pytest

from widertf.crb import (
    RankDeficiencyError,
    conditional_crb,
    numerical_fim_oracle,
    real_hessian_to_wirtinger_fim,
    rtf_jacobian,
    unconditional_crb,
    unconditional_fim,
)
from widertf.rtf import normalize_rtf
from widertf.scenario import (
    ScenarioConfig,
    build_truth,
    sample_source,
    trial_rng,
)


def _random_a(rng, K, M, lo=0.3):
    return (rng.uniform(lo, 1.0, K * M) + 1j * rng.uniform(lo, 1.0, K * M))


def _fd_jacobian(a, K, M, ref_sensor=0, h=1e-6):
    def g(vec):
        return normalize_rtf(vec, K, M, ref_sensor).values

    n = K * M
    J = np.zeros((n, n), dtype=complex)
    for q in range(n):
        # d/da = 0.5 (d/dx - i d/dy) with central differences over 2h.
        for part, w in ((1.0, 0.25), (1j, -0.25j)):
            e = np.zeros(n, dtype=complex)
            e[q] = part * h
            J[:, q] += w * (g(a + e) - g(a - e)) / h
    return J


def test_jacobian_structure():
    rng = trial_rng(0, 0)
    K, M, r = 2, 3, 1
    a = _random_a(rng, K, M)
    J = rtf_jacobian(a, K, M, ref_sensor=r)
    for k in range(K):
        sl = slice(k * M, (k + 1) * M)
        block = J[sl, sl]
        assert np.allclose(block[r, :], 0.0)  # reference row is zero
        ref = a[k * M + r]
        for m in range(M):
            if m == r:
                continue
            assert block[m, m] == pytest.approx(1.0 / ref)
            assert block[m, r] == pytest.approx(-a[k * M + m] / ref**2)
    # Off-diagonal frequency blocks vanish.
    mask = np.ones((K * M, K * M), dtype=bool)
    for k in range(K):
        mask[k * M:(k + 1) * M, k * M:(k + 1) * M] = False
    assert np.allclose(J[mask], 0.0)


def test_jacobian_matches_finite_differences():
    rng = trial_rng(1, 0)
    for _ in range(5):
        K, M = int(rng.integers(1, 4)), int(rng.integers(2, 5))
        a = _random_a(rng, K, M)
        J = rtf_jacobian(a, K, M)
        J_fd = _fd_jacobian(a, K, M)
        assert np.linalg.norm(J - J_fd) <= 1e-6 * np.linalg.norm(J)


def test_jacobian_annihilates_the_transfer_function():
    # g(c a) = g(a): the Jacobian maps a itself to zero, bin by bin.
    rng = trial_rng(2, 0)
    a = _random_a(rng, 3, 2)
    J = rtf_jacobian(a, 3, 2)
    assert np.allclose(J @ a, 0.0, atol=1e-12)


def test_conditional_crb_closed_form_single_bin():
    # K=1, M=2, white noise V^2 I, equal source signal at both sensors:
    # B = (sum_l |s(l)|^2 / V^2) I, so the non-reference bound is
    # (V^2 / sum|s|^2) (|a_2|^2/|a_1|^4 + 1/|a_1|^2).
    rng = trial_rng(3, 0)
    L, V2 = 40, 0.7
    a = np.array([1.2 - 0.4j, -0.3 + 0.9j])
    sbar = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2)
    s = np.repeat(sbar[:, None], 2, axis=1)
    res = conditional_crb(s, V2 * np.eye(2), a, 1, 2)
    p = np.sum(np.abs(sbar) ** 2)
    expected = (V2 / p) * (abs(a[1]) ** 2 / abs(a[0]) ** 4 + 1.0 / abs(a[0]) ** 2)
    assert res.bounds[0] == 0.0
    assert res.bounds[1] == pytest.approx(expected, rel=1e-10)


def test_conditional_crb_scalings():
    cfg = ScenarioConfig(M=2, K=3, L=200, powers="random-uniform")
    truth = build_truth(cfg, trial_rng(4, 0))
    s = sample_source(truth, cfg.L, trial_rng(4, 1))
    base = conditional_crb(s, truth.R_v, truth.a, cfg.K, cfg.M)
    # R_v -> c R_v scales the bound by c exactly.
    scaled = conditional_crb(s, 2.5 * truth.R_v, truth.a, cfg.K, cfg.M)
    assert np.allclose(scaled.bounds, 2.5 * base.bounds, rtol=1e-10)
    # Doubling the frames (repeating them) halves the bound.
    doubled = conditional_crb(np.vstack([s, s]), truth.R_v, truth.a, cfg.K, cfg.M)
    assert np.allclose(doubled.bounds, 0.5 * base.bounds, rtol=1e-10)


def test_conditional_crb_dead_bin_raises():
    rng = trial_rng(5, 0)
    K, M, L = 2, 2, 30
    s = np.zeros((L, K * M), dtype=complex)
    live = (rng.standard_normal(L) + 1j * rng.standard_normal(L))
    s[:, 0] = s[:, 1] = live  # bin 0 excited, bin 1 silent
    with pytest.raises(RankDeficiencyError) as exc:
        conditional_crb(s, np.eye(K * M), np.ones(K * M, dtype=complex), K, M)
    assert exc.value.dead_bins == [1]


def test_unconditional_fim_properties():
    cfg = ScenarioConfig(M=2, K=2, L=100, rho_f=0.5, upsilon_f=0.3)
    truth = build_truth(cfg, trial_rng(6, 0))
    fim = unconditional_fim(truth.a, truth.R_s, truth.R_v, cfg.L)
    n = 2 * cfg.K * cfg.M
    assert fim.shape == (n, n)
    assert np.allclose(fim, fim.conj().T)
    w = np.linalg.eigvalsh(fim)
    assert w[0] >= -1e-10 * w[-1]
    # Linear in L.
    fim2 = unconditional_fim(truth.a, truth.R_s, truth.R_v, 2 * cfg.L)
    assert np.allclose(fim2, 2.0 * fim, rtol=1e-12)
    # No source power, no information about a.
    fim0 = unconditional_fim(truth.a, np.zeros_like(truth.R_s), truth.R_v, cfg.L)
    assert np.allclose(fim0, 0.0, atol=1e-12)


def test_unconditional_fim_block_symmetry():
    # Layout [[C1, C2], [C2*, C1*]] for theta = [a; conj(a)].
    cfg = ScenarioConfig(M=2, K=2, L=50, rho_f=0.4, upsilon_f=0.2)
    truth = build_truth(cfg, trial_rng(7, 0))
    fim = unconditional_fim(truth.a, truth.R_s, truth.R_v, cfg.L)
    n = cfg.K * cfg.M
    assert np.allclose(fim[n:, n:], fim[:n, :n].conj())
    assert np.allclose(fim[n:, :n], fim[:n, n:].conj())


def test_unconditional_crb_reference_entries_zero():
    cfg = ScenarioConfig(M=3, K=2, L=100, rho_f=0.5, upsilon_f=0.4)
    truth = build_truth(cfg, trial_rng(8, 0))
    res = unconditional_crb(truth.a, truth.R_s, truth.R_v, cfg.L, cfg.K, cfg.M)
    ref_idx = np.arange(cfg.K) * cfg.M
    assert np.allclose(res.bounds[ref_idx], 0.0)
    assert np.all(res.bounds >= 0.0)


def test_bound_ordering_conditional_below_unconditional():
    for seed in range(4):
        cfg = ScenarioConfig(M=2, K=3, L=300, powers="random-uniform",
                             rho_f=0.4, upsilon_f=0.3)
        truth = build_truth(cfg, trial_rng(seed, 10))
        s = sample_source(truth, cfg.L, trial_rng(seed, 11))
        cond = conditional_crb(s, truth.R_v, truth.a, cfg.K, cfg.M)
        uncond = unconditional_crb(truth.a, truth.R_s, truth.R_v, cfg.L, cfg.K, cfg.M)
        assert np.all(cond.bounds <= uncond.bounds + 1e-10)


def test_bounds_invariant_under_reference_relabel():
    cfg = ScenarioConfig(M=2, K=2, L=100, rho_f=0.5, upsilon_f=0.3)
    truth = build_truth(cfg, trial_rng(9, 0))
    r0 = unconditional_crb(truth.a, truth.R_s, truth.R_v, cfg.L, cfg.K, cfg.M,
                           ref_sensor=0)
    # Swap the sensors in the model and bound w.r.t. the other reference:
    # per-bin entries permute accordingly.
    perm = np.array([1, 0, 3, 2])
    a_sw = truth.a[perm]
    R_s_sw = truth.R_s[np.ix_(perm, perm)]
    R_v_sw = truth.R_v[np.ix_(perm, perm)]
    r1 = unconditional_crb(a_sw, R_s_sw, R_v_sw, cfg.L, cfg.K, cfg.M, ref_sensor=1)
    assert np.allclose(r1.bounds[perm], r0.bounds, rtol=1e-8, atol=1e-14)


def test_real_hessian_conversion_structure():
    # A symmetric real Hessian converts to a Hermitian matrix with the
    # [[P, Q], [conj(Q), conj(P)]] block structure.
    rng = trial_rng(10, 0)
    n = 3
    H = rng.standard_normal((2 * n, 2 * n))
    H = 0.5 * (H + H.T)
    F = real_hessian_to_wirtinger_fim(H)
    assert np.allclose(F, F.conj().T)
    assert np.allclose(F[n:, n:], F[:n, :n].conj())
    assert np.allclose(F[n:, :n], F[:n, n:].conj())


def test_real_hessian_conversion_real_quadratic():
    # l(z) = -2 z^H P z with P real symmetric has real Hessian
    # blkdiag(-4P, -4P); the conversion recovers 2 P in each diagonal block.
    rng = trial_rng(10, 1)
    n = 3
    P = rng.standard_normal((n, n))
    P = 0.5 * (P + P.T)
    H = np.zeros((2 * n, 2 * n))
    H[:n, :n] = -4.0 * P
    H[n:, n:] = -4.0 * P
    F = real_hessian_to_wirtinger_fim(H)
    assert np.allclose(F[:n, :n], 2.0 * P)
    assert np.allclose(F[:n, n:], 0.0)
    assert np.allclose(F[n:, :n], 0.0)
    assert np.allclose(F[n:, n:], 2.0 * P)


def test_unconditional_fim_matches_numerical_oracle_small():
    # Desk-scale version of the acceptance check (K=M=2 runs the full size).
    cfg = ScenarioConfig(M=2, K=1, L=300, rho_f=0.0, upsilon_f=0.0)
    truth = build_truth(cfg, trial_rng(11, 0))
    fim = unconditional_fim(truth.a, truth.R_s, truth.R_v, cfg.L)
    oracle = numerical_fim_oracle(truth.a, truth.R_s, truth.R_v, cfg.L,
                                  n_mc=3000, rng=trial_rng(11, 1))
    assert np.linalg.norm(fim - oracle) <= 0.05 * np.linalg.norm(fim)
