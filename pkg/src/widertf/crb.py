"""Cramér-Rao bounds for RTF estimation.

Two regimes:

* conditional: the source realizations s(l) are known; the information
  matrix about the transfer function is block-diagonal and the bound is
  ``diag(J (B*)^{-1} J^H)`` with ``B = sum_l S(l)^H R_v^{-1} S(l)``.
* unconditional: only the source covariance R_s is known; the Fisher
  information is assembled from trace identities of the Gaussian
  log-likelihood and inverted as a full 2KM x 2KM matrix.

The complex parameter vector is theta = [a; conj(a)] and all derivatives are
Wirtinger derivatives. A finite-difference oracle for the unconditional
Fisher matrix is included for validation.

Sign note: deriving -E[d^2 l / (da_m da_k*)] for the Gaussian model with
E[sample covariance] = R_x gives +L tr(R_x^{-1} F_k R_x^{-1} G_m); the
assembled information matrix is then Hermitian PSD and matches the numerical
oracle. (A minus sign at this entry would make the diagonal negative.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CrbResult",
    "RankDeficiencyError",
    "rtf_jacobian",
    "conditional_crb",
    "unconditional_crb",
    "unconditional_fim",
    "numerical_fim_oracle",
    "real_hessian_to_wirtinger_fim",
]

_PINV_RTOL = 1e-12


class RankDeficiencyError(np.linalg.LinAlgError):
    """Conditional information matrix is singular (bins without excitation)."""

    def __init__(self, dead_bins):
        self.dead_bins = list(dead_bins)
        super().__init__(
            f"information matrix singular; bins without excitation: {self.dead_bins}"
        )


@dataclass(frozen=True)
class CrbResult:
    K: int
    M: int
    ref_sensor: int
    bounds: np.ndarray       # (KM,) per-entry variance lower bounds
    fim_condition: float     # condition number of the inverted information block


def rtf_jacobian(a, K, M, ref_sensor=0):
    """Wirtinger Jacobian of the normalize-by-reference map, (KM, KM).

    Block-diagonal over frequency. Within bin k the reference row is zero;
    row m != r has ``-a_km / a_kr^2`` in the reference column and
    ``1 / a_kr`` on the diagonal.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape != (K * M,):
        raise ValueError(f"expected transfer function of length {K * M}")
    J = np.zeros((K * M, K * M), dtype=complex)
    for k in range(K):
        sl = slice(k * M, (k + 1) * M)
        a_k = a[sl]
        ref = a_k[ref_sensor]
        if abs(ref) < 1e-12 * np.linalg.norm(a_k):
            raise ZeroDivisionError(f"reference entry is numerically zero at bin {k}")
        block = np.zeros((M, M), dtype=complex)
        for m in range(M):
            if m == ref_sensor:
                continue
            block[m, ref_sensor] = -a_k[m] / ref**2
            block[m, m] = 1.0 / ref
        J[sl, sl] = block
    return J


def conditional_crb(s_frames, R_v, a, K, M, ref_sensor=0) -> CrbResult:
    """Bound when the L source realizations are known.

    ``s_frames`` has shape (L, KM) and rows s(l) = sbar(l) kron ones(M).
    """
    s_frames = np.asarray(s_frames, dtype=complex)
    R_v = np.asarray(R_v, dtype=complex)
    KM = K * M
    if s_frames.ndim != 2 or s_frames.shape[1] != KM:
        raise ValueError(f"s_frames must have shape (L, {KM})")
    Rv_inv = np.linalg.inv(R_v)
    # B[i, j] = sum_l conj(s_i(l)) Rv^{-1}[i, j] s_j(l)
    B = Rv_inv * (s_frames.conj().T @ s_frames)
    B = 0.5 * (B + B.conj().T)
    w = np.linalg.eigvalsh(B)
    if w[0] <= 1e-12 * max(w[-1], np.finfo(float).tiny):
        power = np.sum(np.abs(s_frames) ** 2, axis=0)
        dead = sorted({i // M for i in np.flatnonzero(power <= 0.0)})
        raise RankDeficiencyError(dead)
    J = rtf_jacobian(a, K, M, ref_sensor)
    cov = J @ np.linalg.inv(B.conj()) @ J.conj().T
    bounds = np.clip(np.diag(cov).real, 0.0, None)
    return CrbResult(K=K, M=M, ref_sensor=ref_sensor, bounds=bounds,
                     fim_condition=float(w[-1] / w[0]))


def unconditional_fim(a, R_s, R_v, L):
    """Closed-form 2KM x 2KM Fisher information for theta = [a; conj(a)].

    With P = A R_s (so F_k = P E^kk, G_m = E^mm P^H, H_mk = E^mm R_s E^kk):

      C1[m, k] = L tr(Rx^-1 F_k Rx^-1 G_m) = L Rx^-1[k, m] (P^H Rx^-1 P)[m, k]
      C2[m, k] = L tr(Rx^-1 G_k Rx^-1 G_m) = L (P^H Rx^-1)[k, m] (P^H Rx^-1)[m, k]

    assembled as [[C1, C2], [C2*, C1*]].
    """
    a = np.asarray(a, dtype=complex)
    KM = a.shape[0]
    A = np.diag(a)
    R_x = A @ R_s @ A.conj().T + R_v
    Rx_inv = np.linalg.inv(R_x)
    P = A @ R_s
    W = P.conj().T @ Rx_inv           # R_s A^H Rx^-1
    C1 = L * Rx_inv.T * (W @ P)
    C2 = L * W.T * W
    fim = np.block([[C1, C2], [C2.conj(), C1.conj()]])
    return 0.5 * (fim + fim.conj().T)


def unconditional_crb(a, R_s, R_v, L, K, M, ref_sensor=0) -> CrbResult:
    """Bound when only the source covariance R_s is known.

    The full information matrix is inverted with a pseudo-inverse (tolerance
    1e-12 of the largest singular value); its first KM x KM block is the
    covariance bound on the transfer function, mapped through the RTF
    Jacobian.
    """
    KM = K * M
    fim = unconditional_fim(a, R_s, R_v, L)
    sv = np.linalg.svd(fim, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    fim_inv = np.linalg.pinv(fim, rcond=_PINV_RTOL, hermitian=True)
    C = fim_inv[:KM, :KM]
    J = rtf_jacobian(a, K, M, ref_sensor)
    cov = J @ C @ J.conj().T
    bounds = np.diag(cov).real
    bounds = np.where((bounds < 0.0) & (bounds >= -1e-12), 0.0, bounds)
    bounds = np.clip(bounds, 0.0, None)
    return CrbResult(K=K, M=M, ref_sensor=ref_sensor, bounds=bounds, fim_condition=cond)


def _gaussian_loglik(a, R_s, R_v, L, R_hat):
    A = np.diag(a)
    R_x = A @ R_s @ A.conj().T + R_v
    sign, logdet = np.linalg.slogdet(R_x)
    return -L * logdet - L * np.trace(np.linalg.solve(R_x, R_hat)).real


def real_hessian_to_wirtinger_fim(H):
    """Convert -Hessian w.r.t. [Re a; Im a] into the [a; conj(a)] block form."""
    n = H.shape[0] // 2
    Hxx = H[:n, :n]
    Hxy = H[:n, n:]
    Hyx = H[n:, :n]
    Hyy = H[n:, n:]
    P = -0.25 * (Hxx + Hyy + 1j * (Hxy - Hyx))
    Q = -0.25 * (Hxx - Hyy - 1j * (Hxy + Hyx))
    return np.block([[P, Q], [Q.conj(), P.conj()]])


def numerical_fim_oracle(a, R_s, R_v, L, n_mc, rng, step=1e-4):
    """Finite-difference estimate of the unconditional Fisher information.

    Simulates n_mc sample covariances of L frames each from the true model,
    averages them (the Hessian of the log-likelihood is linear in the sample
    covariance), and central-differences the log-likelihood over the 2KM
    real coordinates of a. Returns the 2KM x 2KM matrix in the same
    [a; conj(a)] layout as :func:`unconditional_fim`.
    """
    a = np.asarray(a, dtype=complex)
    KM = a.shape[0]
    A = np.diag(a)
    R_x = A @ R_s @ A.conj().T + R_v
    # Sample covariance accumulated over n_mc independent trials of L frames.
    from .linalg import psd_sqrt

    S_half = psd_sqrt(R_x)
    R_acc = np.zeros((KM, KM), dtype=complex)
    block = 200  # trials per vectorized batch, keeps memory bounded
    done = 0
    while done < n_mc:
        nb = min(block, n_mc - done)
        z = (rng.standard_normal((nb * L, KM)) + 1j * rng.standard_normal((nb * L, KM))) / np.sqrt(2.0)
        x = z @ S_half.T
        R_acc += x.T @ x.conj() / L
        done += nb
    R_hat = R_acc / n_mc

    theta0 = np.concatenate([a.real, a.imag])
    n = 2 * KM

    def f(theta):
        return _gaussian_loglik(theta[:KM] + 1j * theta[KM:], R_s, R_v, L, R_hat)

    H = np.zeros((n, n))
    f0 = f(theta0)
    h = step
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (f(theta0 + ei) - 2.0 * f0 + f(theta0 - ei)) / h**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            H[i, j] = (
                f(theta0 + ei + ej) - f(theta0 + ei - ej)
                - f(theta0 - ei + ej) + f(theta0 - ei - ej)
            ) / (4.0 * h**2)
            H[j, i] = H[i, j]
    return real_hessian_to_wirtinger_fim(H)
