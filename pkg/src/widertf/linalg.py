"""Complex dense decompositions with the contracts the estimators rely on.

Thin wrappers around LAPACK (via numpy/scipy) that pin down ordering,
normalization and error behaviour:

* eigen/singular values are always sorted descending,
* the HPSD generalized eigenproblem uses the Cholesky-based reduction and
  returns right eigenvectors normalized as ``U^H B U = I`` together with the
  left eigenvectors ``Q = B U``,
* PSD square root / flooring clip small negative eigenvalues.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "DecompositionError",
    "NotPsdError",
    "SingularNoiseCovarianceError",
    "as_hermitian",
    "hermitian_eig",
    "svd",
    "gevd_hpsd",
    "psd_sqrt",
    "psd_floor",
]

# Relative jitter added to B once if the Cholesky factorization fails.
_GEVD_JITTER = 1e-10


class DecompositionError(np.linalg.LinAlgError):
    """An iterative LAPACK solver failed to converge."""


class NotPsdError(ValueError):
    """Matrix has an eigenvalue below the admissible negative tolerance."""


class SingularNoiseCovarianceError(DecompositionError):
    """B of the (A, B) pencil is not positive definite, even after jitter."""


def _check_finite(a, name="matrix"):
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return a


def as_hermitian(h, rtol=1e-12, name="matrix"):
    """Validate approximate Hermitian symmetry and return the symmetrized matrix."""
    h = _check_finite(h, name)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"{name} must be square, got shape {h.shape}")
    scale = max(np.linalg.norm(h), 1.0)
    if np.linalg.norm(h - h.conj().T) > 1e-6 * scale:
        # Far from Hermitian: refuse rather than silently symmetrize.
        raise ValueError(f"{name} is not Hermitian")
    return 0.5 * (h + h.conj().T)


def hermitian_eig(h):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns (eigenvalues, eigenvectors) with orthonormal eigenvector columns.
    """
    h = as_hermitian(h)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(
            f"hermitian eigendecomposition failed (order {h.shape[0]}, "
            f"norm {np.linalg.norm(h):.3e})"
        ) from exc
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def svd(a):
    """Full SVD ``A = U diag(s) Vh`` with singular values descending."""
    a = _check_finite(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(
            f"SVD failed to converge (shape {a.shape}, norm {np.linalg.norm(a):.3e})"
        ) from exc
    return u, s, vh


def gevd_hpsd(a, b):
    """GEVD of the pencil (A, B) with A Hermitian and B Hermitian positive definite.

    Returns ``(d, u, q)`` where ``A u_i = d_i B u_i``, d is sorted descending,
    ``U^H B U = I`` and ``Q = B U`` are the left eigenvectors.

    Cholesky-based reduction (the LAPACK ``gv`` drivers); if the factorization
    of B fails once, a jitter of ``1e-10 * trace(B)/order`` is added before a
    single retry.
    """
    a = as_hermitian(a, name="A")
    b = as_hermitian(b, name="B")
    if a.shape != b.shape:
        raise ValueError(f"pencil shape mismatch: {a.shape} vs {b.shape}")
    n = b.shape[0]
    try:
        w, u = scipy.linalg.eigh(a, b, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        jitter = _GEVD_JITTER * max(np.trace(b).real, 0.0) / n
        try:
            w, u = scipy.linalg.eigh(a, b + jitter * np.eye(n), check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SingularNoiseCovarianceError(
                f"B is not positive definite after jitter (order {n})"
            ) from exc
        b = b + jitter * np.eye(n)
    order = np.argsort(w)[::-1]
    w = w[order]
    u = u[:, order]
    q = b @ u
    return w, u, q


def psd_sqrt(r, neg_tol=1e-10):
    """Hermitian square root S of a PSD matrix, ``S S^H = R``.

    Eigenvalues in ``[-neg_tol * lambda_max, 0)`` are clipped to zero; anything
    below raises :class:`NotPsdError`.
    """
    w, v = hermitian_eig(r)
    lam_max = max(w[0], 0.0)
    if np.any(w < -neg_tol * max(lam_max, np.finfo(float).tiny)):
        raise NotPsdError(
            f"matrix is not PSD: min eigenvalue {w[-1]:.3e}, max {lam_max:.3e}"
        )
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_floor(h):
    """Replace negative eigenvalues by zero, keeping the eigenvectors."""
    w, v = hermitian_eig(h)
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return 0.5 * (out + out.conj().T)
