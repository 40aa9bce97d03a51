"""Dense complex linear algebra used by the clutter engine.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The compact SVD
is backed by LAPACK (``gesdd``) with an embedded one-sided Jacobi kernel as
fallback and as an independently testable implementation.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalFailure, SingularGramError, ValidationError

__all__ = [
    "SvdResult",
    "as_cmatrix",
    "compact_svd",
    "jacobi_svd",
    "hermitian",
    "matmul",
    "solve_hermitian_posdef",
    "principal_angles",
]


def as_cmatrix(a, *, check_finite=True):
    """Return ``a`` as a 2-D complex128 array, validating shape and entries."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"matrix must be non-empty, got shape {arr.shape}")
    if check_finite and not np.all(np.isfinite(arr)):
        raise ValidationError("matrix contains NaN or Inf entries")
    return arr


@dataclass(frozen=True)
class SvdResult:
    """Compact SVD ``A = left @ diag(singular) @ right_h``."""

    left: np.ndarray  # K x R
    singular: np.ndarray  # R, descending
    right_h: np.ndarray  # R x Q

    @property
    def rank_bound(self):
        return self.singular.shape[0]

    def reconstruct(self):
        return (self.left * self.singular) @ self.right_h


def compact_svd(a, method="lapack"):
    """Compact SVD with ``R = min(rows, cols)`` singular triplets.

    ``method`` is ``"lapack"`` (default, falls back to Jacobi if LAPACK does
    not converge) or ``"jacobi"``.
    """
    a = as_cmatrix(a)
    if method == "jacobi":
        return jacobi_svd(a)
    if method != "lapack":
        raise ValidationError(f"unknown SVD method {method!r}")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            u, s, vh = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError:
            return jacobi_svd(a)
    return SvdResult(u, s, vh)


def jacobi_svd(a, tol=None, max_sweeps=60):
    """One-sided (Hestenes) Jacobi SVD of a complex matrix.

    Orthogonalises the columns of the taller orientation by complex plane
    rotations until every pair is orthogonal to ``tol`` relative to the
    column norms.  Raises :class:`NumericalFailure` carrying the sweep count
    when ``max_sweeps`` is exhausted.
    """
    a = as_cmatrix(a)
    k, q = a.shape
    transposed = k < q
    w = a.conj().T.copy() if transposed else a.copy()
    m, n = w.shape
    v = np.eye(n, dtype=np.complex128)
    if tol is None:
        tol = np.finfo(float).eps * m

    norms = np.einsum("ij,ij->j", w.conj(), w).real
    sweeps = 0
    converged = n < 2
    while not converged:
        if sweeps >= max_sweeps:
            raise NumericalFailure(
                f"Jacobi SVD did not converge after {sweeps} sweeps", iterations=sweeps
            )
        sweeps += 1
        off = 0.0
        for p in range(n - 1):
            for r in range(p + 1, n):
                alpha, beta = norms[p], norms[r]
                gamma = np.vdot(w[:, p], w[:, r])
                mag = abs(gamma)
                if alpha == 0.0 or beta == 0.0 or mag == 0.0:
                    continue
                rel = mag / np.sqrt(alpha * beta)
                off = max(off, rel)
                if rel <= tol:
                    continue
                phase = gamma / mag
                zeta = (beta - alpha) / (2.0 * mag)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                wp = w[:, p].copy()
                wr = w[:, r] * np.conj(phase)
                w[:, p] = c * wp - s * wr
                w[:, r] = s * wp + c * wr
                vp = v[:, p].copy()
                vr = v[:, r] * np.conj(phase)
                v[:, p] = c * vp - s * vr
                v[:, r] = s * vp + c * vr
                norms[p] = np.vdot(w[:, p], w[:, p]).real
                norms[r] = np.vdot(w[:, r], w[:, r]).real
        converged = off <= tol

    sing = np.sqrt(norms)
    order = np.argsort(-sing, kind="stable")
    sing = sing[order]
    w = w[:, order]
    v = v[:, order]
    u = np.zeros_like(w)
    nz = sing > sing[0] * np.finfo(float).eps * max(m, n) if sing[0] > 0 else np.zeros(n, bool)
    u[:, nz] = w[:, nz] / sing[nz]
    if not np.all(nz):
        u = _complete_orthonormal(u, nz)
        sing = np.where(nz, sing, 0.0)

    if transposed:
        return SvdResult(v, sing, u.conj().T)
    return SvdResult(u, sing, v.conj().T)


def _complete_orthonormal(u, keep):
    """Fill the columns of ``u`` not flagged in ``keep`` with an orthonormal complement."""
    m, n = u.shape
    basis = u[:, keep]
    candidates = np.eye(m, dtype=np.complex128)
    q, _ = np.linalg.qr(np.hstack([basis, candidates]))
    extra = q[:, basis.shape[1] : basis.shape[1] + (n - basis.shape[1])]
    out = u.copy()
    out[:, ~keep] = extra
    return out


def hermitian(a):
    return np.asarray(a).conj().T


def matmul(a, b):
    return np.asarray(a) @ np.asarray(b)


def solve_hermitian_posdef(g, b):
    """Solve ``G X = B`` for Hermitian positive definite ``G`` via Cholesky."""
    g = as_cmatrix(g)
    if g.shape[0] != g.shape[1]:
        raise ValidationError(f"Gram matrix must be square, got {g.shape}")
    b = np.asarray(b, dtype=np.complex128)
    try:
        factor = scipy.linalg.cho_factor(g, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularGramError(f"Gram matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def principal_angles(a, b):
    """Principal angles (radians, ascending) between the column spans of ``a`` and ``b``.

    Sines and cosines are combined so that angles near zero keep full precision.
    """
    qa, _ = np.linalg.qr(np.asarray(a, dtype=np.complex128))
    qb, _ = np.linalg.qr(np.asarray(b, dtype=np.complex128))
    if qb.shape[1] > qa.shape[1]:
        qa, qb = qb, qa
    cross = qa.conj().T @ qb
    cosines = np.linalg.svd(cross, compute_uv=False)
    sines = np.linalg.svd(qb - qa @ cross, compute_uv=False)[::-1]
    return np.arctan2(sines, cosines)
