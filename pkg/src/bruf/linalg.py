"""Positive-definite solves and symmetric square roots.

All covariance algebra in the filters routes through these helpers:
solves use triangular (Cholesky) factorizations, never explicit inverses,
and failures raise typed errors carrying the offending pivot.
"""

import numpy as np
from scipy.linalg import get_lapack_funcs

from bruf.exceptions import NotPositiveDefiniteError, NotPositiveSemidefiniteError


def symmetrize(a: np.ndarray) -> np.ndarray:
    """(A + A^T)/2, batched over leading axes."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def cholesky_lower(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = (A + A^T)/2.

    Raises NotPositiveDefiniteError with the failing pivot (1-based) if the
    factorization breaks down.
    """
    a = symmetrize(np.asarray(a, dtype=float))
    (potrf,) = get_lapack_funcs(("potrf",), (a,))
    c, info = potrf(a, lower=True, overwrite_a=False, clean=True)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (leading minor {info})", pivot=int(info)
        )
    if info < 0:
        raise ValueError(f"illegal argument {-info} to LAPACK potrf")
    return c


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for SPD A via Cholesky factorization.

    A is symmetrized before factoring. B may be a vector or a matrix; the
    result matches its shape.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = cholesky_lower(a)
    (potrs,) = get_lapack_funcs(("potrs",), (a,))
    b2d = b.reshape(b.shape[0], -1) if b.ndim == 1 else b
    x, info = potrs(c, b2d, lower=True)
    if info != 0:
        raise ValueError(f"illegal argument {-info} to LAPACK potrs")
    return x.reshape(b.shape)


def spd_solve_many(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched solve of A_k X_k = B_k over the leading axis.

    A has shape (..., n, n), B shape (..., n, k). Matrices are assumed
    symmetric positive definite; a singular batch entry raises
    NotPositiveDefiniteError carrying the first offending batch index.
    """
    a = symmetrize(np.asarray(a, dtype=float))
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        flat = a.reshape(-1, a.shape[-2], a.shape[-1])
        for idx in range(flat.shape[0]):
            try:
                cholesky_lower(flat[idx])
            except NotPositiveDefiniteError as err:
                raise NotPositiveDefiniteError(
                    f"batch entry {idx} is not positive definite "
                    f"(leading minor {err.pivot})",
                    pivot=err.pivot,
                ) from err
        raise


def _psd_eigh(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose symmetrized Q, clamping small negative eigenvalues.

    Eigenvalues below -1e-10 * trace(Q)/n raise NotPositiveSemidefiniteError;
    negatives within tolerance are clamped to zero.
    """
    q = symmetrize(np.asarray(q, dtype=float))
    n = q.shape[-1]
    w, v = np.linalg.eigh(q)
    tr = np.trace(q, axis1=-2, axis2=-1)
    tol = 1e-10 * np.abs(tr) / n
    w_min = w[..., 0]
    if np.any(w_min < -tol):
        worst = float(np.min(w_min))
        raise NotPositiveSemidefiniteError(
            f"matrix is not positive semi-definite (min eigenvalue {worst:.3e})",
            min_eigenvalue=worst,
        )
    return np.clip(w, 0.0, None), v


def symmetric_sqrt(q: np.ndarray) -> np.ndarray:
    """Symmetric B with B B^T = Q for PSD Q, via spectral factorization.

    Accepts a single (n, n) matrix or a stack (..., n, n); applies batched.
    """
    w, v = _psd_eigh(q)
    sw = np.sqrt(w)
    return (v * sw[..., None, :]) @ np.swapaxes(v, -1, -2)
