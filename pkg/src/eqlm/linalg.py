"""Dense linear algebra helpers used by the ELM updates.

Matrices are plain 2-D ``float64`` numpy arrays. The helpers here add shape
and finiteness checking on top of numpy and provide an SVD-truncated
Moore-Penrose pseudoinverse.
"""

from __future__ import annotations

import numpy as np

#: Singular values below ``RTOL * sigma_max`` are treated as zero.
RTOL = 1e-12


class LinalgError(Exception):
    """Base class for errors raised by this module."""


class ShapeError(LinalgError, ValueError):
    """Operands have incompatible dimensions."""


class InvalidInputError(LinalgError, ValueError):
    """Input contains NaN/Inf or is otherwise unusable."""


class NumericalError(LinalgError, ArithmeticError):
    """A factorisation failed to converge or produced non-finite output."""


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a finite 2-D float array.

    1-D input is treated as a single row.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        a = a[np.newaxis, :]
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    if not np.isfinite(out).all():
        raise NumericalError("matrix product overflowed")
    return out


def transpose(m) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(m).T)


def pinv(m, rtol: float = RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse via a truncated SVD.

    With ``m = U diag(s) V^T`` the result is ``V diag(1/s) U^T`` where the
    reciprocal is taken only for ``s > rtol * max(s)``; smaller singular
    values map to zero. Agrees with ``(m m^T)^+ m^T`` whenever that form is
    defined, and satisfies the four Penrose conditions for any input.
    """
    a = as_matrix(m)
    if a.size == 0:
        raise InvalidInputError("pinv of an empty matrix")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    cutoff = rtol * s[0] if s.size else 0.0
    keep = s > cutoff
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    out = (vt.T * inv_s) @ u.T
    if not np.isfinite(out).all():
        raise NumericalError("pseudoinverse produced non-finite entries")
    return out
