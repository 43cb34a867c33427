"""Complex sequence and matrix substrate.

Sequences are 1-D complex ndarrays, matrices 2-D complex ndarrays.  All
operations are pure functions over finite values and are safe to call from
any number of concurrent workers.
"""

from __future__ import annotations

import numpy as np

DEFAULT_RANK_TOL = 1e-9


def _as_seq(a, name="sequence") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if a.size and not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _as_matrix(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional")
    if a.size and not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError(f"{name} contains non-finite values")
    return a


def convolve(a, b) -> np.ndarray:
    """Full linear convolution of two non-empty complex sequences."""
    a = _as_seq(a, "a")
    b = _as_seq(b, "b")
    if a.size == 0 or b.size == 0:
        raise ValueError("convolve requires non-empty inputs")
    return np.convolve(a, b)


def toeplitz_of(h, input_len: int) -> np.ndarray:
    """Banded matrix T with ``T @ s == convolve(h, s)`` for every s of the
    given length.  Shape is (len(h)+input_len-1, input_len)."""
    h = _as_seq(h, "h")
    if h.size == 0:
        raise ValueError("empty impulse response")
    if input_len < 1:
        raise ValueError("input_len must be >= 1")
    out = np.zeros((h.size + input_len - 1, input_len), dtype=np.complex128)
    for j in range(input_len):
        out[j : j + h.size, j] = h
    return out


def matrix_rank(m, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above ``rel_tol`` times the largest one.

    The zero matrix has rank 0.  ``rel_tol`` guards round-off only; the
    channel draws feeding the rank audits are continuous, so exact
    singularity has probability zero.
    """
    m = _as_matrix(m)
    if not (0.0 < rel_tol < 1.0):
        raise ValueError("rel_tol must lie in (0, 1)")
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    top = sv[0]
    if top == 0.0:
        return 0
    return int(np.count_nonzero(sv > rel_tol * top))


def two_row_full_rank(r1, r2, rel_tol: float = DEFAULT_RANK_TOL) -> bool:
    """Gram-determinant fast path: rank 2 under the same tolerance
    semantics as :func:`matrix_rank` (sv_min > rel_tol * sv_max)."""
    r1 = np.asarray(r1, dtype=np.complex128)
    r2 = np.asarray(r2, dtype=np.complex128)
    g11 = float(np.vdot(r1, r1).real)
    g22 = float(np.vdot(r2, r2).real)
    g12 = complex(np.vdot(r1, r2))
    tr = g11 + g22
    det = g11 * g22 - abs(g12) ** 2
    if tr <= 0.0:
        return False
    # sv_max^2 = (tr + sqrt(tr^2 - 4 det)) / 2, sv_min^2 * sv_max^2 = det
    disc = max(tr * tr - 4.0 * det, 0.0)
    sv_max_sq = 0.5 * (tr + np.sqrt(disc))
    return det > (rel_tol**2) * sv_max_sq * sv_max_sq


def hermitian_solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for Hermitian positive definite ``a`` via
    Cholesky.  Raises on non-positive-definite input."""
    a = _as_matrix(a, "a")
    b = np.asarray(b, dtype=np.complex128)
    vec = b.ndim == 1
    if vec:
        b = b[:, None]
    else:
        b = _as_matrix(b, "b")
    if a.shape[0] != a.shape[1]:
        raise ValueError("a must be square")
    if b.shape[0] != a.shape[0]:
        raise ValueError("row count mismatch between a and b")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc
    y = np.linalg.solve(chol, b)
    x = np.linalg.solve(chol.conj().T, y)
    return x[:, 0] if vec else x
