"""Scalar and small dense linear-algebra helpers shared across precisions.

Three arithmetic regimes are used throughout the package:

* exact: ``int`` / ``fractions.Fraction`` (and sympy objects in the oracle),
* 53-bit: Python ``complex`` and numpy ``complex128``,
* extended: mpmath ``mpf`` / ``mpc`` under ``mpmath.workprec(bits)``.

Matrices are numpy arrays; extended-precision and exact matrices use
``dtype=object``.
"""
from __future__ import annotations

import numbers
from fractions import Fraction

import mpmath
import numpy as np

DOUBLE_BITS = 53


def is_exact(*values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def is_mp(value) -> bool:
    return isinstance(value, (mpmath.mpf, mpmath.mpc))


def mp_real(x):
    """Convert an int/Fraction/float/mpf to ``mpf`` at the current precision."""
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, numbers.Complex) and not isinstance(x, numbers.Real):
        raise TypeError(f"expected a real value, got {x!r}")
    return mpmath.mpf(x)


def mp_complex(z):
    if isinstance(z, Fraction):
        return mpmath.mpc(mp_real(z))
    return mpmath.mpc(z)


def real_at(x, bits: int):
    """Cast a real parameter to the working type for ``bits`` of precision."""
    if bits <= DOUBLE_BITS:
        return float(x)
    return mp_real(x)


def complex_at(z, bits: int):
    if bits <= DOUBLE_BITS:
        return complex(z)
    return mp_complex(z)


def scaled_tolerance(base: float, bits: int):
    """Relative tolerance ``base`` at 53 bits, tightened geometrically with ``bits``.

    ``base ** (bits / 53)``: 1e-10 at double precision becomes about 1e-24
    at 128 bits.
    """
    if bits <= DOUBLE_BITS:
        return base
    return mpmath.mpf(base) ** (mpmath.mpf(bits) / DOUBLE_BITS)


def dtype_for(*values):
    """numpy dtype able to hold a matrix built from ``values`` without loss."""
    for v in values:
        if is_mp(v) or isinstance(v, Fraction) or not isinstance(v, numbers.Number):
            return object
    return complex


def absval(z):
    if is_mp(z):
        return abs(z)
    if isinstance(z, (int, Fraction)):
        return abs(z)
    return abs(complex(z))


def to_mp_matrix(A: np.ndarray) -> mpmath.matrix:
    M = mpmath.matrix(A.shape[0], A.shape[1])
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            M[i, j] = mp_complex(A[i, j])
    return M


def from_mp_matrix(M: mpmath.matrix) -> np.ndarray:
    out = np.empty((M.rows, M.cols), dtype=object)
    for i in range(M.rows):
        for j in range(M.cols):
            out[i, j] = M[i, j]
    return out


def eigvals(A: np.ndarray, bits: int = DOUBLE_BITS) -> list:
    """Eigenvalues of a square matrix at the requested precision."""
    if bits <= DOUBLE_BITS:
        return list(np.linalg.eigvals(np.asarray(A, dtype=complex)))
    with mpmath.workprec(bits):
        ev = mpmath.eig(to_mp_matrix(A), left=False, right=False)
    return list(ev)


def eig(A: np.ndarray, bits: int = DOUBLE_BITS):
    """Eigenvalues and right eigenvectors (columns)."""
    if bits <= DOUBLE_BITS:
        w, V = np.linalg.eig(np.asarray(A, dtype=complex))
        return list(w), V
    with mpmath.workprec(bits):
        w, V = mpmath.eig(to_mp_matrix(A))
    return list(w), from_mp_matrix(V)


def solve(A: np.ndarray, B: np.ndarray, bits: int = DOUBLE_BITS) -> np.ndarray:
    if bits <= DOUBLE_BITS:
        return np.linalg.solve(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex))
    B = np.asarray(B, dtype=object)
    if B.ndim == 1:
        return solve(A, B[:, None], bits)[:, 0]
    with mpmath.workprec(bits):
        lu, perm = mpmath.mp.LU_decomp(to_mp_matrix(A))
        cols = []
        for j in range(B.shape[1]):
            b = mpmath.matrix([B[i, j] for i in range(B.shape[0])])
            # lu_solve re-factors on every call, so reuse the stored factors
            cols.append(mpmath.mp.U_solve(lu, mpmath.mp.L_solve(lu, b, perm)))
    out = np.empty(B.shape, dtype=object)
    for j, x in enumerate(cols):
        out[:, j] = [x[i] for i in range(B.shape[0])]
    return out


def singular_values(A: np.ndarray, bits: int = DOUBLE_BITS) -> list:
    if bits <= DOUBLE_BITS:
        return list(np.linalg.svd(np.asarray(A, dtype=complex), compute_uv=False))
    with mpmath.workprec(bits):
        s = mpmath.svd_c(to_mp_matrix(A), compute_uv=False)
    return sorted((s[i] for i in range(s.rows)), reverse=True)


def svd(A: np.ndarray, bits: int = DOUBLE_BITS):
    """Full SVD ``A = U diag(s) Vh`` with ``s`` sorted descending."""
    if bits <= DOUBLE_BITS:
        U, s, Vh = np.linalg.svd(np.asarray(A, dtype=complex))
        return U, list(s), Vh
    with mpmath.workprec(bits):
        U, s, V = mpmath.svd_c(to_mp_matrix(A), full_matrices=True)
    sv = [s[i] for i in range(s.rows)]
    order = sorted(range(len(sv)), key=lambda i: -sv[i])
    Vh = from_mp_matrix(V)
    return from_mp_matrix(U)[:, order], [sv[i] for i in order], Vh[order + list(range(len(sv), Vh.shape[0])), :]
