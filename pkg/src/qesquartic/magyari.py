"""The finite-ell termination conditions for the polynomial ansatz.

Row ``n`` (``n = 0 .. N+1``) of the overcomplete banded system reads

    U_n w[n+1] + S_n(F) w[n] + T_n(E) w[n-1] + W_n w[n-2] = 0

with

    U_n    = (2 ell - n)(n + 1)
    S_n(F) = F - 2 gamma (ell - n)
    T_n(E) = E - gamma**2 + beta (2 ell - 2n + 1)
    W_n    = 2 (N + 2 - n)

giving an (N+2) x (N+1) matrix acting on ``w[0..N]``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import mpmath
import numpy as np
import sympy

from . import _numeric as nm
from .core import DegeneratePivot, InternalParameters, Real, normalize_omega

BANDS = ("U", "S", "T", "W")
# column offset of each band relative to the row index
BAND_OFFSET = {"U": 1, "S": 0, "T": -1, "W": -2}

PIVOT_RTOL = 1e-10
KERNEL_RTOL = 1e-8


@dataclass(frozen=True)
class MagyariSystem:
    N: int
    ell: Real
    beta: Real = 0
    gamma: Real = 0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"N must be a nonnegative integer, got {self.N!r}")

    @classmethod
    def from_internal(cls, ip: InternalParameters, N: int) -> "MagyariSystem":
        return cls(N=N, ell=ip.ell, beta=ip.beta, gamma=ip.gamma)

    def U(self, n):
        return (2 * self.ell - n) * (n + 1)

    def S(self, n, F):
        return F - 2 * self.gamma * (self.ell - n)

    def T(self, n, E):
        return E - self.gamma * self.gamma + self.beta * (2 * self.ell - 2 * n + 1)

    def W(self, n):
        return 2 * (self.N + 2 - n)

    @property
    def shape(self):
        return (self.N + 2, self.N + 1)

    @property
    def is_exact(self) -> bool:
        return nm.is_exact(self.ell, self.beta, self.gamma)

    def degenerate_row(self) -> Optional[int]:
        """Row ``n <= N-1`` where ``U_n`` is exactly zero (``n = 2 ell``), if any."""
        two_ell = 2 * self.ell
        if float(two_ell) != round(float(two_ell)):
            return None
        n = int(round(float(two_ell)))
        if 0 <= n <= self.N - 1 and (not nm.is_exact(self.ell) or two_ell == n):
            return n
        return None

    def cast(self, bits: int) -> "MagyariSystem":
        """Same system with float (53 bits) or mpf parameters."""
        return dataclasses.replace(
            self,
            ell=nm.real_at(self.ell, bits),
            beta=nm.real_at(self.beta, bits),
            gamma=nm.real_at(self.gamma, bits),
        )

    def with_ell(self, ell) -> "MagyariSystem":
        return dataclasses.replace(self, ell=ell)


def entry(row: int, band: str, E, F, sys: MagyariSystem):
    """Value of one generator at its cell ``(row, row + offset(band))``."""
    if band not in BAND_OFFSET:
        raise ValueError(f"band must be one of {BANDS}, got {band!r}")
    col = row + BAND_OFFSET[band]
    if not (0 <= row <= sys.N + 1 and 0 <= col <= sys.N):
        raise IndexError(f"cell ({row}, {col}) for band {band} lies outside the {sys.shape} footprint")
    if band == "U":
        return sys.U(row)
    if band == "S":
        return sys.S(row, F)
    if band == "T":
        return sys.T(row, E)
    return sys.W(row)


def _row_entries(sys: MagyariSystem, n: int, E, F):
    """(column, value) pairs of row ``n`` clipped to the footprint."""
    cells = ((n - 2, sys.W(n)), (n - 1, sys.T(n, E)), (n, sys.S(n, F)), (n + 1, sys.U(n)))
    return [(c, v) for c, v in cells if 0 <= c <= sys.N]


def assemble(sys: MagyariSystem, E=0, F=0) -> np.ndarray:
    """Dense (N+2) x (N+1) matrix at ``(E, F)``.

    Float inputs give a complex128 array; Fractions, mpmath numbers and sympy
    symbols give an object array holding them unchanged.
    """
    dtype = nm.dtype_for(E, F, sys.ell, sys.beta, sys.gamma)
    A = np.zeros(sys.shape, dtype=dtype)
    if dtype is object:
        A[...] = 0
    for n in range(sys.N + 2):
        for c, v in _row_entries(sys, n, E, F):
            A[n, c] = v
    return A


def _pivot_is_degenerate(sys, n, E, F, rtol) -> bool:
    u = sys.U(n)
    if nm.is_exact(u):
        return u == 0
    row_scale = max(nm.absval(v) for _, v in _row_entries(sys, n, E, F))
    return nm.absval(u) <= rtol * row_scale


def forward_eliminate(sys: MagyariSystem, E, F, pivot_rtol=None):
    """Solve rows ``0..N-1`` for ``w[1..N]`` from ``w[0] = 1``.

    Returns ``(omega, (R1, R2))`` where ``R1``, ``R2`` are the residuals of
    rows ``N`` and ``N+1``.  Both vanish exactly at a QES point.

    Raises
    ------
    DegeneratePivot
        If ``|U_n|`` falls below ``pivot_rtol`` times the row's largest entry.
    """
    if pivot_rtol is None:
        pivot_rtol = PIVOT_RTOL
    N = sys.N
    one = Fraction(1) if nm.is_exact(E, F, sys.ell, sys.beta, sys.gamma) else (
        mpmath.mpc(1) if any(nm.is_mp(v) for v in (E, F, sys.ell, sys.beta, sys.gamma)) else 1 + 0j
    )
    w = [one]
    get = lambda k: w[k] if 0 <= k < len(w) else 0
    for n in range(N):
        if _pivot_is_degenerate(sys, n, E, F, pivot_rtol):
            raise DegeneratePivot(n)
        w.append(-(sys.S(n, F) * get(n) + sys.T(n, E) * get(n - 1) + sys.W(n) * get(n - 2)) / sys.U(n))
    R = []
    for n in (N, N + 1):
        r = sum(v * w[c] for c, v in _row_entries(sys, n, E, F))
        R.append(r)
    dtype = object if not isinstance(one, complex) else complex
    return np.array(w, dtype=dtype), (R[0], R[1])


# -- elimination with forward-mode derivatives ------------------------------
#
# Quantities are carried as triples (value, d/dE, d/dF).  S_n has dF = 1,
# T_n has dE = 1, U_n and W_n are constants.


def _dmul_coef(c, dc, x):
    v, xe, xf = x
    return (c * v, dc[0] * v + c * xe, dc[1] * v + c * xf)


def _dadd(*xs):
    return tuple(sum(parts) for parts in zip(*xs))


def _dscale(x, a):
    return tuple(p * a for p in x)


def _entry_size(sys: MagyariSystem, n: int, col: int, E, F):
    """Sum of the moduli of the parts of cell ``(n, col)``.

    Cancellation inside ``T_n`` or ``S_n`` at a root must not shrink the
    scale that residuals are measured against.
    """
    if col == n - 1:
        return nm.absval(E) + nm.absval(sys.gamma) ** 2 + nm.absval(sys.beta * (2 * sys.ell - 2 * n + 1))
    if col == n:
        return nm.absval(F) + nm.absval(2 * sys.gamma * (sys.ell - n))
    return nm.absval(sys.U(n) if col == n + 1 else sys.W(n))


def _row_terms(sys, n, E, F, w):
    """Dual-number terms of row n and the sum of their moduli."""
    zero = (0, 0, 0)
    get = lambda k: w[k] if 0 <= k < len(w) else zero
    coefs = []
    if n - 2 >= 0:
        coefs.append((sys.W(n), (0, 0), n - 2))
    if 0 <= n - 1 <= sys.N:
        coefs.append((sys.T(n, E), (1, 0), n - 1))
    if n <= sys.N:
        coefs.append((sys.S(n, F), (0, 1), n))
    if n + 1 <= sys.N:
        coefs.append((sys.U(n), (0, 0), n + 1))
    terms = [_dmul_coef(c, dc, get(k)) for c, dc, k in coefs]
    total = _dadd(*terms) if terms else zero
    scale = sum(_entry_size(sys, n, k, E, F) * nm.absval(get(k)[0]) for _, _, k in coefs)
    return total, scale


@dataclass
class Elimination:
    """Residual pair, its Jacobian and term scales from a (possibly split) elimination.

    ``degenerate_row`` is ``None`` for the plain recurrence.  When ``U_K = 0``
    the row-``K`` equation becomes the first residual, ``w[K+1]`` is a free
    parameter ``lam``, and the second residual is the determinant that lets
    rows ``N`` and ``N+1`` share one ``lam``.
    """

    residual: tuple
    jacobian: tuple
    scale: tuple
    degenerate_row: Optional[int]
    a: list
    b: Optional[list]
    rows_a: tuple
    rows_b: Optional[tuple]

    def omega(self):
        """Unnormalized coefficient vector; ``lam`` is the least-squares fit to rows N, N+1."""
        a = [t[0] for t in self.a]
        if self.b is None:
            return a
        b = [t[0] for t in self.b]
        ra = [r[0] for r in self.rows_a]
        rb = [r[0] for r in self.rows_b]
        nb = sum(abs(x) ** 2 for x in rb)
        if nb == 0:
            lam = 0
        else:
            lam = -sum(x * y.conjugate() for x, y in zip(ra, rb)) / nb
        return [x + lam * y for x, y in zip(a, b)]


def eliminate(sys: MagyariSystem, E, F, pivot_rtol=None) -> Elimination:
    """Elimination residuals with analytic Jacobian, splitting at ``U_K = 0``."""
    if pivot_rtol is None:
        pivot_rtol = PIVOT_RTOL
    N = sys.N
    one = mpmath.mpc(1) if any(nm.is_mp(v) for v in (E, F, sys.ell)) else 1 + 0j
    zero = one * 0
    a = [(one, zero, zero)]
    b = None
    K = None
    res_K = None
    for n in range(N):
        if K is None and _pivot_is_degenerate(sys, n, E, F, pivot_rtol):
            K = n
            res_K = _row_terms(sys, n, E, F, a[: n + 1])
            a.append((zero, zero, zero))
            b = [(zero, zero, zero)] * (n + 1) + [(one, zero, zero)]
            continue
        U = sys.U(n)
        ta, _ = _row_terms(sys, n, E, F, a)
        a.append(_dscale(ta, -1 / U))
        if b is not None:
            tb, _ = _row_terms(sys, n, E, F, b)
            b.append(_dscale(tb, -1 / U))
    rows_a = tuple(_row_terms(sys, n, E, F, a) for n in (N, N + 1))
    if K is None:
        (r1, s1), (r2, s2) = rows_a
        return Elimination(
            residual=(r1[0], r2[0]),
            jacobian=((r1[1], r1[2]), (r2[1], r2[2])),
            scale=(s1, s2),
            degenerate_row=None, a=a, b=None, rows_a=(r1, r2), rows_b=None,
        )
    rows_b = tuple(_row_terms(sys, n, E, F, b) for n in (N, N + 1))
    (a1, sa1), (a2, sa2) = rows_a
    (b1, sb1), (b2, sb2) = rows_b
    # det = a1*b2 - a2*b1 with product-rule derivatives
    det = tuple(
        x for x in (
            a1[0] * b2[0] - a2[0] * b1[0],
            a1[1] * b2[0] + a1[0] * b2[1] - a2[1] * b1[0] - a2[0] * b1[1],
            a1[2] * b2[0] + a1[0] * b2[2] - a2[2] * b1[0] - a2[0] * b1[2],
        )
    )
    rK, sK = res_K
    return Elimination(
        residual=(rK[0], det[0]),
        jacobian=((rK[1], rK[2]), (det[1], det[2])),
        scale=(sK, sa1 * sb2 + sa2 * sb1),
        degenerate_row=K, a=a, b=b, rows_a=(a1, a2), rows_b=(b1, b2),
    )


# -- kernels and residuals ---------------------------------------------------


def _equilibrate(A: np.ndarray):
    """Column then row scaling ``Dr A Dc`` with unit-max rows and columns."""
    absA = np.vectorize(nm.absval, otypes=[object])(A) if A.dtype == object else np.abs(A)
    col = [max(absA[:, j]) or 1 for j in range(A.shape[1])]
    B = A / np.array(col, dtype=A.dtype if A.dtype != object else object)[None, :]
    absB = np.vectorize(nm.absval, otypes=[object])(B) if B.dtype == object else np.abs(B)
    row = [max(absB[i, :]) or 1 for i in range(A.shape[0])]
    B = B / np.array(row, dtype=B.dtype if B.dtype != object else object)[:, None]
    return B, col


def _rational_kernel(A: np.ndarray):
    M = sympy.Matrix([[sympy.sympify(x) for x in row] for row in A.tolist()])
    return [[Fraction(int(v.p), int(v.q)) for v in vec] for vec in M.nullspace()]


def pivoted_kernel(sys: MagyariSystem, E, F, rtol=None, bits: int = 53):
    """Numerical kernel of the full (N+2) x (N+1) matrix.

    The matrix is equilibrated (column then row scaling) before the SVD so
    that the rank decision is insensitive to the ell-dependent spread of the
    bands.  Exact rational inputs use an exact nullspace.

    Returns
    -------
    kernel_dim : int
    omega : ndarray or None
        The kernel vector with the largest possible ``w[0]`` component (the
        projection of the first unit vector onto the kernel), normalized to
        largest entry 1.  ``None`` when ``kernel_dim == 0``.
    """
    A = assemble(sys, E, F)
    if nm.is_exact(E, F, sys.ell, sys.beta, sys.gamma):
        basis = _rational_kernel(A)
        if not basis:
            return 0, None
        best = max(basis, key=lambda v: abs(v[0]))
        return len(basis), normalize_omega(best)
    if rtol is None:
        rtol = nm.scaled_tolerance(KERNEL_RTOL, bits)
    ctx = mpmath.workprec(bits) if bits > nm.DOUBLE_BITS else _nullctx()
    with ctx:
        if bits > nm.DOUBLE_BITS:
            A = np.vectorize(nm.mp_complex, otypes=[object])(A)
        B, col = _equilibrate(A)
        _, s, Vh = nm.svd(B, bits)
        smax = s[0] if s else 0
        n = A.shape[1]
        small = [i for i in range(n) if i >= len(s) or s[i] <= rtol * smax]
        if not small:
            return 0, None
        K = [[Vh[i, j].conjugate() * 1 for j in range(n)] for i in small]
        # projection of e_0 onto span(K): sum_i conj(K_i[0]) K_i
        v = [sum(k[0].conjugate() * k[j] for k in K) for j in range(n)]
        if max(nm.absval(x) for x in v) <= rtol:
            v = K[0]
        omega = [v[j] / col[j] for j in range(n)]
        return len(small), normalize_omega(omega)


class _nullctx:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


@dataclass
class ResidualReport:
    row_residuals: np.ndarray
    max_abs: float
    scale: float

    @property
    def relative(self):
        return self.max_abs / self.scale if self.scale else self.max_abs


def residual_report(sys: MagyariSystem, E, F, omega) -> ResidualReport:
    """Row residuals ``A(E, F) @ omega``; ``scale = max_ij size(A_ij) * max|w_n|``.

    ``size`` sums the moduli of the parts of an entry (``|E|``, ``gamma**2``, ...).
    """
    omega = list(omega)
    if len(omega) != sys.N + 1:
        raise ValueError(f"omega has length {len(omega)}, expected N+1 = {sys.N + 1}")
    A = assemble(sys, E, F)
    r = [sum(A[i, j] * omega[j] for j in range(sys.N + 1)) for i in range(sys.N + 2)]
    max_abs = max(nm.absval(x) for x in r)
    amax = max(_entry_size(sys, n, c, E, F) for n in range(sys.N + 2) for c, _ in _row_entries(sys, n, E, F))
    wmax = max(nm.absval(x) for x in omega)
    return ResidualReport(row_residuals=np.array(r, dtype=A.dtype), max_abs=max_abs, scale=amax * wmax)
