"""Strong-core regime: ell -> infinity.

With ``F = 2 gamma ell + 2 s ell**(2/3)``, ``E = -2 beta ell + 2 t ell**(1/3)``
and ``w[n] = h[n] ell**(-n/3)``, each row of the finite system divided by
``2 ell**((2-n)/3)`` tends to

    (N + 2 - n) h[n-2] + t h[n-1] + s h[n] + (n + 1) h[n+1] = 0,

an ell-free (N+2) x (N+1) integer pencil.  On the slice ``s = t`` it has a
kernel exactly at the integers ``t = N - 3k``, ``k = 0 .. N // 2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import mpmath
import numpy as np

from . import _numeric as nm
from .core import CertificationError, DomainError, normalize_omega
from .magyari import MagyariSystem, assemble


@dataclass(frozen=True)
class ScaledCoordinates:
    s: complex
    t: complex
    ell: float

    def __post_init__(self):
        if not self.ell > 0:
            raise DomainError(f"ell must be positive, got {self.ell}")


@dataclass(frozen=True)
class AsymptoticMultiplet:
    N: int
    k: int
    t_k: int
    h: Tuple[Fraction, ...]


def rescaled_matrix(N: int, s, t) -> np.ndarray:
    if N < 0:
        raise ValueError("N must be >= 0")
    dtype = nm.dtype_for(s, t)
    A = np.zeros((N + 2, N + 1), dtype=dtype)
    if dtype is object:
        A[...] = 0
    for n in range(N + 2):
        for c, v in ((n - 2, N + 2 - n), (n - 1, t), (n, s), (n + 1, n + 1)):
            if 0 <= c <= N:
                A[n, c] = v
    return A


def scaled_coordinates(E, F, ell, beta=0, gamma=0) -> ScaledCoordinates:
    """Inverse of the strong-core substitution for ``(s, t)``."""
    s = (F - 2 * gamma * ell) / (2 * ell ** (mpmath.mpf(2) / 3 if nm.is_mp(ell) else 2 / 3))
    t = (E + 2 * beta * ell) / (2 * ell ** (mpmath.mpf(1) / 3 if nm.is_mp(ell) else 1 / 3))
    return ScaledCoordinates(s=s, t=t, ell=ell)


def unscale(s, t, ell, beta=0, gamma=0):
    """``(E, F)`` for scaled coordinates ``(s, t)`` at ``ell``."""
    third = mpmath.mpf(1) / 3 if nm.is_mp(ell) else 1 / 3
    E = -2 * beta * ell + 2 * t * ell ** third
    F = 2 * gamma * ell + 2 * s * ell ** (2 * third)
    return E, F


@dataclass
class ReductionCheck:
    ell: float
    max_deviation: float
    deviation: np.ndarray


def reduce_full_to_rescaled(N: int, ell, beta=0, gamma=0, s=0, t=0, bits: int = 128) -> ReductionCheck:
    """Compare the rescaled finite system with its ell -> infinity limit.

    Builds the full matrix at the asymptotic ``(E, F)``, applies the column
    scaling ``ell**(-n/3)`` and the row normalization ``1 / (2 ell**((2-n)/3))``,
    and returns the entrywise deviation from :func:`rescaled_matrix`.
    """
    bound = 100 * max(N, abs(beta), abs(gamma))
    if not ell > bound:
        raise DomainError(f"reduction needs ell > 100 * max(N, |beta|, |gamma|) = {bound}, got ell={ell}")
    with mpmath.workprec(bits):
        L, b, g = nm.mp_real(ell), nm.mp_real(beta), nm.mp_real(gamma)
        E, F = unscale(nm.mp_complex(s), nm.mp_complex(t), L, b, g)
        A = assemble(MagyariSystem(N=N, ell=L, beta=b, gamma=g), E, F)
        R = rescaled_matrix(N, nm.mp_complex(s), nm.mp_complex(t))
        dev = np.empty(A.shape, dtype=object)
        for i in range(N + 2):
            row_norm = 2 * L ** (mpmath.mpf(2 - i) / 3)
            for j in range(N + 1):
                dev[i, j] = abs(A[i, j] * L ** (-mpmath.mpf(j) / 3) / row_norm - R[i, j])
        worst = max(dev.ravel())
    return ReductionCheck(ell=ell, max_deviation=float(worst), deviation=np.vectorize(float)(dev))


def _kernel_from_recurrence(N: int, t) -> List[Fraction]:
    h = [Fraction(1)]
    get = lambda n: h[n] if 0 <= n < len(h) else 0
    for n in range(N):
        h.append(-(t * get(n) + t * get(n - 1) + (N + 2 - n) * get(n - 2)) / (n + 1))
    return h


def multiplets(N: int) -> List[AsymptoticMultiplet]:
    """The integer roots ``t_k = N - 3k`` with exact kernel vectors ``h`` (``h[0] = 1``)."""
    if N < 0:
        raise ValueError("N must be >= 0")
    out = []
    for k in range(N // 2 + 1):
        t = N - 3 * k
        h = _kernel_from_recurrence(N, Fraction(t))
        r = rescaled_matrix(N, Fraction(t), Fraction(t)).dot(np.array(h, dtype=object))
        if any(x != 0 for x in r):
            raise CertificationError(f"h for N={N}, t={t} leaves residuals {list(r)}")
        out.append(AsymptoticMultiplet(N=N, k=k, t_k=t, h=tuple(h)))
    return out


def asymptotic_spectrum(N: int, k: int, ell, beta=0, gamma=0):
    """Leading-order ``(E, F)`` of branch ``k``; no higher corrections."""
    if not 0 <= k <= N // 2:
        raise ValueError(f"k must lie in 0..{N // 2}, got {k}")
    if not ell > 0:
        raise DomainError("ell must be positive")
    t = N - 3 * k
    return unscale(t, t, ell, beta, gamma)


def omega_from_h(mult: AsymptoticMultiplet, ell) -> np.ndarray:
    """Leading-order wave-function coefficients ``w[n] = h[n] ell**(-n/3)``."""
    if not ell > 0:
        raise DomainError("ell must be positive")
    third = mpmath.mpf(1) / 3 if nm.is_mp(ell) else 1 / 3
    w = [float(hn) * ell ** (-n * third) if not nm.is_mp(ell) else nm.mp_real(hn) * ell ** (-n * third)
         for n, hn in enumerate(mult.h)]
    return normalize_omega(w)
