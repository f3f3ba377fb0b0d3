"""Couplings of the PT-symmetric quartic oscillator and their internal form.

The potential is

    V(x) = -x**4 + i B x**3 + C x**2 + i D x + i F / x + G / x**2

and the radial equation adds ``L(L+1)/x**2``.  Everything downstream works
with the internal triple

    beta  = B / 2
    gamma = (beta**2 - C) / 2
    ell   = sqrt(G + (L + 1/2)**2) - 1/2

so that ``ell (ell + 1) = G + L (L + 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

Real = Union[int, Fraction, float]

METHOD_TAGS = ("fixed-point", "newton", "exact-elimination")


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class DegeneratePivot(ArithmeticError):
    """Forward elimination hit a vanishing upper-diagonal coefficient ``U_n``."""

    def __init__(self, n: int, message: Optional[str] = None):
        self.n = n
        super().__init__(message or f"U_{n} vanishes; switch to pivoted_kernel")


class NoConvergence(RuntimeError):
    """An iterative search stopped without meeting its tolerance."""


class SingularJacobian(ArithmeticError):
    """Newton step undefined: the 2x2 Jacobian is numerically singular."""


class CertificationError(RuntimeError):
    """A result that must hold exactly failed its certificate."""


def parse_real(text: Union[str, Real]) -> Real:
    """Parse ``'3/4'``, ``'0.5'``, ``'1e6'`` or ``'-2'`` exactly as a Fraction.

    Non-string numbers are passed through (ints become Fractions).
    """
    if isinstance(text, bool):
        raise TypeError("booleans are not couplings")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, (Fraction, float)):
        return text
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a finite real or rational literal: {text!r}") from exc


def exact_sqrt(q: Real) -> Real:
    """Square root, exact when ``q`` is a Fraction with a rational root."""
    if q < 0:
        raise DomainError(f"negative argument {q} under square root")
    if isinstance(q, (int, Fraction)):
        q = Fraction(q)
        rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
        if rn * rn == q.numerator and rd * rd == q.denominator:
            return Fraction(rn, rd)
        return math.sqrt(q)
    return math.sqrt(q)


@dataclass(frozen=True)
class ModelParameters:
    """The couplings ``B, C, D, F, G`` plus partial wave ``L`` and degree ``N``.

    ``D`` and ``F`` are outputs of the QES construction (``D`` is fixed by
    :func:`d_coupling`, ``F`` by the solver) and may be left as ``None``.
    """

    B: Real = 0
    C: Real = 0
    G: Real = 0
    L: Real = 0
    N: int = 0
    D: Optional[Real] = None
    F: Optional[complex] = None

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 0:
            raise DomainError(f"N must be a nonnegative integer, got {self.N!r}")
        if self.L < Fraction(-1, 2):
            raise DomainError(f"L must be >= -1/2, got {self.L}")
        disc = self.G + (self.L + Fraction(1, 2)) ** 2
        if disc < 0:
            raise DomainError(
                f"G + (L + 1/2)**2 = {disc} < 0 for G={self.G}, L={self.L}: ell would be complex"
            )


@dataclass(frozen=True)
class InternalParameters:
    beta: Real
    gamma: Real
    ell: Real

    def __post_init__(self):
        for name in ("beta", "gamma", "ell"):
            v = getattr(self, name)
            if not math.isfinite(float(v)):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.ell < Fraction(-1, 2):
            raise DomainError(f"ell must be >= -1/2, got {self.ell}")


def internal_from_model(p: ModelParameters) -> InternalParameters:
    disc = p.G + (p.L + Fraction(1, 2)) ** 2
    if disc < 0:
        raise DomainError(f"G + (L + 1/2)**2 < 0 for G={p.G}, L={p.L}")
    beta = p.B / 2 if not isinstance(p.B, int) else Fraction(p.B, 2)
    gamma = (beta * beta - p.C) / 2
    ell = exact_sqrt(disc) - Fraction(1, 2)
    return InternalParameters(beta=beta, gamma=gamma, ell=ell)


def model_from_internal(ip: InternalParameters, N: int = 0, L: Real = 0) -> ModelParameters:
    """Inverse map; ``G`` absorbs whatever of ``ell(ell+1)`` the given ``L`` does not."""
    B = 2 * ip.beta
    C = ip.beta * ip.beta - 2 * ip.gamma
    G = ip.ell * (ip.ell + 1) - L * (L + 1)
    return ModelParameters(B=B, C=C, G=G, L=L, N=N, D=d_coupling(ip.ell, ip.beta, ip.gamma, N))


def d_coupling(ell: Real, beta: Real, gamma: Real, N: int) -> Real:
    """Linear coupling that makes a degree-``N`` polynomial ansatz terminate."""
    return 2 * (ell + beta * gamma - N - 1)


def bbl_parameters(a: Real, b: Real, N: int) -> ModelParameters:
    """Couplings of the two-parameter regular model ``-x^4 + 2iax^3 + (a^2-2b)x^2 + 2i(ab-N)x``.

    The returned ``N`` is the model's own label.  Its QES polynomials have
    degree ``N - 1``: ``D == d_coupling(0, a, b, N - 1)``.
    """
    a, b = parse_real(a), parse_real(b)
    return ModelParameters(B=2 * a, C=a * a - 2 * b, G=0, L=0, N=N, D=2 * (a * b - N), F=0)


def normalize_omega(omega: Sequence) -> np.ndarray:
    """Scale so that the largest-modulus entry equals exactly 1."""
    arr = np.array(list(omega), dtype=object if any(not isinstance(w, (complex, float, int, np.number)) for w in omega) else complex)
    mags = [abs(w) for w in arr]
    i = int(np.argmax(mags))
    if mags[i] == 0:
        raise ValueError("omega is the zero vector")
    pivot = arr[i]
    out = arr / pivot
    out[i] = 1
    return out


@dataclass
class QESSolution:
    """A simultaneous (E, F) pair with its coefficient vector and diagnostics."""

    E: complex
    F: complex
    omega: np.ndarray
    residual_norm: float
    method_tag: str
    precision_bits: int = 53
    branch: Optional[str] = None
    ell: Optional[Real] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method_tag not in METHOD_TAGS:
            raise ValueError(f"unknown method tag {self.method_tag!r}")
        self.omega = normalize_omega(self.omega)

    def is_real(self, rtol: float = 1e-8) -> bool:
        bound = rtol * (1 + abs(self.E) + abs(self.F))
        return abs(complex(self.E).imag) < bound and abs(complex(self.F).imag) < bound

    def conjugate(self) -> "QESSolution":
        conj = lambda z: z.conjugate()
        return QESSolution(
            E=conj(self.E), F=conj(self.F), omega=np.array([conj(w) for w in self.omega], dtype=self.omega.dtype),
            residual_norm=self.residual_norm, method_tag=self.method_tag,
            precision_bits=self.precision_bits, branch=self.branch, ell=self.ell,
        )
