"""Independent checks: exact elimination, ODE certificate, root scan, contour decay.

Nothing here calls the solver.  The finite-ell coefficient matrix used by
:func:`exact_solutions_small_N` is re-derived from the Schroedinger equation
by symbolic substitution of the ansatz, so a wrong band in
:mod:`qesquartic.magyari` would show up as a disagreement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Dict, List, Sequence, Tuple

import mpmath
import numpy as np
import sympy

from . import _numeric as nm
from .asymptotic import rescaled_matrix
from .core import d_coupling
from .magyari import MagyariSystem

_x = sympy.Symbol("x", positive=True)
_l, _b, _g, _E, _F, _D = sympy.symbols("ell beta gamma E F D")

MAX_EXACT_N = 3
MAX_SCAN_N = 8


# -- the ansatz substituted into the radial equation --------------------------


@lru_cache(maxsize=None)
def _ode_coefficients(N: int):
    """Coefficients of ``x**(j - ell)`` in ``exp(-phi) H psi`` for ``j = -2 .. N+1``.

    ``psi = exp(phi) * sum_n w_n (i x)**(n - ell)`` with
    ``phi = -i x**3/3 - beta x**2/2 - i gamma x``; the constant ``i**(-ell)``
    is dropped.  ``H = -d2/dx2 + ell(ell+1)/x**2 + V`` with the five-coupling
    ``V`` in which ``B = 2 beta``, ``C = beta**2 - 2 gamma`` and the
    centrifugal and ``G/x**2`` terms merged.
    """
    w = sympy.symbols(f"w0:{N + 1}")
    x = _x
    phi = -sympy.I * x**3 / 3 - _b * x**2 / 2 - sympy.I * _g * x
    poly = sum(w[n] * sympy.I**n * x**n for n in range(N + 1))
    psi = sympy.exp(phi) * x ** (-_l) * poly
    V = -x**4 + sympy.I * 2 * _b * x**3 + (_b**2 - 2 * _g) * x**2 + sympy.I * _D * x + sympy.I * _F / x
    H = -sympy.diff(psi, x, 2) + _l * (_l + 1) / x**2 * psi + V * psi - _E * psi
    expr = sympy.expand(sympy.powsimp(sympy.expand(H * sympy.exp(-phi) * x**_l)))
    expr = sympy.expand(expr * x**2)
    p = sympy.Poly(expr, x)
    coeffs = {m - 2: sympy.expand(p.coeff_monomial(x**m)) for m in range(p.degree() + 1)}
    return w, coeffs


@dataclass
class OdeResidual:
    """Power coefficients left after substituting a candidate solution."""

    coefficients: Dict[int, object]
    max_abs_coefficient: object
    scale: object
    exact: bool

    def passes(self, rtol: float = 1e-10) -> bool:
        if self.exact:
            return self.max_abs_coefficient == 0
        return self.max_abs_coefficient <= rtol * self.scale


def _to_sympy_exact(v):
    if isinstance(v, Fraction):
        return sympy.Rational(v.numerator, v.denominator)
    if isinstance(v, int):
        return sympy.Integer(v)
    if isinstance(v, sympy.Basic):
        return v
    raise TypeError


def _exact_ok(*vals) -> bool:
    for v in vals:
        if isinstance(v, (int, Fraction)) and not isinstance(v, bool):
            continue
        if isinstance(v, sympy.Basic) and v.is_number and all(
            p.is_Rational for p in v.as_real_imag()
        ):
            continue
        return False
    return True


def ode_certificate(sys: MagyariSystem, E, F, omega: Sequence, D=None, bits: int = 128) -> OdeResidual:
    """Substitute the ansatz with ``omega`` into the radial equation.

    ``D`` defaults to the terminating value ``d_coupling(ell, beta, gamma, N)``.
    With all-rational inputs the coefficients are exact; otherwise they are
    evaluated at ``max(bits, 128)`` bits and ``scale`` is the largest sum of
    moduli of the monomials making up one coefficient.
    """
    N = sys.N
    omega = list(omega)
    if len(omega) != N + 1:
        raise ValueError(f"omega has length {len(omega)}, expected {N + 1}")
    if D is None:
        D = d_coupling(sys.ell, sys.beta, sys.gamma, N)
    w, coeffs = _ode_coefficients(N)
    inputs = [sys.ell, sys.beta, sys.gamma, E, F, D, *omega]
    if _exact_ok(*inputs):
        subs = dict(zip((_l, _b, _g, _E, _F, _D, *w), (_to_sympy_exact(v) for v in inputs)))
        vals = {j: sympy.expand(c.subs(subs)) for j, c in coeffs.items()}
        worst = max(sympy.Abs(v) for v in vals.values())
        return OdeResidual(coefficients=vals, max_abs_coefficient=worst, scale=None, exact=True)
    terms = _coefficient_terms(N)
    with mpmath.workprec(max(bits, 128)):
        args = [nm.mp_real(sys.ell), nm.mp_real(sys.beta), nm.mp_real(sys.gamma),
                nm.mp_complex(E), nm.mp_complex(F), nm.mp_complex(D), *(nm.mp_complex(v) for v in omega)]
        vals, scale = {}, mpmath.mpf(0)
        for j, fns in terms.items():
            parts = [f(*args) for f in fns]
            vals[j] = mpmath.fsum(parts)
            scale = max(scale, mpmath.fsum(abs(p) for p in parts))
        worst = max(abs(v) for v in vals.values())
    return OdeResidual(coefficients=vals, max_abs_coefficient=worst, scale=scale, exact=False)


@lru_cache(maxsize=None)
def _coefficient_terms(N: int):
    w, coeffs = _ode_coefficients(N)
    syms = (_l, _b, _g, _E, _F, _D, *w)
    return {
        j: [sympy.lambdify(syms, t, modules="mpmath") for t in sympy.Add.make_args(c)]
        for j, c in coeffs.items()
    }


@lru_cache(maxsize=None)
def _ode_matrix(N: int) -> sympy.Matrix:
    """Rows of the termination conditions read off the ODE, made real.

    Row ``j`` holds the ``w``-coefficients of the ``x**(j - ell)`` term with
    ``D`` set to its terminating value.  Each row carries a unit factor
    ``+-1`` or ``+-i`` which is divided out.
    """
    w, coeffs = _ode_coefficients(N)
    Dval = 2 * (_l + _b * _g - N - 1)
    rows = []
    for j in sorted(coeffs):
        c = sympy.expand(coeffs[j].subs(_D, Dval))
        row = [sympy.expand(c.coeff(wn)) for wn in w]
        if all(r == 0 for r in row):
            continue
        # the w_{j-2} entry is a pure number times a unit when present; use any numeric lead
        lead = next(sympy.Poly(r, _l, _b, _g, _E, _F).coeffs()[0] for r in row if r != 0)
        unit = sympy.sign(lead) if lead.is_real else sympy.I * sympy.sign(sympy.im(lead))
        row = [sympy.expand(r / unit) for r in row]
        rows.append(row)
    M = sympy.Matrix(rows)
    if M.has(sympy.I):
        raise AssertionError("ODE rows are not real after removing unit factors")
    return M


def ode_matrix(N: int, ell, beta, gamma) -> sympy.Matrix:
    """The (N+2) x (N+1) coefficient matrix in symbols ``E``, ``F`` at given couplings."""
    subs = {_l: _to_sympy_exact(Fraction(ell)), _b: _to_sympy_exact(Fraction(beta)),
            _g: _to_sympy_exact(Fraction(gamma))}
    return _ode_matrix(N).subs(subs)


# -- exact elimination for small N -------------------------------------------


@dataclass
class ExactSolution:
    """A QES pair from exact elimination.

    ``E`` and ``F`` are sympy Rationals when ``exact`` is true, otherwise
    mpmath numbers accurate to the requested digits.  ``E`` is always a root
    of ``minimal_polynomial`` (irreducible over the rationals).
    """

    E: object
    F: object
    omega: Tuple
    exact: bool
    minimal_polynomial: sympy.Poly

    def as_complex(self) -> Tuple[complex, complex]:
        return complex(self.E), complex(self.F)


def _rational(q) -> Fraction:
    q = Fraction(q) if not isinstance(q, float) else Fraction(q)
    return q


def _eliminant(minors: List[sympy.Poly], keep=_E) -> sympy.Poly:
    """Univariate polynomial in ``keep`` vanishing at every common zero of ``minors``."""
    drop = _F if keep == _E else _E
    nonzero = [m for m in minors if not m.is_zero]
    acc = None
    for i in range(len(nonzero)):
        for j in range(i + 1, len(nonzero)):
            r = sympy.Poly(sympy.resultant(nonzero[i], nonzero[j], drop), keep, domain="QQ")
            if r.is_zero:
                continue
            acc = r if acc is None else sympy.gcd(acc, r)
            if acc.degree() <= 0:
                return acc
            if i == 0 and j == 1:
                # top/bottom pair alone is usually enough to make the set finite
                return acc
    if acc is None:
        raise ValueError("every pair of maximal minors shares a factor: solution set is not finite")
    return acc


def _numeric_roots(p: sympy.Poly, dps: int) -> list:
    coeffs = [nm.mp_complex(Fraction(int(c.p), int(c.q))) for c in p.all_coeffs()]
    if len(coeffs) == 2:
        return [-coeffs[1] / coeffs[0]]
    return list(mpmath.polyroots(coeffs, maxsteps=500, extraprec=4 * dps))


def _poly_residual(m: sympy.Poly, E0, F0) -> Tuple[object, object]:
    """Value of ``m`` at ``(E0, F0)`` and the scale ``sum |c| max(1,|E0|)^i max(1,|F0|)^j``."""
    e, f = mpmath.mpc(E0), mpmath.mpc(F0)
    ae, af = max(1, abs(e)), max(1, abs(f))
    val, sc = mpmath.mpc(0), mpmath.mpf(0)
    for (i, j), c in m.terms():
        c = mpmath.mpf(int(c.p)) / int(c.q)
        val += c * e**i * f**j
        sc += abs(c) * ae**i * af**j
    return val, sc


def complex_eval(expr, E0, F0):
    f = sympy.lambdify((_E, _F), expr, modules="mpmath")
    return mpmath.mpc(f(E0, F0))


def exact_solutions_small_N(N: int, ell, beta, gamma, digits: int = 40) -> List[ExactSolution]:
    """All QES pairs for ``N <= 3`` by exact elimination over the rationals.

    1. Build the (N+2) x (N+1) matrix from the ODE and form every maximal
       minor as an exact polynomial in ``(E, F)``.
    2. Eliminate ``F`` by resultants (top/bottom minors first; further
       pairs only when the first resultant vanishes identically, as happens
       when ``U_{2 ell} = 0`` factorizes a minor).
    3. Factor the eliminant; rational roots stay exact, the rest are
       isolated numerically to ``digits``.
    4. Back-substitute: keep ``F`` where all maximal minors vanish and the
       kernel contains a vector with ``w[0] != 0``.
    """
    if N > MAX_EXACT_N:
        raise ValueError(f"exact elimination supports N <= {MAX_EXACT_N}, got N={N}")
    ell, beta, gamma = (_rational(v) for v in (ell, beta, gamma))
    M = ode_matrix(N, ell, beta, gamma)
    rows = M.shape[0]
    minors = [sympy.Poly(M.extract([r for r in range(rows) if r != j], list(range(N + 1))).det(method="berkowitz"),
                         _E, _F, domain="QQ") for j in range(rows)]
    elim = _eliminant(minors, _E)
    dps = digits + 20
    out: List[ExactSolution] = []
    with mpmath.workdps(dps):
        for fac, _mult in sympy.factor_list(elim.as_expr(), _E)[1]:
            fpoly = sympy.Poly(fac, _E, domain="QQ")
            if fpoly.degree() == 1:
                E0 = sympy.solve(fac, _E)[0]
                out.extend(_exact_branch(M, minors, E0, fpoly))
            else:
                for E0 in _numeric_roots(fpoly, dps):
                    out.extend(_numeric_branch(M, minors, E0, fpoly, digits))
        if any(not s.exact for s in out):
            rational_F = _rational_roots(_eliminant(minors, _F))
            out = [_snap_charge(s, rational_F, digits) for s in out]
    return out


def _rational_roots(p: sympy.Poly) -> list:
    return [sympy.solve(f, p.gens[0])[0] for f, _ in sympy.factor_list(p.as_expr())[1]
            if sympy.Poly(f, p.gens[0]).degree() == 1]


def _snap_charge(sol: ExactSolution, rational_F: list, digits: int) -> ExactSolution:
    """Replace a numeric F by the rational root of the F-eliminant it approximates."""
    if sol.exact or isinstance(sol.F, sympy.Rational):
        return sol
    tol = mpmath.mpf(10) ** (-(digits // 2))
    for q in rational_F:
        if abs(sol.F - _mp_of(q)) <= tol * (1 + abs(_mp_of(q))):
            sol.F = q
            break
    return sol


def _exact_branch(M, minors, E0, fpoly):
    polys = [sympy.Poly(m.as_expr().subs(_E, E0), _F, domain="QQ") for m in minors]
    nonzero = [p for p in polys if not p.is_zero]
    if not nonzero:
        raise ValueError(f"all minors vanish identically in F at E={E0}")
    g = reduce(sympy.gcd, nonzero)
    sols = []
    if g.degree() <= 0:
        return sols
    for fac, _ in sympy.factor_list(g.as_expr(), _F)[1]:
        fp = sympy.Poly(fac, _F, domain="QQ")
        if fp.degree() == 1:
            F0 = sympy.solve(fac, _F)[0]
            A = M.subs({_E: E0, _F: F0})
            basis = A.nullspace()
            if not basis:
                continue
            best = max(basis, key=lambda v: abs(v[0]))
            if best[0] == 0:
                continue
            vec = [sympy.nsimplify(c / best[0]) for c in best]
            sols.append(ExactSolution(E=E0, F=F0, omega=tuple(vec), exact=True, minimal_polynomial=fpoly))
        else:
            for F0 in _numeric_roots(fp, mpmath.mp.dps):
                sol = _check_numeric(M, minors, _mp_of(E0), F0, fpoly, mpmath.mp.dps - 20)
                if sol is not None:
                    sols.append(sol)
    return sols


def _mp_of(q):
    return mpmath.mpc(mpmath.mpf(int(q.p)) / int(q.q))


def _numeric_branch(M, minors, E0, fpoly, digits):
    sols = []
    # candidate F: roots of the minor of lowest positive F-degree at E0
    cands = []
    for m in minors:
        if m.is_zero:
            continue
        coeffs = [complex_eval(sympy.Poly(m.as_expr(), _F).coeff_monomial(_F**k), E0, 0) for k in range(m.degree(_F), -1, -1)]
        while coeffs and abs(coeffs[0]) <= mpmath.mpf(10) ** (-digits) * max(abs(c) for c in coeffs):
            coeffs.pop(0)
        if len(coeffs) >= 2:
            cands.append(coeffs)
    if not cands:
        return sols
    coeffs = min(cands, key=len)
    roots = [-coeffs[1] / coeffs[0]] if len(coeffs) == 2 else mpmath.polyroots(coeffs, maxsteps=500, extraprec=4 * mpmath.mp.dps)
    for F0 in roots:
        sol = _check_numeric(M, minors, E0, F0, fpoly, digits)
        if sol is not None:
            sols.append(sol)
    return sols


def _check_numeric(M, minors, E0, F0, fpoly, digits):
    tol = mpmath.mpf(10) ** (-(digits // 2))
    for m in minors:
        if m.is_zero:
            continue
        val, sc = _poly_residual(m, E0, F0)
        if abs(val) > tol * sc:
            return None
    A = mpmath.matrix([[complex_eval(c, E0, F0) for c in M.row(i)] for i in range(M.shape[0])])
    _, s, V = mpmath.svd_c(A)
    sv = [s[i] for i in range(s.rows)]
    smax = max(sv)
    kernel = [V.T.conjugate()[:, i] for i in range(len(sv)) if sv[i] <= tol * smax]
    if not kernel:
        return None
    n = A.cols
    v = [mpmath.fsum(k[0].conjugate() * k[j] for k in kernel) for j in range(n)]
    if abs(v[0]) <= mpmath.mpf(10) ** -10:
        return None
    vec = tuple(c / v[0] for c in v)
    return ExactSolution(E=E0, F=F0, omega=vec, exact=False, minimal_polynomial=fpoly)


# -- the strong-core integer pencil -------------------------------------------


def _fraction_det(rows: List[List[Fraction]]) -> Fraction:
    a = [[Fraction(v) for v in r] for r in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        inv = 1 / a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] * inv
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det


@dataclass
class RootScan:
    """Real ``t`` with a kernel of the rescaled pencil on the slice ``s = t``.

    ``roots`` are the real roots of ``kernel_polynomial``, the gcd of all
    ``N + 2`` maximal minors.  ``two_minor_roots`` are the common real roots
    of the top and bottom minors alone, which can be strictly larger.
    """

    N: int
    roots: List
    kernel_polynomial: sympy.Poly
    minors: List[sympy.Poly]
    top_factors: list
    bottom_factors: list
    two_minor_roots: List = field(default_factory=list)


_t = sympy.Symbol("t")


def rescaled_root_scan(N: int) -> RootScan:
    """Exact scan of ``rescaled_matrix(N, t, t)`` for ``N <= 8``.

    Each maximal minor is a degree ``<= N+1`` integer polynomial in ``t``; it
    is recovered exactly by evaluating the determinant at ``N + 2`` integer
    points in rational arithmetic and interpolating.
    """
    if not 0 <= N <= MAX_SCAN_N:
        raise ValueError(f"root scan supports 0 <= N <= {MAX_SCAN_N}")
    pts = list(range(-(N // 2) - 1, N + 2 - (N // 2) - 1))
    mats = {p: rescaled_matrix(N, Fraction(p), Fraction(p)).tolist() for p in pts}
    minors = []
    for j in range(N + 2):
        vals = [_fraction_det([r for i, r in enumerate(mats[p]) if i != j]) for p in pts]
        poly = sympy.Poly(sympy.interpolate(list(zip(pts, [sympy.Rational(v.numerator, v.denominator) for v in vals])), _t), _t, domain="QQ")
        minors.append(poly)
    kernel_poly = reduce(sympy.gcd, minors)
    two = sympy.gcd(minors[-1], minors[0])
    roots = sorted(set(kernel_poly.real_roots())) if kernel_poly.degree() > 0 else []
    two_roots = sorted(set(two.real_roots())) if two.degree() > 0 else []
    return RootScan(
        N=N,
        roots=roots,
        kernel_polynomial=kernel_poly,
        minors=minors,
        top_factors=sympy.factor_list(minors[-1].as_expr())[1],
        bottom_factors=sympy.factor_list(minors[0].as_expr())[1],
        two_minor_roots=two_roots,
    )


# -- complex contour ----------------------------------------------------------


@dataclass(frozen=True)
class ContourRay:
    """Asymptote ``-rho e^{+i phi}`` (left) or ``+rho e^{-i phi}`` (right)."""

    side: str
    phi: float
    rho: float = 1.0

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if not 0 < self.phi < math.pi / 3:
            raise ValueError(f"phi must lie strictly inside (0, pi/3), got {self.phi}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @property
    def point(self) -> complex:
        if self.side == "left":
            return -self.rho * complex(math.cos(self.phi), math.sin(self.phi))
        return self.rho * complex(math.cos(self.phi), -math.sin(self.phi))


def decay_rate(ray) -> float:
    """``Re[-(i/3) x**3] / rho**3`` along the ray, i.e. ``-sin(3 phi)/3``.

    Negative means the cubic exponential factor decays.  Accepts a
    :class:`ContourRay` or a bare angle (the wedge boundary is allowed for a
    bare angle and gives 0).
    """
    if isinstance(ray, ContourRay):
        x = complex(ray.point) / ray.rho
    else:
        phi = float(ray)
        x = complex(math.cos(phi), -math.sin(phi))
    rate = (-1j / 3 * x**3).real
    return 0.0 if abs(rate) < 1e-15 else rate


def wavefunction(x, sys: MagyariSystem, omega: Sequence) -> np.ndarray:
    """``exp(-i x^3/3 - beta x^2/2 - i gamma x) sum_n w_n (i x)^(n - ell)`` (principal branch)."""
    x = np.asarray(x, dtype=complex)
    ell, b, g = float(sys.ell), float(sys.beta), float(sys.gamma)
    ix = 1j * x
    series = sum(complex(w) * ix ** (n - ell) for n, w in enumerate(omega))
    return np.exp(-1j * x**3 / 3 - b * x**2 / 2 - 1j * g * x) * series
