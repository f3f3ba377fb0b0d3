from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from qesquartic.core import DegeneratePivot
from qesquartic.magyari import (
    BANDS,
    MagyariSystem,
    assemble,
    eliminate,
    entry,
    forward_eliminate,
    pivoted_kernel,
    residual_report,
)
from qesquartic.oracle import exact_solutions_small_N

small = st.fractions(min_value=-3, max_value=3, max_denominator=6)
cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def test_entry_samples():
    sys2 = MagyariSystem(N=2, ell=2, gamma=1)
    assert entry(0, "U", 0, 0, sys2) == 4
    assert entry(0, "S", 0, 3, sys2) == -1
    assert entry(2, "W", 0, 0, MagyariSystem(N=2, ell=0)) == 4


def test_entry_outside_footprint():
    sys2 = MagyariSystem(N=2, ell=1)
    with pytest.raises(IndexError):
        entry(0, "W", 0, 0, sys2)
    with pytest.raises(IndexError):
        entry(3, "U", 0, 0, sys2)


def test_entry_dependencies():
    sys2 = MagyariSystem(N=3, ell=Fraction(3, 2), beta=1, gamma=2)
    assert entry(1, "S", 5, 7, sys2) == entry(1, "S", -9, 7, sys2)
    assert entry(1, "T", 5, 7, sys2) == entry(1, "T", 5, -1, sys2)
    assert entry(1, "U", 5, 7, sys2) == entry(1, "U", 0, 0, sys2)


def test_assemble_n0():
    s = MagyariSystem(N=0, ell=Fraction(3), beta=1, gamma=2)
    A = assemble(s, Fraction(5), Fraction(7))
    assert A.shape == (2, 1)
    assert list(A[:, 0]) == [s.S(0, 7), s.T(1, 5)]


def test_assemble_n1_top_block():
    s = MagyariSystem(N=1, ell=Fraction(1, 2), beta=1, gamma=1)
    E, F = Fraction(2), Fraction(3)
    A = assemble(s, E, F)
    assert [[A[0, 0], A[0, 1]], [A[1, 0], A[1, 1]]] == [[s.S(0, F), s.U(0)], [s.T(1, E), s.S(1, F)]]


def test_assemble_n2_last_row():
    s = MagyariSystem(N=2, ell=1, beta=Fraction(1, 3))
    E = Fraction(5)
    A = assemble(s, E, 0)
    assert list(A[3]) == [0, 2, s.T(3, E)]


def test_last_two_w_values():
    for N in range(2, 8):
        s = MagyariSystem(N=N, ell=1)
        assert s.W(N + 1) == 2 and s.W(N) == 4


@given(st.integers(0, 6), small, small, small, cplx, cplx)
def test_band_identity(N, ell, beta, gamma, E, F):
    s = MagyariSystem(N=N, ell=ell + 1, beta=beta, gamma=gamma)
    A = assemble(s, E, F)
    for n in range(N + 2):
        for band in BANDS:
            try:
                v = entry(n, band, E, F, s)
            except IndexError:
                continue
            col = n + {"U": 1, "S": 0, "T": -1, "W": -2}[band]
            assert A[n, col] == v
    # nothing off the four bands
    mask = np.zeros(A.shape, bool)
    for n in range(N + 2):
        for c in range(n - 2, n + 2):
            if 0 <= c <= N:
                mask[n, c] = True
    assert np.all(A[~mask] == 0)


@given(st.integers(1, 6), small, small, small, cplx, cplx)
def test_conjugation_closure(N, ell, beta, gamma, E, F):
    s = MagyariSystem(N=N, ell=float(ell) + 1, beta=float(beta), gamma=float(gamma))
    assert np.allclose(assemble(s, E.conjugate(), F.conjugate()), assemble(s, E, F).conj())


def test_u_vanishes_exactly_at_twice_ell():
    s = MagyariSystem(N=6, ell=Fraction(3, 2))
    assert [n for n in range(7) if s.U(n) == 0] == [3]


def test_forward_eliminate_n0():
    s = MagyariSystem(N=0, ell=Fraction(2), beta=Fraction(1), gamma=Fraction(3))
    E, F = Fraction(1), Fraction(5)
    w, (R1, R2) = forward_eliminate(s, E, F)
    assert list(w) == [1]
    assert R1 == F - 2 * 3 * 2 and R2 == s.T(1, E)


def test_forward_eliminate_n1_hand_case():
    s = MagyariSystem(N=1, ell=Fraction(1))
    w, (R1, R2) = forward_eliminate(s, Fraction(0), Fraction(0))
    assert list(w) == [1, 0]
    assert R1 == 0 and R2 == 2


def test_forward_eliminate_signals_at_ell_zero():
    with pytest.raises(DegeneratePivot) as info:
        forward_eliminate(MagyariSystem(N=2, ell=0), 1.0, 0.0)
    assert info.value.n == 0


@pytest.mark.parametrize("twice_ell", [0, 1, 2, 3])
def test_degeneracy_detected_at_twice_ell(twice_ell):
    for N in range(twice_ell + 1, 6):
        for ell in (Fraction(twice_ell, 2), twice_ell / 2):
            with pytest.raises(DegeneratePivot) as info:
                forward_eliminate(MagyariSystem(N=N, ell=ell, beta=0.3, gamma=-0.7), 0.4 + 1j, 2.0)
            assert info.value.n == twice_ell


def test_pivoted_kernel_n0_closed_form():
    ell, beta, gamma = Fraction(5, 2), Fraction(1, 3), Fraction(-2)
    s = MagyariSystem(N=0, ell=ell, beta=beta, gamma=gamma)
    dim, w = pivoted_kernel(s, gamma**2 - beta * (2 * ell - 1), 2 * gamma * ell)
    assert dim == 1 and list(w) == [1]


def test_pivoted_kernel_n0_no_kernel():
    dim, w = pivoted_kernel(MagyariSystem(N=0, ell=1, beta=1, gamma=1), 0.0, 0.0)
    assert dim == 0 and w is None


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_row_zero_vanishes_at_ell_zero(N):
    s = MagyariSystem(N=N, ell=Fraction(0), beta=Fraction(1, 2), gamma=Fraction(1, 3))
    A = assemble(s, Fraction(7), Fraction(0))
    assert all(x == 0 for x in A[0])


def test_elimination_kernel_consistency():
    s = MagyariSystem(N=3, ell=Fraction(5, 2), beta=Fraction(1, 2), gamma=Fraction(1, 3))
    for sol in exact_solutions_small_N(3, s.ell, s.beta, s.gamma):
        E, F = complex(sol.E), complex(sol.F)
        sf = s.cast(53)
        w, (R1, R2) = forward_eliminate(sf, E, F)
        assert abs(R1) + abs(R2) < 1e-8 * (1 + abs(E) + abs(F)) ** 3
        dim, v = pivoted_kernel(sf, E, F)
        assert dim >= 1
        cos = abs(np.vdot(w, v)) / (np.linalg.norm(w) * np.linalg.norm(v))
        assert 1 - cos < 1e-8


def test_residual_report_exact_kernel_rounded():
    s = MagyariSystem(N=2, ell=Fraction(1), beta=Fraction(1, 2), gamma=Fraction(1, 3))
    for sol in exact_solutions_small_N(2, s.ell, s.beta, s.gamma):
        rep = residual_report(s.cast(53), complex(sol.E), complex(sol.F), [complex(x) for x in sol.omega])
        assert rep.max_abs / rep.scale < 1e-12
        assert rep.max_abs == max(abs(r) for r in rep.row_residuals)


def test_residual_report_zero_vector():
    rep = residual_report(MagyariSystem(N=2, ell=1), 1.0, 1.0, [0, 0, 0])
    assert rep.max_abs == 0


def test_residual_report_random_vector():
    rng = np.random.default_rng(1)
    s = MagyariSystem(N=3, ell=1.5, beta=0.5, gamma=0.2)
    for _ in range(20):
        w = rng.normal(size=4) + 1j * rng.normal(size=4)
        E, F = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        assert residual_report(s, E, F, w).relative > 1e-6


def test_residual_report_length_mismatch():
    with pytest.raises(ValueError):
        residual_report(MagyariSystem(N=2, ell=1), 0, 0, [1, 0])


def test_symbolic_rows_match_ode():
    # row n of the assembled matrix equals the ODE coefficient of x^(n-1-ell) up to i^(n+1)
    from qesquartic import oracle

    N = 3
    w, coeffs = oracle._ode_coefficients(N)
    l, b, g, E, F, D = oracle._l, oracle._b, oracle._g, oracle._E, oracle._F, oracle._D
    s = MagyariSystem(N=N, ell=l, beta=b, gamma=g)
    A = assemble(s, E, F)
    Dval = 2 * (l + b * g - N - 1)
    for n in range(N + 2):
        lhs = sum(A[n, c] * w[c] for c in range(N + 1))
        rhs = coeffs[n - 1].subs(D, Dval)
        assert sympy.expand(rhs - sympy.I ** (n + 1) * lhs) == 0
    assert sympy.expand(coeffs[N + 1].subs(D, Dval)) == 0


def test_eliminate_matches_forward_when_regular():
    s = MagyariSystem(N=3, ell=2.3, beta=0.4, gamma=-0.1)
    w, R = forward_eliminate(s, 1 + 1j, 2 - 1j)
    el = eliminate(s, 1 + 1j, 2 - 1j)
    assert np.allclose(el.residual, R)
    assert el.degenerate_row is None
