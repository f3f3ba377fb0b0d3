"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run under pytest (the lines bypass output capture) or directly with
``python3 tests/test_acceptance.py`` for the summary alone.
"""
from __future__ import annotations

import functools
import sys
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from qesquartic.asymptotic import multiplets, rescaled_matrix
from qesquartic.core import NoConvergence, SingularJacobian, d_coupling
from qesquartic.magyari import MagyariSystem, eliminate
from qesquartic.oracle import exact_solutions_small_N, ode_certificate, rescaled_root_scan
from qesquartic.solver import fixed_point_search, newton_polish, solve_all, sweep

ELLS = (Fraction(0), Fraction(1, 2), Fraction(1), Fraction(5, 2))
COUPLINGS = ((Fraction(1, 2), Fraction(1, 3)), (Fraction(-1, 3), Fraction(1, 5)), (Fraction(2), Fraction(-3, 4)))
PANEL = [(ell, b, g) for ell in ELLS for b, g in COUPLINGS]
PANEL_N = (0, 1, 2, 3)
REGULAR_COUPLINGS = COUPLINGS + ((Fraction(0), Fraction(0)), (Fraction(3, 2), Fraction(1, 7)))
STRONG_CORE_GRID = [1e2, 1e3, 1e4, 1e5, 1e6]
STRONG_CORE_COUPLINGS = (Fraction(1, 2), Fraction(-3, 10))
# correction exponents measured on the first run (deviation ~ ell**exponent)
EXPONENT_REGRESSION = {(2, 0): -0.3322, (2, 1): -0.3341, (3, 0): -0.3320, (3, 1): -0.3333}
EXPONENT_TOL = 0.01


def _line(number, title, passed, detail):
    return f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} [{detail}]"


@pytest.fixture
def announce(capsys):
    def emit(number, title, passed, detail):
        with capsys.disabled():
            print("\n" + _line(number, title, passed, detail))
    return emit


def _rel_distance(a, b):
    """``(|dE| + |dF|) / (1 + |E| + |F|)`` for ``(E, F)`` pairs."""
    return (abs(a[0] - b[0]) + abs(a[1] - b[1])) / (1 + abs(b[0]) + abs(b[1]))


# -- shared computations ------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def panel_case(N, ell, beta, gamma):
    sys_ = MagyariSystem(N=N, ell=ell, beta=beta, gamma=gamma)
    return sys_, tuple(solve_all(sys_)), tuple(exact_solutions_small_N(N, ell, beta, gamma))


@functools.lru_cache(maxsize=None)
def regular_case(N, beta, gamma):
    sys_ = MagyariSystem(N=N, ell=Fraction(0), beta=beta, gamma=gamma)
    return sys_, tuple(solve_all(sys_))


@functools.lru_cache(maxsize=None)
def strong_core_sweeps():
    beta, gamma = STRONG_CORE_COUPLINGS
    out = {}
    for N in (2, 3):
        template = MagyariSystem(N=N, ell=Fraction(1), beta=beta, gamma=gamma)
        for k in range(N // 2 + 1):
            out[(N, k)] = (template, sweep(template, k, STRONG_CORE_GRID, bits=128))
    return out


# -- criteria ---------------------------------------------------------------------


def criterion_1():
    start = time.perf_counter()
    bad = []
    for N in range(9):
        expected = {N - 3 * k for k in range(N // 2 + 1)}
        found_mult = {m.t_k for m in multiplets(N)}
        found_scan = set(rescaled_root_scan(N).roots)
        if found_mult != expected or found_scan != expected:
            bad.append((N, sorted(found_mult), sorted(found_scan)))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 1.0
    return ok, f"N=0..8 exact, mismatches={bad}, {elapsed:.2f}s of 1s"


def criterion_2():
    start = time.perf_counter()
    bad = []
    count = 0
    for N in range(9):
        for m in multiplets(N):
            A = rescaled_matrix(N, Fraction(m.t_k), Fraction(m.t_k))
            rows = A.dot(np.array(m.h, dtype=object))
            count += 1
            if len(rows) != N + 2 or any(r != 0 for r in rows):
                bad.append((N, m.k))
    fixtures = [tuple(int(x) for x in m.h) for m in multiplets(2)] == [(1, -2, 1), (1, 1, 1)]
    elapsed = time.perf_counter() - start
    ok = not bad and fixtures and elapsed < 1.0
    return ok, f"{count} kernels, failures={bad}, N=2 fixtures {'ok' if fixtures else 'wrong'}, {elapsed:.2f}s of 1s"


def criterion_3():
    start = time.perf_counter()
    strong_core_sweeps.cache_clear()
    sweeps = strong_core_sweeps()
    elapsed = time.perf_counter() - start
    problems = []
    summary = []
    for (N, k), (_, rec) in sweeps.items():
        if not rec.complete or len(rec.solutions) != len(STRONG_CORE_GRID):
            problems.append(f"N={N} k={k} incomplete")
            continue
        dt = [float(d) for d, _ in rec.deviations()]
        ds = [float(d) for _, d in rec.deviations()]
        for name, dev in (("t", dt), ("s", ds)):
            if not all(a > b for a, b in zip(dev, dev[1:])):
                problems.append(f"N={N} k={k} |{name}-t_k| not strictly decreasing")
        if not dt[-1] < 0.1:
            problems.append(f"N={N} k={k} |t(1e6)-t_k|={dt[-1]:.3g}")
        if rec.exponent is None or abs(rec.exponent - EXPONENT_REGRESSION[(N, k)]) > EXPONENT_TOL:
            problems.append(f"N={N} k={k} exponent {rec.exponent} left regression value {EXPONENT_REGRESSION[(N, k)]}")
        summary.append(f"N={N} k={k}: |t-t_k|(1e6)={dt[-1]:.2e} exponent={rec.exponent:.3f}")
    ok = not problems and elapsed < 10.0
    return ok, "; ".join(summary + problems) + f"; {elapsed:.2f}s of 10s at 128 bits"


def _bijective(solver_sols, oracle_sols, tol=1e-10):
    if len(solver_sols) != len(oracle_sols):
        return False, f"{len(solver_sols)} solver vs {len(oracle_sols)} oracle"
    pairs = [(complex(s.E), complex(s.F)) for s in solver_sols]
    used = set()
    worst = 0.0
    for o in oracle_sols:
        ref = o.as_complex()
        close = [i for i, p in enumerate(pairs) if _rel_distance(p, ref) < tol]
        if len(close) != 1 or close[0] in used:
            return False, f"oracle point {ref} matched {len(close)} solver points"
        used.add(close[0])
        worst = max(worst, _rel_distance(pairs[close[0]], ref))
    return True, worst


def criterion_4():
    start = time.perf_counter()
    panel_case.cache_clear()
    failures = []
    worst = 0.0
    degenerate = 0
    total = 0
    for ell, beta, gamma in PANEL:
        for N in PANEL_N:
            sys_, sols, oracle = panel_case(N, ell, beta, gamma)
            degenerate += sys_.degenerate_row() is not None or (ell == 0 and N >= 1)
            total += len(oracle)
            ok, info = _bijective(sols, oracle)
            if ok:
                worst = max(worst, info)
            else:
                failures.append(f"N={N} ell={ell} beta={beta} gamma={gamma}: {info}")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 30.0 and len(PANEL) >= 10 and degenerate > 0
    return ok, (f"{len(PANEL)} triples x N=0..3, {total} solutions, {degenerate} cases with U_(2 ell)=0, "
                f"worst distance {worst:.1e}, failures={failures}, {elapsed:.1f}s of 30s")


def criterion_5():
    bad = []
    count = 0
    for beta, gamma in REGULAR_COUPLINGS:
        for N in range(4):
            _, sols = regular_case(N, beta, gamma)
            count += len(sols)
            # guards against a vacuous pass; some sets are genuinely empty
            expected = len(exact_solutions_small_N(N, Fraction(0), beta, gamma))
            if len(sols) != expected:
                bad.append(f"N={N} beta={beta} gamma={gamma}: {len(sols)} solutions, oracle {expected}")
            for s in sols:
                if not abs(s.F) < 1e-10 * (1 + abs(s.E)):
                    bad.append(f"N={N} beta={beta} gamma={gamma}: |F|={abs(s.F):.2e}")
    return not bad, f"{count} solutions at ell=0 for N=0..3 (counts match the oracle), violations={bad}"


def _certify(sys_, sol, D, bits):
    cert = ode_certificate(sys_, sol.E, sol.F, sol.omega, D=D, bits=bits)
    wrong = ode_certificate(sys_, sol.E, sol.F, sol.omega, D=D + 1, bits=bits)
    ratio = cert.max_abs_coefficient if cert.exact else cert.max_abs_coefficient / cert.scale
    return cert.passes(1e-10), not wrong.passes(1e-10), float(ratio)


def criterion_6():
    failed, undetected = [], []
    worst = 0.0
    count = exact_zero = 0

    def record(label, result):
        nonlocal worst, count
        ok, caught, ratio = result
        count += 1
        worst = max(worst, ratio)
        if not ok:
            failed.append(f"{label} ratio={ratio:.1e}")
        if not caught:
            undetected.append(label)

    for (N, k), (template, rec) in strong_core_sweeps().items():
        for ell, sol in zip(rec.ells, rec.solutions):
            sys_ = template.with_ell(ell).cast(128)
            with mpmath.workprec(128):
                D = d_coupling(sys_.ell, sys_.beta, sys_.gamma, N)
                record(f"sweep N={N} k={k} ell={ell:g}", _certify(sys_, sol, D, 128))
    for ell, beta, gamma in PANEL:
        for N in PANEL_N:
            sys_, sols, oracle = panel_case(N, ell, beta, gamma)
            D = d_coupling(ell, beta, gamma, N)
            for sol in sols:
                record(f"panel N={N} ell={ell}", _certify(sys_.cast(53), sol, float(D), 128))
            for o in oracle:
                if o.exact:
                    cert = ode_certificate(sys_, o.E, o.F, o.omega, D=D)
                    exact_zero += cert.exact and cert.max_abs_coefficient == 0
                    if not (cert.exact and cert.max_abs_coefficient == 0):
                        failed.append(f"exact fixture N={N} ell={ell} not identically zero")
    for beta, gamma in REGULAR_COUPLINGS:
        for N in range(4):
            sys_, sols = regular_case(N, beta, gamma)
            D = d_coupling(Fraction(0), beta, gamma, N)
            for sol in sols:
                record(f"ell=0 N={N}", _certify(sys_.cast(53), sol, float(D), 128))
    ok = not failed and not undetected and exact_zero > 0
    return ok, (f"{count} solutions, worst ratio {worst:.1e}, {exact_zero} exact fixtures identically zero, "
                f"failures={failed[:5]}, D+1 undetected={undetected[:5]}")


def _jacobian_check(rng, points=100):
    worst = 0.0
    for _ in range(points):
        N = int(rng.integers(1, 7))
        sys_ = MagyariSystem(N=N, ell=float(rng.uniform(0.6, 5)), beta=float(rng.normal()),
                             gamma=float(rng.normal()))
        E, F = complex(*rng.normal(size=2) * 3), complex(*rng.normal(size=2) * 3)
        J = np.array(eliminate(sys_, E, F).jacobian, dtype=complex)
        h = 1e-6 * (1 + abs(E) + abs(F))
        cols = []
        for dE, dF in ((h, 0), (0, h)):
            rp = eliminate(sys_, E + dE, F + dF).residual
            rm = eliminate(sys_, E - dE, F - dF).residual
            cols.append([(a - b) / (2 * h) for a, b in zip(rp, rm)])
        fd = np.array(cols).T
        worst = max(worst, float(np.abs(J - fd).max() / np.abs(J).max()))
    return worst


def criterion_7():
    disagreements = []
    worst = 0.0
    both = skipped = 0
    for ell, beta, gamma in PANEL:
        for N in PANEL_N:
            sys_, sols, _ = panel_case(N, ell, beta, gamma)
            for sol in sols:
                seed = (sol.E * (1 + 1e-4) + 1e-4, sol.F * (1 - 1e-4) + 1e-4)
                try:
                    fp = fixed_point_search(sys_, seed)
                    nw = newton_polish(sys_, seed)
                except (NoConvergence, SingularJacobian):
                    skipped += 1
                    continue
                both += 1
                d = _rel_distance((complex(fp.E), complex(fp.F)), (complex(nw.E), complex(nw.F)))
                worst = max(worst, d)
                if not d < 1e-8:
                    disagreements.append(f"N={N} ell={ell} E={complex(sol.E):.6g} d={d:.1e}")
    jac = _jacobian_check(np.random.default_rng(20260101))
    ok = not disagreements and jac < 1e-6 and both > 0
    return ok, (f"{both} seeds where both converge ({skipped} skipped), worst method distance {worst:.1e}, "
                f"disagreements={disagreements}, Jacobian vs central differences {jac:.1e} on 100 points")


def criterion_8():
    problems = []
    count = real = 0
    cases = [panel_case(N, ell, b, g)[:2] for ell, b, g in PANEL for N in PANEL_N]
    cases += [regular_case(N, b, g) for b, g in REGULAR_COUPLINGS for N in range(4)]
    for sys_, sols in cases:
        pts = [(complex(s.E), complex(s.F)) for s in sols]
        for s, p in zip(sols, pts):
            count += 1
            real += bool(s.is_real())
            conj = (p[0].conjugate(), p[1].conjugate())
            partners = [t for t, q in zip(sols, pts) if _rel_distance(q, conj) < 1e-8]
            if len(partners) != 1:
                problems.append(f"N={sys_.N} ell={sys_.ell}: {len(partners)} conjugate partners for E={p[0]:.6g}")
            elif partners[0].is_real() != s.is_real():
                problems.append(f"N={sys_.N} ell={sys_.ell}: reality flag differs from partner")
            if s.is_real() and _rel_distance(p, conj) > 1e-8:
                problems.append(f"N={sys_.N} ell={sys_.ell}: flagged real but not self-conjugate")
    return not problems, f"{count} solutions ({real} real) in {len(cases)} sets, problems={problems[:5]}"


CRITERIA = [
    (1, "asymptotic multiplets", criterion_1),
    (2, "kernel certificates", criterion_2),
    (3, "strong-core convergence", criterion_3),
    (4, "small-N oracle equivalence", criterion_4),
    (5, "ell=0 specialization", criterion_5),
    (6, "ODE certificate", criterion_6),
    (7, "method cross-agreement", criterion_7),
    (8, "conjugate closure and reality reporting", criterion_8),
]


@pytest.mark.parametrize("number, title, check", CRITERIA, ids=[f"criterion{n}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check, announce):
    passed, detail = check()
    announce(number, title, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    results = []
    for number, title, check in CRITERIA:
        passed, detail = check()
        results.append(passed)
        print(_line(number, title, passed, detail), flush=True)
    sys.exit(0 if all(results) else 1)
