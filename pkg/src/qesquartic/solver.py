"""Simultaneous (E, F) solutions of the finite-ell termination conditions.

Two views of the same problem are used.

Square problems.  Dropping the last row leaves ``top(E) + F I`` (rows
``0..N``); dropping the first leaves ``bottom(F) + E I`` (rows ``1..N+1``).
A QES point makes both singular, so ``F`` is an eigenvalue of ``-top(E)``
and ``E`` an eigenvalue of ``-bottom(F)`` at the same time.  Taken together
they form a two-parameter eigenvalue problem whose operator determinants
give all common roots at once (:func:`coupled_eigenpairs`).

Elimination residuals.  Rows ``0..N-1`` fix ``w[1..N]`` from ``w[0] = 1``;
rows ``N`` and ``N+1`` leave two residuals in ``(E, F)``, polished by a 2-D
Newton iteration with forward-mode derivatives (:func:`newton_polish`).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from . import _numeric as nm
from .asymptotic import asymptotic_spectrum, scaled_coordinates, unscale
from .core import NoConvergence, QESSolution, SingularJacobian
from .magyari import (
    PIVOT_RTOL,
    MagyariSystem,
    assemble,
    eliminate,
    pivoted_kernel,
    residual_report,
)

log = logging.getLogger(__name__)

NEWTON_RTOL = 1e-12
FIXED_POINT_RTOL = 1e-12
JACOBIAN_COND_MAX = 1e12
DEDUP_RTOL = 1e-8
REAL_RTOL = 1e-8
ESCALATED_BITS = 128
ESCALATE_MERIT = 1e-6

# continuation in ell
STEP_RATIO = 0.8
MIN_STEP_RATIO = 0.99
JUMP_TOL = 0.25


class BranchLost(NoConvergence):
    """Continuation could not follow a branch past some ell."""

    def __init__(self, ell, message=""):
        self.ell = ell
        super().__init__(message or f"branch lost near ell={ell}")


@dataclass
class SquareProblemPair:
    """The two square minors with one unknown stripped from their diagonals."""

    sys: MagyariSystem

    def top(self, E) -> np.ndarray:
        """Rows ``0..N`` with ``S_n(0)`` on the diagonal; ``top(E) + F I`` is the minor."""
        return assemble(self.sys, E, 0)[: self.sys.N + 1]

    def bottom(self, F) -> np.ndarray:
        """Rows ``1..N+1`` with ``T_n(0)`` on the diagonal; ``bottom(F) + E I`` is the minor."""
        return assemble(self.sys, 0, F)[1:]


def eigen_F(sys: MagyariSystem, E, bits: int = 53) -> list:
    """Charges ``F`` that make rows ``0..N`` singular at energy ``E``."""
    sysw = sys.cast(bits)
    with _prec(bits):
        top = SquareProblemPair(sysw).top(nm.complex_at(E, bits))
        return nm.eigvals(-top, bits)


def eigen_E(sys: MagyariSystem, F, bits: int = 53) -> list:
    """Energies ``E`` that make rows ``1..N+1`` singular at charge ``F``."""
    sysw = sys.cast(bits)
    with _prec(bits):
        bottom = SquareProblemPair(sysw).bottom(nm.complex_at(F, bits))
        return nm.eigvals(-bottom, bits)


def _prec(bits):
    return mpmath.workprec(bits) if bits > nm.DOUBLE_BITS else _Null()


class _Null:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def coupled_eigenpairs(sys: MagyariSystem, bits: int = 53) -> List[Tuple[complex, complex]]:
    """All ``(N+1)**2`` common roots of the top and bottom minors.

    Writes the pair as ``(A1 + E B1 + F C1) x = 0``, ``(A2 + E B2 + F C2) y = 0``
    with ``B1`` the subdiagonal shift, ``C1 = B2 = I`` and ``C2`` the
    superdiagonal shift, and diagonalizes the commuting pencils

        Delta1 z = E Delta0 z,   Delta2 z = F Delta0 z

    built from Kronecker operator determinants.  ``Delta0 = B1(x)C2 - I(x)I``
    is minus identity plus a nilpotent, hence always invertible.  The true
    QES points are a subset; spurious ones are dropped later by polishing.
    """
    n = sys.N + 1
    sysw = sys.cast(bits)
    with _prec(bits):
        A = assemble(sysw, nm.complex_at(0, bits), nm.complex_at(0, bits))
        A1, A2 = A[:n], A[1:]
        B1 = np.eye(n, k=-1)
        C2 = np.eye(n, k=1)
        Id = np.eye(n)
        if bits > nm.DOUBLE_BITS:
            B1, C2, Id = (M.astype(object) for M in (B1, C2, Id))
        D0 = np.kron(B1, C2) - np.kron(Id, Id)
        D1 = np.kron(Id, A2) - np.kron(A1, C2)
        D2 = np.kron(A1, Id) - np.kron(B1, A2)
        G1 = nm.solve(D0, D1, bits)
        G2 = nm.solve(D0, D2, bits)
        # generic combination separates eigenvalues shared by one of the pencils
        mix = nm.complex_at(0.6180339887498949 + 0.2360679774997897j, bits)
        _, V = nm.eig(G1 + mix * G2, bits)
        pairs = []
        for j in range(V.shape[1]):
            z = V[:, j]
            zz = sum(abs(c) ** 2 for c in z)
            E = sum(c.conjugate() * v for c, v in zip(z, G1.dot(z))) / zz
            F = sum(c.conjugate() * v for c, v in zip(z, G2.dot(z))) / zz
            pairs.append((E, F))
    return pairs


def _equilibrated_cond(J) -> float:
    M = np.array([[complex(x) for x in row] for row in J])
    if not np.all(np.isfinite(M)):
        return math.inf
    M = M / np.maximum(np.abs(M).max(axis=0, keepdims=True), 1e-300)
    M = M / np.maximum(np.abs(M).max(axis=1, keepdims=True), 1e-300)
    try:
        return float(np.linalg.cond(M))
    except np.linalg.LinAlgError:
        return math.inf


def _merit(el):
    return sum(float(abs(r)) / float(s) if s else float(abs(r)) for r, s in zip(el.residual, el.scale))


def newton_polish(
    sys: MagyariSystem,
    seed,
    bits: int = 53,
    max_iter: int = 60,
    rtol=None,
    pivot_rtol=None,
) -> QESSolution:
    """2-D Newton on the elimination residuals starting from ``seed = (E, F)``.

    Accepts when every residual is below ``rtol`` times the sum of the moduli
    of the terms it is made of.  A vanishing pivot ``U_K`` is handled by the
    split residual of :func:`qesquartic.magyari.eliminate`.

    Raises
    ------
    SingularJacobian
        If the equilibrated Jacobian condition number exceeds 1e12 before
        convergence.
    NoConvergence
        If ``max_iter`` steps do not reach the tolerance, or the converged
        point has no kernel vector with ``w[0] != 0``.
    """
    if rtol is None:
        rtol = nm.scaled_tolerance(NEWTON_RTOL, bits)
    if pivot_rtol is None:
        pivot_rtol = nm.scaled_tolerance(PIVOT_RTOL, bits)
    sysw = sys.cast(bits)
    with _prec(bits):
        E, F = (nm.complex_at(v, bits) for v in seed)
        el = eliminate(sysw, E, F, pivot_rtol)
        for it in range(max_iter + 1):
            if all(abs(r) <= rtol * s for r, s in zip(el.residual, el.scale)):
                return _finish(sysw, sys, E, F, el, bits, iterations=it)
            if it == max_iter:
                break
            (j11, j12), (j21, j22) = el.jacobian
            if _equilibrated_cond(el.jacobian) > JACOBIAN_COND_MAX:
                raise SingularJacobian(f"Jacobian numerically singular at E={E}, F={F}")
            det = j11 * j22 - j12 * j21
            r1, r2 = el.residual
            dE = -(j22 * r1 - j12 * r2) / det
            dF = -(-j21 * r1 + j11 * r2) / det
            merit0 = _merit(el)
            step = 1
            for _ in range(12):
                trial = eliminate(sysw, E + step * dE, F + step * dF, pivot_rtol)
                if _merit(trial) < merit0 or step < 1e-3:
                    break
                step /= 2
            E, F, el = E + step * dE, F + step * dF, trial
    exc = NoConvergence(f"Newton did not converge from seed {seed} in {max_iter} steps")
    exc.merit = _merit(el)
    raise exc


def _finish(sysw, sys, E, F, el, bits, iterations, method="newton"):
    omega = el.omega()
    rep = residual_report(sysw, E, F, omega)
    accept = nm.scaled_tolerance(1e-10, bits)
    if rep.relative > accept or abs(omega[0]) == 0:
        raise NoConvergence(f"converged residuals at E={E}, F={F} admit no kernel vector with w[0] != 0")
    return QESSolution(
        E=E, F=F, omega=omega, residual_norm=float(rep.relative), method_tag=method,
        precision_bits=bits, ell=sys.ell, extras={"iterations": iterations, "degenerate_row": el.degenerate_row},
    )


def _nearest(values, target):
    return min(values, key=lambda v: abs(v - target))


def fixed_point_search(sys: MagyariSystem, seed, max_iter: int = 200, bits: int = 53,
                       accelerate: bool = True) -> QESSolution:
    """Alternate ``F <- eigen_F(E)`` and ``E <- eigen_E(F)``, nearest eigenvalue each time.

    One sweep is the composed map ``E -> E_e(F_e(E))``.  Its multiplier at
    a root can sit close to 1 (strong-core branches) or exceed 1, so by
    default each step is a Steffensen extrapolation over two sweeps, which
    converges quadratically for any multiplier other than 1.  With
    ``accelerate=False`` the plain alternation is run.  Common roots where
    the full system has no kernel vector with ``w[0] != 0`` are rejected.
    """
    sysw = sys.cast(bits)
    rtol = nm.scaled_tolerance(FIXED_POINT_RTOL, bits)

    def sweep_once(E, F):
        F1 = _nearest(eigen_F(sysw, E, bits), F)
        return _nearest(eigen_E(sysw, F1, bits), E), F1

    with _prec(bits):
        E, F = (nm.complex_at(v, bits) for v in seed)
        for it in range(1, max_iter + 1):
            E1, F1 = sweep_once(E, F)
            move = abs(E1 - E) + abs(F1 - F)
            E_new, F_new = E1, F1
            if move >= rtol * (1 + abs(E1) + abs(F1)) and accelerate:
                E2, F2 = sweep_once(E1, F1)
                E_new, F_new = E2, F2
                denom = E2 - 2 * E1 + E
                if denom != 0:
                    E_acc = E - (E1 - E) ** 2 / denom
                    F_acc = _nearest(eigen_F(sysw, E_acc, bits), F2)
                    # keep the extrapolation only if it sits closer to a fixed point
                    if abs(sweep_once(E_acc, F_acc)[0] - E_acc) < abs(E2 - E1):
                        E_new, F_new = E_acc, F_acc
            E, F = E_new, F_new
            if move < rtol * (1 + abs(E) + abs(F)):
                break
        else:
            raise NoConvergence(f"fixed point did not settle within {max_iter} iterations")
        dim, omega = pivoted_kernel(sysw, E, F, bits=bits)
        kernel_rtol = nm.scaled_tolerance(1e-8, bits)
        if dim == 0 or abs(omega[0]) <= kernel_rtol:
            raise NoConvergence(f"fixed point ({E}, {F}) is a spurious common root of the square problems")
        rep = residual_report(sysw, E, F, omega)
    return QESSolution(
        E=E, F=F, omega=omega, residual_norm=float(rep.relative), method_tag="fixed-point",
        # the last sweep only confirms the point
        precision_bits=bits, ell=sys.ell, extras={"iterations": it - 1},
    )


def _same(a: QESSolution, b: QESSolution, rtol=DEDUP_RTOL) -> bool:
    return abs(a.E - b.E) + abs(a.F - b.F) <= rtol * (1 + abs(a.E) + abs(a.F))


def _dedup(sols: Sequence[QESSolution]) -> List[QESSolution]:
    out: List[QESSolution] = []
    for s in sols:
        if not any(_same(s, o) for o in out):
            out.append(s)
    return out


def _polish_with_escalation(sys, seed, bits, escalate):
    try:
        return newton_polish(sys, seed, bits=bits)
    except NoConvergence as exc:
        # only a polish that stalled close to a root is worth more bits
        if not escalate or bits >= ESCALATED_BITS or getattr(exc, "merit", 1.0) > ESCALATE_MERIT:
            raise
    log.info("escalating Newton polish to %d bits from seed %s", ESCALATED_BITS, seed)
    return newton_polish(sys, seed, bits=ESCALATED_BITS)


def solve_all(sys: MagyariSystem, strategy: str = "scan", precision_bits: int = 53,
              escalate: bool = True) -> List[QESSolution]:
    """Every QES pair found by the chosen strategy, deduplicated and sorted.

    ``scan``
        All common roots of the two square problems
        (:func:`coupled_eigenpairs`), each polished by Newton; spurious
        roots fail to polish or merge into true ones.
    ``continuation``
        One branch per asymptotic multiplet ``k``, started at large ell from
        the leading-order spectrum and followed down to ``sys.ell``.  Branch
        labels are ``"k=<k>"``; lost branches are logged and skipped.
    """
    if strategy == "scan":
        found = []
        for seed in coupled_eigenpairs(sys, precision_bits):
            try:
                found.append(_polish_with_escalation(sys, seed, precision_bits, escalate))
            except (NoConvergence, SingularJacobian):
                continue
        sols = _dedup(found)
    elif strategy == "continuation":
        sols = []
        for k in range(sys.N // 2 + 1):
            try:
                sol = continue_branch(sys, k, bits=precision_bits)
            except BranchLost as exc:
                log.warning("branch k=%d incomplete: %s", k, exc)
                continue
            sols.append(sol)
        sols = _dedup(sols)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return sorted(sols, key=lambda s: (s.branch or "", float(abs(s.E)), float(complex(s.E).imag)))


def ell_start(sys: MagyariSystem) -> float:
    return max(1e3, 100 * max(sys.N, abs(float(sys.beta)), abs(float(sys.gamma))))


def _scaled(sol, ell, sys):
    sc = scaled_coordinates(sol.E, sol.F, ell, sys.beta, sys.gamma)
    return sc.s, sc.t


def _track(sys: MagyariSystem, sol: QESSolution, ell_from, ell_to, bits: int) -> QESSolution:
    """Follow ``sol`` from ``ell_from`` to ``ell_to``.

    Steps are geometric in ``ell + 1``, so ``ell = 0`` is reached in finitely
    many steps.  Above ``ell = 1`` seeds come from the scaled coordinates
    ``(s, t)``, which vary slowly there; below it they degenerate, and the
    seed is a secant extrapolation of ``(E, F)`` instead.
    """
    sysw = sys.cast(bits)
    with _prec(bits):
        ell = nm.real_at(ell_from, bits)
        target = nm.real_at(ell_to, bits)
        if ell == target:
            return sol
        down = target < ell
        ratio = STEP_RATIO if down else 1 / STEP_RATIO
        prev = None
        while ell != target:
            nxt = (ell + 1) * ratio - 1
            if (down and nxt <= target) or (not down and nxt >= target):
                nxt = target
            scaled = min(ell, nxt) >= 1
            if scaled:
                s, t = _scaled(sol, ell, sysw)
                seed = unscale(s, t, nxt, sysw.beta, sysw.gamma)
            elif prev is not None:
                w = (nxt - ell) / (ell - prev[0])
                seed = (sol.E + w * (sol.E - prev[1]), sol.F + w * (sol.F - prev[2]))
            else:
                seed = (sol.E, sol.F)
            try:
                cand = newton_polish(sysw.with_ell(nxt), seed, bits=bits)
                if scaled:
                    s2, t2 = _scaled(cand, nxt, sysw)
                    jump = abs(s2 - s) + abs(t2 - t) > JUMP_TOL * (1 + abs(s) + abs(t))
                else:
                    jump = abs(cand.E - seed[0]) + abs(cand.F - seed[1]) > JUMP_TOL * (1 + abs(sol.E) + abs(sol.F))
                if jump:
                    raise NoConvergence("jumped to another branch")
            except (NoConvergence, SingularJacobian):
                ratio = math.sqrt(ratio) if down else 1 / math.sqrt(1 / ratio)
                if (down and ratio > MIN_STEP_RATIO) or (not down and ratio < 1 / MIN_STEP_RATIO):
                    raise BranchLost(float(ell))
                continue
            prev = (ell, sol.E, sol.F)
            ell, sol = nxt, cand
            ratio = max(ratio * ratio, STEP_RATIO) if down else min(ratio * ratio, 1 / STEP_RATIO)
    return sol


def continue_branch(sys: MagyariSystem, k: int, bits: int = 53) -> QESSolution:
    """Branch ``k`` at ``sys.ell``, continued from the strong-core asymptotics."""
    start = max(ell_start(sys), float(sys.ell))
    seed = asymptotic_spectrum(sys.N, k, nm.real_at(start, bits), nm.real_at(sys.beta, bits), nm.real_at(sys.gamma, bits))
    sol = newton_polish(sys.with_ell(start), seed, bits=bits)
    sol = _track(sys, sol, start, sys.ell, bits)
    sol = newton_polish(sys, (sol.E, sol.F), bits=bits)
    sol.branch = f"k={k}"
    return sol


@dataclass
class SweepRecord:
    """A branch followed across an ell grid, with strong-core coordinates."""

    N: int
    k: int
    beta: float
    gamma: float
    ells: List[float] = field(default_factory=list)
    solutions: List[QESSolution] = field(default_factory=list)
    s: List[complex] = field(default_factory=list)
    t: List[complex] = field(default_factory=list)
    complete: bool = True
    exponent: Optional[float] = None

    @property
    def t_k(self) -> int:
        return self.N - 3 * self.k

    def deviations(self):
        """``(|t - t_k|, |s - t_k|)`` per grid point."""
        return [(abs(t - self.t_k), abs(s - self.t_k)) for s, t in zip(self.s, self.t)]


def fit_exponent(ells, devs, decades: float = 2.0) -> Optional[float]:
    """Slope of ``log dev`` against ``log ell`` over the top ``decades`` of the grid."""
    if not ells:
        return None
    top = max(ells)
    pts = [(math.log(float(l)), math.log(float(d))) for l, d in zip(ells, devs)
           if float(l) >= top / 10 ** decades and float(d) > 0]
    if len(pts) < 2:
        return None
    x, y = zip(*pts)
    return float(np.polyfit(x, y, 1)[0])


def sweep(template: MagyariSystem, k: int, ell_grid: Sequence[float], bits: int = 128) -> SweepRecord:
    """Follow branch ``k`` of ``template`` (its ``ell`` is ignored) across ``ell_grid``.

    The branch is entered at ``max(ell_grid[-1], ell_start)`` from the
    leading-order spectrum and tracked downward through the grid.
    """
    grid = [float(x) for x in ell_grid]
    if not grid or any(x <= 0 for x in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("ell_grid must be strictly increasing and positive")
    if not 0 <= k <= template.N // 2:
        raise ValueError(f"k must lie in 0..{template.N // 2}")
    rec = SweepRecord(N=template.N, k=k, beta=float(template.beta), gamma=float(template.gamma))
    start = max(grid[-1], ell_start(template))
    sys0 = template.with_ell(start)
    seed = asymptotic_spectrum(template.N, k, nm.real_at(start, bits),
                               nm.real_at(template.beta, bits), nm.real_at(template.gamma, bits))
    try:
        sol = newton_polish(sys0, seed, bits=bits)
    except (NoConvergence, SingularJacobian) as exc:
        log.warning("could not enter branch k=%d at ell=%g: %s", k, start, exc)
        rec.complete = False
        return rec
    here = start
    records = []
    for ell in reversed(grid):
        try:
            sol = _track(template, sol, here, ell, bits)
        except BranchLost as exc:
            log.warning("sweep of branch k=%d stopped: %s", k, exc)
            rec.complete = False
            break
        here = ell
        sol.branch = f"k={k}"
        sysw = template.cast(bits)
        with _prec(bits):
            sc = scaled_coordinates(sol.E, sol.F, nm.real_at(ell, bits), sysw.beta, sysw.gamma)
        records.append((ell, sol, sc.s, sc.t))
    for ell, sol, s, t in reversed(records):
        rec.ells.append(ell)
        rec.solutions.append(sol)
        rec.s.append(s)
        rec.t.append(t)
    rec.exponent = fit_exponent(rec.ells, [d[0] for d in rec.deviations()])
    return rec
