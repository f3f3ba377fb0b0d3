"""
Finite ell: the coupled eigenproblem and its certificates
========================================================

For N >= 1 the energy E and the Coulomb charge F must be found together.
``solve_all`` returns every pair found, and each one is checked three
independent ways here.
"""

# %%
from fractions import Fraction

import numpy as np

from qesquartic import MagyariSystem, d_coupling, solve_all
from qesquartic.oracle import ContourRay, decay_rate, exact_solutions_small_N, ode_certificate, wavefunction

ell, beta, gamma = Fraction(1), Fraction(1, 2), Fraction(1, 3)
system = MagyariSystem(N=2, ell=ell, beta=beta, gamma=gamma)
solutions = solve_all(system)
for s in solutions:
    print(f"E = {complex(s.E):.10f}   F = {complex(s.F):.10f}   real: {s.is_real()}")

# %%
# Exact elimination with sympy reaches the same set independently.
exact = exact_solutions_small_N(2, ell, beta, gamma)
print(len(exact), "exact solutions,", len(solutions), "numerical")

# %%
# Substituting back into the differential equation gives a polynomial
# identity.  Every coefficient must vanish to working precision.
D = float(d_coupling(ell, beta, gamma, 2))
for s in solutions:
    cert = ode_certificate(system.cast(53), s.E, s.F, s.omega, D=D)
    print(f"ODE residual / scale = {float(cert.max_abs_coefficient / cert.scale):.1e}")

# %%
# The wave function decays along rays inside the two Stokes wedges of the
# PT-symmetric contour; the decay rate is fixed by the quartic term alone.
ray = ContourRay("right", np.pi / 6)
x = ray.point * np.array([1.0, 2.0, 3.0, 4.0])
psi = wavefunction(x, system.cast(53), solutions[0].omega)
print("log|psi| / rho**3 tends to", decay_rate(ray), "(negative: decaying)")
print("|psi| along the ray:", np.abs(psi))
