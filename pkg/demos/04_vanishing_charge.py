"""
ell = 0: the charge must vanish
===============================

Without a centrifugal term the first row reads F w[0] = 0, so every
solution with w[0] != 0 has F = 0.  The model labelled N there uses
polynomials of degree N - 1, which shifts D by one unit.
"""

# %%
from fractions import Fraction

from qesquartic import MagyariSystem, bbl_parameters, d_coupling, solve_all

for N in range(4):
    sols = solve_all(MagyariSystem(N=N, ell=0, beta=Fraction(3, 2), gamma=Fraction(1, 7)))
    print(N, [f"E={complex(s.E):.6f} |F|={abs(s.F):.0e}" for s in sols])

# %%
# Degree shift: the ell = 0 model with label N matches polynomial degree N - 1.
a, b, N_label = Fraction(1), Fraction(2), 3
print(bbl_parameters(a, b, N_label))
print("D at degree N-1:", d_coupling(0, a, b, N_label - 1))
