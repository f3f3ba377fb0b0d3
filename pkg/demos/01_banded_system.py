"""
The overcomplete banded system
==============================

A polynomial ansatz of degree N turns the Schroedinger equation into N+2
linear conditions on N+1 coefficients.  This script builds that system,
shows its band layout and solves the one case with a closed form.
"""

# %%
# Couplings come in two conventions.  The model set (B, C, G, L) describes
# the potential; the internal set (beta, gamma, ell) is what the algebra uses.
from fractions import Fraction

import numpy as np

from qesquartic import (
    MagyariSystem, ModelParameters, assemble, d_coupling, internal_from_model, solve_all,
)

model = ModelParameters(B=Fraction(1), C=Fraction(-1, 2), G=Fraction(3, 4), L=Fraction(0), N=2)
internal = internal_from_model(model)
print("internal couplings:", internal)
print("linear coupling D fixed by N:", d_coupling(internal.ell, internal.beta, internal.gamma, 2))

# %%
# The matrix has N+2 rows and N+1 columns.  Row n carries four bands:
# W at column n-2, T (holding E) at n-1, S (holding F) at n and U at n+1.
system = MagyariSystem(N=3, ell=Fraction(5, 2), beta=Fraction(1, 2), gamma=Fraction(1, 3))
E, F = Fraction(2), Fraction(-1)
print(np.array(assemble(system, E, F), dtype=object))

# %%
# A solution needs a nonzero vector annihilated by all rows at once, which
# happens only on isolated (E, F) points.  For N = 0 the two rows give
# E = gamma**2 - beta (2 ell - 1) and F = 2 gamma ell directly.
(solution,) = solve_all(MagyariSystem(N=0, ell=3, beta=1, gamma=2))
print("N=0: E =", solution.E, " F =", solution.F, " residual", solution.residual_norm)
