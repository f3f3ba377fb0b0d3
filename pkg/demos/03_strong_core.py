"""
Strong core: integer multiplets as ell grows
============================================

With E = -2 beta ell + 2 t ell**(1/3) and F = 2 gamma ell + 2 s ell**(2/3)
the system loses its ell dependence at leading order.  Its roots on the
s = t slice are the integers N - 3k.
"""

# %%
from fractions import Fraction

from qesquartic import MagyariSystem, multiplets, sweep
from qesquartic.oracle import rescaled_root_scan

for N in range(6):
    print(N, [m.t_k for m in multiplets(N)], "kernels:", [tuple(int(x) for x in m.h) for m in multiplets(N)])

# %%
# The exact scan takes the gcd of every maximal minor along s = t and
# finds the same integers.  Two minors alone would let spurious roots in.
scan = rescaled_root_scan(4)
print("all minors:", scan.roots, " top and bottom only:", scan.two_minor_roots)

# %%
# Following a branch from ell = 1e2 to 1e6 shows the finite-ell solutions
# drifting onto their integers.  The fitted exponent measures the
# correction order that the leading-order formula leaves open.
template = MagyariSystem(N=2, ell=1, beta=Fraction(1, 2), gamma=Fraction(-3, 10))
record = sweep(template, k=0, ell_grid=[1e2, 1e3, 1e4, 1e5, 1e6], bits=128)
for ell, s, t in zip(record.ells, record.s, record.t):
    print(f"ell={ell:8.0e}  s={complex(s).real:.6f}  t={complex(t).real:.6f}")
print("correction exponent:", round(record.exponent, 4))
