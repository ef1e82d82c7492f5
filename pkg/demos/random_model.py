"""The random Euler product against the family, prime by prime and in aggregate.

Prints the local law of X(p) next to the observed frequency of chi_d(p) over
the family, then compares moments E L(1)^z from the model with the family
averages, and the model's tail P(L > e^gamma tau) three ways.
"""
import math

import numpy as np

from cffam import family, harness, randmodel
from cffam.family import CHOWLA, YOKOI
from cffam.intmath import kronecker

X = 10**6
fam = CHOWLA
ns, ds = family.member_arrays(fam, X)

print("p   alpha   beta    gamma   | observed +1   -1     0")
for p in (3, 5, 7, 11, 13):
    law = randmodel.local_law(fam, p)
    chi = np.array([kronecker(int(d), p) for d in ds])
    obs = [np.mean(chi == v) for v in (1, -1, 0)]
    print(f"{p:<3} {float(law.alpha):.4f}  {float(law.beta):.4f}  {float(law.gamma):.4f}  |  " + "  ".join(f"{o:.4f}" for o in obs))

L = np.array([r.L1 for r in harness.scan(fam, X)])
print(f"\nmoments over {L.size} family members up to {X:.0e}")
for z in (1, -1, 2, -2):
    model = math.exp(randmodel.log_moment(fam, z))
    print(f"z={z:+d}: family {np.mean(L**z):.4f}  model {model:.4f}")

samples = randmodel.sample_L_many(fam, 10**6, P=10**5)
print("\ntau   MC tail   leading saddle   uniform saddle")
for tau in (1.2, 1.5, 2.0, 2.5):
    mc, se = randmodel.mc_tail(samples, tau)
    print(
        f"{tau:<5} {mc:.5f}   {randmodel.phi_saddle(fam, tau):.5f}          "
        f"{randmodel.phi_lugannani_rice(fam, tau):.5f}"
    )

print("\nE L(1)^-1 for two families that differ only at p = 2:")
for f in (CHOWLA, YOKOI):
    print(f"  {f.name}: {math.exp(randmodel.log_moment(f, -1.0)):.5f}  2-adic atoms {randmodel.two_adic_law(f).atoms}")
