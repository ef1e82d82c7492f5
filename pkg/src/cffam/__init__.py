"""Class numbers of real quadratic fields in continued fraction families.

Modules:
    intmath   residue symbols, root counts c(n), character sums J(m), K(l)
    cfquad    continued fractions of quadratic surds and fundamental units
    family    symmetric words to polynomial families, enumeration, densities
    randmodel random Euler product model, its moments and tail estimates
    classno   L(1, chi_d), class numbers and a quadratic form oracle
    harness   experiment drivers and the ``cfq`` command line
"""
from .cfquad import CFExpansion, Mode, UnitRep, expand, fundamental_unit
from .family import CHOWLA, F21, REFERENCE_FAMILIES, YOKOI, CFWord, FamilyPoly, load_family, synthesize
from .intmath import QuadPoly, count_roots, jacobsthal, kronecker

__all__ = [
    "CFExpansion",
    "CFWord",
    "CHOWLA",
    "F21",
    "FamilyPoly",
    "Mode",
    "QuadPoly",
    "REFERENCE_FAMILIES",
    "UnitRep",
    "YOKOI",
    "count_roots",
    "expand",
    "fundamental_unit",
    "jacobsthal",
    "kronecker",
    "load_family",
    "synthesize",
]
