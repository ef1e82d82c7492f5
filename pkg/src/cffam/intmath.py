"""Exact integer arithmetic used throughout the package.

Quadratic residue symbols, factorization, squarefree tests, root counts of a
quadratic polynomial modulo n, complete character sums J(m) and the 2-adic
averages K(l).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import isqrt, prod

import numpy as np
import sympy

# residue scans for count_roots at prime powers are done directly up to here
BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class QuadPoly:
    """D(n) = a n^2 + b n + c with integer coefficients."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if self.a == 0:
            raise ValueError("leading coefficient must be nonzero")

    @property
    def disc(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def __call__(self, n):
        return (self.a * n + self.b) * n + self.c

    def values_mod(self, m: int) -> np.ndarray:
        """D(k) mod m for k = 0..m-1, as an int64 array."""
        k = np.arange(m, dtype=np.int64)
        a, b, c = self.a % m, self.b % m, self.c % m
        # two reductions keep intermediates below 2**63 for m <= 3e9
        return ((a * k % m) * k % m + b * k % m + c) % m


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n), extended to all integers n."""
    if n == 0:
        return 1 if a in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    v = (n & -n).bit_length() - 1
    if v:
        if a % 2 == 0:
            return 0
        n >>= v
        if v & 1 and a % 8 in (3, 5):
            result = -result
    # n odd and positive: Jacobi symbol by reciprocity
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def kronecker2(n: int) -> int:
    """(n/2): 0 for even n, +1 for n = +-1 mod 8, -1 for n = +-3 mod 8."""
    if n % 2 == 0:
        return 0
    return 1 if n % 8 in (1, 7) else -1


def is_prime(n: int) -> bool:
    return bool(sympy.isprime(n))


def factorize(n: int) -> dict[int, int]:
    """Prime factorization {p: e} of a positive integer."""
    if n < 1:
        raise ValueError(f"factorize needs n >= 1, got {n}")
    return {int(p): int(e) for p, e in sympy.factorint(n).items()}


def is_squarefree(n: int) -> bool:
    if n < 1:
        raise ValueError(f"is_squarefree needs n >= 1, got {n}")
    # cheap small-prime pass before a full factorization
    for p in (2, 3, 5, 7, 11, 13):
        if n % (p * p) == 0:
            return False
    return all(e == 1 for e in factorize(n).values())


def primes_upto(n: int) -> np.ndarray:
    """All primes <= n (Eratosthenes)."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, isqrt(n) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return np.flatnonzero(sieve).astype(np.int64)


def roots_mod(D: QuadPoly, m: int) -> np.ndarray:
    """Residues k mod m with D(k) = 0 mod m, by direct scan."""
    if m < 1:
        raise ValueError("modulus must be positive")
    return np.flatnonzero(D.values_mod(m) == 0)


def _count_roots_prime(D: QuadPoly, p: int) -> int:
    a, b, c = D.a % p, D.b % p, D.c % p
    if a:
        return 1 + kronecker(D.disc, p)
    if b:
        return 1
    if c:
        return 0
    return p


def _count_roots_prime_power(D: QuadPoly, p: int, e: int) -> int:
    if p > 2 and e == 1:
        return _count_roots_prime(D, p)
    if p > 2 and e == 2 and D.a % p and D.disc % p:
        # simple roots lift uniquely (Hensel)
        return _count_roots_prime(D, p)
    q = p**e
    if q > BRUTE_FORCE_LIMIT:
        raise ValueError(f"c({p}^{e}) is outside the residue-scan range")
    return int(roots_mod(D, q).size)


def count_roots(D: QuadPoly, n: int) -> int:
    """c(n) = #{k mod n : D(k) = 0 mod n}.

    Multiplicative in n by CRT; odd primes, and their squares when the roots
    are simple, use the closed form; everything else is a residue scan.
    """
    if n < 1:
        raise ValueError("n must be positive")
    return prod(_count_roots_prime_power(D, p, e) for p, e in factorize(n).items())


def jacobsthal_sum(D: QuadPoly, p: int) -> int:
    """Direct complete sum sum_{n=1}^{p} (D(n)/p)."""
    return sum(kronecker(int(v), p) for v in D.values_mod(p))


def jacobsthal_prime(D: QuadPoly, p: int) -> int:
    """J(p) for an odd prime p from the residue-class case table."""
    a, b, c = D.a % p, D.b % p, D.c % p
    if a:
        chi_a = kronecker(D.a, p)
        return chi_a * (p - 1) if D.disc % p == 0 else -chi_a
    if b == 0 and c:
        return kronecker(D.c, p) * (p - 1)
    return 0


def jacobsthal(D: QuadPoly, m: int) -> int:
    """J(m), multiplicative over the primes of an odd squarefree m."""
    if m < 1 or m % 2 == 0:
        raise ValueError(f"J(m) needs odd positive m, got {m}")
    f = factorize(m)
    if any(e > 1 for e in f.values()):
        raise ValueError(f"J(m) needs squarefree m, got {m}")
    return prod(jacobsthal_prime(D, p) for p in f)


@lru_cache(maxsize=None)
def k_ell(D: QuadPoly, ell: int) -> Fraction:
    """K(l), the mean of (D(n)/2)^l over n, with the Kronecker symbol at 2.

    (D(n)/2) depends on n mod 8 only, so the mean over n <= 8 equals
    2^-l sum_{n <= 2^l} for l >= 3, and for l < 3 whenever D(n) mod 8 has
    period dividing 2^l (all case B families).
    """
    if ell < 1:
        raise ValueError("l must be >= 1")
    total = sum(kronecker2(D(n)) ** ell for n in range(1, 9))
    return Fraction(total, 8)


def squarefree_part(n: int) -> int:
    """Product of primes dividing n to an odd power."""
    return prod(p for p, e in factorize(n).items() if e % 2) if n > 1 else 1
