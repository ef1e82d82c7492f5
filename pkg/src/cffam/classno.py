"""L(1, chi_d), regulators and class numbers of real quadratic fields.

The class number comes from the analytic formula h = L(1, chi) sqrt(Delta) /
(2 log eps) with Delta the fundamental discriminant; an independent count of
reduced indefinite binary quadratic forms serves as an oracle.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from math import isqrt

import numpy as np
from scipy import special

from . import cfquad
from .config import DEFAULT
from .intmath import is_squarefree, primes_upto


class PrecisionError(ArithmeticError):
    pass


def fundamental_discriminant(d: int) -> int:
    if d < 2 or not is_squarefree(d):
        raise ValueError(f"d={d} must be squarefree and >= 2")
    return d if d % 4 == 1 else 4 * d


def _is_fundamental(delta: int) -> bool:
    if delta % 4 == 1:
        return delta > 1 and is_squarefree(delta)
    return delta % 4 == 0 and (delta // 4) % 4 in (2, 3) and is_squarefree(delta // 4)


# -- characters ---------------------------------------------------------------


def kronecker_array(a: int, n) -> np.ndarray:
    """(a/n) for a fixed integer a and an array of positive integers n."""
    y = np.array(n, dtype=np.int64, copy=True)
    if np.any(y < 1):
        raise ValueError("n must be positive")
    res = np.ones(y.shape, dtype=np.int64)
    flip2 = a % 8 in (3, 5)
    while True:
        ev = y % 2 == 0
        if not ev.any():
            break
        y[ev] //= 2
        if a % 2 == 0:
            res[ev] = 0
        elif flip2:
            res[ev] *= -1
    # Jacobi symbol (a mod y / y) by reciprocity, for odd y
    x = np.int64(a) % y
    while True:
        active = x != 0
        if not active.any():
            break
        while True:
            ev = active & (x % 2 == 0)
            if not ev.any():
                break
            x[ev] //= 2
            res[ev & ((y % 8 == 3) | (y % 8 == 5))] *= -1
        res[active & (x % 4 == 3) & (y % 4 == 3)] *= -1
        xa, ya = x[active], y[active]
        x[active] = ya % xa
        y[active] = xa
    res[y != 1] = 0
    return res


@lru_cache(maxsize=4)
def _spf(N: int) -> np.ndarray:
    """Smallest prime factor of 0..N (spf[0] = spf[1] = 1)."""
    spf = np.arange(N + 1, dtype=np.int64)
    spf[:2] = 1
    for p in primes_upto(isqrt(N)).tolist():
        s = spf[p * p :: p]
        np.minimum(s, p, out=s)
    return spf


def chi_table(delta: int, N: int) -> np.ndarray:
    """chi(n) = (delta/n) for n = 0..N, chi(0) = 0.

    Completely multiplicative: the symbol is evaluated at primes only and
    propagated through smallest prime factors.
    """
    size = 1 << max(N, 1).bit_length()  # shared sieve sizes keep the cache small
    spf = _spf(size)[: N + 1]
    primes = primes_upto(N)
    chip = np.zeros(N + 1, dtype=np.int64)
    chip[1] = 1
    chip[primes] = kronecker_array(delta, primes)
    chi = np.ones(N + 1, dtype=np.int64)
    chi[0] = 0
    rem = np.arange(N + 1, dtype=np.int64)
    while True:
        active = rem > 1
        if not active.any():
            break
        p = spf[rem]
        chi[active] *= chip[p[active]]
        rem[active] //= p[active]
    return chi


# -- L(1, chi) ------------------------------------------------------------------


def L1_exact(d: int, dtype=np.float64) -> float:
    """-(1/sqrt D) sum_{a<D} chi(a) log sin(pi a / D), D the fundamental discriminant."""
    delta = fundamental_discriminant(d)
    if delta > DEFAULT.l1_exact_cap:
        raise ValueError(f"discriminant {delta} above the exact-sum cap; use L1_series or L1_euler")
    half = (delta - 1) // 2
    a = np.arange(1, half + 1)
    chi = kronecker_array(delta, a)
    pi = dtype(np.pi) if dtype is not np.float64 else np.pi
    terms = chi.astype(dtype) * np.log(np.sin(pi * a.astype(dtype) / dtype(delta)))
    # chi is even, so the two halves contribute equally
    if dtype is np.float64:
        s = math.fsum(terms.tolist())
    else:
        s = terms.sum(dtype=dtype)
    return float(-2 * s / np.sqrt(dtype(delta)))


def L1_series(d: int) -> float:
    """Rapidly convergent series from the functional equation.

    L(1, chi) = sum_n chi(n) [erfc(n sqrt(pi/D))/n + E1(pi n^2/D)/sqrt D],
    truncated where pi n^2 / D > 45 (terms below e^-45).
    """
    delta = fundamental_discriminant(d)
    N = isqrt(int(45 * delta / math.pi)) + 2
    n = np.arange(1, N + 1, dtype=np.int64)
    chi = chi_table(delta, N)[1:].astype(float)
    nf = n.astype(float)
    x = math.pi * nf * nf / delta
    terms = chi * (special.erfc(np.sqrt(x)) / nf + special.exp1(x) / math.sqrt(delta))
    return math.fsum(terms.tolist())


def L1_euler(d: int, P: int = 10**5) -> tuple[float, float]:
    """Truncated Euler product and a heuristic error size."""
    if P < 10**3:
        raise ValueError("P must be at least 1000")
    delta = fundamental_discriminant(d)
    p = primes_upto(P)
    chi = kronecker_array(delta, p).astype(float)
    value = float(np.exp(-np.sum(np.log1p(-chi / p))))
    err = value * math.log(delta) / math.sqrt(P)
    return value, err


# -- class numbers --------------------------------------------------------------


@dataclass(frozen=True)
class DiscRecord:
    n: int
    d: int
    delta: int
    s: int
    eps_x: int
    eps_y: int
    norm: int
    regulator: float
    L1: float
    h: int
    residual: float

    def to_row(self) -> dict:
        return asdict(self)


def class_number(d: int, n: int = 0, L1: float | None = None) -> DiscRecord:
    """Class number of Q(sqrt d) from L(1, chi), sqrt(Delta) and the regulator."""
    delta = fundamental_discriminant(d)
    exp = cfquad.expand(d, cfquad.omega_mode(d))
    unit = cfquad.fundamental_unit(d)
    reg = unit.regulator
    if L1 is None:
        L1 = L1_series(d)
    value = L1 * math.sqrt(delta) / (2 * reg)
    h = round(value)
    resid = abs(value - h)
    if h < 1 or resid >= DEFAULT.rounding_guard:
        raise PrecisionError(f"precision insufficient for d={d}: h value {value:.6f}")
    return DiscRecord(n, d, delta, exp.s, unit.x, unit.y, unit.norm, reg, L1, h, resid)


def reduced_forms(delta: int) -> list[tuple[int, int, int]]:
    """All reduced indefinite forms (A, B, C) of discriminant delta."""
    r = math.sqrt(delta)
    out = []
    for B in range(1, isqrt(delta) + 1):
        if (B - delta) % 2 or B >= r:
            continue
        m = (delta - B * B) // 4  # -A C
        if m <= 0:
            continue
        A = np.arange(1, isqrt(delta) + 2, dtype=np.int64)
        A = A[(m % A == 0) & (r - B < 2 * A) & (2 * A < r + B)]
        for a in A.tolist():
            c = m // a
            out.append((a, B, -c))
            out.append((-a, B, c))
    return sorted(set(out))


def _rho(form: tuple[int, int, int], delta: int) -> tuple[int, int, int]:
    _, b, c = form
    r = math.sqrt(delta)
    ac = abs(c)
    # b' = -b mod 2|c| in the window (sqrt(D) - 2|c|, sqrt(D))
    b2 = -b % (2 * ac)
    top = isqrt(delta)
    b2 += ((top - b2) // (2 * ac)) * 2 * ac
    while b2 >= r:
        b2 -= 2 * ac
    return c, b2, (b2 * b2 - delta) // (4 * c)


def bqf_class_number(delta: int) -> int:
    """Wide class number by counting cycles of reduced forms under rho."""
    if delta > 10**6:
        raise ValueError("discriminant above the oracle range")
    if not _is_fundamental(delta):
        raise ValueError(f"{delta} is not a positive fundamental discriminant")
    forms = reduced_forms(delta)
    index = {f: i for i, f in enumerate(forms)}
    cycle = [-1] * len(forms)
    ncycles = 0
    for i, f in enumerate(forms):
        if cycle[i] >= 0:
            continue
        g = f
        while cycle[index[g]] < 0:
            cycle[index[g]] = ncycles
            g = _rho(g, delta)
        ncycles += 1
    # identify each cycle with the cycle of its negative form
    parent = list(range(ncycles))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for (a, b, c), i in index.items():
        j = index[(-a, b, -c)]
        ri, rj = find(cycle[i]), find(cycle[j])
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(ncycles)})


def narrow_class_number(delta: int) -> int:
    """Number of rho-cycles of reduced forms (proper equivalence classes)."""
    forms = reduced_forms(delta)
    seen: set = set()
    count = 0
    for f in forms:
        if f in seen:
            continue
        count += 1
        g = f
        while g not in seen:
            seen.add(g)
            g = _rho(g, delta)
    return count
