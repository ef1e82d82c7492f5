"""Continued fractions of quadratic surds, convergents and fundamental units."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt

import numpy as np

from .intmath import is_squarefree


class Mode(enum.Enum):
    SQRT = "sqrt"  # expansion of sqrt(d)
    HALF = "half"  # expansion of (1 + sqrt(d)) / 2


class PellCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class SurdState:
    """(P + sqrt(D)) / Q with Q | D - P^2."""

    P: int
    Q: int
    D: int

    @classmethod
    def make(cls, P: int, Q: int, D: int) -> "SurdState":
        if Q == 0:
            raise ValueError("Q must be nonzero")
        if (D - P * P) % Q:
            # scale numerator and denominator by |Q| to restore divisibility
            m = abs(Q)
            P, Q, D = P * m, Q * m, D * m * m
        return cls(P, Q, D)

    def floor(self) -> int:
        s = isqrt(self.D)
        if self.Q > 0:
            return (self.P + s) // self.Q
        return -((self.P + s) // -self.Q) - 1

    def step(self, u: int) -> "SurdState":
        P = u * self.Q - self.P
        return SurdState(P, (self.D - P * P) // self.Q, self.D)


@dataclass(frozen=True)
class CFExpansion:
    d: int
    u0: int
    period: tuple[int, ...]
    mode: Mode

    @property
    def s(self) -> int:
        return len(self.period)

    def term(self, i: int) -> int:
        if i == 0:
            return self.u0
        return self.period[(i - 1) % self.s]

    def omega(self) -> float:
        r = math.sqrt(self.d)
        return r if self.mode is Mode.SQRT else (1 + r) / 2

    def omega_conj(self) -> float:
        r = math.sqrt(self.d)
        return -r if self.mode is Mode.SQRT else (1 - r) / 2

    def value(self, min_q: int = 10**20) -> Fraction:
        """A convergent p/q with q >= min_q, i.e. within 1/min_q^2 of the surd."""
        p0, p1, q0, q1 = 1, self.u0, 0, 1
        i = 0
        while q1 < min_q:
            i += 1
            u = self.term(i)
            p0, p1 = p1, u * p1 + p0
            q0, q1 = q1, u * q1 + q0
        return Fraction(p1, q1)


@dataclass(frozen=True)
class UnitRep:
    """eps = (x + y sqrt(d)) / 2 with x^2 - d y^2 = 4 * norm."""

    x: int
    y: int
    d: int
    norm: int

    def __post_init__(self):
        if self.x * self.x - self.d * self.y * self.y != 4 * self.norm:
            raise ValueError(f"not a unit: {self}")

    @property
    def regulator(self) -> float:
        """log(eps), stable for very large x, y."""
        ratio = math.sqrt(self.y * self.y * self.d / (self.x * self.x))
        return math.log(self.x) + math.log1p(ratio) - math.log(2)

    def __float__(self) -> float:
        return math.exp(self.regulator)


def omega_mode(d: int) -> Mode:
    return Mode.HALF if d % 4 == 1 else Mode.SQRT


def expand(d: int, mode: Mode | str = Mode.SQRT) -> CFExpansion:
    """Periodic continued fraction of sqrt(d) or (1 + sqrt(d))/2.

    The period is found as the first return of the (P, Q) state to the state
    reached after the initial step.
    """
    mode = Mode(mode)
    if d < 2 or isqrt(d) ** 2 == d:
        raise ValueError(f"d={d} must be a non-square integer >= 2")
    if mode is Mode.HALF:
        if d % 4 != 1:
            raise ValueError(f"(1+sqrt(d))/2 expansion needs d = 1 mod 4, got {d}")
        state = SurdState.make(1, 2, d)
    else:
        state = SurdState.make(0, 1, d)
    u0 = state.floor()
    state = state.step(u0)
    start = state
    period = []
    while True:
        u = state.floor()
        period.append(u)
        state = state.step(u)
        if state == start:
            break
        if len(period) > 4 * d:  # unreachable for reduced states; guards bugs
            raise RuntimeError(f"no period found for d={d}")
    return CFExpansion(d, u0, tuple(period), mode)


def convergents(exp: CFExpansion, j: int) -> tuple[int, int]:
    """(p_j, q_j) with p_{-1} = 1, q_{-1} = 0, p_0 = u0, q_0 = 1."""
    if j < -1:
        raise ValueError("j must be >= -1")
    p0, p1, q0, q1 = 0, 1, 1, 0  # indices -2, -1
    for i in range(j + 1):
        u = exp.term(i)
        p0, p1 = p1, u * p1 + p0
        q0, q1 = q1, u * q1 + q0
    return p1, q1


def continuant_matrix(terms) -> tuple[int, int, int, int]:
    """Entries (P, P', Q, Q') of prod [[u, 1], [1, 0]]."""
    P, Pp, Q, Qp = 1, 0, 0, 1
    for u in terms:
        P, Pp, Q, Qp = P * u + Pp, P, Q * u + Qp, Q
    return P, Pp, Q, Qp


def reconstruct(u0: int, period, mode: Mode | str) -> int | None:
    """The d whose surd has expansion [u0; period], or None if none exists.

    Solves the fixed-point equation of the purely periodic tail exactly.
    """
    mode = Mode(mode)
    P, Pp, Q, Qp = continuant_matrix(period)
    # tail theta = (P theta + P') / (Q theta + Q'); omega = u0 + 1/theta
    #            = u0 - (P - Q')/(2P') + sqrt(disc)/(2P')
    disc = (P - Qp) ** 2 + 4 * Q * Pp
    rational = Fraction(u0) - Fraction(P - Qp, 2 * Pp)
    if mode is Mode.SQRT:
        if rational != 0 or disc % (4 * Pp * Pp):
            return None
        return disc // (4 * Pp * Pp)
    if rational != Fraction(1, 2) or disc % (Pp * Pp):
        return None
    return disc // (Pp * Pp)


def alphas(exp: CFExpansion, upto: int | None = None) -> list[tuple[int, int]]:
    """alpha_j = p_j - q_j omega' for j = 0..upto as (x, y), alpha = (x + y sqrt d)/2."""
    upto = exp.s - 1 if upto is None else upto
    out = []
    p0, p1, q0, q1 = 0, 1, 1, 0
    for i in range(upto + 1):
        u = exp.term(i)
        p0, p1 = p1, u * p1 + p0
        q0, q1 = q1, u * q1 + q0
        if exp.mode is Mode.SQRT:
            out.append((2 * p1, 2 * q1))
        else:
            out.append((2 * p1 - q1, q1))
    return out


def fundamental_unit(d: int) -> UnitRep:
    """Fundamental unit of Q(sqrt d) as alpha_{s-1} of the expansion of omega_d."""
    if d < 2 or not is_squarefree(d):
        raise ValueError(f"d={d} must be squarefree and >= 2")
    exp = expand(d, omega_mode(d))
    x, y = alphas(exp)[-1]
    norm = (x * x - d * y * y) // 4
    return UnitRep(x, y, d, norm)


def pell_oracle(d: int, cap: int = 10**5) -> UnitRep:
    """Minimal x^2 - d y^2 = +-4 by ascending search over y <= cap."""
    ys = np.arange(1, cap + 1, dtype=np.int64)
    if d * cap * cap + 4 >= 2**53:
        raise ValueError("cap too large for exact float square test")
    t = d * ys * ys
    best = None
    for norm in (-1, 1):
        v = t + 4 * norm
        r = np.rint(np.sqrt(np.maximum(v, 0))).astype(np.int64)
        ok = (r * r == v) & (r > 0)
        hits = np.flatnonzero(ok)
        if hits.size:
            y = int(ys[hits[0]])
            cand = (y, int(r[hits[0]]), norm)
            if best is None or cand < best:
                best = cand
    if best is None:
        raise PellCapExceeded(f"no solution with y <= {cap} for d={d}")
    y, x, norm = best
    return UnitRep(x, y, d, norm)


def _icbrt(n: int) -> int:
    if n < 8:
        return 1 if n else 0
    x = 1 << (n.bit_length() // 3 + 1)  # above the root; Newton then decreases
    while True:
        y = (2 * x + n // (x * x)) // 3
        if y >= x:
            break
        x = y
    while x**3 > n:
        x -= 1
    while (x + 1) ** 3 <= n:
        x += 1
    return x


def pell_chakravala(d: int) -> UnitRep:
    """Fundamental unit by the chakravala method, independent of expand().

    Finds the fundamental solution of a^2 - d b^2 = +-1, then recovers a
    half-integral cube root when d = 5 mod 8.
    """
    if d < 2 or isqrt(d) ** 2 == d:
        raise ValueError("d must be a non-square >= 2")
    r = isqrt(d)
    a = r if d - r * r < (r + 1) ** 2 - d else r + 1
    b, k = 1, a * a - d
    while abs(k) != 1:
        ak = abs(k)
        # m = -a * b^-1 mod |k|, the candidate closest to sqrt(d)
        m0 = (-a * pow(b, -1, ak)) % ak
        m = m0 + ((r - m0) // ak) * ak
        cands = [c for c in (m, m + ak) if c > 0]
        m = min(cands, key=lambda c: abs(c * c - d))
        a, b, k = (a * m + d * b) // ak, (a + b * m) // ak, (m * m - d) // k
    a, b = abs(a), abs(b)
    if d % 8 == 5:
        x = _icbrt(2 * a)
        for xc in (x - 1, x, x + 1, x + 2):
            if xc <= 0 or xc % 2 == 0:
                continue
            num = xc * xc - 4 * k
            if num % d:
                continue
            y = isqrt(num // d)
            if y * y * d == num and xc**3 + 3 * xc * y * y * d == 8 * a and 3 * xc * xc * y + y**3 * d == 8 * b:
                return UnitRep(xc, y, d, k)
    return UnitRep(2 * a, 2 * b, d, k)


def pell_reference(d: int, cap: int = 10**5) -> UnitRep:
    """Ascending search where feasible, chakravala beyond the cap."""
    try:
        return pell_oracle(d, cap)
    except PellCapExceeded:
        return pell_chakravala(d)


def _alpha_gt(xy: tuple[int, int], d: int, M: int) -> bool:
    """(x + y sqrt d)/2 > M, exactly."""
    x, y = xy
    t = 2 * M - x
    return t < 0 or y * y * d > t * t


def unit_bounds_check(exp: CFExpansion, first_factor: str = "u_s") -> bool:
    """Check the product bounds on alpha_j for all j <= s-1.

    alpha_0 = u0 - omega' is the complete quotient with integer part u_s, so
    the j = 0 factor of the two-sided bound is u_s by default;
    first_factor="u0" checks the bound with u0 in that slot instead.
    The one-sided pair-product bound always uses u0.
    """
    us = exp.period[-1]
    lead = us if first_factor == "u_s" else exp.u0
    d = exp.d
    lo, hi, pairs = lead, lead + 1, 1
    for j, xy in enumerate(alphas(exp)):
        if j:
            u = exp.term(j)
            lo, hi = lo * u, hi * (u + 1)
            if j % 2 == 0:
                pairs *= u * exp.term(j - 1) + 1
        if not (_alpha_gt(xy, d, lo) and _alpha_lt(xy, d, hi)):
            return False
        if not _alpha_gt(xy, d, exp.u0 * (exp.term(j) if j % 2 else 1) * pairs):
            return False
    return True


def _alpha_lt(xy: tuple[int, int], d: int, M: int) -> bool:
    x, y = xy
    t = 2 * M - x
    return t > 0 and y * y * d < t * t
