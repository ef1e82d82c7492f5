"""Continued fraction families: from a symmetric word to D(n), and counting members."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from math import isqrt
from pathlib import Path

import numpy as np

from . import cfquad
from .cfquad import Mode
from .intmath import QuadPoly, count_roots, kronecker, primes_upto

log = logging.getLogger(__name__)

K_SEARCH_LIMIT = 10_000
VERIFY_RANGE = range(4, 13)


class InadmissibleWord(ValueError):
    pass


@dataclass(frozen=True)
class CFWord:
    """Symmetric inner word (u_1..u_{s-1}); case A is sqrt(d), case B is (1+sqrt d)/2."""

    case: str
    u: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(int(v) for v in self.u))
        if self.case not in ("A", "B"):
            raise ValueError(f"case must be 'A' or 'B', got {self.case!r}")
        if any(v < 1 for v in self.u):
            raise ValueError("partial quotients must be positive")
        if self.u != self.u[::-1]:
            raise ValueError(f"word {self.u} is not a palindrome")

    @property
    def s(self) -> int:
        return len(self.u) + 1

    @property
    def mode(self) -> Mode:
        return Mode.SQRT if self.case == "A" else Mode.HALF

    def last(self, k: int) -> int:
        """u_s as a function of the leading term k."""
        return 2 * k if self.case == "A" else 2 * k - 1

    def q_values(self) -> list[int]:
        """q_{-1}, q_0, ..., q_{s-1} from q_{i+1} = u_{i+1} q_i + q_{i-1}."""
        q = [0, 1]
        for u in self.u:
            q.append(u * q[-1] + q[-2])
        return q


@dataclass(frozen=True)
class FamilyPoly:
    """d = D(n) = a n^2 + b n + c with leading term k(n) = e n + f, n >= 1."""

    a: int
    b: int
    c: int
    e: int
    f: int
    case: str
    word: tuple[int, ...] = ()
    name: str = ""
    shift: tuple[int, int] = field(default=(1, 0))  # N(n) = u n + v already applied

    @property
    def s(self) -> int:
        return len(self.word) + 1

    @property
    def quad(self) -> QuadPoly:
        return QuadPoly(self.a, self.b, self.c)

    @property
    def disc(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    @property
    def cfword(self) -> CFWord:
        return CFWord(self.case, self.word)

    def D(self, n):
        return (self.a * n + self.b) * n + self.c

    def k(self, n):
        return self.e * n + self.f

    def expected_expansion(self, n: int) -> tuple[int, tuple[int, ...]]:
        k = self.k(n)
        return k, self.word + (self.cfword.last(k),)

    def fid(self) -> str:
        """Short stable hash identifying the family."""
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "case": self.case,
            "word": list(self.word),
            "poly": {"a": self.a, "b": self.b, "c": self.c, "e": self.e, "f": self.f},
        }


def admissible(word: CFWord) -> bool:
    """Parity condition on q_{s-1}, q_{s-2}, q_{s-3} for infinitely many squarefree d."""
    return admissibility_report(word)["admissible"]


def admissibility_report(word: CFWord) -> dict:
    q = word.q_values()
    s = word.s
    q1 = q[s]  # q_{s-1}; list index is shifted by one for q_{-1}
    if s == 1:
        return {"admissible": True, "q": q, "reason": "q_{s-1} = 1 is odd"}
    q2 = q[s - 1]
    # the q_{s-3} that enters the parity test is the one tied to the others by
    # q_{s-2}^2 = q_{s-1} q_{s-3} + (-1)^s, i.e. the continuant of u_2..u_{s-2}
    q3 = (q2 * q2 - (-1) ** s) // q1
    other = q2 * q3 if word.case == "A" else q2 * q3 + 1
    label = "q_{s-2}q_{s-3}" if word.case == "A" else "q_{s-2}q_{s-3}+1"
    if q1 % 2:
        return {"admissible": True, "q": q, "reason": "q_{s-1} odd"}
    if other % 2 == 0:
        return {"admissible": True, "q": q, "reason": f"q_{{s-1}} and {label} even"}
    return {
        "admissible": False,
        "q": q,
        "reason": f"q_{{s-1}}={q1} is even but {label}={other} is odd",
    }


def expansion_matches(exp: cfquad.CFExpansion, k: int, period: tuple[int, ...]) -> bool:
    """[k; period] equals the computed expansion, allowing period to repeat a shorter one."""
    if exp.u0 != k or len(period) % exp.s:
        return False
    return period == exp.period * (len(period) // exp.s)


def _candidate(word: CFWord, k: int) -> int | None:
    """d with omega_d = [k; u_1..u_{s-1}, u_s(k)], checked exactly."""
    d = cfquad.reconstruct(k, word.u + (word.last(k),), word.mode)
    if d is None or d < 2 or isqrt(d) ** 2 == d:
        return None
    if word.case == "A":
        return d if isqrt(d) == k else None
    if d % 4 != 1 or (1 + isqrt(d)) // 2 != k:
        return None
    return d


def _verify_member(fam: FamilyPoly, n: int) -> bool:
    d = fam.D(n)
    k, period = fam.expected_expansion(n)
    if _candidate(fam.cfword, k) != d:
        return False
    return expansion_matches(cfquad.expand(d, fam.cfword.mode), k, period)


def synthesize(word: CFWord, k_limit: int = K_SEARCH_LIMIT, name: str = "") -> FamilyPoly:
    """Fit D(n), k(n) from the leading terms k that admit an integral d, then verify."""
    if not admissible(word):
        raise InadmissibleWord(admissibility_report(word)["reason"])
    hits = []
    # in case B, k = 1 forces d = 5 whose period (1) collapses every all-ones word
    for k in range(1 if word.case == "A" else 2, k_limit + 1):
        d = _candidate(word, k)
        if d is not None:
            hits.append((k, d))
            if len(hits) == 6:
                break
    if len(hits) < 3:
        raise InadmissibleWord(f"fewer than 3 admissible k below {k_limit} (bound too small?)")
    (k1, d1), (k2, d2), (k3, d3) = hits[:3]
    e = k2 - k1
    if k3 - k2 != e or any(k != k1 + i * e for i, (k, _) in enumerate(hits)):
        raise RuntimeError(f"admissible k do not form one progression: {[k for k, _ in hits]}")
    f = k1 - e
    two_a = d3 - 2 * d2 + d1
    if two_a % 2:
        raise RuntimeError("non-integral quadratic fit")
    a = two_a // 2
    b = d2 - d1 - 3 * a
    c = d1 - a - b
    fam = FamilyPoly(a, b, c, e, f, word.case, word.u, name=name)
    for n in VERIFY_RANGE:
        if not _verify_member(fam, n):
            raise RuntimeError(f"synthesized family fails verification at n={n}")
    return fam


def normalize(fam: FamilyPoly) -> FamilyPoly:
    """Compose with N(n) = u n + v so that case-A values avoid 1 mod 4."""
    if fam.case == "B":
        return fam
    for u in (1, 2, 4):
        for v in range(0, -u, -1):
            a = fam.a * u * u
            b = 2 * fam.a * u * v + fam.b * u
            c = fam.a * v * v + fam.b * v + fam.c
            if all(((a * n + b) * n + c) % 4 != 1 for n in range(4)):
                if u == 1:
                    return fam
                shift = (fam.shift[0] * u, fam.shift[0] * v + fam.shift[1])
                return replace(fam, a=a, b=b, c=c, e=fam.e * u, f=fam.e * v + fam.f, shift=shift)
    raise RuntimeError("no residue class mod 4 avoids 1; synthesis bug")


def prop_invariants(fam: FamilyPoly) -> dict[str, bool]:
    sign = (-1) ** fam.s
    ra = isqrt(fam.a) if fam.a > 0 else -1
    return {
        "a_square": fam.a > 0 and ra * ra == fam.a,
        "e_nonzero": fam.e != 0,
        "disc": fam.disc in (sign, 4 * sign, 16 * sign),
    }


# -- reference families -------------------------------------------------------

CHOWLA = FamilyPoly(4, 0, 1, 1, 0, "B", (1, 1), name="chowla")
YOKOI = FamilyPoly(4, 4, 5, 1, 1, "B", (), name="yokoi")
YOKOI_SHIFTED = FamilyPoly(4, -4, 5, 1, 0, "B", (), name="yokoi-4n2-4n+5")
F21 = FamilyPoly(4, 12, 5, 1, 1, "B", (1,), name="4n2+12n+5")
REFERENCE_FAMILIES = {f.name: f for f in (CHOWLA, YOKOI, F21)}


def load_family(spec) -> FamilyPoly:
    """Family from a JSON file path, JSON string, dict, or reference name."""
    if isinstance(spec, FamilyPoly):
        return spec
    if isinstance(spec, str) and spec in REFERENCE_FAMILIES:
        return REFERENCE_FAMILIES[spec]
    if isinstance(spec, (str, Path)) and Path(spec).exists():
        spec = json.loads(Path(spec).read_text())
    elif isinstance(spec, str):
        spec = json.loads(spec)
    unknown = set(spec) - {"case", "word", "poly", "name", "normalize"}
    if unknown:
        raise ValueError(f"unknown family fields: {sorted(unknown)}")
    case = spec["case"]
    word = tuple(spec.get("word", ()))
    name = spec.get("name", "")
    if "poly" in spec:
        p = spec["poly"]
        fam = FamilyPoly(p["a"], p["b"], p["c"], p["e"], p["f"], case, word, name=name)
    else:
        fam = synthesize(CFWord(case, word), name=name)
    if spec.get("normalize", True):
        fam = normalize(fam)
    return fam


# -- membership and density ---------------------------------------------------


def _n_range(fam: FamilyPoly, x: int) -> np.ndarray:
    if fam.a <= 0:
        raise ValueError("leading coefficient must be positive")
    # largest n with D(n) <= x
    disc = fam.b * fam.b - 4 * fam.a * (fam.c - x)
    if disc < 0:
        return np.zeros(0, dtype=np.int64)
    hi = (-fam.b + isqrt(disc)) // (2 * fam.a) + 1
    while hi >= 1 and fam.D(hi) > x:
        hi -= 1
    return np.arange(1, max(hi, 0) + 1, dtype=np.int64)


def _roots_mod_square(D: QuadPoly, p: int) -> np.ndarray:
    roots_p = np.flatnonzero(D.values_mod(p) == 0)
    if roots_p.size == 0:
        return roots_p
    q = p * p
    cand = (roots_p[:, None] + p * np.arange(p, dtype=np.int64)[None, :]).ravel()
    a, b, c = D.a % q, D.b % q, D.c % q
    vals = ((a * cand % q) * cand % q + b * cand % q + c) % q
    return np.sort(cand[vals == 0])


def member_arrays(fam: FamilyPoly, x: int) -> tuple[np.ndarray, np.ndarray]:
    """(n, d) arrays of all n >= 1 with 2 <= D(n) <= x and D(n) squarefree."""
    n = _n_range(fam, x)
    if n.size == 0:
        return n, n.copy()
    if x >= 2**62:
        raise OverflowError("x too large for int64 sieving")
    d = (fam.a * n + fam.b) * n + fam.c
    keep = (d >= 2) & (d <= x)
    D = fam.quad
    for p in primes_upto(isqrt(int(d.max()))):
        p = int(p)
        q = p * p
        for r in _roots_mod_square(D, p):
            # n = r mod p^2, n >= 1
            start = int(r) if r >= 1 else q
            keep[start - 1 :: q] = False
    return n[keep], d[keep]


def enumerate_family(fam: FamilyPoly, x: int):
    """Yield (n, d) for squarefree d = D(n) <= x in increasing n."""
    ns, ds = member_arrays(fam, x)
    for n, d in zip(ns.tolist(), ds.tolist()):
        yield n, d


def y_of_x(fam: FamilyPoly, x: float) -> float:
    """Real n with D(n) = x on the increasing branch."""
    return math.sqrt(x + fam.disc / (4 * fam.a)) / math.sqrt(fam.a) - fam.b / (2 * fam.a)


def c_primes(D: QuadPoly, primes: np.ndarray) -> np.ndarray:
    """c(p) for an array of primes via the residue-class case table."""
    out = np.empty(primes.size, dtype=np.int64)
    disc = D.disc
    for i, p in enumerate(primes.tolist()):
        if p == 2:
            out[i] = count_roots(D, 2)
        elif D.a % p:
            out[i] = 1 + kronecker(disc, p)
        elif D.b % p:
            out[i] = 1
        elif D.c % p:
            out[i] = 0
        else:
            out[i] = p
    return out


def density_constant(fam: FamilyPoly, P: int = 10**6) -> tuple[float, float]:
    """C1 truncated at primes <= P, and a bound on the omitted tail's log."""
    primes = primes_upto(P)[1:]
    cp = c_primes(fam.quad, primes)
    c4 = count_roots(fam.quad, 4)
    log_c1 = math.log1p(-c4 / 4) + float(np.sum(np.log1p(-cp / primes.astype(float) ** 2)))
    # c(p) <= 2 beyond the primes dividing a, and sum_{p > P} 1/p^2 < 1/P
    tail = 2.0 / P
    log.debug("C1 truncated at P=%d; tail |log| bound %.2e", P, tail)
    return math.exp(log_c1), tail


def predicted_count(fam: FamilyPoly, x: float, P: int = 10**6) -> float:
    c1, _ = density_constant(fam, P)
    return y_of_x(fam, x) * c1
