"""The random Euler product model of L(1, chi_d) over a family.

Each odd prime p gets an independent X(p) in {1, -1, 0} with probabilities
alpha_p, beta_p, gamma_p fitted to the residue classes of D(n) mod p^2; the
powers of 2 share one joint law. Moments E(L(1, X)^z) factor over primes,
which gives the log moment generating function, its saddle point and the
tail estimates, as well as the census constant C2.
"""
from __future__ import annotations

import logging
import math
import threading
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np
from scipy import integrate, optimize, stats

from .config import DEFAULT
from .family import FamilyPoly, density_constant
from .intmath import count_roots, factorize, is_prime, jacobsthal, jacobsthal_prime, k_ell, kronecker, kronecker2, primes_upto

log = logging.getLogger(__name__)

EULER_GAMMA = float(np.euler_gamma)
ZETA2 = math.pi**2 / 6


# -- local laws ---------------------------------------------------------------


@dataclass(frozen=True)
class LocalLaw:
    p: int
    alpha: Fraction
    beta: Fraction
    gamma: Fraction

    def __post_init__(self):
        if self.alpha + self.beta + self.gamma != 1:
            raise ValueError(f"probabilities at p={self.p} do not sum to 1")
        if not all(0 <= v <= 1 for v in (self.alpha, self.beta, self.gamma)):
            raise ValueError(f"probability outside [0, 1] at p={self.p}: {self}")

    def expect_power(self, k: int) -> Fraction:
        """E(X(p)^k)."""
        if k == 0:
            return Fraction(1)
        return self.alpha + self.beta if k % 2 == 0 else self.alpha - self.beta


def _content(fam: FamilyPoly) -> int:
    return gcd(gcd(fam.a, fam.b), fam.c)


def local_law(fam: FamilyPoly, p: int) -> LocalLaw:
    """Exact law of X(p) at an odd prime p."""
    if p == 2:
        raise ValueError("p = 2 has a joint law; use two_adic_law")
    if p < 3 or p % 2 == 0 or not is_prime(p):
        raise ValueError(f"p={p} is not an odd prime")
    D = fam.quad
    cp = count_roots(D, p)
    cp2 = count_roots(D, p * p)
    gamma = Fraction(p * cp - cp, p * p - cp)
    derived = Fraction(p * cp - cp2, p * p - cp2)
    if _content(fam) % p and fam.disc % p:
        # the c(p^2) reading of the same count must agree
        assert gamma == derived, (p, cp, cp2)
    else:
        # repeated roots mod p: only the c(p^2) count is the conditional probability
        gamma = derived
    diff = Fraction(jacobsthal_prime(D, p), p) / (1 - Fraction(cp2, p * p))
    return LocalLaw(p, (1 - gamma + diff) / 2, (1 - gamma - diff) / 2, gamma)


@dataclass(frozen=True)
class TwoAdicLaw:
    """Joint law of (X(2), X(4), X(8)) as atoms ((x1, x2, x3), probability)."""

    atoms: tuple[tuple[tuple[int, int, int], Fraction], ...]

    def __post_init__(self):
        if sum(pr for _, pr in self.atoms) != 1:
            raise ValueError("2-adic probabilities do not sum to 1")

    @staticmethod
    def _slot(ell: int) -> int:
        # X(2^l) = X(4) for even l >= 2 and X(8) for odd l >= 3
        if ell < 1:
            raise ValueError("l must be >= 1")
        return 0 if ell == 1 else (1 if ell % 2 == 0 else 2)

    def marginal(self, ell: int) -> tuple[Fraction, Fraction, Fraction]:
        """(alpha, beta, gamma) of X(2^l)."""
        i = self._slot(ell)
        out = {1: Fraction(0), -1: Fraction(0), 0: Fraction(0)}
        for x, pr in self.atoms:
            out[x[i]] += pr
        return out[1], out[-1], out[0]

    def expect(self, ell: int) -> Fraction:
        if ell == 0:
            return Fraction(1)
        a, b, _ = self.marginal(ell)
        return a - b

    def bases(self) -> list[tuple[Fraction, Fraction]]:
        """(probability, 1 + x1/2 + x2/3 + x3/6) for each atom."""
        return [(pr, 1 + Fraction(x[0], 2) + Fraction(x[1], 3) + Fraction(x[2], 6)) for x, pr in self.atoms]


def two_adic_law(fam: FamilyPoly) -> TwoAdicLaw:
    """Law induced by n uniform mod 8 conditioned on D(n) not divisible by 4."""
    counts: dict[tuple[int, int, int], int] = defaultdict(int)
    for n in range(8):
        v = fam.D(n)
        if v % 4 == 0:
            continue
        x1 = kronecker2(v)
        counts[(x1, x1 * x1, x1**3)] += 1
    total = sum(counts.values())
    if total == 0:
        raise ValueError("D(n) is always divisible by 4; the family is empty")
    law = TwoAdicLaw(tuple(sorted((x, Fraction(k, total)) for x, k in counts.items())))
    c4 = count_roots(fam.quad, 4)
    for ell in (1, 2, 3):
        want = k_ell(fam.quad, ell) / (1 - Fraction(c4, 4))
        if law.expect(ell) != want:
            raise AssertionError(f"2-adic marginal at l={ell}: {law.expect(ell)} != {want}")
    for pr, base in law.bases():
        if pr and base <= 0:
            raise ValueError(f"2-adic atom base {base} is not positive")
    return law


# -- moments of X(m) ----------------------------------------------------------


def _split_two(m: int) -> tuple[int, dict[int, int]]:
    ell = (m & -m).bit_length() - 1
    odd = factorize(m >> ell) if m >> ell > 1 else {}
    return ell, odd


def expect_X(fam: FamilyPoly, m: int) -> Fraction:
    """E(X(m)) from the closed product over the prime factorization of m.

    Assumes no odd prime factor of m divides the discriminant, which holds for
    every continued fraction family; the verify suite compares with the atoms.
    """
    if m < 1:
        raise ValueError("m must be positive")
    D = fam.quad
    ell, odd = _split_two(m)
    m0 = math.prod(p for p, e in odd.items() if e % 2)
    val = Fraction(jacobsthal(D, m0), m0)
    if ell:
        val *= k_ell(D, ell) / (1 - Fraction(count_roots(D, 4), 4))
    for p, e in odd.items():
        cp = count_roots(D, p)
        if e % 2 == 0:
            val *= 1 - Fraction(cp, p)
        val /= 1 - Fraction(cp, p * p)
    return val


def expect_X_atoms(fam: FamilyPoly, m: int) -> Fraction:
    """E(X(m)) directly from the per-prime laws and independence."""
    if m < 1:
        raise ValueError("m must be positive")
    ell, odd = _split_two(m)
    val = two_adic_law(fam).expect(ell) if ell else Fraction(1)
    for p, e in odd.items():
        val *= local_law(fam, p).expect_power(e)
    return val


def charsum_average(fam: FamilyPoly, m: int) -> Fraction:
    """Mean of (D(n)/m) over a full period of n.

    The period is m for odd m; for even m the symbol at 2 has period 8 in D,
    so the mean runs over n <= lcm(m, 8).
    """
    N = m if m % 2 else math.lcm(m, 8)
    return Fraction(sum(kronecker(fam.D(n), m) for n in range(1, N + 1)), N)


def charsum_product(fam: FamilyPoly, m: int) -> Fraction:
    """The product form of the complete character sum, through E(X(m))."""
    D = fam.quad
    ell, odd = _split_two(m)
    val = expect_X(fam, m)
    if ell:
        val *= 1 - Fraction(count_roots(D, 4), 4)
    for p in odd:
        val *= 1 - Fraction(count_roots(D, p), p * p)
    return val


# -- Euler factors and the log moment -----------------------------------------


def _law_arrays(fam: FamilyPoly, primes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Float (alpha, beta, gamma) for an array of odd primes."""
    D = fam.quad
    disc, content = fam.disc, _content(fam)
    alpha = np.empty(primes.size)
    beta = np.empty(primes.size)
    gamma = np.empty(primes.size)
    for i, p in enumerate(primes.tolist()):
        if content % p == 0 or fam.a % p == 0 or disc % p == 0:
            law = local_law(fam, p)
            alpha[i], beta[i], gamma[i] = float(law.alpha), float(law.beta), float(law.gamma)
            continue
        cp = 1 + kronecker(disc, p)
        J = jacobsthal_prime(D, p)
        g = (p * cp - cp) / (p * p - cp)
        diff = J / p / (1 - cp / (p * p))
        gamma[i] = g
        alpha[i] = (1 - g + diff) / 2
        beta[i] = (1 - g - diff) / 2
    return alpha, beta, gamma


class MomentCache:
    """Per-(family, P) law arrays and memoized L(z), L'(z), L''(z).

    Values are a pure function of (family, P, z); a lock serializes writers
    while readers of existing entries never block on computation.
    """

    _registry: dict[tuple[str, int], "MomentCache"] = {}
    _registry_lock = threading.Lock()

    def __init__(self, fam: FamilyPoly, P: int):
        if P < 10**3:
            raise ValueError("prime bound P must be at least 1000")
        self.fam, self.P = fam, P
        self.fid = fam.fid()
        primes = primes_upto(P)[1:]
        self.primes = primes
        alpha, beta, gamma = _law_arrays(fam, primes)
        pf = primes.astype(float)
        # log of the Euler factor base for X = 1, -1 (the X = 0 base is 1)
        self.lp = np.stack([-np.log1p(-1 / pf), -np.log1p(1 / pf)], axis=1)
        self.w = np.stack([alpha, beta], axis=1)
        self.gamma = gamma
        self.two = two_adic_law(fam)
        self.two_w = np.array([float(pr) for pr, _ in self.two.bases()])
        self.two_l = np.array([math.log(base) for _, base in self.two.bases()])
        # sum over p > P of 1/p^2, by the prime number theorem
        self.tail_s = 1.0 / (P * math.log(P))
        self._values: dict[complex, tuple[complex, complex, complex]] = {}
        self._lock = threading.Lock()

    @classmethod
    def get(cls, fam: FamilyPoly, P: int) -> "MomentCache":
        key = (fam.fid(), P)
        with cls._registry_lock:
            cache = cls._registry.get(key)
            if cache is None:
                cache = cls._registry[key] = cls(fam, P)
        return cache

    def euler_odd(self, z: complex) -> np.ndarray:
        """E_p(z) for every odd prime p <= P."""
        return (self.w * np.exp(z * self.lp)).sum(axis=1) + self.gamma

    def euler_two(self, z: complex) -> complex:
        return complex(np.sum(self.two_w * np.exp(z * self.two_l)))

    def tail(self, z: complex) -> tuple[complex, complex, complex]:
        """Second-order estimate of sum_{p > P} log E_p(z) and derivatives."""
        s = self.tail_s
        return z * (z - 1) / 2 * s, (2 * z - 1) / 2 * s, s

    def values(self, z: complex) -> tuple[complex, complex, complex]:
        """(L(z), L'(z), L''(z)) including the 2-adic factor and the tail."""
        z = complex(z)
        hit = self._values.get(z)
        if hit is not None:
            return hit
        if abs(z) > DEFAULT.z_cap:
            raise ValueError(f"|z|={abs(z):.3g} exceeds the configured cap {DEFAULT.z_cap}")
        if abs(z) ** 2 > self.P / 10:
            raise ValueError(f"|z|={abs(z):.3g} needs a prime bound P >= {int(10 * abs(z) ** 2)}")
        out = self._compute(z)
        with self._lock:
            self._values.setdefault(z, out)
        return self._values[z]

    def _compute(self, z: complex) -> tuple[complex, complex, complex]:
        e = np.exp(z * self.lp)
        we = self.w * e
        # E_p - 1 without cancellation for large p
        em1 = (self.w * np.expm1(z * self.lp)).sum(axis=1)
        Ep = 1 + em1
        logE = np.log1p(em1)
        m1 = (we * self.lp).sum(axis=1) / Ep
        m2 = (we * self.lp**2).sum(axis=1) / Ep - m1 * m1
        tw = self.two_w * np.exp(z * self.two_l)
        E2 = tw.sum()
        t1 = (tw * self.two_l).sum() / E2
        t2 = (tw * self.two_l**2).sum() / E2 - t1 * t1
        tl, tl1, tl2 = self.tail(z)
        L = complex(logE.sum() + np.log(E2) + tl)
        L1 = complex(m1.sum() + t1 + tl1)
        L2 = complex(m2.sum() + t2 + tl2)
        return L, L1, L2


def euler_factor(fam: FamilyPoly, p: int, z: complex) -> complex:
    """E_p(z) = E((sum_k X(p^k)/p^k)^z), exact laws, float evaluation."""
    if p == 2:
        return complex(sum(float(pr) * float(base) ** z for pr, base in two_adic_law(fam).bases()))
    law = local_law(fam, p)
    return complex(
        float(law.alpha) * (1 - 1 / p) ** (-z) + float(law.beta) * (1 + 1 / p) ** (-z) + float(law.gamma)
    )


def log_moment(fam: FamilyPoly, z: complex, P: int = DEFAULT.prime_bound) -> float | complex:
    """log E(L(1, X)^z), truncated at P with the tail estimate added."""
    L = MomentCache.get(fam, P).values(z)[0]
    return L.real if complex(z).imag == 0 else L


def log_moment_derivs(fam: FamilyPoly, z: float, P: int = DEFAULT.prime_bound) -> tuple[float, float, float]:
    """(L(z), L'(z), L''(z)) at real z."""
    L, L1, L2 = MomentCache.get(fam, P).values(z)
    return L.real, L1.real, L2.real


def truncation_report(fam: FamilyPoly, z: float, P: int = DEFAULT.prime_bound) -> dict:
    cache = MomentCache.get(fam, P)
    return {"P": P, "z": z, "tail_estimate": cache.tail(z)[0].real, "sum_p_gt_P_inv_p2": cache.tail_s}


# -- saddle point --------------------------------------------------------------


def _solve_derivative(fam: FamilyPoly, target: float, lo: float, hi: float, P: int) -> float:
    f = lambda z: log_moment_derivs(fam, z, P)[1] - target
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise ValueError(f"L'(z) - {target:.6g} does not change sign on [{lo}, {hi}]")
    # brentq keeps a sign-changing bracket like bisection, with faster steps
    z = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(z)) >= DEFAULT.kappa_tol:
        raise ValueError(f"saddle residual {f(z):.2e} above tolerance")
    return z


def _bracket_top(hi: float, P: int) -> float:
    # the largest |z| that both the cap and the prime bound allow
    return min(hi, DEFAULT.z_cap, math.sqrt(P / 10))


def solve_kappa(fam: FamilyPoly, tau: float, P: int = DEFAULT.prime_bound) -> float:
    """kappa > 0 with L'(kappa) = gamma + log tau."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    lo, hi = DEFAULT.kappa_bracket
    return _solve_derivative(fam, EULER_GAMMA + math.log(tau), lo, _bracket_top(hi, P), P)


def solve_kappa_lower(fam: FamilyPoly, tau: float, P: int = DEFAULT.prime_bound) -> float:
    """kappa > 0 with L'(-kappa) = log zeta(2) - gamma - log tau."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    lo, hi = DEFAULT.kappa_bracket
    target = math.log(ZETA2) - EULER_GAMMA - math.log(tau)
    return -_solve_derivative(fam, target, -_bracket_top(hi, P), -lo, P)


def phi_saddle(fam: FamilyPoly, tau: float, P: int = DEFAULT.prime_bound) -> float:
    """Leading saddle-point term for P(L(1, X) > e^gamma tau)."""
    k = solve_kappa(fam, tau, P)
    L, _, L2 = log_moment_derivs(fam, k, P)
    return math.exp(L - k * (EULER_GAMMA + math.log(tau))) / (k * math.sqrt(2 * math.pi * L2))


def psi_saddle(fam: FamilyPoly, tau: float, P: int = DEFAULT.prime_bound) -> float:
    """Leading saddle-point term for P(L(1, X) < zeta(2) / (e^gamma tau))."""
    k = solve_kappa_lower(fam, tau, P)
    L, _, L2 = log_moment_derivs(fam, -k, P)
    log_t = math.log(ZETA2) - EULER_GAMMA - math.log(tau)
    return math.exp(L + k * log_t) / (k * math.sqrt(2 * math.pi * L2))


def phi_lugannani_rice(fam: FamilyPoly, tau: float, P: int = DEFAULT.prime_bound) -> float:
    """Uniform saddle-point approximation of P(L(1, X) > e^gamma tau).

    Keeps the normal-tail term that the leading saddle term expands away,
    so it stays accurate when kappa is small.
    """
    k = solve_kappa(fam, tau, P)
    L, _, L2 = log_moment_derivs(fam, k, P)
    t = EULER_GAMMA + math.log(tau)
    w = math.sqrt(2 * (k * t - L))
    u = k * math.sqrt(L2)
    return float(stats.norm.sf(w) + stats.norm.pdf(w) * (1 / u - 1 / w))


def log_phi_asymptotic(tau: float) -> float:
    """-e^{tau - C0} / tau, the leading double-exponential decay of log Phi."""
    return -math.exp(tau - c0_constant()) / tau


# -- constants ----------------------------------------------------------------

_C0: float | None = None
_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


def _tanh_minus_one(t: float) -> float:
    e = math.exp(-2 * t)
    return -2 * e / (1 + e)


def _tanh_over_t(t: float) -> float:
    return math.tanh(t) / t if t else 1.0


def c0_constant() -> float:
    """int_0^1 tanh(t)/t dt + int_1^inf (tanh(t) - 1)/t dt."""
    global _C0
    if _C0 is None:
        head, _ = integrate.quad(_tanh_over_t, 0, 1, **_QUAD)
        tail, _ = integrate.quad(lambda t: _tanh_minus_one(t) / t, 1, np.inf, **_QUAD)
        _C0 = head + tail
    return _C0


def c0_truncated(T: float) -> float:
    """The same constant with the second integral cut at T."""
    head, _ = integrate.quad(_tanh_over_t, 0, 1, **_QUAD)
    tail, _ = integrate.quad(lambda t: _tanh_minus_one(t) / t, 1, T, **_QUAD)
    return head + tail


def c2_constant(fam: FamilyPoly, P: int = DEFAULT.c2_prime_bound) -> float:
    """C1 / sqrt(a) * E(L(1, X)^-1)."""
    if P < 10**4:
        raise ValueError("P must be at least 10^4")
    c1, c1_tail = density_constant(fam, P)
    L = log_moment(fam, -1.0, P)
    log.debug("C2 at P=%d: C1 tail %.1e, L(-1) tail %.1e", P, c1_tail, truncation_report(fam, -1.0, P)["tail_estimate"])
    return c1 / math.sqrt(fam.a) * math.exp(L)


def closed_product_c2(P: int = DEFAULT.c2_prime_bound) -> float:
    """prod_p (1 - 2/p^2)(1 - 1/p^2) over all primes p <= P."""
    p = primes_upto(P).astype(float)
    return float(np.exp(np.sum(np.log1p(-2 / p**2) + np.log1p(-1 / p**2))))


def catalan(N: int = 10**6) -> float:
    """sum_k (-1)^k/(2k+1)^2, averaging two consecutive partial sums."""
    k = np.arange(N + 1, dtype=float)
    terms = (-1.0) ** k / (2 * k + 1) ** 2
    s = np.cumsum(terms[::-1])[::-1]  # sum small terms first
    total = float(s[0])
    return total - terms[-1] / 2


# -- Monte Carlo --------------------------------------------------------------


def _two_adic_logs(law: TwoAdicLaw) -> tuple[np.ndarray, np.ndarray]:
    probs = np.array([float(pr) for pr, _ in law.bases()])
    logs = np.array([math.log(base) for _, base in law.bases()])
    return np.cumsum(probs), logs


def sample_L(fam: FamilyPoly, rng: np.random.Generator, P: int = 10**4) -> float:
    """One draw of L(1, X) truncated at P, all primes sampled exactly."""
    cache = MomentCache.get(fam, max(P, 10**3))
    sel = cache.primes <= P
    u = rng.random(int(sel.sum()))
    w, lp = cache.w[sel], cache.lp[sel]
    logL = np.where(u < w[:, 0], lp[:, 0], np.where(u < w[:, 0] + w[:, 1], lp[:, 1], 0.0)).sum()
    cum, logs = _two_adic_logs(cache.two)
    logL += logs[min(int(np.searchsorted(cum, rng.random(), side="right")), logs.size - 1)]
    return float(math.exp(logL))


def sample_L_many(
    fam: FamilyPoly,
    n: int,
    seed: int = DEFAULT.seed,
    P: int = DEFAULT.prime_bound,
    exact_bound: int = DEFAULT.mc_exact_primes,
    chunk: int = DEFAULT.mc_chunk,
) -> np.ndarray:
    """n i.i.d. draws of L(1, X) truncated at P.

    Primes below exact_bound are drawn exactly, each from its own Philox
    stream keyed by (seed, p). The remaining log factors are a sum of many
    small independent terms and are drawn as one Gaussian with the exact
    mean and variance, from the stream keyed by (seed, 0).
    """
    cache = MomentCache.get(fam, P)
    exact = cache.primes < exact_bound
    out = np.zeros(n)
    for p, (a, b), (la, lb) in zip(cache.primes[exact].tolist(), cache.w[exact], cache.lp[exact]):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, p])))
        for start in range(0, n, chunk):
            u = rng.random(min(chunk, n - start))
            out[start : start + u.size] += np.where(u < a, la, np.where(u < a + b, lb, 0.0))
    w, lp = cache.w[~exact], cache.lp[~exact]
    mean = (w * lp).sum(axis=1)
    var = (w * lp**2).sum(axis=1) - mean**2
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0])))
    out += mean.sum() + math.sqrt(var.sum()) * rng.standard_normal(n)
    cum, logs = _two_adic_logs(cache.two)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 2])))
    idx = np.minimum(np.searchsorted(cum, rng.random(n), side="right"), logs.size - 1)
    out += logs[idx]
    return np.exp(out)


def mc_tail(samples: np.ndarray, tau: float) -> tuple[float, float]:
    """Fraction of samples above e^gamma tau, and its binomial standard error."""
    q = float(np.mean(samples > math.exp(EULER_GAMMA) * tau))
    return q, math.sqrt(q * (1 - q) / samples.size)
