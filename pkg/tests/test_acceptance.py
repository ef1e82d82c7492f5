"""Acceptance gate: one test and one printed PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or as a script.
Tolerances come from the package config and are never loosened here.
"""
import itertools
import math
import time
from math import isqrt

import pytest

from cffam import cfquad, classno, family, harness, randmodel
from cffam.config import DEFAULT
from cffam.family import CHOWLA, F21, YOKOI, YOKOI_SHIFTED, CFWord
from cffam.intmath import is_squarefree

REFERENCE = (CHOWLA, YOKOI, F21)
PRINTED = {"chowla": (4, 0, 1), "yokoi": (4, 4, 5), "4n2+12n+5": (4, 12, 5)}


@pytest.fixture
def verdict(capsys):
    """Print one summary line and fail the test when the criterion fails."""
    start = time.perf_counter()

    def report(number: int, title: str, checks: dict, budget: float | None = None, detail: str = ""):
        elapsed = time.perf_counter() - start
        if budget is not None:
            checks = {**checks, f"time<{budget:g}s": elapsed < budget}
        ok = all(checks.values())
        parts = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())
        line = f"[acceptance] {number:>2} {title}: {'PASS' if ok else 'FAIL'} ({parts}; {elapsed:.1f}s)"
        if detail:
            line += f" {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report


def cache_for(cache_dir, fam):
    return cache_dir / f"{fam.name}.jsonl"


def test_criterion_01_identity_suite(verdict):
    checks = {}
    for fam in REFERENCE:
        rep = harness.cmd_verify(fam, pmax=500, mmax=500)
        for name in ("jacobsthal base identity", "c(p) table", "J(p) table"):
            checks[f"{fam.name}:{name}"] = rep.passed[name]
    verdict(1, "identity suite", checks, budget=60)


def test_criterion_02_units(verdict):
    unit_bad = units = 0
    for d in range(2, 2 * 10**4 + 1):
        if isqrt(d) ** 2 == d or not is_squarefree(d):
            continue
        units += 1
        unit_bad += cfquad.fundamental_unit(d) != cfquad.pell_reference(d)
    bound_bad = shape_bad = 0
    for d in range(2, 10**5 + 1):
        if isqrt(d) ** 2 == d:
            continue
        for mode in (cfquad.Mode.SQRT, cfquad.Mode.HALF):
            if mode is cfquad.Mode.HALF and d % 4 != 1:
                continue
            exp = cfquad.expand(d, mode)
            inner = exp.period[:-1]
            last = 2 * exp.u0 if mode is cfquad.Mode.SQRT else 2 * exp.u0 - 1
            shape_bad += inner != inner[::-1] or exp.period[-1] != last
            if mode is cfquad.omega_mode(d):
                bound_bad += not cfquad.unit_bounds_check(exp)
    verdict(
        2,
        "continued fractions and units",
        {"unit==oracle": unit_bad == 0, "unit bounds": bound_bad == 0, "palindrome/u_s": shape_bad == 0},
        budget=300,
        detail=f"[{units} units, {unit_bad} mismatches, {bound_bad} bound failures]",
    )


def _words(max_s=6, max_u=4):
    out = set()
    for s in range(1, max_s + 1):
        L = s - 1
        for half in itertools.product(range(1, max_u + 1), repeat=(L + 1) // 2):
            w = tuple(half) + tuple(half[::-1][L % 2 :]) if L else ()
            for case in "AB":
                out.add(CFWord(case, w))
    return sorted(out, key=lambda w: (w.case, len(w.u), w.u))


def test_criterion_03_family_round_trip(verdict):
    admissible = roundtrip_bad = 0
    inv_bad: dict[str, list[str]] = {"a_square": [], "disc": [], "e_nonzero": []}
    for word in _words():
        if not family.admissible(word):
            continue
        admissible += 1
        fam = family.normalize(family.synthesize(word))
        for key, ok in family.prop_invariants(fam).items():
            if not ok:
                inv_bad[key].append(f"{word.case}{''.join(map(str, word.u))}:disc={fam.disc}")
        for n in range(1, 51):
            k, period = fam.expected_expansion(n)
            roundtrip_bad += not family.expansion_matches(cfquad.expand(fam.D(n), word.mode), k, period)
    printed_ok = True
    for fam in REFERENCE:
        synth = family.synthesize(fam.cfword)
        a, b, c = PRINTED[fam.name]
        printed_ok &= (fam.a, fam.b, fam.c) == (a, b, c)
        printed_ok &= any(all(synth.D(n + t) == fam.D(n) for n in range(6)) for t in range(-3, 4))
    verdict(
        3,
        "family round trip",
        {
            "a square": not inv_bad["a_square"],
            "disc in +-{1,4,16}": not inv_bad["disc"],
            "round trip n<=50": roundtrip_bad == 0,
            "printed polynomials": printed_ok,
        },
        budget=60,
        detail=f"[{admissible} admissible words; disc outside the set for {len(inv_bad['disc'])}, "
        f"e.g. {inv_bad['disc'][:3]}]",
    )


def test_criterion_04_density(verdict):
    checks, parts = {}, []
    for fam in REFERENCE:
        rep = harness.cmd_density(fam, (10**5, 10**6, 10**7))
        row = rep.observed["by_x"][10**7]
        checks[f"{fam.name}:count"] = rep.passed["count"]
        checks[f"{fam.name}:char avg"] = rep.passed["character_averages"]
        parts.append(
            f"{fam.name} |D|={row['count']} pred={row['predicted']:.1f} rel={row['rel_error']:.4f} "
            f"char dev={row['max_char_dev']:.4f}@m={row['argmax_m']}"
        )
    verdict(4, "density", checks, budget=600, detail="[" + "; ".join(parts) + "]")


def test_criterion_05_class_numbers(verdict, cache_dir):
    mismatches = checked = 0
    worst = 0.0
    for fam in REFERENCE:
        for r in harness.scan(fam, 10**5, cache_for(cache_dir, fam)):
            checked += 1
            mismatches += r.h != classno.bqf_class_number(r.delta)
        for r in harness.scan(fam, DEFAULT.moment_x, cache_for(cache_dir, fam)):
            worst = max(worst, r.residual)
    verdict(
        5,
        "class numbers",
        {"formula==forms": mismatches == 0, "residual<0.05": worst < DEFAULT.rounding_headroom},
        budget=600,
        detail=f"[{checked} oracle checks, max residual {worst:.2e} over d<=1e7]",
    )


def test_criterion_06_constants(verdict):
    c0 = randmodel.c0_constant()
    G = randmodel.catalan()
    c2_chowla = randmodel.c2_constant(CHOWLA, 10**5)
    c2_yokoi = randmodel.c2_constant(YOKOI_SHIFTED, 10**5)
    c2_f21 = randmodel.c2_constant(F21, 10**5)
    closed = randmodel.closed_product_c2(10**5)
    verdict(
        6,
        "constants",
        {
            "C0": abs(c0 - 0.8187) <= DEFAULT.c0_tol,
            "Chowla 2 G C2": abs(2 * G * c2_chowla - 1) < DEFAULT.c2_catalan_tol,
            "Yokoi C2 = Chowla C2": abs(c2_yokoi - c2_chowla) < DEFAULT.c2_yokoi_tol,
            "4n2+12n+5 routes agree": abs(c2_f21 - closed) < DEFAULT.c2_closed_tol,
        },
        detail=f"[C0={c0:.6f} G={G:.12f} C2: chowla={c2_chowla:.6f} yokoi={c2_yokoi:.6f} "
        f"4n2+12n+5 model={c2_f21:.6f} closed product={closed:.6f}]",
    )


def test_criterion_07_moments(verdict, cache_dir):
    checks, parts = {}, []
    for fam in REFERENCE:
        rep = harness.cmd_moments(fam, DEFAULT.moment_x, DEFAULT.moment_z, cache_for(cache_dir, fam))
        for key, ok in rep.passed.items():
            checks[f"{fam.name}:{key}"] = ok
        devs = " ".join(f"{z:g}:{v:.4f}" for z, v in rep.observed["rel_dev"].items())
        parts.append(f"{fam.name} rel dev {devs}")
    verdict(7, "moments", checks, budget=1800, detail="[" + "; ".join(parts) + "]")


def _perturbation_ratio(fam, tau):
    lam = math.exp(-tau) / 10
    phi = randmodel.phi_saddle
    return abs(phi(fam, math.exp(-lam) * tau) / phi(fam, tau) - 1) / (lam * math.exp(tau))


def test_criterion_08_distribution(verdict, cache_dir):
    rep = harness.cmd_dist(CHOWLA, DEFAULT.moment_x, (1.2,), DEFAULT.mc_samples, DEFAULT.seed, cache_for(cache_dir, CHOWLA))
    row = rep.observed["by_tau"][1.2]
    rel_b = abs(row["phi_saddle"] / row["mc_phi"] - 1)
    ratios = {tau: math.log(randmodel.phi_saddle(CHOWLA, tau)) / randmodel.log_phi_asymptotic(tau) for tau in (3, 4)}
    lo, hi = DEFAULT.phi_asym_band
    pert = {tau: _perturbation_ratio(CHOWLA, tau) for tau in (1.5, 2.0, 2.5)}
    verdict(
        8,
        "distribution",
        {
            "a KS": rep.observed["ks"] <= DEFAULT.ks_tol,
            "b saddle vs MC": rel_b <= DEFAULT.phi_mc_rel_tol,
            "c band at 3": lo <= ratios[3] <= hi,
            "c closer at 4": abs(ratios[4] - 1) < abs(ratios[3] - 1),
            "d perturbation": all(r <= DEFAULT.perturbation_K for r in pert.values()),
        },
        detail=f"[KS={rep.observed['ks']:.4f}; tau=1.2 saddle={row['phi_saddle']:.4f} MC={row['mc_phi']:.4f} "
        f"(rel {rel_b:.3f}) uniform={row['phi_lugannani_rice']:.4f}; log-ratio tau=3 {ratios[3]:.3f} tau=4 {ratios[4]:.3f}; "
        f"perturbation {max(pert.values()):.3f} <= K={DEFAULT.perturbation_K:g}]",
    )


def test_criterion_09_census(verdict, cache_dir):
    H = harness.largest_census_H(DEFAULT.census_x_cap)
    rep = harness.cmd_census(CHOWLA, H, DEFAULT.census_x_cap, cache_for(cache_dir, CHOWLA))
    rows = rep.observed["by_H"]
    detail = "; ".join(
        f"H={h} X={r['X']} count={r['count']} ratio={r['ratio']:.3f} x2C2={r['ratio_if_doubled_C2']:.3f} "
        f"refined={r['ratio_to_refined']:.3f}"
        for h, r in rows.items()
    )
    verdict(
        9,
        "census",
        {"ratio in band": rep.passed["ratio_in_band"], "trend to 1": rep.passed["trend_toward_1"]},
        budget=1800,
        detail=f"[{detail}]",
    )


def test_criterion_10_determinism(verdict, tmp_path):
    t1, r1 = harness.cmd_scan(CHOWLA, 10**7)
    t2, r2 = harness.cmd_scan(CHOWLA, 10**7, cache=tmp_path / "a.jsonl")
    t3, r3 = harness.cmd_scan(CHOWLA, 10**7, cache=tmp_path / "a.jsonl")
    scan_same = t1 == t2 == t3 and r1.dumps() == r2.dumps() == r3.dumps()
    mc = []
    for _ in range(2):
        harness._MC_MEMO.clear()
        mc.append(randmodel.sample_L_many(CHOWLA, DEFAULT.mc_samples, seed=DEFAULT.seed).tobytes())
    dist = []
    for _ in range(2):
        harness._MC_MEMO.clear()
        dist.append(harness.cmd_dist(CHOWLA, 10**6, DEFAULT.tau_grid, 10**6, DEFAULT.seed).dumps())
    census = [harness.cmd_census(CHOWLA, 23, cache=tmp_path / "a.jsonl").dumps() for _ in range(2)]
    verdict(
        10,
        "determinism",
        {
            "scan csv/json": scan_same,
            "MC samples": mc[0] == mc[1],
            "dist report": dist[0] == dist[1],
            "census report": census[0] == census[1],
        },
    )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
