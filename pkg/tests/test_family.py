import itertools
import json
from math import isqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cffam import cfquad, family
from cffam.family import CHOWLA, F21, YOKOI, YOKOI_SHIFTED, CFWord
from cffam.intmath import is_squarefree


def all_words(max_s=6, max_u=4):
    out = set()
    for s in range(1, max_s + 1):
        L = s - 1
        for half in itertools.product(range(1, max_u + 1), repeat=(L + 1) // 2):
            w = tuple(half) + tuple(half[::-1][L % 2 :]) if L else ()
            for case in "AB":
                out.add(CFWord(case, w))
    return sorted(out, key=lambda w: (w.case, len(w.u), w.u))


def same_up_to_shift(fam, a, b, c):
    """fam.D(n + t) == a n^2 + b n + c for some integer t."""
    for t in range(-5, 6):
        if all(fam.D(n + t) == a * n * n + b * n + c for n in range(5)):
            return True
    return False


@pytest.mark.parametrize(
    "word, printed",
    [(CFWord("B", (1, 1)), (4, 0, 1)), (CFWord("B", ()), (4, 4, 5)), (CFWord("B", (1,)), (4, 12, 5))],
    ids=["chowla", "yokoi", "4n2+12n+5"],
)
def test_reference_synthesis(word, printed):
    fam = family.synthesize(word)
    assert same_up_to_shift(fam, *printed)


def test_reference_constants_are_members():
    for fam in (CHOWLA, YOKOI, YOKOI_SHIFTED, F21):
        for n in range(2, 40):
            d = fam.D(n)
            if is_squarefree(d):
                k, period = fam.expected_expansion(n)
                assert family.expansion_matches(cfquad.expand(d, fam.cfword.mode), k, period)


def test_case_a_normalization():
    fam = family.normalize(family.synthesize(CFWord("A", ())))
    assert (fam.a, fam.b, fam.c) == (4, -4, 2)
    assert all(fam.D(n) % 4 != 1 for n in range(1, 20))


@pytest.mark.parametrize("word", all_words(), ids=lambda w: f"{w.case}{''.join(map(str, w.u))}")
def test_word_sweep(word):
    """Admissible words synthesize and round-trip; inadmissible ones raise."""
    if not family.admissible(word):
        with pytest.raises(family.InadmissibleWord):
            family.synthesize(word)
        return
    fam = family.normalize(family.synthesize(word))
    inv = family.prop_invariants(fam)
    assert inv["a_square"] and inv["e_nonzero"]
    for n in range(1, 51):
        d = fam.D(n)
        k, period = fam.expected_expansion(n)
        assert family.expansion_matches(cfquad.expand(d, word.mode), k, period)


def test_completeness_small_d():
    """Every d <= 2000 whose expansion is [k; w, u_s(k)] is a member of w's family."""
    fams = {}
    for d in range(2, 2001):
        if isqrt(d) ** 2 == d or not is_squarefree(d):
            continue
        mode = cfquad.omega_mode(d)
        exp = cfquad.expand(d, mode)
        case = "A" if mode is cfquad.Mode.SQRT else "B"
        if exp.s > 6 or max(exp.period[:-1], default=1) > 4 or exp.u0 < (1 if case == "A" else 2):
            continue
        word = CFWord(case, exp.period[:-1])
        if word not in fams:
            fams[word] = family.synthesize(word)
        fam = fams[word]
        assert any(fam.D(n) == d for n in range(0, 200)), (d, word)


def test_member_arrays_brute():
    for fam in (CHOWLA, YOKOI, F21):
        ns, ds = family.member_arrays(fam, 10**5)
        want = [n for n in range(1, 200) if 2 <= fam.D(n) <= 10**5 and is_squarefree(fam.D(n))]
        assert ns.tolist() == want
        assert np.array_equal(ds, [fam.D(n) for n in want])


@settings(max_examples=30)
@given(st.integers(10, 10**7))
def test_y_of_x_inverts(x):
    for fam in (CHOWLA, YOKOI, F21):
        assert fam.D(family.y_of_x(fam, x)) == pytest.approx(x, rel=1e-9)


def test_admissibility_report_reasons():
    rep = family.admissibility_report(CFWord("A", (2, 1, 2)))
    assert not rep["admissible"] and "even" in rep["reason"]
    assert family.admissible(CFWord("B", (1, 1)))


def test_word_validation():
    with pytest.raises(ValueError):
        CFWord("A", (1, 2))
    with pytest.raises(ValueError):
        CFWord("C", ())


def test_load_family_forms(tmp_path):
    spec = {"case": "B", "word": [1, 1], "name": "chowla-synth"}
    fam = family.load_family(spec)
    path = tmp_path / "f.json"
    path.write_text(json.dumps(spec))
    assert family.load_family(str(path)) == fam
    assert family.load_family(json.dumps(fam.to_json())) == family.normalize(fam)
    assert family.load_family("chowla") is CHOWLA
    with pytest.raises(ValueError):
        family.load_family({"case": "B", "bogus": 1})


def test_density_constant_converges():
    c_lo, _ = family.density_constant(CHOWLA, 10**4)
    c_hi, tail = family.density_constant(CHOWLA, 10**6)
    assert abs(c_lo - c_hi) / c_hi < 2e-4 and tail == 2e-6
