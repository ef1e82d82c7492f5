import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from cffam import classno
from cffam.family import CHOWLA, F21, YOKOI, member_arrays
from cffam.intmath import is_squarefree, kronecker

squarefree = st.integers(2, 2 * 10**5).filter(is_squarefree)  # 4d stays inside the oracle range
fundamentals = st.integers(5, 10**5).filter(lambda D: classno._is_fundamental(D))

# small real quadratic class numbers (wide sense)
KNOWN = {2: 1, 3: 1, 5: 1, 10: 2, 15: 2, 26: 2, 30: 2, 34: 2, 35: 2, 65: 2, 79: 3, 82: 4, 142: 3, 223: 3, 226: 8, 399: 8}


@pytest.mark.parametrize("d,h", KNOWN.items())
def test_known_class_numbers(d, h):
    assert classno.class_number(d).h == h
    assert classno.bqf_class_number(classno.fundamental_discriminant(d)) == h


@settings(max_examples=60, deadline=None)
@given(squarefree)
def test_formula_matches_form_oracle(d):
    rec = classno.class_number(d)
    assert rec.h == classno.bqf_class_number(rec.delta)
    assert rec.residual < 0.05


@settings(max_examples=40, deadline=None)
@given(squarefree)
def test_l1_methods_agree(d):
    a = classno.L1_series(d)
    b = classno.L1_exact(d)
    c, err = classno.L1_euler(d, 10**5)
    assert a == pytest.approx(b, rel=1e-11)
    assert abs(c - a) < 5 * err


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 2 * 10**5).filter(is_squarefree))
def test_longdouble_exact_sum(d):
    assert classno.L1_exact(d, dtype=np.longdouble) == pytest.approx(classno.L1_exact(d), rel=1e-12)


@given(st.integers(-10**6, 10**6).filter(bool), st.lists(st.integers(1, 10**6), min_size=1, max_size=30))
def test_kronecker_array(a, ns):
    assert classno.kronecker_array(a, ns).tolist() == [kronecker(a, n) for n in ns]


@settings(max_examples=30, deadline=None)
@given(fundamentals, st.integers(1, 3000))
def test_chi_table(delta, N):
    chi = classno.chi_table(delta, N)
    idx = np.random.default_rng(delta).integers(0, N + 1, size=50)
    assert chi[0] == 0
    assert all(chi[i] == kronecker(delta, int(i)) for i in idx if i)


@given(fundamentals)
def test_narrow_vs_wide(delta):
    if delta > 20000:
        return
    h = classno.bqf_class_number(delta)
    hn = classno.narrow_class_number(delta)
    assert hn in (h, 2 * h)


def test_fundamental_discriminant():
    assert classno.fundamental_discriminant(5) == 5
    assert classno.fundamental_discriminant(3) == 12
    assert classno.fundamental_discriminant(2) == 8
    with pytest.raises(ValueError):
        classno.fundamental_discriminant(12)
    assert classno._is_fundamental(12) and not classno._is_fundamental(16)


def test_reference_families_oracle_small():
    for fam in (CHOWLA, YOKOI, F21):
        _, ds = member_arrays(fam, 2 * 10**4)
        for d in ds.tolist():
            assert classno.class_number(d).h == classno.bqf_class_number(classno.fundamental_discriminant(d))


def test_precision_guard(monkeypatch):
    L = classno.L1_series(79) * 1.2
    with pytest.raises(classno.PrecisionError, match="precision insufficient"):
        classno.class_number(79, L1=L)


def test_record_row_roundtrip():
    rec = classno.class_number(226, n=3)
    assert classno.DiscRecord(**rec.to_row()) == rec
    assert rec.delta == 904 and rec.norm in (1, -1)
    assert math.isclose(rec.L1 * math.sqrt(rec.delta) / (2 * rec.regulator), rec.h, abs_tol=0.05)
    assert sympy.isprime(79)
