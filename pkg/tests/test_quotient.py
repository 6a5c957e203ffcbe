from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import sympy_inverse
from qdcert.quotient import (
    QuotientElt,
    build_folner,
    check_property1,
    check_property4,
    folner_ratio,
    in_LnZ,
    kn_spec,
    quotient_inv,
    quotient_mul,
    reduce_to_Kn,
)
from qdcert.unitri import BoxSpec, UniTri, enumerate_box, in_Ln, inv, mul, num_free


def Q(d, key):
    return QuotientElt.from_key(d, key)


def test_quotient_mul_drops_center():
    x = QuotientElt.of(UniTri.elementary(3, 1, 2))
    y = QuotientElt.of(UniTri.elementary(3, 2, 3))
    assert quotient_mul(x, y) == Q(3, (1, 1))
    assert quotient_mul(x, QuotientElt.identity(3)) == x
    assert quotient_mul(x, quotient_inv(x)) == QuotientElt.identity(3)


def test_quotient_elt_rejects_center_entry():
    with pytest.raises(ValueError):
        QuotientElt(UniTri.elementary(3, 1, 3))


@pytest.mark.parametrize("n,lo,hi", [(5, -2, 2), (4, -1, 2), (2, 0, 1), (233, -116, 116)])
def test_kn_spec(n, lo, hi):
    spec = kn_spec(n, 3)
    assert (spec.lo, spec.hi) == (lo, hi)
    assert spec.width == n


def test_reduce_examples():
    x = Q(3, (7, -3))
    y = reduce_to_Kn(x, 5)
    assert y == Q(3, (2, 2))
    # oracle: the lift of y^-1 x, center dropped, lies in L~_5
    assert in_Ln(QuotientElt.of(mul(inv(y.rep), x.rep)).rep, 5)
    assert reduce_to_Kn(QuotientElt.identity(4), 7) == QuotientElt.identity(4)
    assert reduce_to_Kn(Q(3, (3, 0)), 4) == Q(3, (-1, 0))


@pytest.mark.parametrize("d,n", [(3, 2), (3, 4), (3, 5), (4, 3), (4, 4)])
def test_kn_exact_count(d, n):
    assert sum(1 for _ in enumerate_box(kn_spec(n, d))) == n ** num_free(d)


elements = st.sampled_from([3, 4, 5]).flatmap(
    lambda d: st.lists(st.integers(-500, 500), min_size=d * (d - 1) // 2 - 1, max_size=d * (d - 1) // 2 - 1).map(
        lambda k: Q(d, tuple(k))
    )
)


@given(elements, st.integers(2, 40))
def test_reduce_idempotent_and_sound(x, n):
    y = reduce_to_Kn(x, n)
    assert reduce_to_Kn(y, n) == y
    assert kn_spec(n, x.d).contains(y.rep)
    assert in_LnZ(x, y, n)


@given(elements, st.integers(2, 12), st.integers(-3, 3))
def test_reduce_is_invariant_on_cosets(x, n, scale):
    # any l in L_n: x l reduces like x
    d = x.d
    l = QuotientElt.of(UniTri(d, tuple(n * scale * (k + 1) for k in range(d * (d - 1) // 2))))
    assert reduce_to_Kn(quotient_mul(x, l), n) == reduce_to_Kn(x, n)


def _max_inverse_entry_sympy(d, m):
    worst = 0
    for f in enumerate_box(BoxSpec(d, -m, m)):
        mi = sympy_inverse(f.rep.matrix())
        worst = max(worst, max(abs(mi[i][j]) for i in range(d) for j in range(i + 1, d)))
    return worst


def test_build_folner_n81():
    # oracle: m = 2 gives an inverse entry 4 > 81^(1/4) = 3, m = 1 gives at most 1
    assert _max_inverse_entry_sympy(3, 2) == 4
    assert _max_inverse_entry_sympy(3, 1) == 1
    fd = build_folner(81, 3)
    assert fd.m == 1 and fd.size_Fn == 9 and fd.verified
    assert fd.summary() == {"n": 81, "m": 1, "size_Kn": 6561, "size_Fn": 9, "property4_verified": True}


def test_build_folner_n2():
    fd = build_folner(2, 3)
    assert fd.m == 0 and [f.key for f in fd.fn_elements] == [(0, 0)]
    assert fd.verified and check_property1(fd) and check_property4(fd)


def test_build_folner_d4_n625():
    fd = build_folner(625, 4)
    worst = _max_inverse_entry_sympy(4, fd.m)
    assert worst**4 <= 625
    assert _max_inverse_entry_sympy(4, fd.m + 1) ** 4 > 625
    assert fd.size_Fn == (2 * fd.m + 1) ** 5
    assert check_property4(fd)


@pytest.mark.parametrize("d,n", [(3, 5), (3, 13), (3, 233), (4, 5), (4, 81)])
def test_folner_properties_recheck(d, n):
    fd = build_folner(n, d)
    assert fd.verified and check_property1(fd) and check_property4(fd)


def _box_ratio_oracle(m):
    """|F delta (F + (1,0))| / |F| for the integer square [-m, m]^2."""
    box = {(a, b) for a in range(-m, m + 1) for b in range(-m, m + 1)}
    shifted = {(a + 1, b) for a, b in box}
    return Fraction(len(box ^ shifted), len(box))


def test_folner_ratio_examples():
    x = QuotientElt.of(UniTri.elementary(3, 1, 2))
    F1 = list(enumerate_box(BoxSpec(3, -1, 1)))
    F5 = list(enumerate_box(BoxSpec(3, -5, 5)))
    assert folner_ratio(F1, QuotientElt.identity(3)) == 0
    assert folner_ratio(F1, x) == _box_ratio_oracle(1) == Fraction(2, 3)
    assert folner_ratio(F5, x) == _box_ratio_oracle(5) == Fraction(22, 121)


def test_folner_ratio_monotone():
    x = QuotientElt.of(UniTri.elementary(3, 1, 2))
    ratios = [folner_ratio(enumerate_box(BoxSpec(3, -m, m)), x) for m in range(1, 9)]
    assert all(a >= b for a, b in zip(ratios, ratios[1:]))


def test_folner_ratio_rejects_duplicates():
    e = QuotientElt.identity(3)
    with pytest.raises(ValueError):
        folner_ratio([e, e], e)
