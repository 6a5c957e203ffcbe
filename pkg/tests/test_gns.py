import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import matmul
from qdcert.diophantine import ThetaSpec
from qdcert.gns import (
    CentralCharacter,
    SparseVec,
    TwistedOp,
    apply_D,
    apply_lambda,
    apply_twisted,
    psi,
    psi_exponent,
    psi_exponents,
)
from qdcert.quotient import QuotientElt
from qdcert.unitri import UniTri, mul

THIRD = CentralCharacter(ThetaSpec.rational(1, 3))
GOLD = CentralCharacter(ThetaSpec.golden())


def Q(d, key):
    return QuotientElt.from_key(d, key)


def psi_oracle(chi, y, x):
    """Central part of y x computed by plain matrix multiplication."""
    d = y.d
    prod = matmul(y.matrix(), x.rep.matrix())
    return cmath.exp(2j * math.pi * chi.theta.frac_times(prod[0][d - 1]))


def unitri(d, bound=5):
    k = d * (d - 1) // 2
    return st.lists(st.integers(-bound, bound), min_size=k, max_size=k).map(lambda e: UniTri(d, tuple(e)))


def qelt(d, bound=5):
    return st.lists(st.integers(-bound, bound), min_size=d * (d - 1) // 2 - 1, max_size=d * (d - 1) // 2 - 1).map(
        lambda e: Q(d, tuple(e))
    )


def sparse(d, bound=5):
    return st.lists(
        st.tuples(qelt(d, bound), st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)),
        min_size=1,
        max_size=6,
    ).map(SparseVec)


dims = st.sampled_from([3, 4])


def test_character_values():
    assert THIRD(UniTri.identity(3)) == 1
    assert THIRD(UniTri.elementary(3, 1, 2)) == 0
    assert THIRD(UniTri.elementary(3, 1, 3, 1)) == pytest.approx(cmath.exp(2j * math.pi / 3), abs=1e-15)
    assert THIRD.phase(3 * 10**40) == pytest.approx(1, abs=1e-15)


def test_psi_examples():
    y = UniTri.elementary(3, 1, 2)
    x = Q(3, (0, 4))  # x_23 = 4
    assert psi_exponent(y, x) == 4
    assert psi(THIRD, y, x) == pytest.approx(cmath.exp(2j * math.pi * 4 / 3), abs=1e-15)
    # y_13 pairs with x_33 = 1
    assert psi_exponent(UniTri.elementary(3, 1, 3, 2), x) == 2
    assert psi_exponent(UniTri.elementary(3, 2, 3, 7), x) == 0
    y4 = UniTri.from_dict(4, {(1, 2): 2, (1, 3): -1, (1, 4): 5})
    x4 = Q(4, (0, 0, 3, 0, 7))  # free order: 12, 13, 23, 24, 34
    assert psi_exponent(y4, x4) == 2 * 0 + (-1) * 7 + 5


@given(dims.flatmap(lambda d: st.tuples(unitri(d, 9), qelt(d, 9))))
def test_psi_matches_matrix_product(yx):
    y, x = yx
    assert abs(psi(GOLD, y, x) - psi_oracle(GOLD, y, x)) <= 1e-14


@given(dims.flatmap(lambda d: st.tuples(unitri(d, 50), st.lists(qelt(d, 50), min_size=1, max_size=10))))
def test_psi_exponents_vectorised(args):
    y, xs = args
    rows = np.array([x.key for x in xs], dtype=np.int64)
    assert psi_exponents(y, rows).tolist() == [psi_exponent(y, x) for x in xs]


def test_apply_examples():
    y = UniTri.elementary(3, 1, 2)
    x = Q(3, (0, 4))
    v = SparseVec.delta(x)
    w = apply_twisted(y, v, THIRD)
    assert list(w) == [Q(3, (1, 4))]
    assert w[Q(3, (1, 4))] == pytest.approx(cmath.exp(2j * math.pi * 4 / 3), abs=1e-15)
    assert list(apply_lambda(y, v, THIRD).items()) == [(Q(3, (1, 4)), 1)]
    d = apply_D(y, v, THIRD)
    assert list(d) == [x] and d[x] == w[Q(3, (1, 4))]
    # a central element only multiplies by the character
    z = UniTri.elementary(3, 1, 3, 1)
    assert apply_twisted(z, v, THIRD)[x] == pytest.approx(THIRD(z), abs=1e-15)


def test_kind_validation():
    with pytest.raises(ValueError):
        TwistedOp(UniTri.identity(3), THIRD, "shift")


def test_sparsevec_algebra():
    a, b = Q(3, (1, 0)), Q(3, (0, 1))
    v = SparseVec({a: 3, b: 4j})
    assert v.norm() == 5
    assert (v - v) == {}
    assert v.inner(SparseVec.delta(b)) == 4j
    assert (v + v.scaled(-1)) == {}
    assert v.to_json()[0] == {"key": [0, 1], "re": 0.0, "im": 4.0}


@settings(max_examples=100)
@given(dims.flatmap(lambda d: st.tuples(unitri(d), unitri(d), sparse(d))))
def test_multiplicative(args):
    y1, y2, v = args
    lhs = TwistedOp(y1, GOLD).apply(TwistedOp(y2, GOLD).apply(v))
    rhs = TwistedOp(mul(y1, y2), GOLD).apply(v)
    assert (lhs - rhs).norm() <= 1e-10 * max(1.0, v.norm())


@given(dims.flatmap(lambda d: st.tuples(unitri(d), sparse(d))), st.sampled_from(["twisted", "lambda", "D"]))
def test_isometry(args, kind):
    y, v = args
    assert abs(TwistedOp(y, GOLD, kind).apply(v).norm() - v.norm()) <= 1e-12 * max(1.0, v.norm())


@given(dims.flatmap(lambda d: st.tuples(unitri(d, 10**6), qelt(d, 10**6))))
def test_psi_unimodular(yx):
    y, x = yx
    assert abs(abs(psi(GOLD, y, x)) - 1) <= 1e-14


@given(dims.flatmap(lambda d: st.tuples(st.just(d), st.integers(-10**9, 10**9), sparse(d))))
def test_center_acts_by_character(args):
    d, k, v = args
    z = UniTri.elementary(d, 1, d, k)
    w = TwistedOp(z, GOLD).apply(v)
    assert (w - v.scaled(GOLD(z))).norm() <= 1e-12 * max(1.0, v.norm())


@given(dims.flatmap(lambda d: st.tuples(unitri(d), sparse(d), sparse(d))), st.sampled_from(["twisted", "lambda", "D"]))
def test_adjoint(args, kind):
    y, v, w = args
    T = TwistedOp(y, GOLD, kind)
    assert abs(T.apply(v).inner(w) - v.inner(T.adjoint(w))) <= 1e-10 * (1 + v.norm() * w.norm())
    assert (T.adjoint(T.apply(v)) - v).norm() <= 1e-12 * max(1.0, v.norm())
