"""The quotient G/Z through the section C, the box transversal K_n of L_n,
and Følner sets verified by enumeration."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from qdcert.unitri import (
    DEFAULT_ENUM_CAP,
    BoxSpec,
    UniTri,
    batch_inv,
    box_array,
    coset_rep,
    enumerate_box,
    free_positions,
    free_to_matrices,
    in_Ln,
    inv,
    mul,
    num_free,
    upper_positions,
)


@dataclass(frozen=True)
class QuotientElt:
    """An element of G/Z, stored as its unique representative in C."""

    rep: UniTri

    def __post_init__(self):
        if self.rep[1, self.rep.d] != 0:
            raise ValueError("representative must have zero (1,d) entry")

    @property
    def d(self) -> int:
        return self.rep.d

    @property
    def key(self) -> tuple[int, ...]:
        return tuple(self.rep[p] for p in free_positions(self.d))

    @classmethod
    def from_key(cls, d: int, key) -> "QuotientElt":
        values = dict(zip(free_positions(d), key))
        return cls(UniTri(d, tuple(values.get(p, 0) for p in upper_positions(d))))

    @classmethod
    def of(cls, a: UniTri) -> "QuotientElt":
        """The image pi(a)."""
        return coset_rep(a)[0]

    @classmethod
    def identity(cls, d: int) -> "QuotientElt":
        return cls(UniTri.identity(d))

    def __repr__(self):
        return f"QuotientElt{self.key}"


def quotient_mul(x: QuotientElt, y: QuotientElt) -> QuotientElt:
    return QuotientElt.of(mul(x.rep, y.rep))


def quotient_inv(x: QuotientElt) -> QuotientElt:
    return QuotientElt.of(inv(x.rep))


def kn_spec(n: int, d: int = 3) -> BoxSpec:
    """Box transversal for L_n: n consecutive values per free entry."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if n % 2:
        return BoxSpec(d, -(n - 1) // 2, (n - 1) // 2)
    return BoxSpec(d, -n // 2 + 1, n // 2)


def centered_residue(v: int, n: int) -> int:
    """Residue of v mod n inside the kn_spec range."""
    lo = kn_spec(n).lo
    return (v - lo) % n + lo


def reduce_to_Kn(x: QuotientElt, n: int) -> QuotientElt:
    return QuotientElt.from_key(x.d, tuple(centered_residue(v, n) for v in x.key))


def reduce_array(free: np.ndarray, n: int) -> np.ndarray:
    lo = kn_spec(n).lo
    return (free - lo) % n + lo


def kn_index(free: np.ndarray, n: int) -> np.ndarray:
    """Position of (already reduced) rows within the lexicographic K_n enumeration."""
    lo = kn_spec(n).lo
    idx = np.zeros(free.shape[0], dtype=np.int64)
    for k in range(free.shape[1]):
        idx = idx * n + (free[:, k] - lo)
    return idx


def in_LnZ(x: QuotientElt, y: QuotientElt, n: int) -> bool:
    """Whether xL_n = yL_n, via the lift of y^-1 x with (1,d) zeroed."""
    return in_Ln(quotient_mul(quotient_inv(y), x).rep, n)


def _fourth_root_ok(v: int, n: int) -> bool:
    """|v| <= n^(1/4), decided exactly."""
    return v**4 <= n


def _start_radius(n: int, d: int) -> int:
    """Smallest m with m^(4(d-1)) >= n, i.e. ceil(n^(1/(4(d-1))))."""
    e = 4 * (d - 1)
    m = max(0, round(n ** (1.0 / e)) - 1)
    while m**e < n:
        m += 1
    return m


def property4_max(m: int, d: int, cap: int = DEFAULT_ENUM_CAP) -> int:
    """Largest |entry| of inv(f~) over f in pi(G[-m, m])."""
    free = box_array(BoxSpec(d, -m, m), cap)
    inverses = batch_inv(free_to_matrices(free, d))
    upper = np.triu(np.ones((d, d), dtype=bool), k=1)
    return int(np.max(np.abs(inverses[:, upper]), initial=0))


@dataclass(frozen=True)
class FolnerData:
    n: int
    d: int
    kn_spec: BoxSpec
    m: int
    fn_elements: tuple[QuotientElt, ...] = field(repr=False)
    verified: bool
    max_inverse_entry: int = 0

    @property
    def size_Kn(self) -> int:
        return self.kn_spec.size()

    @property
    def size_Fn(self) -> int:
        return len(self.fn_elements)

    def fn_array(self) -> np.ndarray:
        return box_array(BoxSpec(self.d, -self.m, self.m))

    def summary(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "size_Kn": self.size_Kn,
            "size_Fn": self.size_Fn,
            "property4_verified": self.verified,
        }


def check_property4(fd: FolnerData) -> bool:
    """Re-enumerate F_n and confirm every inverse lift sits in G[-n^1/4, n^1/4]."""
    for f in fd.fn_elements:
        if not all(_fourth_root_ok(v, fd.n) for v in inv(f.rep).entries):
            return False
    return True


def check_property1(fd: FolnerData) -> bool:
    return all(fd.kn_spec.contains(f.rep) for f in fd.fn_elements)


def build_folner(n: int, d: int, cap: int = DEFAULT_ENUM_CAP) -> FolnerData:
    """F_n = pi(G[-m, m]) for the largest admissible m below the natural start.

    Property (4) is checked on the full inverse lift inv(f~), including its
    (1,d) entry, which is stricter than checking the C representative.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    spec = kn_spec(n, d)
    m = _start_radius(n, d)
    while m >= 0:
        fits_kn = spec.lo <= -m and m <= spec.hi
        if fits_kn:
            worst = property4_max(m, d, cap)
            if _fourth_root_ok(worst, n):
                break
        m -= 1
    else:
        raise RuntimeError(f"no admissible Følner radius for n={n}, d={d}")
    elements = tuple(enumerate_box(BoxSpec(d, -m, m), cap))
    fd = FolnerData(n, d, spec, m, elements, verified=False, max_inverse_entry=worst)
    ok = check_property1(fd) and check_property4(fd)
    if not ok:
        raise RuntimeError(f"Følner data for n={n}, d={d} failed verification")
    return FolnerData(n, d, spec, m, elements, verified=True, max_inverse_entry=worst)


def folner_ratio(F, x: QuotientElt) -> Fraction:
    """|F Δ Fx| / |F|, exact."""
    F = list(F)
    if not F:
        raise ValueError("F must be nonempty")
    base = {f.key for f in F}
    if len(base) != len(F):
        raise ValueError("F contains duplicates")
    shifted = {quotient_mul(f, x).key for f in F}
    return Fraction(len(base ^ shifted), len(base))
