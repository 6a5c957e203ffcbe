"""Exact rotation numbers, continued-fraction convergents and modulus selection.

theta is kept exactly (a rational, a quadratic surd, or a decimal literal
read as an exact rational).  Anything that needs k*theta mod 1 goes through
a fixed-point integer floor(theta * 2^B), so the phase of a large integer k
is never computed in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple

MIN_BITS = 192
DEFAULT_CAP = 10**6


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


@dataclass(frozen=True)
class ThetaSpec:
    """theta in [0, 1).

    kind is "rational" (p, q), "quadratic" (a, b, D, c) meaning
    (a + b*sqrt(D))/c, or "decimal" (value,) with value a decimal string.
    """

    kind: str
    params: tuple
    precision: int = 256

    def __post_init__(self):
        if self.precision < MIN_BITS:
            raise ValueError(f"precision must be at least {MIN_BITS} bits")
        if self.kind == "rational":
            p, q = (int(v) for v in self.params)
            if q == 0:
                raise ValueError("zero denominator")
            fr = Fraction(p, q)
            object.__setattr__(self, "params", (fr.numerator, fr.denominator))
        elif self.kind == "quadratic":
            a, b, D, c = (int(v) for v in self.params)
            if c == 0:
                raise ValueError("zero denominator")
            if D <= 0 or _is_square(D) or b == 0:
                raise ValueError("quadratic theta needs b != 0 and non-square D > 0")
            if c < 0:
                a, b, c = -a, -b, -c
            object.__setattr__(self, "params", (a, b, D, c))
        elif self.kind == "decimal":
            (value,) = self.params
            Decimal(value)  # raises on junk
            object.__setattr__(self, "params", (str(value),))
        else:
            raise ValueError(f"unknown theta kind {self.kind!r}")
        lo = self.fixed(64)
        if not 0 <= lo < 2**64:
            raise ValueError(f"theta must lie in [0, 1), got about {lo / 2**64}")

    @classmethod
    def rational(cls, p: int, q: int) -> "ThetaSpec":
        return cls("rational", (p, q))

    @classmethod
    def quadratic(cls, a: int, b: int, D: int, c: int) -> "ThetaSpec":
        return cls("quadratic", (a, b, D, c))

    @classmethod
    def decimal(cls, value: str) -> "ThetaSpec":
        return cls("decimal", (value,))

    @classmethod
    def golden(cls) -> "ThetaSpec":
        """(sqrt(5) - 1) / 2."""
        return cls.quadratic(-1, 1, 5, 2)

    @property
    def is_rational(self) -> bool:
        return self.kind != "quadratic"

    def as_fraction(self) -> Fraction:
        if self.kind == "rational":
            return Fraction(*self.params)
        if self.kind == "decimal":
            return Fraction(Decimal(self.params[0]))
        raise ValueError("quadratic theta is irrational")

    def fixed(self, bits: int) -> int:
        """floor(theta * 2^bits), exact."""
        return _fixed(self, bits)

    def __float__(self) -> float:
        return self.fixed(64) / 2**64

    def frac_times(self, k: int) -> float:
        """k*theta mod 1 as a float; the reduction itself is exact or certified to 2^-precision."""
        if self.is_rational:
            fr = self.as_fraction()
            return (k * fr.numerator % fr.denominator) / fr.denominator
        bits = self.precision + max(64, abs(k).bit_length())
        bits = -(-bits // 64) * 64
        r = (k * self.fixed(bits)) % (1 << bits)
        return (r >> (bits - 62)) / 2.0**62

    def to_json(self) -> dict:
        if self.kind == "rational":
            return {"kind": "rational", "p": self.params[0], "q": self.params[1]}
        if self.kind == "quadratic":
            a, b, D, c = self.params
            return {"kind": "quadratic", "a": a, "b": b, "D": D, "c": c}
        return {"kind": "decimal", "value": self.params[0]}

    @classmethod
    def from_json(cls, obj: dict) -> "ThetaSpec":
        kind = obj["kind"]
        precision = int(obj.get("precision", 256))
        if kind == "rational":
            return cls(kind, (int(obj["p"]), int(obj["q"])), precision)
        if kind == "quadratic":
            return cls(kind, (int(obj["a"]), int(obj["b"]), int(obj["D"]), int(obj["c"])), precision)
        if kind == "decimal":
            return cls(kind, (str(obj["value"]),), precision)
        raise ValueError(f"unknown theta kind {kind!r}")


@lru_cache(maxsize=256)
def _fixed(theta: ThetaSpec, bits: int) -> int:
    if theta.is_rational:
        fr = theta.as_fraction()
        return (fr.numerator << bits) // fr.denominator
    a, b, D, c = theta.params
    root = math.isqrt(b * b * D << (2 * bits))
    # b*sqrt(D)*2^bits is irrational, so it lies strictly inside (root, root+1)
    # (or (-root-1, -root) when b < 0); no multiple of c can fall in there.
    s = root if b > 0 else -root - 1
    return ((a << bits) + s) // c


class Convergent(NamedTuple):
    p: int
    q: int
    k: int


def partial_quotients(theta: ThetaSpec) -> Iterator[int]:
    if theta.is_rational:
        x = theta.as_fraction()
        while True:
            a = math.floor(x)
            yield a
            x -= a
            if x == 0:
                return
            x = 1 / x
    a, b, D, c = theta.params
    # rewrite as (P + sqrt(DD)) / Q with Q | DD - P^2
    DD = b * b * D
    P, Q = (a, c) if b > 0 else (-a, -c)
    if (DD - P * P) % Q:
        P, DD, Q = P * abs(Q), DD * Q * Q, Q * abs(Q)
    s = math.isqrt(DD)
    while True:
        # sqrt(DD) lies strictly between s and s + 1
        t = (P + s) // Q if Q > 0 else (P + s + 1) // Q
        yield t
        P = t * Q - P
        Q = (DD - P * P) // Q


def convergents(theta: ThetaSpec, count: int) -> list[Convergent]:
    """First `count` convergents with strictly increasing denominators.

    When the first partial quotient after the integer part is 1, the
    convergents 0/1 and 1/1 share q = 1; only the later one is kept.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    out: list[Convergent] = []
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    for idx, a in enumerate(partial_quotients(theta)):
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        conv = Convergent(h, k, idx)
        if out and out[-1].q == k:
            out[-1] = conv
        else:
            if len(out) == count:
                break
            out.append(conv)
    return out


def convergent_error_ok(theta: ThetaSpec, c: Convergent, bits: int = MIN_BITS) -> bool:
    """|q theta - p| < 1/q, decided with a certified fixed-point enclosure."""
    p, q = c.p, c.q
    if theta.is_rational:
        return abs(q * theta.as_fraction() - p) * q < 1
    bits = max(bits, 2 * q.bit_length() + 64)
    err = abs(q * theta.fixed(bits) - (p << bits))
    # true value of |q theta - p| * 2^bits lies in [err - q, err + q]
    return (err + q) * q < (1 << bits)


def _dist_enclosure(theta: ThetaSpec, n: int, bits: int) -> tuple[int, int]:
    """(center, radius) in units of 2^-bits for dist(n theta, Z), irrational theta."""
    one = 1 << bits
    r = (n * theta.fixed(bits)) % one
    return min(r, one - r), abs(n) + 1


def dist_to_Z(theta: ThetaSpec, n: int) -> float:
    if theta.is_rational:
        fr = theta.as_fraction() * n
        return float(abs(fr - round(fr)))
    bits = max(theta.precision, 128 + abs(n).bit_length())
    center, _ = _dist_enclosure(theta, n, bits)
    return center / 2.0**bits


def dist_below_inverse(theta: ThetaSpec, n: int) -> bool:
    """dist(n theta, Z) < 1/n, decided exactly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if theta.is_rational:
        fr = theta.as_fraction() * n
        return abs(fr - round(fr)) * n < 1
    bits = max(theta.precision, 64 + 2 * n.bit_length())
    while True:
        center, rad = _dist_enclosure(theta, n, bits)
        one = 1 << bits
        if (center + rad) * n < one:
            return True
        if (center - rad) * n >= one:
            return False
        bits *= 2


def analytic_bound(d: int, n: int) -> float:
    """2 pi d^2 n^(-1/2)."""
    return 2 * math.pi * d * d / math.sqrt(n)


def candidate_moduli(theta: ThetaSpec, cap: int = DEFAULT_CAP) -> Iterator[int]:
    """Convergent denominators (multiples of the denominator for rational theta), increasing, <= cap."""
    if theta.is_rational:
        b = theta.as_fraction().denominator
        yield from range(b, cap + 1, b)
        return
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    last = 0
    for a in partial_quotients(theta):
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        if k > cap:
            return
        if k > last:
            yield k
            last = k


def qualifying_moduli(theta: ThetaSpec, p: int, cap: int = DEFAULT_CAP) -> Iterator[int]:
    """Candidates with n > p^4, n >= 2 and dist(n theta, Z) < 1/n."""
    floor_n = max(p**4, 1)
    for q in candidate_moduli(theta, cap):
        if q > floor_n and dist_below_inverse(theta, q):
            yield q


class Selection(NamedTuple):
    n: int
    analytic_ok: bool


class NoQualifyingModulus(ValueError):
    pass


def select_n(theta: ThetaSpec, p: int, eps: float, d: int, cap: int = DEFAULT_CAP) -> Selection:
    """Smallest qualifying modulus whose analytic bound 2 pi d^2 n^-1/2 is below eps.

    Falls back to the largest qualifying modulus <= cap with analytic_ok False.
    """
    if p < 1 or eps <= 0 or cap < 2:
        raise ValueError("need p >= 1, eps > 0, cap >= 2")
    if theta.is_rational:
        b = theta.as_fraction().denominator
        # skip straight to the analytic threshold; dist is 0 for every multiple of b
        need = max(p**4 + 1, math.floor((2 * math.pi * d * d / eps) ** 2) - 1, 2)
        q = -(-need // b) * b
        while q <= cap:
            if q > p**4 and analytic_bound(d, q) < eps:
                return Selection(q, True)
            q += b
        last = cap // b * b
        if last > p**4 and last >= 2:
            return Selection(last, False)
        raise NoQualifyingModulus(f"no multiple of {b} in ({p**4}, {cap}]")
    last = None
    for q in qualifying_moduli(theta, p, cap):
        if analytic_bound(d, q) < eps:
            return Selection(q, True)
        last = q
    if last is None:
        raise NoQualifyingModulus(f"no convergent denominator in ({p**4}, {cap}]")
    return Selection(last, False)
