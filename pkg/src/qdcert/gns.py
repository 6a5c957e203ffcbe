"""The central character phi_theta and its GNS representation on l^2(G/Z).

On the basis delta_x (x in C) the group element y acts by
    delta_x  ->  psi_y(x) delta_{yx},    psi_y(x) = exp(2 pi i theta sum_{i>=2} y_1i x_id)
with x_dd = 1.  This is lambda_{G/Z}(y) D_y; the two factors are also
exposed separately.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from qdcert.diophantine import ThetaSpec
from qdcert.quotient import QuotientElt, quotient_mul
from qdcert.unitri import UniTri, free_positions, inv

TINY = 1e-300
KINDS = ("twisted", "lambda", "D")


@dataclass(frozen=True)
class CentralCharacter:
    theta: ThetaSpec

    def phase(self, k: int) -> complex:
        """exp(2 pi i theta k) with k*theta reduced mod 1 before exponentiating."""
        return cmath.exp(2j * math.pi * self.theta.frac_times(int(k)))

    def __call__(self, a: UniTri) -> complex:
        d = a.d
        if any(a[p] for p in free_positions(d)):
            return 0j
        return self.phase(a[1, d])

    def phases(self, ks: np.ndarray) -> np.ndarray:
        """Vectorised phase() over an integer array; each distinct k is reduced once."""
        ks = np.asarray(ks)
        if ks.size == 0:
            return np.zeros(ks.shape, dtype=complex)
        uniq, inverse = np.unique(ks, return_inverse=True)
        fr = np.array([self.theta.frac_times(int(k)) for k in uniq], dtype=float)
        return np.exp(2j * np.pi * fr)[inverse].reshape(ks.shape)


def psi_exponent(y: UniTri, x: QuotientElt) -> int:
    d = y.d
    if x.d != d:
        raise ValueError("dimension mismatch")
    return sum(y[1, i] * x.rep[i, d] for i in range(2, d + 1))


def psi(chi: CentralCharacter, y: UniTri, x: QuotientElt) -> complex:
    return chi.phase(psi_exponent(y, x))


def psi_exponents(y: UniTri, free: np.ndarray) -> np.ndarray:
    """psi exponents for a stack of free-entry rows; exact (object dtype if large)."""
    d = y.d
    pos = {p: k for k, p in enumerate(free_positions(d))}
    coeffs = [y[1, i] for i in range(2, d)]
    cols = [pos[i, d] for i in range(2, d)]
    big = max([abs(c) for c in coeffs] + [0]) * (int(np.max(np.abs(free))) if free.size else 0)
    arr = free.astype(object) if free.dtype == object or big * d >= 2**62 else free
    ks = np.full(free.shape[0], y[1, d], dtype=arr.dtype)
    for c, col in zip(coeffs, cols):
        if c:
            ks = ks + c * arr[:, col]
    return ks


class SparseVec(dict):
    """Finitely supported vector in l^2(G/Z): QuotientElt -> complex."""

    def __init__(self, items: Iterable | dict = ()):
        super().__init__()
        pairs = items.items() if isinstance(items, dict) else items
        for k, v in pairs:
            self.add(k, v)

    @classmethod
    def delta(cls, x: QuotientElt) -> "SparseVec":
        return cls({x: 1.0 + 0j})

    def add(self, key: QuotientElt, value: complex):
        v = self.get(key, 0j) + complex(value)
        if abs(v) < TINY:
            self.pop(key, None)
        else:
            self[key] = v

    def norm(self) -> float:
        return math.sqrt(sum(abs(v) ** 2 for v in self.values()))

    def inner(self, other: "SparseVec") -> complex:
        """<self, other>, linear in the first slot."""
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        total = 0j
        for k in small:
            if k in big:
                total += self[k] * other[k].conjugate()
        return total

    def __sub__(self, other: "SparseVec") -> "SparseVec":
        out = SparseVec(self)
        for k, v in other.items():
            out.add(k, -v)
        return out

    def __add__(self, other: "SparseVec") -> "SparseVec":
        out = SparseVec(self)
        for k, v in other.items():
            out.add(k, v)
        return out

    def scaled(self, c: complex) -> "SparseVec":
        return SparseVec((k, c * v) for k, v in self.items())

    def to_json(self) -> list[dict]:
        return [
            {"key": list(k.key), "re": v.real, "im": v.imag}
            for k, v in sorted(self.items(), key=lambda kv: kv[0].key)
        ]


@dataclass(frozen=True)
class TwistedOp:
    """lambda_{G/Z}(y) D_y ("twisted"), or just one factor ("lambda" / "D")."""

    y: UniTri
    chi: CentralCharacter
    kind: str = "twisted"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    @property
    def d(self) -> int:
        return self.y.d

    @property
    def translates(self) -> bool:
        return self.kind != "D"

    @property
    def weighted(self) -> bool:
        return self.kind != "lambda"

    @property
    def first_row(self) -> tuple[int, ...]:
        return tuple(self.y[1, j] for j in range(2, self.d + 1))

    @property
    def image(self) -> QuotientElt:
        return QuotientElt.of(self.y)

    def weight(self, x: QuotientElt) -> complex:
        return psi(self.chi, self.y, x) if self.weighted else 1.0 + 0j

    def target(self, x: QuotientElt) -> QuotientElt:
        return quotient_mul(self.image, x) if self.translates else x

    def apply(self, v: SparseVec) -> SparseVec:
        out = SparseVec()
        for x, a in v.items():
            if x.d != self.d:
                raise ValueError("dimension mismatch")
            out.add(self.target(x), self.weight(x) * a)
        return out

    def adjoint(self, v: SparseVec) -> SparseVec:
        yinv = QuotientElt.of(inv(self.y))
        out = SparseVec()
        for w, a in v.items():
            x = quotient_mul(yinv, w) if self.translates else w
            out.add(x, self.weight(x).conjugate() * a)
        return out

    def __call__(self, v: SparseVec) -> SparseVec:
        return self.apply(v)


def apply_twisted(T: TwistedOp | UniTri, v: SparseVec, chi: CentralCharacter | None = None) -> SparseVec:
    if isinstance(T, UniTri):
        T = TwistedOp(T, chi)
    return T.apply(v)


def apply_D(y: UniTri, v: SparseVec, chi: CentralCharacter) -> SparseVec:
    return TwistedOp(y, chi, "D").apply(v)


def apply_lambda(y: UniTri, v: SparseVec, chi: CentralCharacter) -> SparseVec:
    return TwistedOp(y, chi, "lambda").apply(v)
