"""Exact arithmetic in the integer unitriangular group U_d.

Elements are stored by their strictly-upper entries in row-major order,
(1,2), (1,3), ..., (1,d), (2,3), ..., (d-1,d), as Python ints.  The
batch helpers at the bottom work on numpy arrays of such entry vectors and
fall back to object dtype whenever an int64 product could overflow, so
every result is exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

DEFAULT_ENUM_CAP = 10**7

# int64 products are only trusted below this magnitude.
_INT64_SAFE = 2**62


class CapExceeded(RuntimeError):
    """An enumeration would exceed the configured desk-scale cap."""


@lru_cache(maxsize=None)
def upper_positions(d: int) -> tuple[tuple[int, int], ...]:
    """1-based (i, j) pairs with i < j, row-major."""
    return tuple((i, j) for i in range(1, d) for j in range(i + 1, d + 1))


@lru_cache(maxsize=None)
def free_positions(d: int) -> tuple[tuple[int, int], ...]:
    """Upper positions of the coset section C, i.e. without (1, d)."""
    return tuple(p for p in upper_positions(d) if p != (1, d))


@lru_cache(maxsize=None)
def _pos_index(d: int) -> dict[tuple[int, int], int]:
    return {p: k for k, p in enumerate(upper_positions(d))}


def num_free(d: int) -> int:
    return d * (d - 1) // 2 - 1


@dataclass(frozen=True)
class UniTri:
    d: int
    entries: tuple[int, ...]

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"dimension must be >= 2, got {self.d}")
        if len(self.entries) != len(upper_positions(self.d)):
            raise ValueError(
                f"expected {len(upper_positions(self.d))} entries for d={self.d}, "
                f"got {len(self.entries)}"
            )
        object.__setattr__(self, "entries", tuple(int(v) for v in self.entries))

    @classmethod
    def identity(cls, d: int) -> "UniTri":
        return cls(d, (0,) * len(upper_positions(d)))

    @classmethod
    def elementary(cls, d: int, i: int, j: int, k: int = 1) -> "UniTri":
        """1 + k e_ij."""
        return cls.from_dict(d, {(i, j): k})

    @classmethod
    def from_dict(cls, d: int, values: dict[tuple[int, int], int]) -> "UniTri":
        idx = _pos_index(d)
        entries = [0] * len(idx)
        for (i, j), v in values.items():
            if (i, j) not in idx:
                raise ValueError(f"({i},{j}) is not a strictly-upper position for d={d}")
            entries[idx[i, j]] = v
        return cls(d, tuple(entries))

    @classmethod
    def from_matrix(cls, m) -> "UniTri":
        d = len(m)
        for i in range(d):
            for j in range(d):
                want = 1 if i == j else (0 if i > j else None)
                if want is not None and m[i][j] != want:
                    raise ValueError("matrix is not unitriangular")
        return cls(d, tuple(int(m[i - 1][j - 1]) for i, j in upper_positions(d)))

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        if i == j:
            return 1
        if i > j:
            return 0
        return self.entries[_pos_index(self.d)[i, j]]

    def matrix(self) -> list[list[int]]:
        d = self.d
        return [[self[i, j] for j in range(1, d + 1)] for i in range(1, d + 1)]

    def __matmul__(self, other: "UniTri") -> "UniTri":
        return mul(self, other)

    def max_abs(self) -> int:
        return max((abs(v) for v in self.entries), default=0)

    def is_identity(self) -> bool:
        return not any(self.entries)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "entries": [
                {"i": i, "j": j, "v": v}
                for (i, j), v in zip(upper_positions(self.d), self.entries)
                if v != 0
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "UniTri":
        return cls.from_dict(int(obj["d"]), {(int(e["i"]), int(e["j"])): int(e["v"]) for e in obj["entries"]})

    def __repr__(self):
        nz = [f"{v:+d}e{i}{j}" for (i, j), v in zip(upper_positions(self.d), self.entries) if v]
        return f"UniTri(d={self.d}, 1{''.join(nz)})"


@dataclass(frozen=True)
class BoxSpec:
    """G[lo, hi]: elements of C with every strictly-upper entry in [lo, hi]."""

    d: int
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty box [{self.lo}, {self.hi}]")

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    def size(self) -> int:
        return self.width ** num_free(self.d)

    def contains(self, a: UniTri) -> bool:
        return a[1, a.d] == 0 and all(self.lo <= a[p] <= self.hi for p in free_positions(a.d))


@dataclass(frozen=True)
class CentralElt:
    """1 + k e_{1d}."""

    d: int
    k: int

    def as_unitri(self) -> UniTri:
        return UniTri.elementary(self.d, 1, self.d, self.k)


def _check_dims(a: UniTri, b: UniTri):
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")


def mul(a: UniTri, b: UniTri) -> UniTri:
    _check_dims(a, b)
    d = a.d
    out = []
    for i, j in upper_positions(d):
        # (ab)_ij = sum_{i <= k <= j} a_ik b_kj
        out.append(sum(a[i, k] * b[k, j] for k in range(i, j + 1)))
    return UniTri(d, tuple(out))


def inv(a: UniTri) -> UniTri:
    # back substitution on a x = 1, column by column
    d = a.d
    x = [[1 if i == j else 0 for j in range(d + 1)] for i in range(d + 1)]
    for j in range(1, d + 1):
        for i in range(j - 1, 0, -1):
            x[i][j] = -sum(a[i, k] * x[k][j] for k in range(i + 1, j + 1))
    return UniTri(d, tuple(x[i][j] for i, j in upper_positions(d)))


def ring_shift(x: UniTri, y: UniTri) -> UniTri:
    """x - y + 1, which stays in U_d."""
    _check_dims(x, y)
    return UniTri(x.d, tuple(p - q for p, q in zip(x.entries, y.entries)))


def coset_rep(a: UniTri) -> tuple["QuotientElt", CentralElt]:
    """Split a = a' (1 + k e_{1d}) with a' in C."""
    from qdcert.quotient import QuotientElt

    d = a.d
    k = a[1, d]
    entries = list(a.entries)
    entries[_pos_index(d)[1, d]] = 0
    return QuotientElt(UniTri(d, tuple(entries))), CentralElt(d, k)


def enumerate_box(spec: BoxSpec, cap: int = DEFAULT_ENUM_CAP) -> Iterator["QuotientElt"]:
    from qdcert.quotient import QuotientElt

    if spec.size() > cap:
        raise CapExceeded(f"G[{spec.lo},{spec.hi}] for d={spec.d} has {spec.size()} elements > cap {cap}")
    d = spec.d
    rng = range(spec.lo, spec.hi + 1)
    for free in itertools.product(rng, repeat=num_free(d)):
        yield QuotientElt.from_key(d, free)


def in_Ln(a: UniTri, n: int) -> bool:
    if n < 1:
        raise ValueError("n must be >= 1")
    return all(v % n == 0 for v in a.entries)


# ---------------------------------------------------------------- batch kernels


def _bound(arr: np.ndarray) -> int:
    if arr.size == 0:
        return 0
    return int(np.max(np.abs(arr)))


def box_array(spec: BoxSpec, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    """Free-entry vectors of G[lo, hi], same order as enumerate_box."""
    if spec.size() > cap:
        raise CapExceeded(f"G[{spec.lo},{spec.hi}] for d={spec.d} has {spec.size()} elements > cap {cap}")
    f = num_free(spec.d)
    axes = [np.arange(spec.lo, spec.hi + 1, dtype=np.int64)] * f
    if f == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grid], axis=1)


def free_to_matrices(free: np.ndarray, d: int) -> np.ndarray:
    """(N, f) free entries -> (N, d, d) unitriangular matrices, (1,d) = 0."""
    n = free.shape[0]
    out = np.zeros((n, d, d), dtype=free.dtype)
    idx = np.arange(d)
    out[:, idx, idx] = 1
    for k, (i, j) in enumerate(free_positions(d)):
        out[:, i - 1, j - 1] = free[:, k]
    return out


def matrices_to_free(mats: np.ndarray, d: int) -> np.ndarray:
    """Drop the (1,d) entry: canonical C representatives."""
    cols = [mats[:, i - 1, j - 1] for i, j in free_positions(d)]
    if not cols:
        return np.zeros((mats.shape[0], 0), dtype=mats.dtype)
    return np.stack(cols, axis=1)


def batch_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact product of stacks of integer matrices (broadcasting)."""
    d = a.shape[-1]
    if a.dtype != object and b.dtype != object and d * _bound(a) * _bound(b) < _INT64_SAFE:
        return np.matmul(a, b)
    a = a.astype(object)
    b = b.astype(object)
    return np.einsum("...ik,...kj->...ij", a, b)


def batch_inv(mats: np.ndarray) -> np.ndarray:
    """Exact inverse of a stack of unitriangular matrices via sum (-N)^k."""
    d = mats.shape[-1]
    eye = np.eye(d, dtype=np.int64)
    nil = eye - mats
    if nil.dtype == object:
        eye = eye.astype(object)
    out = eye + nil
    power = nil
    for _ in range(d - 2):
        power = batch_matmul(power, nil)
        out = out + power
    return out


def batch_qmul(x: np.ndarray, y: np.ndarray, d: int) -> np.ndarray:
    """Quotient product of free-entry vectors (broadcasting over leading axes)."""
    return matrices_to_free_nd(batch_matmul(free_to_matrices_nd(x, d), free_to_matrices_nd(y, d)), d)


def free_to_matrices_nd(free: np.ndarray, d: int) -> np.ndarray:
    lead = free.shape[:-1]
    return free_to_matrices(free.reshape(-1, free.shape[-1]), d).reshape(lead + (d, d))


def matrices_to_free_nd(mats: np.ndarray, d: int) -> np.ndarray:
    lead = mats.shape[:-2]
    return matrices_to_free(mats.reshape((-1, d, d)), d).reshape(lead + (num_free(d),))
