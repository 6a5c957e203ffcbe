"""Orfanos weights, the projections P_n and the commutator certificates.

Everything combinatorial (supports, counts, coset ownership) is exact
integer work on numpy arrays of free entries.  Square roots of the counts
and the phases psi are the only floating-point inputs to the linear algebra.

Why the commutator norm can be computed on a finite window: for v orthogonal
to range(P) + T* range(P) both TPv and PTv vanish, and the range of TP - PT
sits inside range(P) + T range(P).  All those vectors live on
U = supp(phi_n) u T(supp) u T^-1(supp), so ||TP - PT|| equals the norm of
its compression to l^2(U), with no approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from qdcert.diophantine import ThetaSpec
from qdcert.gns import CentralCharacter, SparseVec, TwistedOp, psi_exponents
from qdcert.quotient import FolnerData, QuotientElt, kn_index, kn_spec, reduce_array
from qdcert.unitri import (
    DEFAULT_ENUM_CAP,
    CapExceeded,
    UniTri,
    batch_inv,
    batch_qmul,
    box_array,
    free_to_matrices,
    inv,
    matrices_to_free,
    batch_matmul,
)

DENSE_CAP = 4000
POWER_TOL = 1e-12
POWER_MAXIT = 10_000


class RowIndex:
    """Sorted set of integer rows with vectorised lookup."""

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows)
        self.width = rows.shape[1]
        if rows.shape[0] == 0:
            self.lo = np.zeros(self.width, dtype=np.int64)
            self.base = np.ones(self.width, dtype=np.int64)
        else:
            self.lo = rows.min(axis=0).astype(np.int64)
            self.base = (rows.max(axis=0) - self.lo + 1).astype(np.int64)
        total = 1
        for b in self.base.tolist():
            total *= int(b)
        if total >= 2**62:
            raise CapExceeded("row keys do not fit a 64-bit code; instance beyond desk scale")
        codes = np.unique(self._encode(rows))
        self.codes = codes
        self.rows = self._decode(codes)

    def _encode(self, rows: np.ndarray) -> np.ndarray:
        code = np.zeros(rows.shape[0], dtype=np.int64)
        for k in range(self.width):
            code = code * self.base[k] + (rows[:, k].astype(np.int64) - self.lo[k])
        return code

    def _decode(self, codes: np.ndarray) -> np.ndarray:
        out = np.zeros((codes.shape[0], self.width), dtype=np.int64)
        rest = codes.copy()
        for k in range(self.width - 1, -1, -1):
            out[:, k] = rest % self.base[k] + self.lo[k]
            rest //= self.base[k]
        return out

    def __len__(self) -> int:
        return self.codes.shape[0]

    def lookup(self, rows: np.ndarray) -> np.ndarray:
        """Positions of rows; -1 where absent."""
        rows = np.asarray(rows, dtype=np.int64)
        inside = np.all((rows >= self.lo) & (rows < self.lo + self.base), axis=1)
        out = np.full(rows.shape[0], -1, dtype=np.int64)
        if not inside.any() or len(self) == 0:
            return out
        codes = self._encode(rows[inside])
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, len(self) - 1)
        hit = self.codes[pos] == codes
        sub = np.where(hit, pos, -1)
        out[inside] = sub
        return out


@dataclass
class OrfanosWeights:
    """phi_n(a) = sqrt(|K_n n F_n a| / |F_n|) on its support F_n^-1 K_n."""

    folner: FolnerData
    support: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.folner.n

    @property
    def d(self) -> int:
        return self.folner.d

    @property
    def size_F(self) -> int:
        return self.folner.size_Fn

    @cached_property
    def index(self) -> RowIndex:
        return RowIndex(self.support)

    @cached_property
    def values(self) -> np.ndarray:
        return np.sqrt(self.counts / self.size_F)

    def __len__(self) -> int:
        return self.support.shape[0]

    def __call__(self, x: QuotientElt) -> float:
        pos = self.index.lookup(np.array([x.key], dtype=np.int64))[0]
        return 0.0 if pos < 0 else float(self.values[pos])

    @property
    def table(self) -> dict[QuotientElt, float]:
        return {QuotientElt.from_key(self.d, tuple(r)): float(w) for r, w in zip(self.support.tolist(), self.values)}


def _inverse_free(fd: FolnerData) -> np.ndarray:
    return batch_inv(free_to_matrices(fd.fn_array(), fd.d))


def build_weights(fd: FolnerData, cap: int = DEFAULT_ENUM_CAP) -> OrfanosWeights:
    """Enumerate all products f^-1 k; the multiplicity of a is exactly |{f : f a in K_n}|."""
    if not fd.verified:
        raise ValueError("Følner data must be verified first")
    d = fd.d
    if fd.size_Fn * fd.size_Kn > cap:
        raise CapExceeded(f"support enumeration |F_n||K_n| = {fd.size_Fn * fd.size_Kn} > cap {cap} (n={fd.n})")
    K = free_to_matrices(box_array(fd.kn_spec, cap), d)
    finv = _inverse_free(fd)
    chunks = [matrices_to_free(batch_matmul(finv[i], K), d) for i in range(finv.shape[0])]
    prods = np.concatenate(chunks, axis=0)
    if prods.dtype == object:
        raise CapExceeded("support entries overflow int64; instance beyond desk scale")
    support, counts = np.unique(prods, axis=0, return_counts=True)
    return OrfanosWeights(fd, support, counts.astype(np.int64))


@dataclass
class ProjectionBasis:
    """The orthonormal family xi_{yL_n}, y in K_n, stored by support point."""

    weights: OrfanosWeights
    owner: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.weights.n

    @property
    def d(self) -> int:
        return self.weights.d

    @property
    def rank(self) -> int:
        return self.weights.folner.size_Kn

    @cached_property
    def kn(self) -> np.ndarray:
        return box_array(self.weights.folner.kn_spec)

    @cached_property
    def _groups(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.owner, kind="stable")
        starts = np.searchsorted(self.owner[order], np.arange(self.rank + 1))
        return order, starts

    def members(self, y_idx: int) -> np.ndarray:
        order, starts = self._groups
        return order[starts[y_idx] : starts[y_idx + 1]]

    def kn_position(self, y: QuotientElt) -> int:
        spec = self.weights.folner.kn_spec
        if not spec.contains(y.rep):
            raise KeyError(f"{y} is not in K_n")
        return int(kn_index(np.array([y.key], dtype=np.int64), self.n)[0])

    def vector(self, y: QuotientElt | int) -> SparseVec:
        idx = y if isinstance(y, (int, np.integer)) else self.kn_position(y)
        sup = self.weights.support
        vals = self.weights.values
        return SparseVec(
            (QuotientElt.from_key(self.d, tuple(sup[s].tolist())), float(vals[s])) for s in self.members(int(idx))
        )

    @property
    def vectors(self) -> dict[QuotientElt, SparseVec]:
        return {QuotientElt.from_key(self.d, tuple(self.kn[i].tolist())): self.vector(i) for i in range(self.rank)}

    def xi_matrix(self, rows: np.ndarray | None = None, n_rows: int | None = None) -> sp.csc_matrix:
        """Sparse (|window| x rank) matrix whose columns are the xi vectors."""
        S = len(self.weights)
        if rows is None:
            rows, n_rows = np.arange(S), S
        return sp.csc_matrix((self.weights.values, (rows, self.owner)), shape=(n_rows, self.rank))

    def gram_error(self) -> float:
        """max |<xi_y, xi_y'> - delta_yy'|."""
        X = self.xi_matrix()
        G = (X.T @ X).tocoo()
        diag = np.zeros(self.rank)
        off = 0.0
        for i, j, v in zip(G.row, G.col, G.data):
            if i == j:
                diag[i] = v
            else:
                off = max(off, abs(v))
        return max(off, float(np.max(np.abs(diag - 1.0), initial=0.0)))

    def coset_count_sums(self) -> np.ndarray:
        """Sum of integer counts per coset; equals |F_n| for every y exactly."""
        return np.bincount(self.owner, weights=self.weights.counts, minlength=self.rank).astype(np.int64)


def build_projection(w: OrfanosWeights) -> ProjectionBasis:
    owner = kn_index(reduce_array(w.support, w.n), w.n)
    if owner.size and (owner.min() < 0 or owner.max() >= w.folner.size_Kn):
        raise RuntimeError("support point reduced outside K_n")
    return ProjectionBasis(w, owner)


def build_basis(fd: FolnerData, cap: int = DEFAULT_ENUM_CAP) -> ProjectionBasis:
    return build_projection(build_weights(fd, cap))


def apply_P(P: ProjectionBasis, v: SparseVec) -> SparseVec:
    coef: dict[int, complex] = {}
    keys = list(v)
    if keys:
        pos = P.weights.index.lookup(np.array([k.key for k in keys], dtype=np.int64))
        vals = P.weights.values
        for k, s in zip(keys, pos.tolist()):
            if s >= 0:
                o = int(P.owner[s])
                coef[o] = coef.get(o, 0j) + v[k] * vals[s]
    out = SparseVec()
    for o in sorted(coef):
        c = coef[o]
        for key, val in P.vector(o).items():
            out.add(key, c * val)
    return out


def pointwise_defect(P: ProjectionBasis, x: QuotientElt) -> float:
    delta = SparseVec.delta(x)
    return min(1.0, (apply_P(P, delta) - delta).norm())


# ------------------------------------------------------------- discrepancy


def _phases(chi: CentralCharacter, z: UniTri, rows: np.ndarray) -> np.ndarray:
    return chi.phases(psi_exponents(z, rows))


def discrepancies(z: UniTri, P: ProjectionBasis, chi: CentralCharacter) -> np.ndarray:
    """|psi_z(a) - psi_z(y)| for every support point a with owner y."""
    sup = P.weights.support
    owners = P.kn[P.owner]
    return np.abs(_phases(chi, z, sup) - _phases(chi, z, owners))


def max_discrepancy(gens, fd: FolnerData, theta: ThetaSpec, basis: ProjectionBasis | None = None) -> float:
    """Delta_n: max over generators z, y in K_n and a in yL_n n supp(phi_n) of |psi_z(a) - psi_z(y)|."""
    P = basis if basis is not None else build_basis(fd)
    chi = CentralCharacter(theta)
    best = 0.0
    for z in gens:
        diffs = discrepancies(z, P, chi)
        if diffs.size:
            best = max(best, float(diffs.max()))
    return best


def vector_defects(z: UniTri, P: ProjectionBasis, chi: CentralCharacter) -> np.ndarray:
    """||D_z xi_y - psi_z(y) xi_y|| for each y in K_n."""
    diffs = discrepancies(z, P, chi)
    sq = np.bincount(P.owner, weights=P.weights.values**2 * diffs**2, minlength=P.rank)
    return np.sqrt(sq)


# ------------------------------------------------------------- commutator norms


@dataclass(frozen=True)
class NormResult:
    value: float
    method: str
    dim: int
    converged: bool = True
    iterations: int = 0


@dataclass
class CommutatorWindow:
    """TP - PT compressed to l^2(U) as sparse factors."""

    T: sp.csr_matrix
    Xi: sp.csc_matrix
    blocks: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.T.shape[0]

    def P(self, v: np.ndarray) -> np.ndarray:
        return self.Xi @ (self.Xi.T @ v)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.T @ self.P(v) - self.P(self.T @ v)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        TH = self.T.conj().T
        return self.P(TH @ v) - TH @ self.P(v)

    def dense(self) -> np.ndarray:
        T = self.T.toarray()
        X = self.Xi.toarray()
        Pm = X @ X.T
        return T @ Pm - Pm @ T


def _translate(op: TwistedOp, rows: np.ndarray, inverse: bool = False) -> np.ndarray:
    if not op.translates or rows.shape[0] == 0:
        return rows
    g = inv(op.y) if inverse else op.y
    gq = np.array([QuotientElt.of(g).key], dtype=np.int64)
    return batch_qmul(gq, rows, op.d)


def commutator_window(op: TwistedOp, P: ProjectionBasis) -> CommutatorWindow:
    if op.d != P.d:
        raise ValueError("dimension mismatch")
    sup = P.weights.support
    fwd = _translate(op, sup)
    back = _translate(op, sup, inverse=True)
    if fwd.dtype == object or back.dtype == object:
        raise CapExceeded("window entries overflow int64")
    window = RowIndex(np.concatenate([sup, fwd, back], axis=0))
    # columns of T that matter: supp (for TP) and T^-1 supp (for PT)
    cols_rows = RowIndex(np.concatenate([sup, back], axis=0)).rows
    cols = window.lookup(cols_rows)
    targets = window.lookup(_translate(op, cols_rows))
    if (cols < 0).any() or (targets < 0).any():
        raise RuntimeError("window is not closed under the needed translations")
    if op.weighted:
        vals = _phases(op.chi, op.y, cols_rows)
    else:
        vals = np.ones(cols.shape[0], dtype=complex)
    N = len(window)
    T = sp.csr_matrix((vals, (targets, cols)), shape=(N, N))
    Xi = P.xi_matrix(window.lookup(sup), N).astype(complex)
    blocks = kn_index(reduce_array(window.rows, P.n), P.n)
    return CommutatorWindow(T, Xi, blocks)


def _block_normalize(v: np.ndarray, blocks: np.ndarray, nb: int) -> np.ndarray:
    norms = np.sqrt(np.bincount(blocks, weights=np.abs(v) ** 2, minlength=nb))
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return v * scale[blocks]


def _power(win: CommutatorWindow, start: np.ndarray, tol: float, maxit: int) -> tuple[float, bool, int]:
    """Power iteration on C*C, normalised separately on every L_n-coset block.

    C maps l^2(cL_n) into l^2(sigma(c)L_n), so C*C leaves each coset block
    invariant and each block converges at the rate of its own spectral gap.
    """
    blocks = win.blocks
    nb = int(blocks.max()) + 1 if blocks.size else 0
    x = _block_normalize(start, blocks, nb)
    lam_old = np.full(nb, -1.0)
    lam = np.zeros(nb)
    for it in range(1, maxit + 1):
        z = win.rmatvec(win.matvec(x))
        lam = np.bincount(blocks, weights=np.real(np.conj(x) * z), minlength=nb)
        top = float(lam.max(initial=0.0))
        if top == 0.0:
            return 0.0, True, it
        x = _block_normalize(z, blocks, nb)
        if np.max(np.abs(lam - lam_old)) <= tol * top:
            return top, True, it
        lam_old = lam
    return float(lam.max(initial=0.0)), False, maxit


def coset_norm(op: TwistedOp, P: ProjectionBasis) -> float:
    """Closed form max_c ||T xi_c - <T xi_c, xi_sigma(c)> xi_sigma(c)|| for coset-permuting unitaries.

    T xi_c is orthogonal to every xi_c' except c' = sigma(c), so this is
    max_c ||(1 - P) T P xi_c||, which equals ||TP - PT|| for unitary T.
    """
    win = commutator_window(op, P)
    TXi = (win.T @ win.Xi).tocsc()
    G = (win.Xi.conj().T @ TXi).tocsc()
    G.sort_indices()
    sigma = np.zeros(P.rank, dtype=np.int64)
    amp = np.zeros(P.rank, dtype=complex)
    for c in range(P.rank):
        lo, hi = G.indptr[c], G.indptr[c + 1]
        if hi > lo:
            k = lo + int(np.argmax(np.abs(G.data[lo:hi])))
            sigma[c], amp[c] = G.indices[k], G.data[k]
    resid = TXi - win.Xi[:, sigma] @ sp.diags(amp)
    col_sq = np.asarray(abs(resid).power(2).sum(axis=0)).ravel()
    return math.sqrt(float(col_sq.max(initial=0.0)))


def commutator_norm(
    op: TwistedOp,
    P: ProjectionBasis,
    method: str = "power",
    seed: int = 0,
    dense_cap: int = DENSE_CAP,
    tol: float = POWER_TOL,
    maxit: int = POWER_MAXIT,
) -> NormResult:
    """||TP - PT|| by power iteration on C*C, a dense SVD of the window, or the coset closed form."""
    if method == "coset":
        return NormResult(coset_norm(op, P), "coset", P.rank)
    win = commutator_window(op, P)
    N = win.dim
    if N == 0:
        return NormResult(0.0, method, 0)
    if method == "dense":
        if N > dense_cap:
            raise CapExceeded(f"dense window {N} > dense cap {dense_cap}")
        s = np.linalg.svd(win.dense(), compute_uv=False)
        return NormResult(float(s[0]) if s.size else 0.0, "dense", N)
    if method != "power":
        raise ValueError(f"unknown norm method {method!r}")
    rng = np.random.default_rng(seed)
    starts = [np.ones(N, dtype=complex)]
    for _ in range(2):
        starts.append(rng.standard_normal(N) + 1j * rng.standard_normal(N))
    best, ok, iters = 0.0, True, 0
    for s in starts:
        lam, conv, it = _power(win, s, tol, maxit)
        best = max(best, lam)
        ok = ok and conv
        iters += it
    return NormResult(math.sqrt(max(best, 0.0)), "power", N, ok, iters)


def make_ops(z: UniTri, theta: ThetaSpec) -> dict[str, TwistedOp]:
    chi = CentralCharacter(theta)
    return {kind: TwistedOp(z, chi, kind) for kind in ("lambda", "D", "twisted")}


def far_probe(P: ProjectionBasis) -> QuotientElt:
    """A basis point guaranteed to lie outside F_n^-1 K_n."""
    sup = P.weights.support
    r = int(np.max(np.abs(sup))) + 1 if sup.size else 1
    return QuotientElt.from_key(P.d, (r,) * sup.shape[1])
