"""Small-size invariant sweep used by `qdcert selftest`."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from qdcert.diophantine import ThetaSpec, convergent_error_ok, convergents, dist_to_Z
from qdcert.gns import CentralCharacter, SparseVec, TwistedOp
from qdcert.orfanos import (
    ProjectionBasis,
    apply_P,
    build_basis,
    commutator_norm,
    make_ops,
    max_discrepancy,
    vector_defects,
)
from qdcert.quotient import (
    QuotientElt,
    build_folner,
    check_property4,
    in_LnZ,
    kn_spec,
    reduce_to_Kn,
)
from qdcert.unitri import UniTri, coset_rep, enumerate_box, in_Ln, inv, mul, num_free

TOL = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SelftestSummary:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        return [f"{'PASS' if r.passed else 'FAIL'}  {r.name}" + (f"  ({r.detail})" if r.detail else "") for r in self.results]


def random_unitri(rng: random.Random, d: int, bound: int) -> UniTri:
    return UniTri(d, tuple(rng.randint(-bound, bound) for _ in range(d * (d - 1) // 2)))


def check_orthonormal(P: ProjectionBasis, tol: float = TOL) -> CheckResult:
    err = P.gram_error()
    return CheckResult(f"orthonormal xi family d={P.d} n={P.n}", err <= tol, f"gram error {err:.2e}")


def check_idempotent(P: ProjectionBasis, rng: random.Random, tol: float = TOL) -> CheckResult:
    sup = P.weights.support
    worst = 0.0
    for _ in range(5):
        picks = rng.sample(range(sup.shape[0]), min(6, sup.shape[0]))
        v = SparseVec(
            (QuotientElt.from_key(P.d, tuple(sup[i].tolist())), complex(rng.gauss(0, 1), rng.gauss(0, 1))) for i in picks
        )
        pv = apply_P(P, v)
        worst = max(worst, (apply_P(P, pv) - pv).norm() / max(v.norm(), 1e-300))
    return CheckResult(f"P idempotent d={P.d} n={P.n}", worst <= tol, f"{worst:.2e}")


def _group_laws(rng: random.Random) -> list[CheckResult]:
    out = []
    ok = True
    for d in (3, 4):
        for _ in range(50):
            a, b, c = (random_unitri(rng, d, 1000) for _ in range(3))
            ok &= mul(mul(a, b), c) == mul(a, mul(b, c))
            ok &= mul(a, inv(a)).is_identity()
            q, k = coset_rep(a)
            ok &= mul(q.rep, k.as_unitri()) == a
            n = rng.randint(2, 7)
            la = UniTri(d, tuple(n * v for v in random_unitri(rng, d, 5).entries))
            lb = UniTri(d, tuple(n * v for v in random_unitri(rng, d, 5).entries))
            ok &= in_Ln(mul(la, lb), n) and in_Ln(inv(la), n)
    out.append(CheckResult("group laws, coset split, L_n closure", bool(ok)))
    return out


def _quotient_checks(rng: random.Random) -> list[CheckResult]:
    out = []
    for d, n in ((3, 2), (3, 4), (3, 5), (4, 2), (4, 4)):
        count = sum(1 for _ in enumerate_box(kn_spec(n, d)))
        out.append(CheckResult(f"|K_n| d={d} n={n}", count == n ** num_free(d), f"{count}"))
        ok = True
        for _ in range(30):
            x = QuotientElt.of(random_unitri(rng, d, 50))
            y = reduce_to_Kn(x, n)
            ok &= reduce_to_Kn(y, n) == y and in_LnZ(x, y, n) and kn_spec(n, d).contains(y.rep)
        out.append(CheckResult(f"reduce_to_Kn sound d={d} n={n}", bool(ok)))
    return out


def _representation(rng: random.Random, theta: ThetaSpec) -> CheckResult:
    chi = CentralCharacter(theta)
    worst = 0.0
    for _ in range(40):
        d = rng.choice((3, 4))
        y1, y2 = random_unitri(rng, d, 5), random_unitri(rng, d, 5)
        v = SparseVec.delta(QuotientElt.of(random_unitri(rng, d, 5)))
        lhs = TwistedOp(y1, chi).apply(TwistedOp(y2, chi).apply(v))
        rhs = TwistedOp(mul(y1, y2), chi).apply(v)
        worst = max(worst, (lhs - rhs).norm())
    return CheckResult("pi_phi multiplicative", worst <= 1e-10, f"{worst:.2e}")


def _basis_checks(rng: random.Random, theta: ThetaSpec) -> list[CheckResult]:
    out = []
    for d, n in ((3, 2), (3, 4), (3, 5), (3, 13), (4, 2), (4, 4), (4, 5)):
        fd = build_folner(n, d)
        out.append(CheckResult(f"property (4) d={d} n={n}", fd.verified and check_property4(fd), f"m={fd.m}"))
        P = build_basis(fd)
        out.append(CheckResult(f"rank d={d} n={n}", P.rank == n ** num_free(d)))
        out.append(check_orthonormal(P))
        out.append(check_idempotent(P, rng))
        gens = [UniTri.elementary(d, 1, 2), UniTri.elementary(d, d - 1, d, -1)]
        delta = max_discrepancy(gens, fd, theta, basis=P)
        chi = CentralCharacter(theta)
        ok = True
        gap = 0.0
        for z in gens:
            ok &= bool(vector_defects(z, P, chi).max(initial=0.0) <= delta + 1e-12)
            for kind, op in make_ops(z, theta).items():
                pw = commutator_norm(op, P, "power").value
                if kind == "D":
                    ok &= pw <= 2 * delta + 1e-9
                if d == 3 and n <= 13:
                    gap = max(gap, abs(pw - commutator_norm(op, P, "dense").value))
        out.append(CheckResult(f"D bounds and norm oracle d={d} n={n}", ok and gap <= 1e-6, f"power/dense gap {gap:.1e}"))
    return out


def _diophantine_checks() -> list[CheckResult]:
    g = ThetaSpec.golden()
    convs = convergents(g, 40)
    third = ThetaSpec.rational(1, 3)
    return [
        CheckResult("golden convergents |q theta - p| < 1/q", all(convergent_error_ok(g, c) for c in convs)),
        CheckResult("theta=1/3 dist at multiples of 3", all(dist_to_Z(third, 3 * k) == 0.0 for k in range(1, 20))),
    ]


def run_selftest(seed: int = 0) -> SelftestSummary:
    rng = random.Random(seed)
    theta = ThetaSpec.golden()
    summary = SelftestSummary()
    steps: list[Callable[[], list[CheckResult] | CheckResult]] = [
        lambda: _group_laws(rng),
        lambda: _quotient_checks(rng),
        lambda: _representation(rng, theta),
        lambda: _basis_checks(rng, theta),
        _diophantine_checks,
    ]
    for step in steps:
        try:
            res = step()
        except Exception as exc:  # a crash is a failed check, not an abort
            res = CheckResult(getattr(step, "__name__", "step"), False, repr(exc))
        summary.results.extend(res if isinstance(res, list) else [res])
    return summary
