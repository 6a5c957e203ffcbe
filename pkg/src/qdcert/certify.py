"""Certificate runs: configuration, per-modulus records and canonical reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from qdcert import __version__
from qdcert.diophantine import (
    DEFAULT_CAP,
    ThetaSpec,
    analytic_bound,
    candidate_moduli,
    dist_below_inverse,
    dist_to_Z,
    qualifying_moduli,
    select_n,
)
from qdcert.gns import CentralCharacter
from qdcert.orfanos import (
    DENSE_CAP,
    build_basis,
    commutator_norm,
    far_probe,
    make_ops,
    max_discrepancy,
    pointwise_defect,
    vector_defects,
)
from qdcert.quotient import QuotientElt, build_folner, folner_ratio
from qdcert.unitri import DEFAULT_ENUM_CAP, CapExceeded, UniTri

SCHEMA = "qdcert/1"
D_SLACK = 1e-9
GRAM_TOL = 1e-12
CSV_COLUMNS = (
    "n",
    "generator_index",
    "generator",
    "size_Kn",
    "size_Fn",
    "m",
    "property4_verified",
    "qualifies",
    "delta_n",
    "analytic_bound",
    "bound_satisfied",
    "lambda_comm_norm",
    "D_comm_norm",
    "twisted_comm_norm",
    "folner_ratio",
)


class ConfigError(ValueError):
    pass


@dataclass
class CertificateConfig:
    d: int
    theta: ThetaSpec
    generators: list[UniTri]
    epsilon: float
    n_policy: str | list[int] = "auto"
    max_basis: int = 100_000
    dense_cap: int = DENSE_CAP
    enum_cap: int = DEFAULT_ENUM_CAP
    n_cap: int = DEFAULT_CAP
    seed: int = 0
    norm_method: str = "power"
    probes: list[UniTri] = field(default_factory=list)
    out_json: str | None = None
    out_csv: str | None = None

    def __post_init__(self):
        if not self.generators:
            raise ConfigError("generators must be nonempty")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        for g in list(self.generators) + list(self.probes):
            if g.d != self.d:
                raise ConfigError(f"element {g} does not have dimension {self.d}")
        if self.norm_method not in ("power", "dense", "coset"):
            raise ConfigError(f"unknown norm method {self.norm_method!r}")
        if self.n_policy != "auto":
            if isinstance(self.n_policy, str) or any(int(n) < 2 for n in self.n_policy):
                raise ConfigError("n_policy must be 'auto' or a list of integers >= 2")
            self.n_policy = [int(n) for n in self.n_policy]

    @property
    def p(self) -> int:
        return max(max(g.max_abs(), 0) for g in self.generators)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "theta": self.theta.to_json(),
            "generators": [g.to_json() for g in self.generators],
            "epsilon": float(self.epsilon),
            "n_policy": self.n_policy,
            "caps": {
                "max_basis": self.max_basis,
                "dense_cap": self.dense_cap,
                "enum_cap": self.enum_cap,
                "n_cap": self.n_cap,
            },
            "seed": self.seed,
            "norm_method": self.norm_method,
            "probes": [g.to_json() for g in self.probes],
            "p": self.p,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CertificateConfig":
        try:
            caps = obj.get("caps", {})
            outputs = obj.get("outputs", {})
            return cls(
                d=int(obj["d"]),
                theta=ThetaSpec.from_json(obj["theta"]),
                generators=[UniTri.from_json(g) for g in obj["generators"]],
                epsilon=float(obj["epsilon"]),
                n_policy=obj.get("n_policy", "auto"),
                max_basis=int(caps.get("max_basis", 100_000)),
                dense_cap=int(caps.get("dense_cap", DENSE_CAP)),
                enum_cap=int(caps.get("enum_cap", DEFAULT_ENUM_CAP)),
                n_cap=int(caps.get("n_cap", DEFAULT_CAP)),
                seed=int(obj.get("seed", 0)),
                norm_method=obj.get("norm_method", "power"),
                probes=[UniTri.from_json(g) for g in obj.get("probes", [])],
                out_json=outputs.get("json"),
                out_csv=outputs.get("csv"),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "CertificateConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(obj)


@dataclass
class GeneratorRecord:
    index: int
    generator: dict
    lambda_comm_norm: float
    D_comm_norm: float
    twisted_comm_norm: float
    norm_converged: bool
    max_vector_defect: float
    folner_ratio: float
    folner_ratio_exact: str


@dataclass
class NRecord:
    n: int
    size_Kn: int
    size_Fn: int
    m: int
    property4_verified: bool
    support_size: int
    rank: int
    gram_error: float
    qualifies: bool
    dist_theta_n: float
    delta_n: float
    analytic_bound: float
    analytic_below_epsilon: bool
    bound_satisfied: bool
    generators: list[GeneratorRecord]
    pointwise_defects: list[dict]
    violations: list[str]


@dataclass
class CertificateReport:
    config: dict
    records: list[NRecord]
    selection: dict
    timing: dict = field(default_factory=dict)

    @property
    def violations(self) -> list[str]:
        return [f"n={r.n}: {v}" for r in self.records for v in r.violations]

    def to_json(self, include_timing: bool = False) -> dict:
        obj = {
            "schema": SCHEMA,
            "versions": {"qdcert": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            "config": self.config,
            "selection": self.selection,
            "records": [asdict(r) for r in self.records],
        }
        if include_timing:
            obj["timing"] = self.timing
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "CertificateReport":
        if obj.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {obj.get('schema')!r}")
        records = []
        for r in obj["records"]:
            r = dict(r)
            r["generators"] = [GeneratorRecord(**g) for g in r["generators"]]
            records.append(NRecord(**r))
        return cls(obj["config"], records, obj["selection"], obj.get("timing", {}))


# ------------------------------------------------------------- serialisation


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x} in report")
    s = format(x, ".17g")
    if not any(ch in s for ch in ".eEn"):
        s += ".0"
    return s


def canonical_dumps(obj) -> str:
    """Sorted keys, no whitespace, floats with 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + canonical_dumps(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def report_json(report: CertificateReport, include_timing: bool = False) -> str:
    return canonical_dumps(report.to_json(include_timing)) + "\n"


def _generator_label(g: dict) -> str:
    return ";".join(f"{e['i']}{e['j']}:{e['v']}" for e in g["entries"]) or "id"


def csv_rows(report: CertificateReport) -> list[dict]:
    rows = []
    for r in report.records:
        for g in r.generators:
            rows.append(
                {
                    "n": r.n,
                    "generator_index": g.index,
                    "generator": _generator_label(g.generator),
                    "size_Kn": r.size_Kn,
                    "size_Fn": r.size_Fn,
                    "m": r.m,
                    "property4_verified": r.property4_verified,
                    "qualifies": r.qualifies,
                    "delta_n": r.delta_n,
                    "analytic_bound": r.analytic_bound,
                    "bound_satisfied": r.bound_satisfied,
                    "lambda_comm_norm": g.lambda_comm_norm,
                    "D_comm_norm": g.D_comm_norm,
                    "twisted_comm_norm": g.twisted_comm_norm,
                    "folner_ratio": g.folner_ratio,
                }
            )
    return rows


def report_csv(report: CertificateReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in csv_rows(report):
        writer.writerow(
            [_fmt_float(v) if isinstance(v, float) else (str(v).lower() if isinstance(v, bool) else v) for v in (row[c] for c in CSV_COLUMNS)]
        )
    return buf.getvalue()


_INT_COLS = {"n", "generator_index", "size_Kn", "size_Fn", "m"}
_BOOL_COLS = {"property4_verified", "qualifies", "bound_satisfied"}


def read_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError("unexpected CSV columns")
    out = []
    for row in reader:
        typed = {}
        for k, v in row.items():
            if k in _INT_COLS:
                typed[k] = int(v)
            elif k in _BOOL_COLS:
                typed[k] = v == "true"
            elif k == "generator":
                typed[k] = v
            else:
                typed[k] = float(v)
        out.append(typed)
    return out


def emit(report: CertificateReport, fmt: str, path: str | os.PathLike | None = None, include_timing: bool = False) -> str:
    if fmt == "json":
        text = report_json(report, include_timing)
    elif fmt == "csv":
        text = report_csv(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def read_report(text: str) -> CertificateReport:
    return CertificateReport.from_json(json.loads(text))


# ------------------------------------------------------------- runs


def choose_moduli(cfg: CertificateConfig) -> tuple[list[int], dict]:
    """Explicit list, or the first modulus from select_n followed by later candidates up to max_basis."""
    f = cfg.d * (cfg.d - 1) // 2 - 1
    if cfg.n_policy != "auto":
        return sorted(set(cfg.n_policy)), {"policy": "explicit"}
    sel = select_n(cfg.theta, cfg.p, cfg.epsilon, cfg.d, cfg.n_cap)
    ns = [sel.n]
    if sel.n**f > cfg.max_basis:
        raise CapExceeded(f"selected n={sel.n} needs rank {sel.n**f} > max_basis {cfg.max_basis}")
    for q in qualifying_moduli(cfg.theta, cfg.p, cfg.n_cap):
        if q <= sel.n:
            continue
        if q**f > cfg.max_basis:
            break
        ns.append(q)
    return ns, {"policy": "auto", "selected_n": sel.n, "analytic_ok": sel.analytic_ok}


def _is_candidate(theta: ThetaSpec, n: int, cap: int) -> bool:
    if theta.is_rational:
        return n % theta.as_fraction().denominator == 0
    for q in candidate_moduli(theta, max(cap, n)):
        if q == n:
            return True
        if q > n:
            return False
    return False


def compute_record(cfg: CertificateConfig, n: int) -> NRecord:
    d, theta = cfg.d, cfg.theta
    fd = build_folner(n, d, cfg.enum_cap)
    P = build_basis(fd, cfg.enum_cap)
    chi = CentralCharacter(theta)
    gens = list(cfg.generators)
    delta = max_discrepancy(gens, fd, theta, basis=P)
    bound = analytic_bound(d, n)
    qualifies = n > cfg.p**4 and _is_candidate(theta, n, cfg.n_cap) and dist_below_inverse(theta, n)
    gram = P.gram_error()
    violations = []
    gen_records = []
    for idx, z in enumerate(gens):
        norms = {}
        converged = True
        for kind, op in make_ops(z, theta).items():
            res = commutator_norm(op, P, cfg.norm_method, seed=cfg.seed, dense_cap=cfg.dense_cap)
            norms[kind] = res.value
            converged = converged and res.converged
        vdef = float(vector_defects(z, P, chi).max(initial=0.0))
        ratio = folner_ratio(fd.fn_elements, QuotientElt.of(z))
        if norms["D"] > 2 * delta + D_SLACK:
            violations.append(f"generator {idx}: D commutator {norms['D']} > 2*delta_n + {D_SLACK}")
        if vdef > delta + D_SLACK:
            violations.append(f"generator {idx}: per-vector defect {vdef} > delta_n")
        gen_records.append(
            GeneratorRecord(
                index=idx,
                generator=z.to_json(),
                lambda_comm_norm=norms["lambda"],
                D_comm_norm=norms["D"],
                twisted_comm_norm=norms["twisted"],
                norm_converged=converged,
                max_vector_defect=vdef,
                folner_ratio=float(ratio),
                folner_ratio_exact=f"{ratio.numerator}/{ratio.denominator}",
            )
        )
    if qualifies and delta > bound:
        violations.append(f"delta_n {delta} exceeds analytic bound {bound}")
    if gram > GRAM_TOL:
        violations.append(f"xi family not orthonormal: gram error {gram}")
    if not (P.coset_count_sums() == fd.size_Fn).all():
        violations.append("coset count sums differ from |F_n|")
    probes = [QuotientElt.identity(d)] + [QuotientElt.of(z) for z in gens] + [QuotientElt.of(z) for z in cfg.probes]
    probes.append(far_probe(P))
    seen = set()
    defects = []
    for x in probes:
        if x.key in seen:
            continue
        seen.add(x.key)
        defects.append({"probe": list(x.key), "defect": pointwise_defect(P, x)})
    return NRecord(
        n=n,
        size_Kn=fd.size_Kn,
        size_Fn=fd.size_Fn,
        m=fd.m,
        property4_verified=fd.verified,
        support_size=len(P.weights),
        rank=P.rank,
        gram_error=gram,
        qualifies=qualifies,
        dist_theta_n=dist_to_Z(theta, n),
        delta_n=delta,
        analytic_bound=bound,
        analytic_below_epsilon=bound < cfg.epsilon,
        bound_satisfied=delta <= bound,
        generators=gen_records,
        pointwise_defects=defects,
        violations=violations,
    )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QDCERT_THREADS", "1")))
    except ValueError:
        return 1


def run_certificate(cfg: CertificateConfig, ns: list[int] | None = None) -> CertificateReport:
    if ns is None:
        ns, selection = choose_moduli(cfg)
    else:
        ns, selection = sorted(set(ns)), {"policy": "explicit"}
    f = cfg.d * (cfg.d - 1) // 2 - 1
    for n in ns:
        if n**f > cfg.max_basis:
            raise CapExceeded(f"n={n} needs rank {n**f} > max_basis {cfg.max_basis}")

    def timed(n):
        t0 = time.perf_counter()
        rec = compute_record(cfg, n)
        return rec, time.perf_counter() - t0

    workers = min(_threads(), max(1, len(ns)))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(timed, ns))
    else:
        results = [timed(n) for n in ns]
    records = [r for r, _ in results]
    timing = {str(n): t for n, (_, t) in zip(ns, results)}
    report = CertificateReport(cfg.to_json(), records, selection, timing)
    if cfg.out_json:
        emit(report, "json", cfg.out_json)
    if cfg.out_csv:
        emit(report, "csv", cfg.out_csv)
    return report
