"""Command line entry point.

Exit codes: 0 success, 2 config error, 3 cap exceeded, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from qdcert.certify import (
    CertificateConfig,
    ConfigError,
    canonical_dumps,
    emit,
    run_certificate,
)
from qdcert.orfanos import build_basis, commutator_norm, make_ops, max_discrepancy, vector_defects
from qdcert.gns import CentralCharacter
from qdcert.quotient import build_folner
from qdcert.selftest import run_selftest
from qdcert.unitri import CapExceeded

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("qdcert")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdcert", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="run a full certificate")
    c.add_argument("--config", required=True)
    c.add_argument("--n", type=int, nargs="+", help="explicit moduli, overriding the config policy")
    c.add_argument("--out-json")
    c.add_argument("--out-csv")
    c.add_argument("--seed", type=int)
    c.add_argument("--timing", action="store_true", help="include wall-clock timing in the JSON (breaks byte-reproducibility)")

    f = sub.add_parser("folner", help="print the Følner data summary for one modulus")
    f.add_argument("--d", type=int, required=True)
    f.add_argument("--n", type=int, required=True)

    nm = sub.add_parser("norms", help="single-modulus deep dive: all norm methods per generator")
    nm.add_argument("--config", required=True)
    nm.add_argument("--n", type=int, required=True)

    sub.add_parser("selftest", help="run the small-size invariant suite")
    return parser


def _certify(args) -> int:
    cfg = CertificateConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_json:
        cfg.out_json = args.out_json
    if args.out_csv:
        cfg.out_csv = args.out_csv
    out_json, out_csv = cfg.out_json, cfg.out_csv
    cfg.out_json = cfg.out_csv = None
    report = run_certificate(cfg, args.n)
    if out_json:
        emit(report, "json", out_json, include_timing=args.timing)
    if out_csv:
        emit(report, "csv", out_csv)
    if not out_json:
        sys.stdout.write(emit(report, "json", include_timing=args.timing))
    for r in report.records:
        log.info(
            "n=%d |K|=%d |F|=%d delta=%.3e bound=%.3e", r.n, r.size_Kn, r.size_Fn, r.delta_n, r.analytic_bound
        )
    if report.violations:
        for v in report.violations:
            print(f"invariant violation: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _folner(args) -> int:
    if args.n < 2 or args.d < 2:
        raise ConfigError("folner needs n >= 2 and d >= 2")
    fd = build_folner(args.n, args.d)
    print(canonical_dumps(fd.summary()))
    return EXIT_OK


def _norms(args) -> int:
    cfg = CertificateConfig.load(args.config)
    fd = build_folner(args.n, cfg.d, cfg.enum_cap)
    P = build_basis(fd, cfg.enum_cap)
    chi = CentralCharacter(cfg.theta)
    delta = max_discrepancy(cfg.generators, fd, cfg.theta, basis=P)
    out = {"n": args.n, "folner": fd.summary(), "delta_n": delta, "gram_error": P.gram_error(), "generators": []}
    for z in cfg.generators:
        entry = {"generator": z.to_json(), "max_vector_defect": float(vector_defects(z, P, chi).max(initial=0.0))}
        for kind, op in make_ops(z, cfg.theta).items():
            per = {}
            for method in ("power", "dense", "coset"):
                try:
                    res = commutator_norm(op, P, method, seed=cfg.seed, dense_cap=cfg.dense_cap)
                except CapExceeded:
                    continue
                per[method] = {"value": res.value, "dim": res.dim, "converged": res.converged, "iterations": res.iterations}
            entry[kind] = per
        out["generators"].append(entry)
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def _selftest(args) -> int:
    summary = run_selftest()
    for line in summary.lines():
        print(line)
    print("selftest:", "PASS" if summary.passed else "FAIL")
    return EXIT_OK if summary.passed else EXIT_INVARIANT


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handlers = {"certify": _certify, "folner": _folner, "norms": _norms, "selftest": _selftest}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    raise SystemExit(main())
