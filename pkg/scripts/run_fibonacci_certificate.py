"""Run the golden-ratio certificate for d=3 along Fibonacci moduli and write JSON + CSV.

    python scripts/run_fibonacci_certificate.py --out results/
"""

import argparse
from pathlib import Path

from qdcert.certify import CertificateConfig, emit, run_certificate

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "golden_d3.json"))
    ap.add_argument("--n", type=int, nargs="+", help="override the configured moduli")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    cfg = CertificateConfig.load(args.config)
    report = run_certificate(cfg, args.n)
    out = Path(args.out)
    emit(report, "json", out / "certificate.json")
    emit(report, "csv", out / "certificate.csv")

    print(f"{'n':>5} {'|K_n|':>8} {'|F_n|':>6} {'Delta_n':>10} {'bound':>8}  ok")
    for r in report.records:
        print(f"{r.n:>5} {r.size_Kn:>8} {r.size_Fn:>6} {r.delta_n:>10.4g} {r.analytic_bound:>8.4g}  {r.bound_satisfied}")
    if report.violations:
        print("violations:", *report.violations, sep="\n  ")
    print(f"wrote {out / 'certificate.json'} and {out / 'certificate.csv'}")
    return 1 if report.violations else 0


if __name__ == "__main__":
    raise SystemExit(main())
