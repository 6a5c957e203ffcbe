"""Tabulate commutator norms against n for each generator and operator kind.

Prints one row per (n, generator) with the lambda, D and twisted norms next
to Delta_n and 2*Delta_n, so the D <= 2*Delta_n bound and the decay (or
lack of it) can be read off directly.
"""

import argparse
from pathlib import Path

from qdcert.certify import CertificateConfig, run_certificate

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "golden_d3.json"))
    ap.add_argument("--n", type=int, nargs="+")
    args = ap.parse_args()

    report = run_certificate(CertificateConfig.load(args.config), args.n)
    print(f"{'n':>5} {'gen':>12} {'lambda':>10} {'D':>10} {'twisted':>10} {'2*Delta':>10} {'m':>3}")
    for r in report.records:
        for g in r.generators:
            label = ";".join(f"{e['i']}{e['j']}:{e['v']}" for e in g.generator["entries"]) or "id"
            print(
                f"{r.n:>5} {label:>12} {g.lambda_comm_norm:>10.5f} {g.D_comm_norm:>10.5f} "
                f"{g.twisted_comm_norm:>10.5f} {2 * r.delta_n:>10.5f} {r.m:>3}"
            )


if __name__ == "__main__":
    main()
