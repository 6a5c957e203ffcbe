import json
import random

import pytest

import qdcert.certify as certify
from qdcert.certify import (
    CSV_COLUMNS,
    CertificateConfig,
    ConfigError,
    canonical_dumps,
    choose_moduli,
    emit,
    read_csv,
    read_report,
    run_certificate,
)
from qdcert.cli import main
from qdcert.diophantine import ThetaSpec
from qdcert.orfanos import build_basis
from qdcert.quotient import build_folner
from qdcert.selftest import check_idempotent, check_orthonormal, run_selftest
from qdcert.unitri import CapExceeded, UniTri


def small_config(**kw):
    base = dict(
        d=3,
        theta=ThetaSpec.golden(),
        generators=[UniTri.elementary(3, 1, 2), UniTri.elementary(3, 2, 3, -1)],
        epsilon=10.0,
        n_policy=[5, 13],
    )
    base.update(kw)
    return CertificateConfig(**base)


@pytest.fixture(scope="module")
def report():
    return run_certificate(small_config())


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg.to_json()))
    return path


def test_report_fields(report):
    assert [r.n for r in report.records] == [5, 13]
    r5 = report.records[0]
    assert r5.size_Kn == 25 and r5.rank == 25 and r5.m == 1 and r5.size_Fn == 9
    assert r5.qualifies and r5.bound_satisfied and not report.violations
    assert r5.generators[0].folner_ratio_exact == "2/3"
    defects = {tuple(p["probe"]): p["defect"] for p in r5.pointwise_defects}
    assert defects[(0, 0)] == 0.0 and max(defects.values()) == 1.0


def test_json_roundtrip_is_byte_stable(report):
    text = emit(report, "json")
    again = read_report(text)
    assert emit(again, "json") == text
    for a, b in zip(report.records, again.records):
        assert abs(a.delta_n - b.delta_n) <= 1e-15
        for ga, gb in zip(a.generators, b.generators):
            assert abs(ga.twisted_comm_norm - gb.twisted_comm_norm) <= 1e-15


def test_json_excludes_timing_unless_asked(report):
    assert "timing" not in json.loads(emit(report, "json"))
    assert set(json.loads(emit(report, "json", include_timing=True))["timing"]) == {"5", "13"}


def test_csv_roundtrip(report, tmp_path):
    path = tmp_path / "out" / "r.csv"
    text = emit(report, "csv", path)
    assert path.read_text() == text
    rows = read_csv(text)
    assert len(rows) == 2 * len(report.records)
    assert tuple(rows[0]) == CSV_COLUMNS
    by_key = {(r["n"], r["generator_index"]): r for r in rows}
    for rec in report.records:
        for g in rec.generators:
            row = by_key[rec.n, g.index]
            assert abs(row["delta_n"] - rec.delta_n) <= 1e-15
            assert abs(row["D_comm_norm"] - g.D_comm_norm) <= 1e-15
            assert row["property4_verified"] is True


def test_csv_row_count_for_four_generators():
    cfg = small_config(
        generators=[UniTri.elementary(3, 1, 2, s) for s in (1, -1)] + [UniTri.elementary(3, 2, 3, s) for s in (1, -1)],
        n_policy=[5, 13, 34, 89],
    )
    rows = read_csv(emit(run_certificate(cfg), "csv"))
    assert len(rows) == 4 * 4


def test_empty_moduli_list():
    rep = run_certificate(small_config(), ns=[])
    assert rep.records == [] and not rep.violations
    assert read_csv(emit(rep, "csv")) == []


def test_canonical_dumps():
    assert canonical_dumps({"b": 1.0, "a": [True, None, 2]}) == '{"a":[true,null,2],"b":1.0}'
    assert canonical_dumps(0.1) == "0.10000000000000001"
    with pytest.raises(ValueError):
        canonical_dumps(float("nan"))


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(generators=[])
    with pytest.raises(ConfigError):
        small_config(epsilon=0)
    with pytest.raises(ConfigError):
        small_config(generators=[UniTri.identity(4)])
    with pytest.raises(ConfigError):
        small_config(n_policy=[1])
    with pytest.raises(ConfigError):
        CertificateConfig.from_json({"d": 3})
    cfg = small_config()
    assert CertificateConfig.from_json(cfg.to_json()).to_json() == cfg.to_json()


def test_auto_policy_picks_fibonacci():
    ns, sel = choose_moduli(small_config(n_policy="auto", max_basis=10_000))
    assert ns == [34, 55, 89] and sel["selected_n"] == 34 and sel["analytic_ok"]


def test_max_basis_cap():
    with pytest.raises(CapExceeded):
        run_certificate(small_config(max_basis=100))


def test_zero_theta_and_identity_generator():
    cfg = small_config(theta=ThetaSpec.rational(0, 1), generators=[UniTri.identity(3), UniTri.elementary(3, 1, 2)])
    rep = run_certificate(cfg)
    assert not rep.violations
    for r in rep.records:
        assert r.delta_n == 0.0
        ident = r.generators[0]
        assert ident.lambda_comm_norm == ident.D_comm_norm == ident.twisted_comm_norm == 0.0
        assert ident.folner_ratio == 0.0
        assert r.generators[1].D_comm_norm <= 1e-12


def test_thread_count_does_not_change_output(monkeypatch, report):
    monkeypatch.setenv("QDCERT_THREADS", "2")
    assert emit(run_certificate(small_config()), "json") == emit(report, "json")


def test_selftest_passes():
    summary = run_selftest()
    assert summary.passed, "\n".join(summary.lines())


def test_selftest_catches_corrupted_weights():
    P = build_basis(build_folner(5, 3))
    assert check_orthonormal(P).passed
    P.weights.__dict__["values"] = P.weights.values * 1.01
    assert not check_orthonormal(P).passed
    P2 = build_basis(build_folner(5, 3))
    P2.weights.__dict__["values"] = P2.weights.values * 1.01
    assert not check_idempotent(P2, random.Random(0)).passed


def test_cli_certify_and_exit_codes(tmp_path, capsys, monkeypatch):
    cfg_path = write_config(tmp_path, small_config())
    out = tmp_path / "r.json"
    assert main(["certify", "--config", str(cfg_path), "--out-json", str(out), "--out-csv", str(tmp_path / "r.csv")]) == 0
    assert read_report(out.read_text()).records[1].n == 13
    assert len(read_csv((tmp_path / "r.csv").read_text())) == 4

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["certify", "--config", str(bad)]) == 2
    assert main(["folner", "--d", "3", "--n", "1"]) == 2

    capped = write_config(tmp_path, small_config(max_basis=10), "capped.json")
    assert main(["certify", "--config", str(capped)]) == 3

    monkeypatch.setattr(certify, "GRAM_TOL", -1.0)
    assert main(["certify", "--config", str(cfg_path), "--n", "5"]) == 4
    assert "invariant violation" in capsys.readouterr().err


def test_cli_folner_and_norms(tmp_path, capsys):
    assert main(["folner", "--d", "3", "--n", "81"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary == {"n": 81, "m": 1, "size_Kn": 6561, "size_Fn": 9, "property4_verified": True}
    assert main(["norms", "--config", str(write_config(tmp_path, small_config())), "--n", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    g = out["generators"][0]["twisted"]
    assert abs(g["power"]["value"] - g["dense"]["value"]) <= 1e-6
