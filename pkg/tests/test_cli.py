import csv
import io
import json
import math

import pytest

from khinchin.cli import SCHEMA_VERSION, RunConfig, UsageError, load_family, main, parse_grid


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def js(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out) if out else None, err


def test_describe_partition(capsys):
    code, doc, _ = js(capsys, "describe", "--f", "partition()")
    r = doc["results"][0]
    assert code == 0 and doc["schema_version"] == SCHEMA_VERSION
    assert r["class_k"] == "yes" and r["M_f"] == "inf" and r["gap"] == 1
    assert "1" in r["radius"]


def test_describe_rejects_z(capsys):
    code, out, err = run(capsys, "describe", "--f", "z")
    assert code == 2 and out == "" and err.startswith("error:")


def test_describe_parse_error_has_position(capsys):
    code, _, err = run(capsys, "describe", "--f", "1+*z")
    assert code == 2 and "column 3" in err


def test_describe_negbin2(capsys):
    code, doc, _ = js(capsys, "describe", "--f", "1/(1-z)^2")
    r = doc["results"][0]
    assert code == 0 and r["class_k"] == "yes"
    assert r["coefficients"][:5] == ["1", "2", "3", "4", "5"]


def test_stats_bell(capsys):
    code, doc, _ = js(capsys, "stats", "--f", "bell", "--t", "1")
    r = doc["results"][0]
    assert r["mean"] == pytest.approx(math.e, rel=1e-12) and r["var"] == pytest.approx(2 * math.e, rel=1e-12)


def test_stats_exp_csv(capsys):
    code, out, _ = run(capsys, "stats", "--f", "exp(z)", "--t", "7", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0])[:7] == ["t", "log_f", "mean", "var", "sigma_over_m", "L_f", "quotient"]
    assert float(rows[0]["mean"]) == pytest.approx(7) and float(rows[0]["var"]) == pytest.approx(7)


def test_stats_partition_near_one(capsys):
    _, doc, _ = js(capsys, "stats", "--f", "partition", "--t", "0.999")
    assert round(doc["results"][0]["sigma_over_m"], 3) == 0.035


def test_stats_high_precision_strings(capsys):
    _, doc, _ = js(capsys, "stats", "--f", "1+z", "--t", "1", "--precision", "high")
    r = doc["results"][0]
    assert isinstance(r["var"], str) and r["var"].startswith("0.25")


def test_clan_nonclan_exit_zero(capsys):
    code, doc, _ = js(capsys, "clan", "--f", "1/(1-z)")
    assert code == 0 and doc["verdict"] == "nonclan-consistent"


def test_clan_partition(capsys):
    code, doc, _ = js(capsys, "clan", "--f", "partition")
    assert code == 0 and doc["verdict"] == "clan-consistent"


def test_order(capsys):
    code, doc, _ = js(capsys, "order", "--f", "exp")
    assert code == 0 and abs(doc["summary"]["loglog"]["last"] - 1) < 1e-12


def test_estimate_partition(capsys):
    code, doc, _ = js(capsys, "estimate", "--f", "partition", "--n", "100")
    assert code == 0 and 0.9 <= doc["results"][0]["ratio"] <= 1.1


def test_verify_default_suite(capsys):
    code, doc, _ = js(capsys, "verify")
    assert code == 0 and doc["passed"] and doc["failed"] == 0 and doc["total"] > 50


def test_verify_failing_check_exit_one(capsys, monkeypatch):
    from khinchin import verify

    bad = verify.check_zero_free("1+z", (1.0, math.pi / 2))
    assert not bad.passed
    monkeypatch.setattr(verify, "run_suite", lambda corpus, checks: [bad])
    code, doc, _ = js(capsys, "verify")
    assert code == 1 and doc["failed"] == 1 and not doc["passed"]


def test_verify_unknown_check(capsys):
    code, _, err = run(capsys, "verify", "--suite", "nope")
    assert code == 2 and "unknown check" in err


def test_verify_suite_selection(capsys):
    code, doc, _ = js(capsys, "verify", "--suite", "zero_free")
    assert code == 0 and {r["name"] for r in doc["results"]} == {"zero_free"}


def test_sample_and_concentration(capsys):
    code, doc, _ = js(capsys, "sample", "--f", "exp", "--t", "5", "--count", "100", "--seed", "3")
    assert code == 0 and len(doc["results"]) == 100 and doc["algorithm"] == "PCG64"
    code, doc, _ = js(capsys, "sample", "--f", "geom", "--grid", "list:0.9,0.99", "--eps", "0.5", "--count", "2000")
    assert code == 0 and all(r["exceedance"] > 0.2 for r in doc["results"])


def test_sample_needs_t(capsys):
    code, _, _ = run(capsys, "sample", "--f", "exp")
    assert code == 2


def test_clt(capsys):
    code, doc, _ = js(capsys, "clt", "--f", "exp", "--t", "100,10000")
    d = [r["deviation"] for r in doc["results"]]
    assert code == 0 and d[1] < d[0] < 0.05


def test_clt_flags_unavailable_window(capsys):
    code, doc, _ = js(capsys, "clt", "--f", "bell", "--t", "2,10")
    assert code == 0 and doc["results"][0]["flag"] == "" and doc["results"][1]["flag"].startswith("error")


@pytest.mark.parametrize("argv", [
    ("stats", "--f", "partition", "--grid", "geo:auto:6", "--format", "csv"),
    ("clan", "--f", "exp", "--format", "json"),
    ("sample", "--f", "partition", "--t", "0.9", "--count", "500", "--seed", "11"),
])
def test_byte_stable(capsys, argv):
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b and a


def test_out_file(tmp_path, capsys):
    p = tmp_path / "o.json"
    code, out, _ = run(capsys, "describe", "--f", "exp", "--out", str(p))
    assert code == 0 and out == "" and json.loads(p.read_text())["command"] == "describe"


def test_config_echo(capsys):
    _, doc, _ = js(capsys, "estimate", "--f", "exp", "--n", "10", "--seed", "5")
    assert doc["config"]["f"] == "exp" and doc["config"]["seed"] == 5 and doc["config"]["n_trunc"] == 200


@pytest.mark.parametrize("argv", [("stats",), ("stats", "--f", "exp", "--n-trunc", "0"),
                                  ("stats", "--f", "geom", "--grid", "list:1.5"), ("stats", "--f", "exp", "--grid", "bad"),
                                  ("frobnicate",), ("stats", "--f", "nosuchbuiltin()")])
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_parse_grid():
    F = load_family(RunConfig("stats", f="geom"))
    g = parse_grid("geo:auto:4", F)
    assert g.size == 4 and g[-1] < 1
    assert list(parse_grid("list:0.1,0.5", F)) == [0.1, 0.5]
    assert parse_grid("lin:0.1:0.5:5", F)[2] == pytest.approx(0.3)
    with pytest.raises(UsageError):
        parse_grid("list:0.5,1.0", F)


def test_main_module_runs():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "khinchin", "describe", "--f", "exp"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["results"][0]["M_f"] == "inf"
