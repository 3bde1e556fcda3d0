import csv
import io
import json
import subprocess
import sys

import pytest

from reticent.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


@pytest.mark.parametrize("example", ["1", "2", "3"])
def test_reproduce_matches_printed_figures(capsys, example):
    code, out = _run(capsys, "reproduce", example, "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["ok"]
    assert data["max_abs_error"] <= 1e-9


def test_run_reports_utility_with_silent_opponents(capsys):
    code, out = _run(capsys, "run", "--scenario", "example3", "--strategy", "2=no-info",
                     "--strategy", "3=no-info", "--format", "json")
    data = json.loads(out)
    assert code == 0
    assert data["expected_utility"][0] == pytest.approx(49.25, abs=1e-9)
    assert [s["scheme"] for s in data["strategies"]] == ["full", "none", "none"]
    assert sum(r["probability"] for r in data["outcomes"]) == pytest.approx(1.0)


def test_run_mask_matches_elicitation_revenue(capsys):
    _, out = _run(capsys, "run", "--scenario", "example2", "--mask", "3", "--format", "json")
    assert json.loads(out)["expected_revenue"] == pytest.approx(0.13, abs=1e-9)


def test_run_csv_has_one_column_block_per_bidder(capsys):
    _, out = _run(capsys, "run", "--scenario", "example2", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:2] == ["probability", "bid_1"]
    assert all(len(r) == 1 + 4 * 3 for r in rows)


def test_verify_exit_code_follows_report(capsys):
    code, out = _run(capsys, "verify", "--scenario", "example3", "--check", "dominant-iic",
                     "--format", "json")
    assert code == 1
    prop = json.loads(out)["properties"][0]
    assert prop["status"] == "FAIL"
    code, _ = _run(capsys, "verify", "--scenario", "example3", "--regulated",
                   "--check", "dominant-iic")
    assert code == 0


def test_verify_output_is_deterministic(capsys, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        main(["verify", "--scenario", "negative_control", "--mechanism", "expected-myerson",
              "--family-k", "16", "--seed", "5", "--format", "json", "--out", str(path)])
        outs.append(path.read_text())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["family"]["seed"] == 5


def test_export_virtual_values_csv(capsys):
    code, out = _run(capsys, "export-virtual-values", "--scenario", "negative_control")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 4
    low_a = next(r for r in rows if r["type"] == "low" and r["profile"].endswith("A"))
    assert float(low_a["virtual_value"]) == pytest.approx(-0.2)


@pytest.mark.parametrize("argv,msg", [
    (["run", "--scenario", "no/such/file.json"], "cannot load scenario"),
    (["run", "--scenario", "example2", "--mask", "7"], "unknown bidders"),
    (["run", "--scenario", "example2", "--strategy", "9=none"], "out of range"),
    (["run", "--scenario", "example2", "--mechanism", "expected-magic"], "unknown mechanism"),
    (["verify", "--scenario", "example2", "--check", "psychic"], "unknown checks"),
])
def test_bad_input_exits_with_a_message(argv, msg):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert msg in str(info.value.code)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "reticent", "reproduce", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "match" in proc.stdout
