import csv
import io
import json
import math
import shutil
from importlib import resources

import pytest

from ppopt.cli import CSV_COLUMNS, EXIT_OK, EXIT_PARSE, SCHEMA, Metrics, geo_mean_reduction, main, reduction_pct
from ppopt.qasm import parse_qasm, read_qasm


def bench_path(name):
    return str(resources.files("ppopt") / "benchmarks" / f"{name}.qasm")


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_optimize_to_file(tmp_path, capsys):
    target = tmp_path / "out.qasm"
    code, report = run_json(capsys, ["optimize", bench_path("tof_3"), "--verify", "-o", str(target)])
    assert code == EXIT_OK
    assert report["schema"] == SCHEMA
    assert report["verified"] is True
    assert report["total_gates"] <= 35 and report["cnot_count"] <= 14
    assert report["original"]["total_gates"] == 45
    # numbers describe the file that was written
    written = Metrics.of_circuit(read_qasm(str(target)))
    assert (written.total_gates, written.cnot_count, written.rz_count) == (
        report["total_gates"], report["cnot_count"], report["rz_count"])


def test_optimize_to_stdout(capsys):
    assert main(["optimize", bench_path("tof_3")]) == EXIT_OK
    captured = capsys.readouterr()
    c = parse_qasm(captured.out)
    report = json.loads(captured.err)
    assert report["verified"] is None
    assert len(c) == report["total_gates"]


def test_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.qasm"
    bad.write_text('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[1];\nmeasure q[0];\n')
    assert main(["optimize", str(bad)]) == EXIT_PARSE
    assert "error" in capsys.readouterr().err
    assert main(["optimize", str(tmp_path / "missing.qasm")]) == EXIT_PARSE


def test_bad_limits(capsys):
    assert main(["optimize", bench_path("tof_3"), "--queue-size", "0"]) == EXIT_PARSE


def test_complete_coupling_matches_logical(tmp_path, capsys):
    _, logical = run_json(capsys, ["optimize", bench_path("tof_3"), "-o", str(tmp_path / "a.qasm")])
    _, hw = run_json(capsys, ["optimize", bench_path("tof_3"), "--coupling", "complete:5", "--verify",
                              "-o", str(tmp_path / "b.qasm")])
    assert (hw["total_gates"], hw["cnot_count"]) == (logical["total_gates"], logical["cnot_count"])
    assert hw["verified"] is True
    assert sorted(hw["initial_mapping"]) == list(range(5))


def test_line_coupling_reports_swaps_as_three(tmp_path, capsys):
    _, hw = run_json(capsys, ["optimize", bench_path("tof_3"), "--coupling", "line:5", "--verify",
                              "-o", str(tmp_path / "b.qasm")])
    assert hw["verified"] is True
    assert hw["weighted_cnot"] == hw["cnot_count"] + 3 * hw["swap_count"]


def test_empty_suite_directory(tmp_path, capsys):
    assert main(["bench", "--suite", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.strip() == ",".join(CSV_COLUMNS)


def test_bench_directory(tmp_path, capsys):
    for name in ("tof_3", "barenco_tof_3"):
        shutil.copy(bench_path(name), tmp_path)
    assert main(["bench", "--suite", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["circuit"] for r in rows] == ["barenco_tof_3", "tof_3", "geo_mean"]
    tof = rows[1]
    assert (int(tof["orig_gates"]), int(tof["opt_gates"])) == (45, 35)
    assert float(tof["gate_red_pct"]) == 22.22
    assert tof["verified"] == "true"
    expected = geo_mean_reduction([float(rows[0]["gate_red_pct"]), float(tof["gate_red_pct"])])
    assert float(rows[2]["gate_red_pct"]) == round(expected, 2)


def test_unknown_suite(capsys):
    assert main(["bench", "--suite", "no-such-suite"]) == EXIT_PARSE


def test_reduction_formulas():
    assert round(reduction_pct(45, 35), 2) == 22.22
    assert reduction_pct(0, 0) == 0.0
    assert geo_mean_reduction([50.0, 0.0]) == pytest.approx(100 * (1 - math.sqrt(0.5)))
    assert geo_mean_reduction([20.0, 20.0, 20.0]) == pytest.approx(20.0)
    assert geo_mean_reduction([]) == 0.0
