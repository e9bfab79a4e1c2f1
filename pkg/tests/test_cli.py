import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qeraser import cli, mz_eraser
from qeraser.montecarlo import BasisPolicy, ScanSpec, scan

SCAN = ["mz-scan", "--policy", "fixed-circular", "--x-min", "0", "--x-max", "1", "--lambda", "1",
        "--steps", "41", "--shots", "10000", "--seed", "7"]
PATTERN = ["twoslit-pattern", "--theta", "0", "--d", "1", "--D", "1000", "--lambda", "0.001",
           "--sigma", "auto"]


def run_csv(argv, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = cli.run(argv + ["--out", str(out)])
    text = out.read_bytes().decode() if out.exists() else ""
    return code, list(csv.DictReader(io.StringIO(text))), text


class TestEmit:
    def test_header_only(self):
        assert cli.emit("csv", [], ["a", "b"]) == b"a,b\n"

    def test_float_format(self):
        out = cli.emit("csv", [{"v": 1 / 3, "n": 2, "ok": True}], ["v", "n", "ok"])
        assert out == b"v,n,ok\n0.333333333333,2,true\n"

    def test_json_shape(self):
        doc = json.loads(cli.emit("json", [{"v": 0.5}], ["v"], {"command": "x"}))
        assert doc == {"meta": {"command": "x"}, "data": [{"v": 0.5}]}

    def test_joint_table_rows(self):
        table = mz_eraser.correlation_table(mz_eraser.MzConfig(0, 1), mz_eraser.mub_pair("circular_RL"))
        text = cli.emit("csv", table.rows(), ["detector", "outcome", "probability"]).decode()
        assert len(text.strip().split("\n")) == 5

    def test_unknown_format(self):
        with pytest.raises(cli.UsageError):
            cli.emit("xml", [], ["a"])


class TestCommands:
    def test_mz_joint_eq7(self, tmp_path):
        code, rows, _ = run_csv(["mz-joint", "--x", "0", "--lambda", "1", "--basis", "circular"], tmp_path)
        assert code == 0
        got = {(r["detector"], r["outcome"]): float(r["probability"]) for r in rows}
        assert got[("D1", "L")] == pytest.approx(0.5, abs=1e-12)
        assert got[("D2", "R")] == pytest.approx(0.5, abs=1e-12)
        assert got[("D1", "R")] < 1e-12 and got[("D2", "L")] < 1e-12

    def test_mz_joint_adaptive(self, tmp_path):
        code, rows, _ = run_csv(["mz-joint", "--x", "0.3", "--lambda", "1", "--adaptive"], tmp_path)
        got = {(r["detector"], r["outcome"]): float(r["probability"]) for r in rows}
        assert got[("D1", "Q")] == pytest.approx(0.5, abs=1e-12)
        assert got[("D1", "P")] < 1e-12
        assert float(rows[0]["theta"]) == pytest.approx(0.6 * math.pi)

    def test_mz_scan(self, tmp_path):
        code, rows, _ = run_csv(SCAN, tmp_path)
        assert code == 0 and len(rows) == 41 * 4
        d2r = [r for r in rows if r["detector"] == "D2" and r["outcome"] == "R"]
        d1r = [r for r in rows if r["detector"] == "D1" and r["outcome"] == "R"]
        assert int(d1r[0]["count"]) == 0
        assert int(d2r[0]["count"]) == max(int(r["count"]) for r in d2r)

    def test_mz_scan_round_trip(self, tmp_path):
        _, rows, _ = run_csv(SCAN, tmp_path)
        hist = scan(1.0, ScanSpec(0.0, 1.0, 41, 10_000, BasisPolicy.fixed("circular_RL")), 7)
        for r, mem in zip(rows, hist.rows()):
            assert int(r["count"]) == mem["count"]
            assert abs(float(r["frequency"]) - mem["frequency"]) < 1e-9
            assert abs(float(r["probability"]) - mem["probability"]) < 1e-9
        total = sum(float(r["frequency"]) for r in rows)
        assert abs(total - hist.frequencies().sum()) < 1e-9

    def test_mz_check_passes(self, tmp_path):
        code, rows, _ = run_csv(["mz-check", "--samples", "30"], tmp_path)
        assert code == 0
        assert all(r["passed"] == "true" for r in rows)

    def test_mz_check_failure_exit(self, tmp_path, monkeypatch, capsys):
        bad = [mz_eraser.CheckResult("marginals", 1e-3, 1e-12)]
        monkeypatch.setattr(mz_eraser, "invariant_report", lambda *a, **k: bad)
        code, rows, _ = run_csv(["mz-check"], tmp_path)
        assert code == 1
        assert rows[0]["passed"] == "false"
        assert "marginals" in capsys.readouterr().err

    def test_twoslit_pattern(self, tmp_path):
        code, rows, _ = run_csv(PATTERN, tmp_path)
        assert code == 0 and len(rows) == 1001
        center = [r for r in rows if float(r["x"]) == 0.0][0]
        assert float(center["p_minus"]) < 1e-12
        assert float(center["p_plus"]) == pytest.approx(2.0)

    def test_twoslit_pattern_normalized(self, tmp_path):
        _, rows, _ = run_csv(PATTERN + ["--normalize"], tmp_path)
        x = np.array([float(r["x"]) for r in rows])
        total = np.array([float(r["p_plus"]) + float(r["p_minus"]) for r in rows])
        assert np.trapezoid(total, x) == pytest.approx(1.0, rel=1e-9)

    def test_twoslit_sample(self, tmp_path):
        code, rows, _ = run_csv(["twoslit-sample", "--d", "1", "--D", "1000", "--lambda", "0.001",
                                 "--n", "500", "--seed", "3"], tmp_path)
        assert code == 0 and len(rows) == 500
        assert {r["outcome"] for r in rows} == {"plus"}

    def test_json_round_trip(self, tmp_path):
        out = tmp_path / "j.json"
        assert cli.run(["mz-joint", "--x", "0.1", "--lambda", "1", "--basis", "pq", "--theta", "1",
                        "--format", "json", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["meta"]["command"] == "mz-joint"
        assert doc["meta"]["params"]["theta"] == 1.0
        table = mz_eraser.correlation_table(mz_eraser.MzConfig(0.1, 1.0),
                                            mz_eraser.mub_pair("polarization_PQ", 1.0))
        for row, mem in zip(doc["data"], table.rows()):
            assert abs(row["probability"] - mem["probability"]) < 1e-9


class TestErrors:
    def test_unknown_command(self, capsys):
        assert cli.run(["mz-bogus"]) == 2
        assert capsys.readouterr().err

    def test_missing_flag(self, capsys):
        assert cli.run(["mz-joint", "--lambda", "1"]) == 2
        assert "--x" in capsys.readouterr().err

    def test_nonfinite_flag(self):
        assert cli.run(["mz-joint", "--x", "nan", "--lambda", "1"]) == 2

    def test_bad_range(self, capsys):
        assert cli.run(["mz-scan", "--x-min", "1", "--x-max", "0", "--lambda", "1", "--steps", "3"]) == 2
        assert "x-min" in capsys.readouterr().err

    def test_unwritable_path(self, tmp_path, capsys):
        code = cli.run(["mz-joint", "--x", "0", "--lambda", "1", "--out", str(tmp_path / "no" / "f.csv")])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1 and "cannot write" in err[0]


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_byte_stability_subprocess(tmp_path, fmt):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.{fmt}"
        subprocess.run([sys.executable, "-m", "qeraser", *SCAN, "--poisson", "--format", fmt,
                        "--out", str(path)], check=True)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert b"\r\n" not in outs[0]
