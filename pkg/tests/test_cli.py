import csv
import io
import json
import math
import subprocess
import sys

import pytest

from mihnm.cli import InputError, main, parse_descriptor

SMALL = {"n": [16], "d": [1], "p": [["1/2"]], "b": "1/5", "families": ["Normal-Q"]}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(SMALL))
    return str(path)


class TestPmf:
    def test_enumerate_three_rows(self, capsys):
        code, out, _ = run(capsys, "pmf", "mih", "-N", "4", "-n", "1", "-p", "1/2", "--enumerate")
        assert code == 0
        rows = json.loads(out)["entries"]
        assert [r["k"] for r in rows] == [[0], [1], [2]]
        assert math.fsum(math.exp(r["logp"]) for r in rows) == pytest.approx(1.0, abs=1e-15)

    def test_enumerate_csv(self, capsys):
        code, out, _ = run(capsys, "--format", "csv", "pmf", "mih", "-N", "4", "-n", "1", "-p", "1/2", "--enumerate")
        body = [l for l in out.splitlines() if not l.startswith("#")]
        assert code == 0 and body[0] == "k1,logp" and len(body) == 4

    def test_nm_point(self, capsys):
        code, out, _ = run(capsys, "pmf", "nm", "-n", "1", "-p", "1/2", "-k", "0")
        assert code == 0
        assert json.loads(out)["logp"] == pytest.approx(math.log(0.5), abs=1e-15)

    def test_lattice_violation(self, capsys):
        code, _, err = run(capsys, "pmf", "mih", "-N", "5", "-n", "1", "-p", "1/2", "-k", "0")
        assert code == 2 and "lattice" in err

    def test_decimal_rejected_for_mih(self, capsys):
        code, _, err = run(capsys, "pmf", "mih", "-N", "4", "-n", "1", "-p", "0.5", "-k", "0")
        assert code == 2 and "error:" in err

    def test_missing_k(self, capsys):
        code, _, _ = run(capsys, "pmf", "nm", "-n", "1", "-p", "1/2")
        assert code == 2

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "o.json"
        code, out, _ = run(capsys, "pmf", "nm", "-n", "1", "-p", "1/2", "-k", "1", "--out", str(path))
        assert code == 0 and out == ""
        assert json.loads(path.read_text())["logp"] == pytest.approx(math.log(0.25))


class TestSample:
    def test_seeded(self, capsys):
        a = run(capsys, "--seed", "7", "sample", "mih", "-N", "10", "-n", "2", "-p", "1/2", "--size", "5")[1]
        b = run(capsys, "sample", "mih", "-N", "10", "-n", "2", "-p", "1/2", "--size", "5", "--seed", "7")[1]
        assert a == b
        assert len(json.loads(a)["samples"]) == 5


class TestDistance:
    A, B = "mih:N=4:n=1:p=1/2", "nm:n=1:p=1/2"

    def test_hellinger(self, capsys):
        code, out, _ = run(capsys, "distance", self.A, self.B, "--metric", "hellinger")
        assert code == 0
        assert json.loads(out)["value"] == pytest.approx(0.258819045, abs=1e-9)

    def test_tv(self, capsys):
        out = run(capsys, "distance", self.A, self.B, "--metric", "tv")[1]
        assert json.loads(out)["value"] == pytest.approx(0.125, abs=1e-9)

    @pytest.mark.parametrize("desc", [A, B, "point:k=0,1", "normal-q:n=4:p=1/2"])
    def test_self_distance(self, capsys, desc):
        metric = "hellinger" if desc.startswith("normal") else "tv"
        out = run(capsys, "distance", desc, desc, "--metric", metric)[1]
        assert json.loads(out)["value"] == pytest.approx(0.0, abs=1e-12)

    def test_mixed_continuous(self, capsys):
        code, out, _ = run(capsys, "distance", "mih:N=4096:n=16:p=1/2", "normal-q:n=16:p=1/2", "--metric", "tv")
        rep = json.loads(out)
        assert code == 0 and 0 < rep["value"] < 1 and "error_estimate" in rep

    def test_kl_not_absolutely_continuous(self, capsys):
        code, _, err = run(capsys, "distance", self.B, "point:k=1", "--metric", "kl")
        assert code == 2 and "error:" in err

    def test_bad_descriptor(self):
        with pytest.raises(InputError):
            parse_descriptor("poisson:lam=2")
        with pytest.raises(InputError):
            parse_descriptor("mih:n=1:p=1/2")


class TestExpansionCheck:
    def test_default_grid(self, capsys):
        code, out, _ = run(capsys, "--format", "csv", "expansion-check")
        assert code == 0
        header = next(csv.reader(io.StringIO(out)))
        for col in ("N", "n", "d", "order", "exact", "approx", "residual", "remainder_scale"):
            assert col in header

    def test_zero_cell(self, capsys, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"expansion_grid": [{"n": 1, "p": ["1/2"], "k": [0]}]}))
        code, out, _ = run(capsys, "expansion-check", "--config", str(path), "--format", "csv")
        rows = list(csv.DictReader(l for l in out.splitlines() if not l.startswith("#")))
        assert code == 0 and rows
        assert all(float(r["residual"]) == 0.0 for r in rows if r.get("residual"))

    def test_out_of_region_skipped(self, capsys, tmp_path, caplog):
        # with explicit N values the second cell cannot be moved into the region
        Ns = [1024 * 2**j for j in range(6)]
        grid = [{"n": 1, "p": ["1/2"], "k": [2]}, {"n": 1, "p": ["1/2"], "k": [2000], "N": Ns}]
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"expansion_grid": grid}))
        with caplog.at_level("WARNING"):
            code, out, _ = run(capsys, "expansion-check", "--config", str(path))
        report = json.loads(out)
        assert code == 0
        assert any(c["status"] == "skipped" for c in report["cells"])
        assert "skip" in caplog.text.lower()


class TestBoundsReport:
    def test_rejects_small_N(self, capsys, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({**SMALL, "N": [1000]}))
        code, out, _ = run(capsys, "bounds-report", "--config", str(path))
        report = json.loads(out)
        [point] = report["points"]
        assert point["status"] == "rejected" and "n^3/d" in point["reason"]

    def test_unknown_config_key(self, capsys, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"nn": [16]}))
        code, _, err = run(capsys, "bounds-report", "--config", str(path))
        assert code == 2 and "nn" in err

    def test_flags_before_and_after(self, capsys, small_config):
        a = run(capsys, "--format", "csv", "--config", small_config, "bounds-report")[1]
        b = run(capsys, "bounds-report", "--format", "csv", "--config", small_config)[1]
        assert a == b and a.startswith("section,")

    def test_flags_override_config(self, capsys, small_config):
        out = run(capsys, "bounds-report", "--config", small_config, "--n", "36")[1]
        assert {p["n"] for p in json.loads(out)["points"]} == {36}

    def test_jobs_do_not_change_output(self, capsys, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({**SMALL, "n": [16, 36], "p": [["1/5"], ["1/2"]]}))
        a = run(capsys, "bounds-report", "--config", str(path), "--jobs", "1", "--format", "csv")
        b = run(capsys, "bounds-report", "--config", str(path), "--jobs", "4", "--format", "csv")
        assert a[0] == b[0] and a[1] == b[1]

    def test_every_number_has_error_column(self, capsys, small_config):
        out = run(capsys, "bounds-report", "--config", small_config, "--format", "csv")[1]
        for row in csv.DictReader(io.StringIO(out)):
            if row["section"] != "check":
                assert row["error_estimate"] != ""

    def test_exit_code_reflects_checks(self, capsys, small_config):
        code, out, _ = run(capsys, "bounds-report", "--config", small_config)
        report = json.loads(out)
        assert code == (0 if report["passed"] else 1)


class TestSweep:
    def test_sweep_runs(self, capsys, small_config):
        code, out, _ = run(capsys, "sweep", "--config", small_config)
        assert code in (0, 1)
        rows = json.loads(out)["rows"]
        assert {r["versus"] for r in rows} == {"NM", "Normal-Q"}
        assert all("error_estimate" in r for r in rows)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mihnm", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("pmf", "sample", "distance", "expansion-check", "bounds-report", "sweep"):
        assert sub in res.stdout
