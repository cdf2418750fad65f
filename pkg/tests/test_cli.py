"""CLI tests: subcommand flows, file outputs, and exit codes."""

import csv
import json
import pathlib

import pytest

from gbcf_lab.cli import main

FIXTURE = str(pathlib.Path(__file__).parent / "fixtures" / "fixture_k1n3.gbcf")


def invoke(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


BASE = [
    "run", "--scheme", "ol", "--k1", "1", "--k2", "1", "--n", "3",
    "--snr-f", "3", "--trials", "5000", "--seed", "42",
]


class TestRun:
    def test_csv_output(self, tmp_path):
        out = tmp_path / "r.csv"
        assert invoke(BASE + ["--out", str(out), "--format", "csv"]) == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 1
        assert rows[0]["scheme"] == "ol"
        assert rows[0]["snr_fb_db_or_inf"] == "inf"
        assert rows[0]["seed"] == "42"

    def test_json_output(self, tmp_path):
        out = tmp_path / "r.json"
        assert invoke(BASE + ["--out", str(out), "--format", "json"]) == 0
        data = json.loads(out.read_text())
        assert data[0]["trials"] == 5000

    def test_deterministic_bytes_without_timing(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        invoke(BASE + ["--out", str(a), "--no-timing"])
        invoke(BASE + ["--out", str(b), "--no-timing"])
        assert a.read_bytes() == b.read_bytes()

    def test_noisy_feedback_flag(self, tmp_path):
        out = tmp_path / "r.csv"
        assert invoke(BASE + ["--snr-fb", "10", "--out", str(out)]) == 0
        assert csv.DictReader(open(out)).__next__()["snr_fb_db_or_inf"] == "10.0"

    def test_missing_snr_f_is_config_error(self, tmp_path):
        argv = [a for a in BASE if a not in ("--snr-f", "3")]
        assert invoke(argv + ["--out", str(tmp_path / "r.csv")]) == 2

    def test_bad_scheme_exit_code(self, tmp_path):
        argv = list(BASE)
        argv[2] = "bogus"
        assert invoke(argv + ["--out", str(tmp_path / "r.csv")]) == 2

    def test_odd_td_exit_code(self, tmp_path):
        argv = list(BASE)
        argv[2] = "td"
        assert invoke(argv + ["--out", str(tmp_path / "r.csv")]) == 2

    def test_unwritable_out_is_io_error(self):
        assert invoke(BASE + ["--out", "/no/such/dir/r.csv"]) == 3

    def test_conflicting_feedback_flags(self, tmp_path):
        assert (
            invoke(BASE + ["--snr-fb", "10", "--noiseless-fb",
                           "--out", str(tmp_path / "r.csv")])
            == 2
        )


class TestSweep:
    def test_sweep_csv(self, tmp_path):
        out = tmp_path / "s.csv"
        code = invoke(
            [
                "sweep", "--scheme", "ol", "--k1", "1", "--k2", "1", "--n", "3",
                "--trials", "2000", "--seed", "1", "--out", str(out),
                "--snr-f-grid=-2,0,2", "--no-timing",
            ]
        )
        assert code == 0
        rows = list(csv.DictReader(open(out)))
        assert [r["snr_f_db"] for r in rows] == ["-2.0", "0.0", "2.0"]


class TestInterpret:
    def test_interpret_csv(self, tmp_path):
        out = tmp_path / "i.csv"
        code = invoke(
            [
                "interpret", "--weights", FIXTURE, "--fix-user", "2",
                "--grid=-1:1:0.25", "--out", str(out),
            ]
        )
        assert code == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 9
        assert set(rows[0]) == {"y_tilde", "x"}

    def test_interpret_json(self, tmp_path):
        out = tmp_path / "i.json"
        code = invoke(
            [
                "interpret", "--weights", FIXTURE, "--fix-user", "1",
                "--round", "3", "--grid=-1:1:0.5", "--out", str(out),
            ]
        )
        assert code == 0
        data = json.loads(out.read_text())
        assert data["fix_user"] == 1 and len(data["grid"]) == 5

    def test_missing_weights_config_error(self, tmp_path):
        code = invoke(
            [
                "interpret", "--weights", "/nope.gbcf", "--fix-user", "1",
                "--grid=-1:1:0.5", "--out", str(tmp_path / "i.csv"),
            ]
        )
        assert code == 2
