import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from telecap.cli import main
from telecap.qstate import read_state


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


# --- thresholds ------------------------------------------------------------------


def test_thresholds_all_k(capsys):
    code, out, _ = run(capsys, "thresholds", "--d", "2", "--n-min", "3", "--n-max", "7", "--k", "all")
    assert code == 0
    table = rows(out)
    assert table[0] == ["d", "N", "k_or_m", "value_num", "value_den", "value_float"]
    assert len(table) - 1 == 20
    assert table[1] == ["2", "3", "2", "7", "9", "0.77777777777777779"]
    assert [(int(r[1]), int(r[2])) for r in table[1:]] == sorted((int(r[1]), int(r[2])) for r in table[1:])


def test_thresholds_single_row(capsys):
    code, out, _ = run(capsys, "thresholds", "--d", "2", "--n-min", "3", "--n-max", "3", "--k", "3")
    assert code == 0
    assert rows(out)[1:] == [["2", "3", "3", "2", "3", "0.66666666666666663"]]


def test_thresholds_te_half(capsys):
    code, out, _ = run(capsys, "thresholds", "--d", "2", "--te", "--n-min", "6", "--n-max", "30", "--m-spec", "half")
    assert code == 0
    body = rows(out)[1:]
    assert len(body) == 13
    assert all(Fraction(int(r[3]), int(r[4])) <= Fraction(5, 6) for r in body)
    assert all(float(r[5]) == float(Fraction(int(r[3]), int(r[4]))) for r in body)


def test_thresholds_writes_file(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, stdout, _ = run(capsys, "thresholds", "--d", "3", "--n-min", "3", "--n-max", "4", "--out", str(out))
    assert code == 0 and stdout == ""
    assert out.read_bytes().count(b"\n") == 1 + 2 + 3
    assert b"\r" not in out.read_bytes()


def test_thresholds_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        run(capsys, "thresholds", "--d", "2", "--n-min", "3", "--n-max", "9", "--out", str(path))
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize(
    "args",
    [
        ["thresholds", "--d", "1", "--n-min", "3", "--n-max", "4"],
        ["thresholds", "--d", "2", "--n-min", "5", "--n-max", "4"],
        ["thresholds", "--d", "2", "--n-min", "3", "--n-max", "4", "--k", "x"],
        ["thresholds", "--d", "2", "--n-min", "3", "--n-max", "4", "--te"],
        ["thresholds", "--d", "2", "--n-min", "3", "--n-max", "4", "--m-spec", "half"],
        ["thresholds", "--d", "two", "--n-min", "3", "--n-max", "4"],
        ["thresholds"],
        ["nonsense"],
        [],
    ],
)
def test_usage_errors_exit_2(args, capsys):
    code, _, _ = run(capsys, *args)
    assert code == 2


def test_no_partial_output_on_error(tmp_path, capsys):
    out = tmp_path / "bad.csv"
    code, _, _ = run(capsys, "thresholds", "--d", "0", "--n-min", "3", "--n-max", "4", "--out", str(out))
    assert code == 2 and not out.exists()


# --- make-state -------------------------------------------------------------------


def test_make_state_iso_ghz(tmp_path, capsys):
    out = tmp_path / "iso.json"
    code, stdout, _ = run(capsys, "make-state", "--kind", "iso-ghz", "--n", "3", "--p", "0.5", "--out", str(out))
    assert code == 0
    state = read_state(out)
    assert state.matrix.shape == (8, 8)
    assert abs(state.purity() - 0.34375) < 1e-12
    assert "kind=iso-ghz" in stdout and "dims=2x2x2" in stdout


def test_make_state_phi_mt(tmp_path, capsys):
    out = tmp_path / "phi.json"
    code, _, _ = run(capsys, "make-state", "--kind", "phi-mt", "--m", "2", "--t", "1", "--dqu", "2", "--out", str(out))
    assert code == 0
    amps = read_state(out).amplitudes
    assert abs(amps[1] - 2**-0.5) < 1e-15 and abs(amps[2] - 2**-0.5) < 1e-15 and amps[0] == 0


def test_make_state_extremal_and_random(tmp_path, capsys):
    ext = tmp_path / "ext.json"
    assert run(capsys, "make-state", "--kind", "extremal", "--dqu", "2", "--n", "3", "--k", "2", "--out", str(ext))[0] == 0
    assert (read_state(ext).eigenvalues() > 1e-12).sum() == 3
    rnd = tmp_path / "rnd.json"
    assert run(capsys, "make-state", "--kind", "random-ksep", "--n", "3", "--k", "2", "--terms", "2", "--seed", "4", "--out", str(rnd))[0] == 0


@pytest.mark.parametrize(
    "extra",
    [
        ["--kind", "iso-ghz", "--n", "3", "--p", "1.0"],
        ["--kind", "iso-ghz", "--n", "3"],
        ["--kind", "iso-ghz", "--n", "3", "--p", "0.5", "--dqu", "3"],
        ["--kind", "phi-mt", "--m", "2", "--t", "2"],
        ["--kind", "extremal", "--n", "3", "--k", "4"],
        ["--kind", "random-ksep", "--n", "3", "--k", "2", "--terms", "0"],
        ["--kind", "ghz", "--n", "9", "--dqu", "3"],
        ["--kind", "spin"],
    ],
)
def test_make_state_parameter_errors(extra, tmp_path, capsys):
    out = tmp_path / "x.json"
    code, _, _ = run(capsys, "make-state", *extra, "--out", str(out))
    assert code == 2 and not out.exists()


# --- capability -----------------------------------------------------------------------


def make(tmp_path, capsys, *args):
    out = tmp_path / "state.json"
    assert run(capsys, "make-state", *args, "--out", str(out))[0] == 0
    return str(out)


def test_capability_ghz3(tmp_path, capsys):
    path = make(tmp_path, capsys, "--kind", "ghz", "--n", "3")
    code, out, _ = run(capsys, "capability", "--state", path, "--min")
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["min_fidelity"] - 1) < 1e-6
    assert all(doc["verdicts"].values()) and doc["seed"] == 0
    assert len(doc["pairs"]) == 3


def test_capability_extremal_242(tmp_path, capsys):
    path = make(tmp_path, capsys, "--kind", "extremal", "--n", "4", "--k", "2")
    doc = json.loads(run(capsys, "capability", "--state", path)[1])
    assert abs(doc["min_fidelity"] - 5 / 6) < 1e-6
    assert doc["verdicts"]["2"] is False
    assert doc["thresholds"]["2"]["exact"] == "5/6"


def test_capability_fully_separable(tmp_path, capsys):
    path = make(tmp_path, capsys, "--kind", "random-ksep", "--n", "3", "--k", "3", "--seed", "2")
    doc = json.loads(run(capsys, "capability", "--state", path, "--restarts", "2", "--seed", "5")[1])
    assert doc["min_fidelity"] <= 2 / 3 + 1e-6
    assert not any(doc["verdicts"].values()) and doc["seed"] == 5


def test_capability_single_pair(tmp_path, capsys):
    path = make(tmp_path, capsys, "--kind", "ghz", "--n", "3")
    doc = json.loads(run(capsys, "capability", "--state", path, "--pair", "A1", "2")[1])
    assert doc["pairs"][0]["pair"] == ["A1", "A3"] and doc["verdicts"] is None


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_round_trip_ghz(n, tmp_path, capsys):
    path = make(tmp_path, capsys, "--kind", "ghz", "--n", str(n))
    doc = json.loads(run(capsys, "capability", "--state", path)[1])
    assert abs(doc["min_fidelity"] - 1) < 1e-6


def test_capability_io_errors(tmp_path, capsys):
    assert run(capsys, "capability", "--state", str(tmp_path / "missing.json"))[0] == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "density", "labels": ["A"], "dims": [2], "data": [[2,0],[0,0],[0,0],[0,0]]}')
    assert run(capsys, "capability", "--state", str(bad))[0] == 3
    two = make(tmp_path, capsys, "--kind", "ghz", "--n", "2")
    assert run(capsys, "capability", "--state", two)[0] == 3


def test_capability_usage_errors(tmp_path, capsys):
    path = make(tmp_path, capsys, "--kind", "ghz", "--n", "3")
    assert run(capsys, "capability", "--state", path, "--pair", "A1", "A1")[0] == 2
    assert run(capsys, "capability", "--state", path, "--pair", "A1", "Q")[0] == 2
    assert run(capsys, "capability", "--state", path, "--pair", "A1", "A2", "--min")[0] == 2
    assert run(capsys, "capability", "--state", path, "--restarts", "-1")[0] == 2


# --- figures ---------------------------------------------------------------------------------


def test_figure1_classical_rows(capsys):
    body = rows(run(capsys, "figure", "--which", "1")[1])[1:]
    assert len(body) == 20
    assert all(abs(float(r[5]) - 2 / 3) < 1e-15 for r in body if r[1] == r[2])


def test_figure2_half_column(capsys):
    table = rows(run(capsys, "figure", "--which", "2")[1])
    header, first = table[0], table[1]
    assert first[0] == "6"
    assert Fraction(int(first[header.index("te_half_num")]), int(first[header.index("te_half_den")])) == Fraction(4, 5)
    assert [r[0] for r in table[1:]] == ["6", "12", "18", "24", "30"]


def test_figure3_n4_row(capsys):
    table = rows(run(capsys, "figure", "--which", "3")[1])
    header = table[0]
    row = dict(zip(header, next(r for r in table[1:] if r[0] == "4")))
    assert (row["p_hi_num"], row["p_hi_den"]) == ("4", "9")
    assert (row["p_lo_num"], row["p_lo_den"]) == ("2", "3")
    assert (row["gme_num"], row["gme_den"]) == ("7", "15")
    assert [r[0] for r in table[1:]] == [str(n) for n in range(3, 11)]


def test_figure_plot(tmp_path, capsys):
    png = tmp_path / "fig.png"
    csv_path = tmp_path / "fig.csv"
    for which in ("1", "2", "3"):
        code, _, _ = run(capsys, "figure", "--which", which, "--out", str(csv_path), "--plot", str(png))
        assert code == 0
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        assert csv_path.read_text().startswith(("d,N", "N,"))


def test_figure_usage_errors(capsys):
    assert run(capsys, "figure", "--which", "4")[0] == 2
    assert run(capsys, "figure", "--which", "2", "--n-min", "3")[0] == 2
    assert run(capsys, "figure", "--which", "1", "--n-min", "2")[0] == 2


# --- verify ------------------------------------------------------------------------------------


def test_verify_combinatorics(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "combinatorics")
    doc = json.loads(out)
    assert code == 0 and doc["pass"] and doc["seed"] == 0
    checks = doc["suites"]["combinatorics"]["checks"]
    assert any(c["check"] == "partition_lemma" and c["params"]["N"] == 10 for c in checks)


def test_verify_theorem2(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "theorem2")
    assert code == 0 and json.loads(out)["suites"]["theorem2"]["pass"]


def test_verify_teleport(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "teleport", "--seed", "7")
    doc = json.loads(out)
    assert code == 0
    plus = next(c for c in doc["suites"]["teleport"]["checks"] if c["params"].get("p") == 0.8)
    assert abs(plus["expected"] - 0.9) < 1e-15 and plus["pass"]


def test_verify_failure_exit_code(monkeypatch, capsys):
    from telecap import cli
    from telecap.oracle import CheckRecord

    monkeypatch.setitem(cli.SUITE_RUNNERS, "fef", lambda seed: [CheckRecord("forced", {}, 1, 0, False)])
    code, out, _ = run(capsys, "verify", "--suite", "fef")
    assert code == 1 and json.loads(out)["pass"] is False


# --- entry points ------------------------------------------------------------------------------


def test_module_entry_point():
    cp = subprocess.run([sys.executable, "-m", "telecap", "thresholds", "--d", "2", "--n-min", "3", "--n-max", "3"], capture_output=True, text=True)
    assert cp.returncode == 0 and cp.stdout.splitlines()[1] == "2,3,2,7,9,0.77777777777777779"


def test_module_entry_point_bad_flag():
    cp = subprocess.run([sys.executable, "-m", "telecap", "thresholds", "--bogus"], capture_output=True, text=True)
    assert cp.returncode == 2 and "usage" in cp.stderr


def test_env_guardrail(tmp_path):
    env = {"TELECAP_MAX_DIM": "4", "PATH": ""}
    cp = subprocess.run(
        [sys.executable, "-m", "telecap", "make-state", "--kind", "ghz", "--n", "3", "--out", str(tmp_path / "g.json")],
        capture_output=True, text=True, env=env,
    )
    assert cp.returncode == 2 and "guardrail" in cp.stderr
