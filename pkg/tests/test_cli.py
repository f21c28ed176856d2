import json

import pytest

from hrebeca.cli import main

ZENO = """
reactiveclass A(2) { statevars { int n; } msgsrv A() { self.go(); } msgsrv go() { n = n + 1; self.go(); } }
main { A a():(); }
"""


@pytest.fixture()
def model(tmp_path, heater_src):
    p = tmp_path / "heater.hrebeca"
    p.write_text(heater_src)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("extra, code, verdict", [
    ([], 0, "NoPredicate"),
    (["--unsafe", "hws.temp < 17"], 0, "SafeWithinBounds"),
    (["--unsafe", "hws.temp > 23"], 0, "SafeWithinBounds"),
    (["--unsafe", "hws.temp < 18.2"], 1, "PotentiallyUnsafe"),
    (["--unsafe", "a.count > 0 && time < 3"], 1, "PotentiallyUnsafe"),
])
def test_run_verdicts(capsys, model, extra, code, verdict):
    got, out, _ = run(capsys, "run", "--model", model, "--time-horizon", "3", *extra)
    report = json.loads(out)
    assert got == code and report["verdict"] == verdict
    if verdict == "PotentiallyUnsafe":
        assert "witness" in report and report["witness"]["id"] >= 0


@pytest.mark.parametrize("argv", [
    ["run", "--time-horizon", "3"],
    ["run", "--model", "MODEL", "--time-horizon", "-1"],
    ["run", "--model", "MODEL", "--time-horizon", "3", "--step-size", "0"],
    ["run", "--model", "MODEL", "--time-horizon", "3", "--emit", "svg"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(capsys, model, argv):
    argv = [model if a == "MODEL" else a for a in argv]
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2
    capsys.readouterr()


def test_model_errors_exit_2(capsys, tmp_path, model):
    bad = tmp_path / "bad.hrebeca"
    bad.write_text("reactiveclass A { msgsrv A() { x = 1 / 2; } }")
    assert run(capsys, "run", "--model", str(bad), "--time-horizon", "1")[0] == 2
    assert run(capsys, "run", "--model", str(tmp_path / "missing"), "--time-horizon", "1")[0] == 2
    code, _, err = run(capsys, "run", "--model", model, "--time-horizon", "1", "--unsafe", "hws.nope > 1")
    assert code == 2 and "nope" in err
    ill = tmp_path / "ill.hrebeca"
    ill.write_text("reactiveclass A(1) { msgsrv A() { delay(2, 1); } } main { A a():(); }")
    code, _, err = run(capsys, "check", "--model", str(ill))
    assert code == 2 and "NegativeDelay" in err


def test_analysis_error_exit_3(capsys, tmp_path):
    z = tmp_path / "zeno.hrebeca"
    z.write_text(ZENO)
    code, _, err = run(capsys, "run", "--model", str(z), "--time-horizon", "1", "--ntp-budget", "200")
    assert code == 3 and "analysis error" in err


def test_json_export_state_count(capsys, model):
    code, out, err = run(capsys, "run", "--model", model, "--time-horizon", "1.5", "--jump-depth", "10",
                         "--step-size", "0.5", "--emit", "json")
    doc = json.loads(out)
    assert code == 0 and len(doc["states"]) == doc["report"]["states"] == json.loads(err)["states"]
    assert 4 <= doc["report"]["states"] <= 8


def test_dot_to_file_is_reproducible(capsys, model, tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / f"g{k}.dot"
        code, stdout, _ = run(capsys, "run", "--model", model, "--time-horizon", "3", "--emit", "dot",
                              "--out", str(out), "--seed-order", "strict")
        assert code == 0 and json.loads(stdout)["states"] > 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1] and texts[0].startswith(b"digraph")


def test_compare_ha(capsys, model):
    code, out, _ = run(capsys, "run", "--model", model, "--time-horizon", "2", "--compare-ha")
    rep = json.loads(out)["containment"]
    assert code == 0 and rep["violations"] == 0 and rep["checked"] == json.loads(out)["states"]


def test_check_and_translate(capsys, model, tmp_path):
    assert run(capsys, "check", "--model", model)[0] == 0
    out = tmp_path / "ha.json"
    assert run(capsys, "translate", "--model", model, "--time-horizon", "2", "--out", str(out))[0] == 0
    doc = json.loads(out.read_text())
    assert doc["locations"] and doc["jumps"]
