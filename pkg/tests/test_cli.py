import json

import pytest

from optmct import cli, suites
from optmct.lang import parse
from optmct.mct import normalize

LIFTED = """system A = [2]
otest m on A {
  0 = [1, 0]
  1 = [0, 1]
}
ptest r on A {
  z = [1, 0]
}
circuit obs(m) ; prep(r)
"""

CT = """test ct on [2] -> [2] {
  0 = [[1, 0], [0, 0]]
  1 = [[0, 0], [0, 1]]
}
test half on [2] -> [2] {
  "" = [[1/2, 1/2], [1/2, 1/2]]
}
"""

PAIR = """otest a on [3] {
  x = [1, 1/2, 0]
  y = [0, 1/2, 1]
}
otest b on [3] {
  0 = [1/3, 1, 0]
  1 = [2/3, 0, 1]
}
"""


@pytest.fixture
def opt(tmp_path):
    def write(text, name="in.opt"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_identity(capsys, opt):
    code, out, _ = run(capsys, "eval", opt("circuit id([2])"))
    assert code == 0
    assert "1 0\n  0 1" in out


def test_eval_lifted_has_two_rank_one_events(capsys, opt):
    code, out, _ = run(capsys, "eval", opt(LIFTED))
    assert code == 0
    assert "2 outcome(s)" in out
    assert "outcome 0.z:\n  1 0\n  0 0" in out
    assert "outcome 1.z:\n  0 1\n  0 0" in out


def test_malformed_file_exits_2(capsys, opt):
    code, _, err = run(capsys, "eval", opt("circuit id([2]) ;"))
    assert code == 2 and "line 1, column 17" in err
    code, _, err = run(capsys, "eval", "/nonexistent.opt")
    assert code == 2


def test_normalize_signature_and_round_trip(capsys, opt, tmp_path):
    out_file = tmp_path / "canon.opt"
    code, out, _ = run(capsys, "normalize", opt(LIFTED), "--emit-opt", "--out", str(out_file))
    assert code == 0
    lines = dict(l.split(None, 1) for l in out.splitlines())
    assert lines["A'"] == "[2]" and lines["B'"] == "[2]" and lines["E"] == "[]"
    emitted = parse(out_file.read_text())
    assert normalize(emitted.circuit).signature() == normalize(parse(LIFTED).circuit).signature()


def test_normalize_identity(capsys, opt):
    code, out, _ = run(capsys, "normalize", opt("circuit id([2,3])"))
    assert code == 0 and "E   [2,3]" in out


def test_normalize_rejects_apply(capsys, opt):
    text = "test t on [2] -> [2] { a = [[1, 0], [0, 1]] }\ncircuit apply(t)"
    code, _, err = run(capsys, "normalize", opt(text))
    assert code == 2 and "apply" in err


def test_normalize_self_check_failure_exits_3(capsys, opt, monkeypatch):
    monkeypatch.setattr(cli, "semantics", lambda cf: None)
    code, _, err = run(capsys, "normalize", opt("circuit id([2])"))
    assert code == 3 and "self-check" in err


def test_member(capsys, opt):
    code, out, _ = run(capsys, "member", opt(CT), "--test", "ct")
    rec = json.loads(out)
    assert code == 0 and rec["verdict"] == "not-in-mct"
    assert rec["certificate"]["kind"] == "atomicity"
    code, out, _ = run(capsys, "member", opt(LIFTED))
    rec = json.loads(out)
    assert rec["verdict"] == "in-mct" and parse(rec["witness"]["opt"]).circuit is not None


def test_member_unknown_test(capsys, opt):
    code, _, err = run(capsys, "member", opt(CT), "--test", "nope")
    assert code == 2 and "nope" in err


def test_irrev(capsys, opt):
    code, out, _ = run(capsys, "irrev", opt(LIFTED))
    assert code == 0 and json.loads(out)["verdict"] == "excludes"
    code, out, _ = run(capsys, "irrev", opt(LIFTED), "--ct")
    assert json.loads(out)["verdict"] == "does-not-exclude"
    code, out, _ = run(capsys, "irrev", opt(CT), "--test", "half", "--target", "ct")
    assert json.loads(out)["verdict"] == "does-not-exclude"


def test_compat(capsys, opt):
    code, out, _ = run(capsys, "compat", opt(PAIR))
    rec = json.loads(out)
    assert code == 0 and rec["verdict"] == "compatible"
    assert set(rec["witness"]["product"]) == {"x.0", "x.1", "y.0", "y.1"}


def test_norm(capsys, opt):
    code, out, _ = run(capsys, "norm", opt(CT), "--a", "ct", "--b", "half")
    assert code == 0 and json.loads(out)["value"] == "1"


def test_verify_writes_report(capsys, tmp_path):
    out_file = tmp_path / "r.jsonl"
    argv = ["verify", "--suite", "atomicity", "--cases", "10", "--seed", "7", "--out", str(out_file)]
    code, out, _ = run(capsys, *argv)
    assert code == 0 and "pass" in out
    first = out_file.read_bytes()
    run(capsys, *argv)
    assert out_file.read_bytes() == first
    summary = json.loads(first.decode().splitlines()[-1])
    assert summary == {"record": "summary", "suite": "atomicity", "pass": 11, "fail": 0,
                       "unknown": 0}


def test_verify_failures_exit_1(capsys, monkeypatch):
    monkeypatch.setattr(suites, "is_atomic_identity_refinement", lambda t: False)
    code, out, _ = run(capsys, "verify", "--suite", "atomicity", "--cases", "6")
    assert code == 1
    fails = [json.loads(l) for l in out.splitlines() if '"fail"' in l and '"case"' in l]
    assert fails and all("counterexample" in r for r in fails)


def test_verify_bad_config_exits_2(capsys):
    assert run(capsys, "verify", "--suite", "bogus")[0] == 2
    assert run(capsys, "verify", "--suite", "atomicity", "--ancilla-cap", "-1")[0] == 2
