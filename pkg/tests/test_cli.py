import pytest

from conftest import fig1_text, golden
from evsound.cli import main

LIB_FIELD = """class A
field g library
func main() program {
    x = new A
    y = x.g
}
func put(this, v) library {
    this.g = v
}
"""


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.setenv("EVSOUND_OUT", str(tmp_path / "out"))
    (tmp_path / "fig1.ir").write_text(fig1_text())
    return tmp_path


def test_analyze(work, capsys):
    assert main(["analyze", str(work / "fig1.ir")]) == 0
    assert (work / "out" / "pi.txt").read_text() == golden("fig1_pi0.txt")


def test_analyze_explicit_out(work):
    assert main(["analyze", str(work / "fig1.ir"), "--out", str(work / "elsewhere")]) == 0
    assert (work / "elsewhere" / "pi.txt").exists()


def test_analyze_empty_main(work):
    (work / "empty.ir").write_text("func main() program {\n}\n")
    assert main(["analyze", str(work / "empty.ir")]) == 0
    assert (work / "out" / "pi.txt").read_text().strip() == ""


def test_analyze_violation_exits_one(work):
    (work / "bad.ir").write_text(LIB_FIELD)
    assert main(["analyze", str(work / "bad.ir")]) == 1


def test_input_errors_exit_two(work, capsys):
    (work / "blank.ir").write_text("")
    assert main(["analyze", str(work / "blank.ir")]) == 2
    assert "no entry function" in capsys.readouterr().err
    assert main(["analyze", str(work / "nope.ir")]) == 2
    assert main(["execute", str(work / "fig1.ir"), "--schedule", "[maybe]"]) == 2
    assert main(["bogus"]) == 2


def test_execute(work):
    f = str(work / "fig1.ir")
    assert main(["execute", f, "--schedule", "[false]"]) == 0
    assert (work / "out" / "reports.log").read_text() == golden("fig1_reports_false.log")
    assert main(["execute", f, "--schedule", "[true]", "--trace"]) == 0
    assert (work / "out" / "trace.log").read_text() == golden("fig1_trace_true.log")


def test_loop(work, capsys):
    f = str(work / "fig1.ir")
    assert main(["loop", f, "--schedules", "explicit:[false];[true]", "--report-reduction"]) == 0
    out = capsys.readouterr().out
    assert out.startswith(golden("fig1_transcript.txt"))
    assert "monitors naive 6\nmonitors min 5\nmonitors opt 5\n" in out
    assert (work / "out" / "pi.txt").read_text() == golden("fig1_pi_final.txt")
    for name in ("transcript.txt", "pi_miss.txt", "scheme.txt", "proxyspecs.spec"):
        assert (work / "out" / name).exists()


def test_loop_schedule_forms(work):
    f = str(work / "fig1.ir")
    assert main(["loop", f]) == 0
    assert (work / "out" / "pi.txt").read_text() == golden("fig1_pi_final.txt")
    assert main(["loop", f, "--schedules", "random:4:3"]) == 0
    assert main(["loop", f, "--schedules", "sometimes"]) == 2


def test_query(work, capsys):
    f = str(work / "fig1.ir")
    assert main(["loop", f, "--schedules", "explicit:[false];[true]"]) == 0
    pi = str(work / "out" / "pi.txt")
    capsys.readouterr()
    assert main(["query", pi, "--bundle", f, "--alias", "main.str", "main.dataCopy"]) == 0
    assert main(["query", pi, "--bundle", f, "--alias", "main.list", "main.str"]) == 0
    assert main(["query", pi, "--bundle", f, "--types", "main.data"]) == 0
    assert main(["query", pi, "--bundle", f, "--flows"]) == 0
    assert capsys.readouterr().out == "true\nfalse\nString\nmkStr -> sendHttp\n"
    assert main(["query", pi, "--bundle", f, "--pts", "main.nobody"]) == 2
    assert main(["query", pi, "--flows"]) == 2


def test_infer(work, capsys):
    f = str(work / "fig1.ir")
    assert main(["infer", f, "--activate", "mkStr", "--target", "main.data -> site:o_str"]) == 0
    assert "cost 2" in capsys.readouterr().out
    specs = work / "out" / "specs"
    assert (specs / "add.spec").read_text() == golden("fig1_spec_add.spec")
    assert (specs / "get.spec").read_text() == golden("fig1_spec_get.spec")
    # the inferred files make the target derivable
    assert main(["analyze", f, "--activate", "mkStr", "--specs", str(specs)]) == 0
    assert "main.data -> site:o_str" in (work / "out" / "pi.txt").read_text()


def test_infer_errors(work):
    f = str(work / "fig1.ir")
    assert main(["infer", f, "--target", "main.data"]) == 2
    assert main(["infer", f, "--activate", "mkStr", "--target", "main.list -> site:o_str"]) == 1


def test_oracle_check_small(work, capsys):
    code = main(["oracle-check", "--corpus", "seed=7", "n=5", "--suites", "eventual,precision,reduction"])
    text = (work / "out" / "oracle-check.txt").read_text()
    assert text.startswith("PASS eventual: 5 checked")
    assert "PASS precision" in text
    assert code == (0 if "FAIL" not in text else 1)
    assert main(["oracle-check", "--suites", "nothing"]) == 2
