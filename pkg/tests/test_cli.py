import json
import subprocess
import sys
from pathlib import Path

import pytest

from loopfission import corpus
from loopfission.cli import main, parse_seeds

CORPUS = Path(corpus.__file__).parent


def path(name):
    return str(CORPUS / (name if "." in name else name + ".whl"))


def test_fission_matches_golden(capsys):
    assert main(["fission", path("fig4"), "--mode=par"]) == 0
    assert capsys.readouterr().out == corpus.read("fig5.golden")


def test_cost_bounded_fission_matches_golden(capsys):
    assert main(["fission", path("fig4"), "--max-dup-ratio", "1/2"]) == 0
    assert capsys.readouterr().out == corpus.read("fig8.golden")


def test_fission_writes_files(tmp_path, capsys):
    out, dots, rep = tmp_path / "o.whl", tmp_path / "dots", tmp_path / "r.json"
    assert main(["fission", path("fig4"), "--mode", "seq", "-o", str(out), "--dot", str(dots),
                 "--report", str(rep)]) == 0
    assert "i__pre1 = i" in out.read_text()
    assert sorted(p.name for p in dots.iterdir()) == ["loop_4.dot", "loop_4_condensation.dot"]
    assert json.loads(rep.read_text())[0]["privatized"] == ["i", "y1", "y2"]


def test_diff_ok(capsys):
    assert main(["diff", path("fig4_small")]) == 0
    assert "ok" in capsys.readouterr().out


def test_diff_json_and_failure(tmp_path, capsys):
    bad = tmp_path / "ww.whl"
    bad.write_text("k = 0\nwhile k != 2 do { a = 1; a = 2; k = k + 1 }\n")
    assert main(["diff", "--json", str(bad), "--no-augment"]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is False and doc["kind"] == "parallel-race"
    assert set(doc) >= {"ok", "kind", "mode", "variable", "location", "expected", "actual", "program"}


def test_fmt_is_idempotent(tmp_path, capsys):
    assert main(["fmt", path("fig5.golden")]) == 0
    assert capsys.readouterr().out == corpus.read("fig5.golden")
    assert main(["fmt", "--check", path("fig5.golden")]) == 0
    assert main(["fmt", "--check", path("fig4")]) == 1


def test_mutually_exclusive_flags(capsys):
    assert main(["fmt", path("fig4"), "--check", "-o", "x"]) == 2
    assert main(["fuzz", "--seeds", "0..1", "--seed", "3"]) == 2


def test_analyze_formats(capsys, tmp_path):
    assert main(["analyze", path("fig4")]) == 0
    out = capsys.readouterr().out
    assert "sccs: {1,4,5} {2} {3} {6} {7} {8}" in out
    assert "covering: {1,2,4,5,8} {2,3,6,8} {2,3,7,8}" in out
    assert main(["analyze", path("fig1"), "--format", "csv"]) == 0
    assert capsys.readouterr().out == "# program\n,x,y,z\nx,inf,0,0\ny,0,1,0\nz,0,0,0\n"
    assert main(["analyze", path("fig4"), "--format", "json", "--dot", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["loops"][0]["sccs"] == [[1, 4, 5], [2], [3], [6], [7], [8]]
    assert (tmp_path / "loop_4.dot").exists()


def test_run_prints_state_and_effects(capsys):
    assert main(["run", path("fig4_small"), "--init", "y1=2", "--init", "s[0]=7"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "y1 = 47" in out and out[-1] == "use(x1) -> 48356"
    assert any(line.startswith("s = [0: 7, 1:") for line in out)


def test_run_json(capsys):
    assert main(["run", path("fig1"), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["state"] == {"x": 1, "y": 0, "z": 0}


@pytest.mark.parametrize(
    "text, code", [("x = 1 / 0\n", 3), ("while 1 do { x = 1 }\n", 3), ("x = \n", 2)]
)
def test_exit_codes(tmp_path, capsys, text, code):
    f = tmp_path / "p.whl"
    f.write_text(text)
    assert main(["run", str(f), "--fuel", "10"]) == code


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["run", "/nonexistent.whl"]) == 2
    assert main(["run", path("fig1"), "--init", "x"]) == 2
    assert main(["fission", path("fig4"), "--max-dup-ratio", "abc"]) == 2
    assert main(["emit-c", path("fig4")]) == 0
    capsys.readouterr()
    assert main(["emit-c", path("fig4"), "--array", "s"]) == 2
    p = CORPUS / "fig3.whl"
    assert main(["emit-c", str(p), "--fission", "--array", "t=4"]) == 0


def test_emit_needs_hints(tmp_path, capsys):
    f = tmp_path / "a.whl"
    f.write_text("t[2] = 1\n")
    assert main(["emit-c", str(f)]) == 2
    assert "missing array size hint" in capsys.readouterr().err
    assert main(["emit-c", str(f), "--array", "t=3", "--init", "t[0]=4", "-o", str(tmp_path / "a.c")]) == 0
    assert "v_t[0] = 4LL;" in (tmp_path / "a.c").read_text()


def test_fuzz_small_range(tmp_path, capsys):
    assert main(["fuzz", "--seeds", "0..19", "--json", "--out", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["programs"] == 20 and doc["failures"] == 0 and doc["seeds"] == [0, 19]
    assert list(tmp_path.iterdir()) == []


def test_fuzz_writes_counterexamples(tmp_path, capsys):
    # dropping the augmentation rules makes some programs fail
    assert main(["fuzz", "--seeds", "0..59", "--no-augment", "--out", str(tmp_path)]) == 1
    files = sorted(tmp_path.iterdir())
    assert files and files[0].read_text().startswith("// seed ")


def test_fuzz_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("FISSION_SEED", "5..7")
    assert main(["fuzz"]) == 0
    assert capsys.readouterr().out.startswith("seeds 5..7: 3 programs")


def test_seed_ranges():
    assert parse_seeds("0..999") == range(0, 1000)
    assert parse_seeds("4") == range(4, 5)
    for bad in ("1..0", "a", "1..2..3"):
        with pytest.raises(Exception):
            parse_seeds(bad)


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "loopfission.cli", "fmt", path("fig3")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("w = w + x\n")
