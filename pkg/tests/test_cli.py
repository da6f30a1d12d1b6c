import json
import math

import pytest

from epwind.cli import run

THROUGH_EP1 = {"segments": [{"type": "circle_arc", "center": [1.05, 0.0], "radius": 0.05,
                             "start": math.pi / 2, "end": math.pi / 2 + 2 * math.pi}]}


def _cfg(tmp_path, **doc):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_missing_config_exit_2(tmp_path, capsys):
    assert run(["find-eps", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_json_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(["find-eps", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_unknown_key_exit_2(tmp_path):
    assert run(["find-eps", "--config", _cfg(tmp_path, colour="blue"), "--out", str(tmp_path)]) == 2


def test_bad_family_expression_exit_2(tmp_path, capsys):
    cfg = _cfg(tmp_path, family={"n": 1, "entries": [["kappa +* 2"]]})
    assert run(["find-eps", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "byte" in capsys.readouterr().err


def test_unknown_path_exit_2(tmp_path):
    assert run(["trace-loop", "loop9", "--out", str(tmp_path)]) == 2


def test_bad_subcommand():
    assert run(["dance"]) == 2


def test_loop_through_ep_exit_3(tmp_path, capsys):
    cfg = _cfg(tmp_path, paths={"bad": THROUGH_EP1}, grid_n=60)
    assert run(["trace-loop", "bad", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "RefinementError" in err and "interval" in err


def test_find_eps_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["find-eps", "--out", str(a), "--grid", "120"]) == 0
    assert run(["find-eps", "--out", str(b), "--grid", "120"]) == 0
    assert (a / "eps.json").read_bytes() == (b / "eps.json").read_bytes()
    assert len(json.loads((a / "eps.json").read_text())) == 6
    assert run(["find-eps", "--out", str(a), "--grid", "120", "--format", "csv"]) == 0
    assert (a / "eps.csv").read_text().count("\n") == 7


def test_trace_and_classify(tmp_path, capsys):
    out = str(tmp_path)
    assert run(["map-cuts", "--out", out]) == 0
    assert (tmp_path / "atlas.svg").exists()
    capsys.readouterr()
    assert run(["trace-loop", "blue@k0", "--out", out]) == 0
    text = capsys.readouterr().out
    assert "s1->s3, s2->s1, s3->s4, s4->s2" in text
    assert run(["classify", "loop3@k0", "loop4@k0", "--out", out]) == 0
    text = capsys.readouterr().out
    assert "based: inequivalent" in text and "free: conjugate" in text
    assert run(["classify", "loop3@k0p", "loop4@k0p", "--out", out]) == 0
    assert "based: homotopic" in capsys.readouterr().out


def test_config_paths_and_key(tmp_path, capsys):
    loop = {"segments": [{"type": "circle_arc", "center": [0.84, 0.0], "radius": 0.4,
                          "start": math.pi, "end": 3 * math.pi}]}
    cfg = _cfg(tmp_path, paths={"mine": loop}, key="re_asc", out=str(tmp_path / "o"))
    assert run(["trace-loop", "mine", "--config", cfg]) == 0
    assert (tmp_path / "o" / "trace_mine.csv").exists()


def test_evolve_small(tmp_path, capsys):
    loop = {"segments": [{"type": "circle_arc", "center": [0.4, -0.15], "radius": 0.05, "start": 0, "end": 2 * math.pi}]}
    cfg = _cfg(tmp_path, paths={"small": loop})
    assert run(["evolve", "small", "--start", "2", "--omega", "0.1", "--config", cfg, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "evolve_small_s2.json").read_text())
    assert summary["start"] == 2
    assert (tmp_path / "evolve_small_s2.csv").read_text().startswith("t,abs_c1")


def test_evolve_bad_start(tmp_path):
    assert run(["evolve", "loop3@k0", "--start", "7", "--out", str(tmp_path)]) == 2
