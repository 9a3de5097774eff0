import json
import os
import sys
import textwrap

import pytest

from mqmqe.cli import DEFAULTS, main


def _run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def corpus(tmp_path):
    assert _run("toy-corpus", "--pairs", 30, "--qe", 40, "--qe-output", tmp_path / "real.jsonl",
                "-o", tmp_path / "par.tsv") == 0
    return tmp_path


def test_full_pipeline(corpus):
    d = corpus
    steps = [
        ("gen-stats", "--data", d / "real.jsonl", "-o", d / "stats.json"),
        ("train-lm", "--parallel", d / "par.tsv", "-o", d / "lm.json"),
        ("corrupt", "--parallel", d / "par.tsv", "--stats", d / "stats.json", "-o", d / "masked.jsonl"),
        ("fix", "--input", d / "masked.jsonl", "--lm", d / "lm.json", "-o", d / "pseudo.jsonl"),
        ("train-qe", "--pretrain-data", d / "pseudo.jsonl", "--finetune-data", d / "real.jsonl",
         "--valid", d / "real.jsonl", "--dim", 32, "-o", d / "ckpt.json"),
        ("predict", "--checkpoint", d / "ckpt.json", "--data", d / "real.jsonl", "-o", d / "preds.tsv"),
        ("ensemble", d / "preds.tsv", d / "preds.tsv", "-o", d / "ens.tsv"),
        ("tune", "--predictions", d / "preds.tsv", "--data", d / "real.jsonl", "--step", 0.05, "-o", d / "th.json"),
        ("spans", "--predictions", d / "ens.tsv", "--data", d / "real.jsonl", "--thresholds", d / "th.json",
         "--tags-output", d / "tags.tsv", "-o", d / "spans.tsv"),
        ("eval", "--task", "span", "--gold", d / "real.jsonl", "--predictions", d / "spans.tsv", "-o", d / "r.json"),
    ]
    for step in steps:
        assert _run(*step) == 0, step[0]
    report = json.loads((d / "r.json").read_text())
    assert report["metric"] == "span_f1_lenient" and 0 <= report["value"] <= 1
    logged = json.loads((d / "fix.config.json").read_text())
    assert logged["seed"] == 1 and logged["fix.lm"] == str(d / "lm.json")
    assert "<mask>" not in (d / "pseudo.jsonl").read_text()


def test_eval_reports(corpus, capsys, monkeypatch):
    d = corpus
    monkeypatch.chdir(d)
    lines = (d / "real.jsonl").read_text().splitlines()
    preds = []
    for line in lines:
        r = json.loads(line)
        probs = " ".join("0.1" if t == "BAD" else "0.9" for t in r["tags"].split())
        preds.append(f"{r['id']}\t{r['score']!r}\t{probs}\n")
    (d / "oracle.tsv").write_text("".join(preds))
    capsys.readouterr()
    assert _run("eval", "--task", "sentence", "--gold", d / "real.jsonl", "--predictions", d / "oracle.tsv") == 0
    assert json.loads(capsys.readouterr().out)["value"] == 1.0
    assert _run("eval", "--task", "word", "--gold", d / "real.jsonl", "--predictions", d / "oracle.tsv") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["value"] == 1.0 and report["fp"] == 0


def test_missing_stats_file_exits_1(corpus, capsys):
    missing = corpus / "nope.json"
    code = _run("corrupt", "--parallel", corpus / "par.tsv", "--stats", missing, "-o", corpus / "m.jsonl")
    assert code == 1
    assert str(missing) in capsys.readouterr().err
    assert not (corpus / "m.jsonl").exists()


def test_bad_record_exits_1_with_location(tmp_path, capsys):
    (tmp_path / "bad.jsonl").write_text('{"id": "r1", "src": "a", "mt": "b c", "tags": "OK"}\n')
    assert _run("gen-stats", "--data", tmp_path / "bad.jsonl", "-o", tmp_path / "s.json") == 1
    err = capsys.readouterr().err
    assert "bad.jsonl:1" in err and "r1" in err


def test_sampler_failure_exits_2(corpus, tmp_path):
    d = corpus
    assert _run("gen-stats", "-o", d / "stats.json") == 0
    assert _run("corrupt", "--parallel", d / "par.tsv", "--stats", d / "stats.json", "-o", d / "m.jsonl") == 0
    child = tmp_path / "dies.py"
    child.write_text("import sys\nsys.stdin.readline()\nsys.exit(4)\n")
    cmd = f"{sys.executable} {child}"
    assert _run("fix", "--input", d / "m.jsonl", "--external-cmd", cmd, "-o", d / "p.jsonl") == 2
    assert not (d / "p.jsonl").exists()


def test_external_sampler_in_pipeline(corpus, tmp_path):
    d = corpus
    child = tmp_path / "echo.py"
    child.write_text(textwrap.dedent(
        """
        import json, sys
        for line in sys.stdin:
            k = json.loads(line)["k"]
            toks = ["zz", "yy", "xx"][:k]
            print(json.dumps({"tokens": toks, "probs": [1.0 / len(toks)] * len(toks)}), flush=True)
        """
    ))
    assert _run("gen-stats", "-o", d / "stats.json") == 0
    assert _run("corrupt", "--parallel", d / "par.tsv", "--stats", d / "stats.json", "-o", d / "m.jsonl") == 0
    cmd = f"{sys.executable} {child}"
    assert _run("--jobs", 2, "fix", "--input", d / "m.jsonl", "--external-cmd", cmd, "-o", d / "p.jsonl") == 0
    filled = set()
    for line in (d / "p.jsonl").read_text().splitlines():
        filled.update(json.loads(line)["mt"].split())
    assert filled & {"zz", "yy"}


def test_config_file_and_flag_precedence(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"fix.k_minor": 4, "train.beta": 10}))
    assert _run("--config", cfg, "--show-config", "fix", "--k-minor", 6) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["fix.k_minor"] == 6 and shown["train.beta"] == 10.0
    monkeypatch.setenv("MQMQE_CONFIG", str(cfg))
    assert _run("--show-config") == 0
    assert json.loads(capsys.readouterr().out)["fix.k_minor"] == 4


def test_config_round_trips(tmp_path, capsys):
    assert _run("--show-config") == 0
    text = capsys.readouterr().out
    (tmp_path / "c.json").write_text(text)
    assert _run("--config", tmp_path / "c.json", "--show-config") == 0
    assert json.loads(capsys.readouterr().out) == DEFAULTS


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"fix.k_tiny": 3}))
    assert _run("--config", cfg, "--show-config") == 1


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train-qe", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for flag in ("--pretrain-data", "--finetune-data", "--valid", "--alpha", "--beta", "--margin",
                 "--sigma", "--dropout", "--patience", "--seed"):
        assert flag in out
