import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from simulpolicy.cli import main, parse_args
from simulpolicy.ctc import LogitMatrix, write_logits
from simulpolicy.harness import SyntheticTranslatorSpec, make_cascade_corpus, make_e2e_corpus
from simulpolicy.metrics import DelaySchedule, average_lagging, average_proportion, dal


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    make_e2e_corpus(d / "e2e", 4, SyntheticTranslatorSpec(unstable_suffix_len=2), seed=0, min_ms=1000, max_ms=2000)
    make_cascade_corpus(d / "cas", 3, SyntheticTranslatorSpec(unstable_suffix_len=1), seed=0)
    return d


def _error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


def test_parse_rbi_with_two_regularizers(corpus):
    cfg = parse_args(["eval", "--manifest", str(corpus / "e2e/manifest.jsonl"), "--policy", "rbi",
                      "--reg", "tst:0.9:1.1,na:gaussian:0.005", "--chunk-ms", "500"])
    (spec,) = cfg.policies
    assert spec.kind == "r_bi" and len(spec.regularizer_specs) == 2
    assert cfg.engine.chunk_size_ms == 500


def test_parse_la2(corpus):
    cfg = parse_args(["eval", "--manifest", str(corpus / "e2e/manifest.jsonl"), "--policy", "la", "--n", "2"])
    assert cfg.policies[0].label == "la-2"


@pytest.mark.parametrize("extra", [
    ["--policy", "rbi"],
    ["--policy", "la", "--mode", "cascade", "--backend", "synthetic"],
    ["--policy", "la", "--mode", "e2e", "--backend", "logits"],
    ["--policy", "la", "--bogus"],
    ["--policy", "la", "--chunk-ms", "10"],
    ["--policy", "la", "--nbest", "9", "--beam", "4"],
    ["--policy", "la", "--reg", "zz:1"],
    ["--policy", "hold", "--n", "-1"],
    [],
])
def test_usage_errors_exit_2(corpus, capsys, extra):
    assert main(["eval", "--manifest", str(corpus / "e2e/manifest.jsonl"), *extra]) == 2
    assert _error_line(capsys)["error"] == "UsageError"


def test_eval_writes_outputs(corpus, tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["eval", "--manifest", str(corpus / "e2e/manifest.jsonl"), "--policy", "rbi",
               "--reg", "va:0.69", "--chunk-ms", "250", "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["num_utterances"] == 4 and summary["policy"] == "rbi[va:0.69]"
    lines = (out / "utterances.jsonl").read_text().splitlines()
    assert len(lines) == 4 and "BLEU=" in capsys.readouterr().out


def test_eval_cascade(corpus, tmp_path):
    rc = main(["eval", "--manifest", str(corpus / "cas/manifest.jsonl"), "--mode", "cascade", "--policy", "rbi",
               "--ctc-mode", "rescoring", "--nbest", "3", "--out", str(tmp_path)])
    assert rc == 0
    assert json.loads((tmp_path / "summary.json").read_text())["bleu"] == 100.0


def test_sweep_csv_rows(corpus, tmp_path):
    rc = main(["sweep", "--manifest", str(corpus / "e2e/manifest.jsonl"), "--policies", "la-2,rbi",
               "--reg", "na:gaussian:0.005", "--chunk-sweep", "250,500,1000", "--out", str(tmp_path)])
    assert rc == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6 and {r["chunk_ms"] for r in rows} == {"250", "500", "1000"}


def test_runtime_failure_exit_1(tmp_path, capsys):
    m = tmp_path / "m.jsonl"
    m.write_text('{"id": "a", "audio": "nope.wav", "reference": "x"}\n')
    assert main(["eval", "--manifest", str(m), "--policy", "hold"]) == 1
    assert _error_line(capsys)["error"] == "ManifestError"


def test_seed_env_fallback(corpus, monkeypatch):
    monkeypatch.setenv("SIMULPOLICY_SEED", "123")
    args = ["eval", "--manifest", str(corpus / "e2e/manifest.jsonl"), "--policy", "hold"]
    assert parse_args(args).engine.seed == 123
    assert parse_args(args + ["--seed", "5"]).engine.seed == 5


def test_backend_flags_override_config(corpus):
    cfg = parse_args(["eval", "--manifest", str(corpus / "e2e/manifest.jsonl"), "--policy", "hold", "--unstable-k", "0"])
    assert cfg.synth_spec.unstable_suffix_len == 0
    cfg = parse_args(["eval", "--manifest", str(corpus / "e2e/manifest.jsonl"), "--policy", "hold"])
    assert cfg.synth_spec.unstable_suffix_len == 2


def test_metrics_pass_through(tmp_path, capsys):
    log = tmp_path / "d.json"
    log.write_text(json.dumps({"delays_ms": [1000, 2000, 3000, 4000], "src_duration_ms": 4000,
                               "hypothesis": "a b c d", "reference": "a b c d"}))
    assert main(["metrics", "--log", str(log)]) == 0
    out = json.loads(capsys.readouterr().out)
    s = DelaySchedule((1000, 2000, 3000, 4000), 4000)
    assert out == {"bleu": 100.0, "AL_ms": average_lagging(s), "AP": average_proportion(s),
                   "DAL_ms": dal(s), "low_latency": True}


def test_metrics_on_eval_output(corpus, tmp_path, capsys):
    main(["eval", "--manifest", str(corpus / "e2e/manifest.jsonl"), "--policy", "la", "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["metrics", "--log", str(tmp_path / "utterances.jsonl")]) == 0
    out = json.loads(capsys.readouterr().out)
    stored = [json.loads(x)["metrics"] for x in (tmp_path / "utterances.jsonl").read_text().splitlines()]
    assert [o["AL_ms"] for o in out] == [s["AL_ms"] for s in stored]
    assert all(o["bleu"] is None for o in out)


def test_metrics_malformed_log(tmp_path, capsys):
    log = tmp_path / "d.json"
    log.write_text('{"nothing": 1}')
    assert main(["metrics", "--log", str(log)]) == 2


def test_lcp_subcommand(tmp_path, capsys):
    assert main(["lcp", "a b c", "a b d", "a b"]) == 0
    assert capsys.readouterr().out.strip() == "a b"
    f = tmp_path / "s.txt"
    f.write_text("x y\nx z\n")
    assert main(["lcp", "--file", str(f)]) == 0
    assert capsys.readouterr().out.strip() == "x"
    assert main(["lcp"]) == 2


def test_ctc_decode_subcommand(tmp_path, capsys):
    p = tmp_path / "two.logits"
    write_logits(p, LogitMatrix(np.array([[0.6, 0.1, 0.3], [0.4, 0.3, 0.3]]), ("a", "b")))
    assert main(["ctc-decode", "--logits", str(p), "--beam", "16", "--nbest", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert [o["transcript"] for o in out] == ["a", "a b"]
    assert [math.exp(o["ctc_log_prob"]) for o in out] == pytest.approx([0.54, 0.18])
    assert main(["ctc-decode", "--logits", str(p), "--ctc-mode", "greedy"]) == 0
    assert json.loads(capsys.readouterr().out)[0]["transcript"] == "a"


def test_synth_subcommand(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "c"), "--num", "2", "--unstable-k", "3", "--sensitivity", "anchored"]) == 0
    assert len((tmp_path / "c/manifest.jsonl").read_text().splitlines()) == 2
    assert json.loads((tmp_path / "c/backend.json").read_text())["unstable_suffix_len"] == 3


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "simulpolicy", "lcp", "p q", "p r"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "p"
    res = subprocess.run([sys.executable, "-m", "simulpolicy", "frobnicate"], capture_output=True, text=True)
    assert res.returncode == 2
    assert json.loads(res.stderr.strip().splitlines()[-1])["error"] == "UsageError"
