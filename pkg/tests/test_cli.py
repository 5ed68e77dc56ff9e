import json

import numpy as np
import pytest

from lzspa.cli import EXIT_IO, EXIT_MISMATCH, EXIT_USAGE, main
from lzspa.tokens import write_token_file

from conftest import markov_bits


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def corpus(tmp_path):
    rng = np.random.default_rng(0)
    write_token_file(tmp_path / "slow.txt", [markov_bits(0.1, 800, rng) for _ in range(6)], 2)
    write_token_file(tmp_path / "fast.txt", [markov_bits(0.4, 800, rng) for _ in range(6)], 2)
    write_token_file(tmp_path / "query.txt", [markov_bits(0.1, 400, rng), markov_bits(0.4, 400, rng)], 2)
    (tmp_path / "labels.txt").write_text("slow.txt slow\nfast.txt fast\n")
    (tmp_path / "raw.bin").write_bytes(bytes(rng.integers(0, 256, 3000, dtype=np.uint8)))
    (tmp_path / "bern.json").write_text(json.dumps({"kind": "iid", "pmf": [0.7, 0.3]}))
    return tmp_path


def test_train_and_inspect(capsys, corpus):
    code, out, _ = run(capsys, "train", corpus / "slow.txt", "--out", corpus / "m1.lzspa")
    assert code == 0 and json.loads(out)["nodes"] > 1
    run(capsys, "train", corpus / "slow.txt", "--out", corpus / "m20.lzspa", "--epochs", 20)
    code, out, _ = run(capsys, "inspect", corpus / "m1.lzspa")
    one = json.loads(out)
    assert code == 0 and {"nodes", "depth_histogram", "gamma", "epochs"} <= set(one)
    twenty = json.loads(run(capsys, "inspect", corpus / "m20.lzspa")[1])
    assert twenty["epochs"] == 20 and twenty["nodes"] >= one["nodes"]


@pytest.mark.parametrize("name", ["slow.txt", "raw.bin"])
def test_compress_round_trip(capsys, corpus, name):
    src = corpus / name
    assert run(capsys, "compress", src, "--out", corpus / "c.lzac")[0] == 0
    assert run(capsys, "decompress", corpus / "c.lzac", "--out", corpus / "back")[0] == 0
    assert (corpus / "back").read_bytes() == src.read_bytes()


def test_static_compress_round_trip(capsys, corpus):
    run(capsys, "train", corpus / "slow.txt", "--out", corpus / "m.lzspa")
    run(capsys, "compress", corpus / "query.txt", "--model", corpus / "m.lzspa", "--out", corpus / "q.lzac")
    code, _, err = run(capsys, "decompress", corpus / "q.lzac", "--out", corpus / "q2.txt")
    assert code == EXIT_MISMATCH and json.loads(err)["error"] == "ModelMismatchError"
    run(capsys, "decompress", corpus / "q.lzac", "--model", corpus / "m.lzspa", "--out", corpus / "q2.txt")
    assert (corpus / "q2.txt").read_bytes() == (corpus / "query.txt").read_bytes()


def test_fit_sweep_classify(capsys, corpus):
    code, out, _ = run(capsys, "fit", "--labels", corpus / "labels.txt", "--out", corpus / "bundle",
                       "--gamma-sweep", "--grid", "0.1,0.5,1")
    res = json.loads(out)
    assert code == 0 and res["gamma"] in (0.1, 0.5, 1.0) and (corpus / "bundle" / "sweep.csv").exists()
    code, out, _ = run(capsys, "classify", corpus / "query.txt", "--bundle", corpus / "bundle", "--threads", 2,
                       "--csv", corpus / "pred.csv")
    rows = json.loads(out)
    assert code == 0 and [r["label"] for r in rows] == ["slow", "fast"]
    assert (corpus / "pred.csv").read_text().startswith("file,")
    code, out, _ = run(capsys, "sweep", "--labels", corpus / "labels.txt", "--report-dir", corpus / "sw")
    assert code == 0 and (corpus / "sw" / "sweep.csv").exists() and (corpus / "sw" / "sweep.json").exists()


def test_generate(capsys, corpus):
    run(capsys, "train", corpus / "slow.txt", "--out", corpus / "m.lzspa")
    args = ("generate", "--model", corpus / "m.lzspa", "--length", 50, "--rng-seed", 9, "--temperature", 0.8)
    a = json.loads(run(capsys, *args)[1])
    b = json.loads(run(capsys, *args)[1])
    assert a["tokens"] == b["tokens"] and len(a["tokens"]) == 50 and a["rng_seed"] == 9
    code, _, _ = run(capsys, *args, "--out", corpus / "g.txt")
    assert code == 0 and (corpus / "g.txt").read_text().startswith("#lzspa-tokens A=2")


def test_eval_commands(capsys, corpus):
    run(capsys, "train", corpus / "slow.txt", "--out", corpus / "m.lzspa")
    code, out, _ = run(capsys, "eval", "kl", "--model", corpus / "m.lzspa", "--source", corpus / "bern.json", "--n", 3)
    assert code == 0 and json.loads(out)["kl_bits"] >= 0
    code, out, _ = run(capsys, "eval", "wd", corpus / "slow.txt", corpus / "slow.txt", "--report-dir", corpus / "wd")
    assert code == 0 and json.loads(out)["wasserstein"] == 0.0
    assert all((corpus / "wd" / f).exists() for f in ("histograms.png", "histograms.csv", "wd.json"))
    code, out, _ = run(capsys, "eval", "convergence", "--source", corpus / "bern.json", "--m-grid", "0,10,100",
                       "--seeds", "0,1", "--report-dir", corpus / "conv")
    assert code == 0
    for f in ("convergence.csv", "convergence.json", "convergence.png"):
        assert (corpus / "conv" / f).stat().st_size > 0


def test_filter_simulation_report(capsys, tmp_path):
    code, out, _ = run(capsys, "filter", "--simulate-markov", 0.1, "--length", 1500, "--loss", "squared",
                       "--regime", "causal,delay:2,lookahead:2", "--seed", 4, "--report-dir", tmp_path / "f")
    res = json.loads(out)
    assert code == 0 and res["seed"] == 4 and [r["regime"] for r in res["rows"]] == ["causal", "delay:2", "lookahead:2"]
    for r in res["rows"]:
        assert r["excess"] <= r["bound"]
    for f in ("filter.csv", "filter.json", "filter_mse.png"):
        assert (tmp_path / "f" / f).exists()


def test_filter_token_file_with_custom_channel(capsys, tmp_path):
    rng = np.random.default_rng(1)
    clean = np.array(markov_bits(0.05, 2000, rng))
    noisy = np.where(rng.random(clean.size) < 0.1, 1 - clean, clean)
    write_token_file(tmp_path / "z.txt", [noisy.tolist()], 2)
    (tmp_path / "bsc.json").write_text(json.dumps({"pi": [[0.9, 0.1], [0.1, 0.9]]}))
    code, out, _ = run(capsys, "filter", tmp_path / "z.txt", "--channel", tmp_path / "bsc.json",
                       "--regime", "lookahead:3", "--out", tmp_path / "xhat.txt")
    assert code == 0
    xhat = np.array([int(v) for v in (tmp_path / "xhat.txt").read_text().split()[2:]])
    assert np.mean(xhat != clean) < np.mean(noisy != clean)
    (tmp_path / "bad.json").write_text(json.dumps({"pi": [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]]}))
    assert run(capsys, "filter", tmp_path / "z.txt", "--channel", tmp_path / "bad.json")[0] == EXIT_MISMATCH


def test_error_codes(capsys, corpus):
    assert run(capsys, "train", corpus / "slow.txt", "--out", corpus / "m.lzspa", "--bogus")[0] == EXIT_USAGE
    assert run(capsys, "nonsense")[0] == EXIT_USAGE
    code, _, err = run(capsys, "inspect", corpus / "missing.lzspa")
    assert code == EXIT_IO and json.loads(err)["error"] == "FileNotFoundError"
    code, _, err = run(capsys, "inspect", corpus / "slow.txt")
    assert code == EXIT_IO
    code, _, _ = run(capsys, "decompress", corpus / "slow.txt", "--out", corpus / "x")
    assert code == EXIT_IO
    run(capsys, "train", corpus / "slow.txt", "--out", corpus / "m.lzspa")
    code, _, err = run(capsys, "compress", corpus / "raw.bin", "--model", corpus / "m.lzspa", "--out", corpus / "y")
    assert code == EXIT_MISMATCH and "alphabet" in json.loads(err)["message"]
    # a single-sequence class cannot hold one out for validation
    (corpus / "thin.txt").write_text("slow.txt slow\nquery.txt q\n")
    write_token_file(corpus / "query.txt", [markov_bits(0.1, 50, np.random.default_rng(1))], 2)
    code, _, err = run(capsys, "sweep", "--labels", corpus / "thin.txt")
    assert code == EXIT_USAGE and json.loads(err)["error"] == "ClassificationError"


def test_config_file_supplies_defaults(capsys, corpus):
    cfg = corpus / "cfg.json"
    cfg.write_text(json.dumps({"gamma": 0.2, "out": str(corpus / "c.lzspa"), "epochs": 2}))
    code, out, _ = run(capsys, "--config", cfg, "train", corpus / "slow.txt")
    res = json.loads(out)
    assert code == 0 and res["gamma"] == 0.2 and res["epochs"] == 2
    # explicit flags win over the file
    res = json.loads(run(capsys, "--config", cfg, "train", corpus / "slow.txt", "--gamma", 0.7)[1])
    assert res["gamma"] == 0.7
    cfg.write_text(json.dumps({"not_a_flag": 1}))
    assert run(capsys, "--config", cfg, "train", corpus / "slow.txt", "--out", corpus / "d.lzspa")[0] == EXIT_USAGE
