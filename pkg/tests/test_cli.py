import json

import pytest

from simcsum import cli
from simcsum.synthetic import make_synthetic_records, write_jsonl
from simcsum.training import TrainingDiverged

from conftest import FIXTURES

SMALL = ["--d-model", "16", "--heads", "2", "--enc-layers", "1", "--dec-layers", "1", "--ffn-dim", "32",
         "--epochs", "2", "--batch-size", "4", "--warmup", "2"]


@pytest.fixture
def workdir(tmp_path):
    recs = make_synthetic_records(20, seed=1)
    write_jsonl(recs, tmp_path / "data.jsonl")
    (tmp_path / "src.txt").write_text("".join(r["source"] + "\n" for r in recs[:4]))
    (tmp_path / "ref.txt").write_text("".join(r["summary"] + "\n" for r in recs[:4]))
    assert cli.main(["vocab", "--dataset", str(tmp_path / "data.jsonl"), "--vocab", str(tmp_path / "v.txt")]) == 0
    return tmp_path


def _train(d, *extra):
    return cli.main(["train", "--dataset", str(d / "data.jsonl"), "--vocab", str(d / "v.txt"),
                     "--out-dir", str(d / "run"), *SMALL, *extra])


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "train": {"lambda_sum": 0.5, "batch_size": 8}}))
    parser = cli.build_parser()
    monkeypatch.delenv("SIMCSUM_SEED", raising=False)
    run = cli.load_run_config(parser.parse_args(["train", "--config", str(cfg)]))
    assert run["seed"] == 5 and run["train"]["lambda_sum"] == 0.5 and run["train"]["max_epochs"] == 25
    monkeypatch.setenv("SIMCSUM_SEED", "7")
    assert cli.load_run_config(parser.parse_args(["train", "--config", str(cfg)]))["seed"] == 7
    run = cli.load_run_config(parser.parse_args(["train", "--config", str(cfg), "--seed", "9", "--batch-size", "2"]))
    assert run["seed"] == 9 and run["train"]["batch_size"] == 2
    monkeypatch.setenv("SIMCSUM_SEED", "x")
    assert cli.main(["train", "--config", str(cfg)]) == 2


def test_vocab_reports_coverage(workdir, capsys):
    cli.main(["vocab", "--dataset", str(workdir / "data.jsonl"), "--vocab", str(workdir / "v2.txt")])
    assert "coverage: " in capsys.readouterr().out


def test_train_generate_score(workdir):
    assert _train(workdir) == 0
    run = workdir / "run"
    assert {p.name for p in run.iterdir()} >= {"best.ckpt", "last.ckpt", "train_log.jsonl", "config.json"}
    log = [json.loads(line) for line in (run / "train_log.jsonl").read_text().splitlines()]
    assert [r["step"] for r in log] == list(range(1, len(log) + 1))
    assert "time" not in log[0]
    out = workdir / "out.txt"
    assert cli.main(["generate", "--checkpoint", str(run / "best.ckpt"), "--vocab", str(workdir / "v.txt"),
                     "--input", str(workdir / "src.txt"), "--output", str(out), "--beam", "2",
                     "--max-len", "6"]) == 0
    assert len(out.read_text().splitlines()) == 4
    rep = workdir / "rep"
    assert cli.main(["score", str(out), str(workdir / "ref.txt"), "--compare", str(workdir / "src.txt"),
                     "--out-dir", str(rep), "--csv"]) == 0
    assert (rep / "table.csv").read_text().startswith("system,R1,R2,RL,FRE\n")
    assert len((rep / "scores.jsonl").read_text().splitlines()) == 5
    assert (rep / "significance.jsonl").exists()


def test_resume_appends_log(workdir):
    assert _train(workdir, "--stop-after", "3", "--timestamps") == 0
    run = workdir / "run"
    assert len((run / "train_log.jsonl").read_text().splitlines()) == 3
    assert cli.main(["train", "--dataset", str(workdir / "data.jsonl"), "--vocab", str(workdir / "v.txt"),
                     "--out-dir", str(run), "--resume", str(run / "last.ckpt")]) == 0
    steps = [json.loads(line)["step"] for line in (run / "train_log.jsonl").read_text().splitlines()]
    assert steps == list(range(1, len(steps) + 1)) and len(steps) > 3


def test_generate_guards(workdir):
    assert _train(workdir, "--single-task") == 0
    ckpt = str(workdir / "run" / "best.ckpt")
    base = ["generate", "--checkpoint", ckpt, "--vocab", str(workdir / "v.txt"), "--output", str(workdir / "o.txt")]
    empty = workdir / "empty.txt"
    empty.write_text("")
    assert cli.main([*base, "--input", str(empty)]) == 0
    assert (workdir / "o.txt").read_text() == ""
    assert cli.main([*base, "--input", str(empty), "--decoder", "sim"]) == 2
    assert cli.main([*base, "--input", str(empty), "--decoder", "sim", "--debug"]) == 2  # no sim decoder
    other = workdir / "other_vocab.txt"
    other.write_text("<pad>\n<s>\n</s>\n<unk>\nzz\n")
    assert cli.main(["generate", "--checkpoint", ckpt, "--vocab", str(other), "--input", str(empty),
                     "--output", str(workdir / "o.txt")]) == 2


def test_score_line_mismatch(workdir):
    short = workdir / "short.txt"
    short.write_text("a\n")
    assert cli.main(["score", str(short), str(workdir / "ref.txt"), "--out-dir", str(workdir / "r")]) == 2


def test_score_directories(tmp_path):
    for name in ("c", "r"):
        (tmp_path / name).mkdir()
        for i in range(2):
            (tmp_path / name / f"{i}.txt").write_text(f"Ein Text {i}.")
    assert cli.main(["score", str(tmp_path / "c"), str(tmp_path / "r"), "--out-dir", str(tmp_path / "o")]) == 0
    (tmp_path / "r" / "x.txt").write_text("extra")
    assert cli.main(["score", str(tmp_path / "c"), str(tmp_path / "r"), "--out-dir", str(tmp_path / "o")]) == 2


def test_analyze(tmp_path, capsys):
    conllu, trees = FIXTURES / "five_sentences.conllu", FIXTURES / "five_sentences.trees"
    assert cli.main(["analyze", str(conllu), str(trees), "--out-dir", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "syntax.jsonl").read_text().splitlines()[0])
    assert rec["asl"] == 3.6 and rec["ath"] == 2.4
    assert (tmp_path / "syntax_table.csv").read_text().startswith("set,ASL,")
    empty = tmp_path / "empty.trees"
    empty.write_text("\n")
    capsys.readouterr()
    assert cli.main(["analyze", str(conllu), str(empty), "--out-dir", str(tmp_path)]) == 2
    assert "empty.trees" in capsys.readouterr().err
    assert cli.main(["analyze", str(conllu), "--out-dir", str(tmp_path)]) == 2


def test_bad_dataset_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"source": "a"}\n')
    assert cli.main(["vocab", "--dataset", str(bad), "--vocab", str(tmp_path / "v.txt")]) == 2
    assert "bad.jsonl:1" in capsys.readouterr().err


def test_divergence_exit_code(workdir, monkeypatch):
    def boom(*a, **k):
        raise TrainingDiverged(4, "non-finite loss")

    monkeypatch.setattr(cli, "train", boom)
    assert _train(workdir) == 3
