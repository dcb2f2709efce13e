"""``simcsum`` command line: vocab | train | generate | score | analyze.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then ``SIMCSUM_SEED``, then explicit flags (flags win). Exit codes:
0 success, 2 usage or data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
from collections import Counter
from pathlib import Path

from . import numerics as nx
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .inference import GenConfig, generate
from .metrics import MetricError, compare_reports, score_corpus, table_csv
from .model import ModelConfig, TaskId, init_params
from .numerics import ContractError, NumericError
from .syntax import SyntaxParseError, analyze, summarize
from .text_data import (
    DEFAULT_MAX_SRC_LEN,
    TAG_DE,
    TAG_EN,
    TAG_SIMP,
    DataError,
    Splits,
    Vocab,
    build_vocab,
    corpus_texts,
    decode,
    encode,
    encode_triples,
    load_dataset,
    split_dataset,
    tokenize,
)
from .training import TrainConfig, TrainingDiverged, TrainState, train

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

DEFAULTS = {
    "seed": 0,
    "precision": "float32",
    "paths": {"dataset": None, "train": None, "valid": None, "test": None, "vocab": None,
              "checkpoint_dir": None, "report_dir": None},
    "vocab": {"min_freq": 1, "max_size": None},
    "data": {"max_src_len": DEFAULT_MAX_SRC_LEN},
    "model": {"d_model": 64, "n_heads": 4, "n_enc_layers": 2, "n_dec_layers": 2, "ffn_dim": 256,
              "max_positions": 1024, "dropout_rate": 0.1},
    "train": {"lambda_sum": 0.75, "lambda_sim": None, "max_epochs": 25, "batch_size": 4, "base_lr": 5e-5,
              "warmup_steps": 100, "patience": 3, "clip_norm": 1.0, "max_steps": None},
    "generate": {"beam_size": 5, "max_len": 64, "trigram_block": True, "length_norm_alpha": 1.0},
}


class UsageError(Exception):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_run_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            cfg = _merge(cfg, json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc.msg})") from None
    env_seed = os.environ.get("SIMCSUM_SEED")
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError:
            raise UsageError(f"SIMCSUM_SEED must be an integer, got {env_seed!r}") from None
    for dest, (section, key) in _FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is not None:
            if section is None:
                cfg[key] = value
            else:
                cfg[section][key] = value
    return cfg


_FLAG_MAP = {
    "seed": (None, "seed"),
    "precision": (None, "precision"),
    "dataset": ("paths", "dataset"),
    "train_file": ("paths", "train"),
    "valid_file": ("paths", "valid"),
    "test_file": ("paths", "test"),
    "vocab": ("paths", "vocab"),
    "out_dir": ("paths", "checkpoint_dir"),
    "report_dir": ("paths", "report_dir"),
    "min_freq": ("vocab", "min_freq"),
    "max_size": ("vocab", "max_size"),
    "max_src_len": ("data", "max_src_len"),
    "d_model": ("model", "d_model"),
    "n_heads": ("model", "n_heads"),
    "n_enc_layers": ("model", "n_enc_layers"),
    "n_dec_layers": ("model", "n_dec_layers"),
    "ffn_dim": ("model", "ffn_dim"),
    "dropout": ("model", "dropout_rate"),
    "lambda_sum": ("train", "lambda_sum"),
    "epochs": ("train", "max_epochs"),
    "batch_size": ("train", "batch_size"),
    "lr": ("train", "base_lr"),
    "warmup": ("train", "warmup_steps"),
    "patience": ("train", "patience"),
    "max_steps": ("train", "max_steps"),
    "beam": ("generate", "beam_size"),
    "max_len": ("generate", "max_len"),
}


def _require_file(path, what: str) -> Path:
    if not path:
        raise UsageError(f"no {what} given")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _dataset_paths(cfg) -> list[Path]:
    paths = cfg["paths"]
    if paths.get("dataset"):
        return [_require_file(paths["dataset"], "dataset")]
    files = [paths.get(k) for k in ("train", "valid", "test")]
    if all(files):
        return [_require_file(f, "dataset split") for f in files]
    raise UsageError("no dataset given (use --dataset or train/valid/test paths)")


# ---------------------------------------------------------------------------
# vocab
# ---------------------------------------------------------------------------


def cmd_vocab(args) -> int:
    cfg = load_run_config(args)
    data = _dataset_paths(cfg)
    out = cfg["paths"].get("vocab")
    if not out:
        raise UsageError("no vocabulary output path (--vocab)")
    vocab = build_vocab(corpus_texts(data), cfg["vocab"]["min_freq"], cfg["vocab"]["max_size"])
    vocab.save(out)
    counts = Counter(t for text in corpus_texts(data) for t in tokenize(text))
    covered = sum(c for t, c in counts.items() if t in vocab.stoi)
    total = sum(counts.values())
    print(f"vocabulary: {len(vocab)} entries ({len(vocab) - 4} non-reserved) -> {out}")
    print(f"coverage: {covered}/{total} tokens ({100.0 * covered / total:.2f}%)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _load_splits(cfg, vocab: Vocab) -> Splits:
    paths = _dataset_paths(cfg)
    max_src = cfg["data"]["max_src_len"]
    if len(paths) == 1:
        return split_dataset(encode_triples(load_dataset(paths[0]), vocab, max_src), cfg["seed"])
    parts = [encode_triples(load_dataset(p), vocab, max_src) for p in paths]
    return Splits(*parts)


def cmd_train(args) -> int:
    cfg = load_run_config(args)
    vocab_path = _require_file(cfg["paths"].get("vocab"), "vocabulary")
    vocab = Vocab.load(vocab_path)
    out_dir = cfg["paths"].get("checkpoint_dir")
    if not out_dir:
        raise UsageError("no output directory (--out-dir)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    nx.set_precision(cfg["precision"])
    splits = _load_splits(cfg, vocab)
    fingerprint = vocab.fingerprint()

    if args.resume:
        ckpt = load_checkpoint(_require_file(args.resume, "checkpoint"), fingerprint)
        tconf = ckpt.train_config_obj()
        state = ckpt.to_state()
        log_mode = "a"
    else:
        tdict = dict(cfg["train"], seed=cfg["seed"])
        tasks = (TaskId.SIM, TaskId.SUM)
        if args.single_task:
            tdict["lambda_sum"] = 1.0
            tdict["lambda_sim"] = None
            tasks = (TaskId.SUM,)
        if args.no_clip:
            tdict["clip_norm"] = None
        tconf = TrainConfig(**tdict)
        mconf = ModelConfig(vocab_size=len(vocab), seed=cfg["seed"], **cfg["model"])
        state = TrainState(init_params(mconf, tasks))
        log_mode = "w"
    record = dict(cfg, resume=str(args.resume) if args.resume else None, single_task=bool(args.single_task))
    _write_json(out_dir / "config.json", record)

    log_path = out_dir / "train_log.jsonl"
    with log_path.open(log_mode, encoding="utf-8") as log_fh:
        def on_step(report):
            rec = {"step": report.step, "lr": report.lr, "loss_sim": report.loss_sim,
                   "loss_sum": report.loss_sum, "loss_joint": report.loss_joint}
            if args.timestamps:
                rec["time"] = time.time()
            log_fh.write(json.dumps(rec) + "\n")

        try:
            result = train(state.params, splits, tconf, state=state, on_step=on_step, stop_after=args.stop_after)
        except TrainingDiverged as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC

    last = Checkpoint.from_state(result.state, tconf, fingerprint)
    save_checkpoint(last, out_dir / "last.ckpt")
    if result.state.best_params is not None:
        best = Checkpoint(model_config=last.model_config, tasks=last.tasks,
                          params={k: v.copy() for k, v in result.state.best_params.items()},
                          train_config=last.train_config, vocab_fingerprint=fingerprint,
                          step=result.state.step, epoch=result.state.epoch, best_val=result.state.best_val,
                          done=True)
        save_checkpoint(best, out_dir / "best.ckpt")
    final = result.log[-1] if result.log else None
    status = "interrupted" if result.interrupted else "finished"
    if final is not None:
        print(f"{status} at step {final.step}: loss_joint={final.loss_joint:.6f} "
              f"loss_sum={final.loss_sum:.6f} loss_sim={final.loss_sim:.6f}")
    else:
        print(f"{status} at step {result.state.step} (no new steps)")
    if result.state.best_val is not None:
        print(f"best validation joint loss: {result.state.best_val:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = load_run_config(args)
    vocab = Vocab.load(_require_file(cfg["paths"].get("vocab"), "vocabulary"))
    ckpt = load_checkpoint(_require_file(args.checkpoint, "checkpoint"), vocab.fingerprint())
    if args.decoder == "sim" and not args.debug:
        raise UsageError("--decoder sim is a debugging aid; add --debug to use it")
    task = TaskId(args.decoder)
    if task.value not in ckpt.tasks:
        raise UsageError(f"checkpoint has no {task.value} decoder")
    params = ckpt.model_params()
    g = cfg["generate"]
    gen = GenConfig(beam_size=g["beam_size"], max_len=g["max_len"],
                    trigram_block=g["trigram_block"] and not args.no_trigram_block,
                    length_norm_alpha=g["length_norm_alpha"])
    tag = vocab.stoi[TAG_DE if task is TaskId.SUM else TAG_SIMP]
    inp = _require_file(args.input, "input file")
    lines = inp.read_text(encoding="utf-8").splitlines()
    outputs = []
    for line in lines:
        src = encode(line, vocab, TAG_EN, cfg["data"]["max_src_len"])
        ids = generate(params, src, gen, tag, task)
        outputs.append(decode(ids, vocab))
    Path(args.output).write_text("".join(o + "\n" for o in outputs), encoding="utf-8")
    print(f"generated {len(outputs)} lines -> {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def _read_docs(path: Path) -> tuple[list[str], list[str]]:
    """Lines of a file, or (name-sorted) whole files of a directory."""
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.is_file())
        return [p.name for p in files], [p.read_text(encoding="utf-8").strip() for p in files]
    if not path.is_file():
        raise UsageError(f"not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    return [str(i) for i in range(len(lines))], lines


def _aligned(cand: Path, ref: Path):
    cn, cd = _read_docs(cand)
    rn, rd = _read_docs(ref)
    if cand.is_dir() and ref.is_dir():
        if cn != rn:
            raise UsageError(f"directories {cand} and {ref} do not contain the same file names")
    if len(cd) != len(rd):
        raise UsageError(f"{cand} has {len(cd)} documents but {ref} has {len(rd)}")
    return cd, rd


def cmd_score(args) -> int:
    cfg = load_run_config(args)
    cands, refs = _aligned(Path(args.candidates), Path(args.references))
    report = score_corpus(cands, refs)
    out_dir = Path(cfg["paths"].get("report_dir") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scores.jsonl").write_text(report.to_jsonl(), encoding="utf-8")
    rows = [report.table_row(Path(args.candidates).stem)]
    if args.compare:
        other_c, other_r = _aligned(Path(args.compare), Path(args.references))
        other = score_corpus(other_c, other_r)
        (out_dir / "scores_compare.jsonl").write_text(other.to_jsonl(), encoding="utf-8")
        rows.append(other.table_row(Path(args.compare).stem))
        tests = compare_reports(report, other)
        (out_dir / "significance.jsonl").write_text("".join(json.dumps(t) + "\n" for t in tests), encoding="utf-8")
    if args.csv:
        (out_dir / "table.csv").write_text(table_csv(rows), encoding="utf-8")
    _write_json(out_dir / "config.json", dict(cfg, candidates=args.candidates, references=args.references,
                                              compare=args.compare))
    agg = report.aggregate
    print(" ".join(f"{k}={agg[k]['mean']:.4f}" if agg[k]["mean"] is not None else f"{k}=n/a"
                   for k in ("rouge1_f", "rouge2_f", "rougeL_f", "fre")))
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    cfg = load_run_config(args)
    if len(args.inputs) % 2:
        raise UsageError("analyze expects CONLLU TREES pairs")
    out_dir = Path(cfg["paths"].get("report_dir") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    records, table = [], []
    for conllu_path, trees_path in zip(args.inputs[::2], args.inputs[1::2]):
        conllu = _require_file(conllu_path, "CoNLL-U file")
        trees = _require_file(trees_path, "tree file")
        trees_text = trees.read_text(encoding="utf-8")
        if not trees_text.strip():
            raise UsageError(f"tree file is empty: {trees}")
        try:
            reports = analyze(conllu.read_text(encoding="utf-8"), trees_text)
        except SyntaxParseError as exc:
            raise SyntaxParseError(f"{conllu} / {trees}: {exc}") from None
        name = conllu.stem
        for i, r in enumerate(reports):
            records.append({"set": name, "doc": i, **r.to_record()})
        summary = summarize(reports)
        table.append((name, summary))
    (out_dir / "syntax.jsonl").write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    lines = ["set,ASL,ASL_sd,ADD,ADD_sd,ADW,ADW_sd,ATH,ATH_sd"]
    for name, s in table:
        cells = [f"{s[k][0]:.4f},{s[k][1]:.4f}" for k in ("asl", "add", "adw", "ath")]
        lines.append(",".join([name, *cells]))
    (out_dir / "syntax_table.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out_dir / "config.json", dict(cfg, inputs=list(args.inputs)))
    for name, s in table:
        print(f"{name}: " + "  ".join(f"{k.upper()} {s[k][0]:.2f} ({s[k][1]:.2f})" for k in ("asl", "add", "adw", "ath")))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(prog="simcsum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", parents=[common], help="build a vocabulary file")
    p.add_argument("--dataset")
    p.add_argument("--train-file", dest="train_file")
    p.add_argument("--valid-file", dest="valid_file")
    p.add_argument("--test-file", dest="test_file")
    p.add_argument("--vocab", help="output vocabulary path")
    p.add_argument("--min-freq", type=int, dest="min_freq")
    p.add_argument("--max-size", type=int, dest="max_size")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("train", parents=[common], help="train the joint model")
    p.add_argument("--dataset")
    p.add_argument("--train-file", dest="train_file")
    p.add_argument("--valid-file", dest="valid_file")
    p.add_argument("--test-file", dest="test_file")
    p.add_argument("--vocab")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--precision", choices=["float32", "float64"])
    p.add_argument("--max-src-len", type=int, dest="max_src_len")
    p.add_argument("--d-model", type=int, dest="d_model")
    p.add_argument("--heads", type=int, dest="n_heads")
    p.add_argument("--enc-layers", type=int, dest="n_enc_layers")
    p.add_argument("--dec-layers", type=int, dest="n_dec_layers")
    p.add_argument("--ffn-dim", type=int, dest="ffn_dim")
    p.add_argument("--dropout", type=float)
    p.add_argument("--lambda-sum", type=float, dest="lambda_sum")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--warmup", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--single-task", action="store_true", help="summarization decoder only (lambda_sum = 1)")
    p.add_argument("--no-clip", action="store_true", help="disable gradient-norm clipping")
    p.add_argument("--resume", help="continue from a last.ckpt")
    p.add_argument("--stop-after", type=int, dest="stop_after", help="stop once this many steps are done")
    p.add_argument("--timestamps", action="store_true", help="add wall-clock times to the training log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", parents=[common], help="decode summaries for source lines")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--beam", type=int)
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--max-src-len", type=int, dest="max_src_len")
    p.add_argument("--no-trigram-block", action="store_true", dest="no_trigram_block")
    p.add_argument("--decoder", choices=["sum", "sim"], default="sum")
    p.add_argument("--debug", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("score", parents=[common], help="ROUGE / readability / diversity reports")
    p.add_argument("candidates")
    p.add_argument("references")
    p.add_argument("--compare", help="second candidate set for Mann-Whitney tests")
    p.add_argument("--out-dir", dest="report_dir")
    p.add_argument("--csv", action="store_true", help="also write table.csv (R1, R2, RL, FRE)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("analyze", parents=[common], help="syntactic features from parser output")
    p.add_argument("inputs", nargs="+", metavar="FILE", help="CONLLU TREES [CONLLU TREES ...]")
    p.add_argument("--out-dir", dest="report_dir")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DataError, CheckpointError, SyntaxParseError, MetricError, ContractError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
