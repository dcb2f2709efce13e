import json

import numpy as np
import pytest

from simcsum.text_data import (
    EOS,
    PAD,
    RESERVED,
    TAG_DE,
    TAG_EN,
    TAG_SIMP,
    UNK,
    DataError,
    InstanceTriple,
    Vocab,
    batches_from,
    build_vocab,
    collate,
    decode,
    encode,
    encode_triples,
    epoch_order,
    load_dataset,
    make_batches,
    split_dataset,
    tokenize,
)


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("Der Hund, bellt!") == ["der", "hund", ",", "bellt", "!"]
    assert tokenize("Grüße aus Köln.") == ["grüße", "aus", "köln", "."]


def test_vocab_ordering_and_reserved_block():
    v = build_vocab(["b a a", "c b a"])
    assert v.itos[:4] == list(RESERVED)
    assert v.itos[4:7] == ["a", "b", "c"]  # by count, then lexicographic
    assert v.itos[7:] == [TAG_EN, TAG_DE, TAG_SIMP]
    assert v.id("zzz") == UNK


def test_vocab_min_freq_and_max_size():
    v = build_vocab(["a a a b b c"], min_freq=2)
    assert v.itos[4:6] == ["a", "b"]
    v = build_vocab(["a a a b b c"], max_size=1)
    assert v.itos[4] == "a" and "b" not in v.stoi


def test_vocab_round_trip(tmp_path):
    v = build_vocab(["x y z", "y"])
    path = tmp_path / "vocab.txt"
    v.save(path)
    w = Vocab.load(path)
    assert w == v and w.fingerprint() == v.fingerprint()


def test_vocab_load_rejects_bad_header(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("a\nb\n")
    with pytest.raises(DataError):
        Vocab.load(path)


def test_build_vocab_empty_corpus():
    with pytest.raises(DataError):
        build_vocab([""])


def test_encode_decode():
    v = build_vocab(["ein kleiner hund"])
    ids = encode("Ein grosser Hund", v, TAG_DE)
    assert ids[0] == v.stoi[TAG_DE] and ids[-1] == EOS
    assert ids[2] == UNK
    assert decode(ids, v) == "ein <unk> hund"
    assert len(encode("a " * 100, v, TAG_EN, max_len=10)) == 10
    with pytest.raises(DataError):
        encode("x", v, "<fr>")


def _write(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


def test_load_dataset_reports_line(tmp_path):
    ok = {"source": "a", "simplified": "b", "summary": "c"}
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps(ok) + "\n\n" + json.dumps({"source": "a", "summary": "c"}) + "\n")
    with pytest.raises(DataError, match=r"d\.jsonl:3: missing field 'simplified'"):
        load_dataset(path)
    path.write_text(json.dumps(ok) + "\n{not json\n")
    with pytest.raises(DataError, match=r":2: malformed"):
        load_dataset(path)
    path.write_text(json.dumps(dict(ok, summary="  ")) + "\n")
    with pytest.raises(DataError, match="non-empty"):
        load_dataset(path)


def test_load_and_encode(tmp_path):
    path = tmp_path / "d.jsonl"
    _write(path, [{"source": "one two", "simplified": "one", "summary": "zwei"}])
    recs = load_dataset(path)
    assert recs[0].line == 1
    v = build_vocab([recs[0].source, recs[0].simplified, recs[0].summary])
    (inst,) = encode_triples(recs, v)
    assert inst.x[0] == v.stoi[TAG_EN]
    assert inst.y_sim[0] == v.stoi[TAG_SIMP]
    assert inst.y_sum[0] == v.stoi[TAG_DE]


def test_split_sizes_and_determinism():
    items = list(range(25))
    s = split_dataset(items, seed=3)
    assert (len(s.train), len(s.valid), len(s.test)) == (21, 2, 2)
    assert sorted(s.train + s.valid + s.test) == items
    assert split_dataset(items, seed=3) == s
    assert split_dataset(items, seed=4) != s
    t = split_dataset(list(range(10)), 0)
    assert (len(t.train), len(t.valid), len(t.test)) == (8, 1, 1)
    with pytest.raises(DataError):
        split_dataset(list(range(9)), 0)


def test_collate_pads_and_masks():
    b = collate([InstanceTriple((4, 7, 2), (6, 2), (5, 8, 9, 2)), InstanceTriple((4, 2), (6, 7, 7, 2), (5, 2))])
    assert b.x.tolist() == [[4, 7, 2], [4, 2, PAD]]
    assert b.x_mask.tolist() == [[True, True, True], [True, True, False]]
    assert b.lengths.tolist() == [[3, 2, 4], [2, 4, 2]]
    assert len(b) == 2


def test_epoch_order_reshuffles():
    a, b = epoch_order(20, 0, 0), epoch_order(20, 0, 1)
    assert sorted(a) == list(range(20)) and not np.array_equal(a, b)
    assert np.array_equal(a, epoch_order(20, 0, 0))


def test_batches_cover_everything_once():
    items = [InstanceTriple((4, i + 7, 2), (6, 2), (5, 2)) for i in range(10)]
    batches = batches_from(items, 4, seed=1, epoch=2)
    assert [len(b) for b in batches] == [4, 4, 2]
    seen = sorted(int(x) for b in batches for x in b.x[:, 1])
    assert seen == list(range(7, 17))
    assert len(make_batches(items, 4, seed=0, split="train")) == 2
    with pytest.raises(DataError):
        batches_from(items, 0)
