import itertools

import numpy as np
import pytest

from simcsum.inference import (
    BeamHypothesis,
    GenConfig,
    beam_search,
    beam_step,
    blocks_trigram,
    generate,
    greedy_decode,
    has_repeated_trigram,
)
from simcsum.model import TaskId, init_params
from simcsum.numerics import ContractError
from simcsum.text_data import EOS

from conftest import tiny_config

TAG = 5


def loop_prone(cfg=None, favored=7):
    """Parameters whose summary head ignores its input and always prefers ``favored``."""
    params = init_params(cfg or tiny_config())
    params["head.sum.w"].data[:] = 0.0
    bias = np.zeros(params.config.vocab_size, dtype=params["head.sum.b"].dtype)
    bias[favored] = 5.0
    bias[favored + 1] = 2.0
    bias[EOS] = -10.0
    params["head.sum.b"].data = bias
    return params


def test_blocks_trigram():
    assert blocks_trigram([1, 2, 3, 1, 2], 3)
    assert not blocks_trigram([1, 2, 3, 1, 2], 4)
    assert not blocks_trigram([1, 2], 3)


def test_has_repeated_trigram():
    assert has_repeated_trigram([7, 7, 7, 7])
    assert not has_repeated_trigram([7, 7, 7, 8, 7, 7, 9])


def test_beam_step_tie_breaks_to_lower_id():
    hyps = [BeamHypothesis((TAG, 9), -1.0)]
    lp = np.log(np.full((1, 6), 1 / 6))
    out = beam_step(hyps, lp, 3, trigram_block=False)
    assert [h.tokens[-1] for h in out] == [0, 1, 2]


def test_beam_step_tie_breaks_to_earlier_hypothesis():
    hyps = [BeamHypothesis((TAG, 8), -1.0), BeamHypothesis((TAG, 9), -1.0)]
    lp = np.array([[-np.inf, -0.5], [-np.inf, -0.5]])
    out = beam_step(hyps, lp, 1, trigram_block=False)
    assert out[0].tokens == (TAG, 8, 1)


def test_beam_step_respects_blocking():
    hyps = [BeamHypothesis((TAG, 3, 4, 5, 3, 4), 0.0)]
    lp = np.log(np.array([[0.05, 0.05, 0.05, 0.05, 0.1, 0.7]]))
    assert beam_step(hyps, lp, 1, trigram_block=False)[0].tokens[-1] == 5
    assert beam_step(hyps, lp, 1, trigram_block=True)[0].tokens[-1] == 4


def test_tag_is_not_part_of_trigram_history():
    # tag 5 then generated 5 5: (5, 5, 5) would only repeat if the tag counted
    hyps = [BeamHypothesis((TAG, TAG, TAG), 0.0)]
    lp = np.log(np.full((1, 6), 1 / 6))
    lp[0, TAG] = 0.0
    assert beam_step(hyps, lp, 1, trigram_block=True)[0].tokens[-1] == TAG


def test_score_is_length_normalized():
    h = BeamHypothesis((TAG, 7, 8, EOS), -3.0, True)
    assert h.score(1.0) == -1.0
    assert h.output() == [7, 8]


def test_gen_config_validation():
    with pytest.raises(ContractError):
        GenConfig(beam_size=0)


def test_empty_source_is_rejected(tiny_params):
    with pytest.raises(ContractError):
        generate(tiny_params, [0, 0], GenConfig(), TAG)


def _brute_force_greedy(params, src, max_len, block):
    """Greedy decoding by re-running the full model on each prefix (no caching at all)."""
    from simcsum import numerics as nx
    from simcsum.model import decoder_forward, encode_source

    src = np.array([src])
    tokens = [TAG]
    with nx.no_grad():
        for _ in range(max_len):
            enc = encode_source(params, src, src != 0)
            logits = decoder_forward(params, TaskId.SUM, np.array([tokens]), enc, src != 0).data[0, -1]
            lp = logits - logits.max()
            lp = lp - np.log(np.exp(lp).sum())
            for banned in (0, 1, TAG):
                lp[banned] = -np.inf
            if block:
                for v in range(lp.size):
                    if blocks_trigram(tokens[1:], v):
                        lp[v] = -np.inf
            tok = int(np.argmax(lp))
            tokens.append(tok)
            if tok == EOS:
                break
    return tokens


@pytest.mark.parametrize("block", [True, False])
def test_greedy_matches_uncached_oracle(tiny_params, block):
    for src in ([4, 7, 8, 9, 2], [4, 12, 2]):
        got = greedy_decode(tiny_params, src, 10, TAG, trigram_block=block)
        assert list(got.tokens) == _brute_force_greedy(tiny_params, src, 10, block)


def test_cache_does_not_change_results(tiny_params):
    cfg = GenConfig(beam_size=3, max_len=10)
    for src in ([4, 7, 8, 9, 2], [4, 10, 11, 2]):
        a = beam_search(tiny_params, src, cfg, TAG, use_cache=True)
        b = beam_search(tiny_params, src, cfg, TAG, use_cache=False)
        assert a.tokens == b.tokens and a.logp == pytest.approx(b.logp, abs=1e-9)


def test_beam_one_equals_greedy(tiny_params):
    for src in ([4, 7, 8, 9, 2], [4, 12, 2], [4, 13, 13, 14, 2]):
        beam = beam_search(tiny_params, src, GenConfig(beam_size=1, max_len=12), TAG)
        greedy = greedy_decode(tiny_params, src, 12, TAG)
        assert beam.tokens == greedy.tokens


def test_beam_never_worse_than_greedy(float64):
    for seed in range(4):
        params = init_params(tiny_config(seed=seed))
        for src in ([4, 7, 8, 9, 2], [4, 11, 2]):
            g = greedy_decode(params, src, 8, TAG)
            b = beam_search(params, src, GenConfig(beam_size=4, max_len=8), TAG)
            if g.finished:
                assert b.finished and b.score() >= g.score() - 1e-12


def test_exhaustive_search_bounds_beam(float64):
    """With a tiny vocabulary and horizon, beam search finds the exhaustive optimum when wide enough."""
    cfg = tiny_config(vocab_size=8)
    params = init_params(cfg)
    from simcsum import numerics as nx
    from simcsum.inference import _next_log_probs, _Source

    src = _Source(params, [4, 6, 7, 2], True)
    banned = (0, 1, TAG)
    best = -np.inf
    with nx.no_grad():
        for length in (1, 2, 3):
            for body in itertools.product([t for t in range(8) if t not in banned and t != EOS], repeat=length - 1):
                seq = [TAG, *body, EOS]
                total = sum(_next_log_probs(src, TaskId.SUM, [seq[:i]], banned)[0, seq[i]] for i in range(1, len(seq)))
                best = max(best, total / (len(seq) - 1))
    hyp = beam_search(params, [4, 6, 7, 2], GenConfig(beam_size=64, max_len=3, trigram_block=False), TAG)
    assert hyp.finished and hyp.score() == pytest.approx(best, abs=1e-9)


def test_blocking_on_loop_prone_model(float64):
    params = loop_prone()
    off = generate(params, [4, 7, 2], GenConfig(beam_size=3, max_len=12, trigram_block=False), TAG)
    on = generate(params, [4, 7, 2], GenConfig(beam_size=3, max_len=12, trigram_block=True), TAG)
    assert has_repeated_trigram(off)
    assert not has_repeated_trigram(on)


def test_simplification_decoder_is_reachable(tiny_params):
    out = generate(tiny_params, [4, 7, 2], GenConfig(beam_size=2, max_len=6), 6, task=TaskId.SIM)
    assert isinstance(out, list)
