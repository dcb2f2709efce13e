from pathlib import Path

import numpy as np
import pytest

from simcsum import numerics as nx
from simcsum.model import ModelConfig, init_params
from simcsum.text_data import BOS, EOS, InstanceTriple

FIXTURES = Path(__file__).parent / "fixtures"


def tiny_config(**kw):
    base = dict(vocab_size=16, d_model=8, n_heads=2, n_enc_layers=1, n_dec_layers=1, ffn_dim=16,
                max_positions=64, dropout_rate=0.0, seed=0)
    base.update(kw)
    return ModelConfig(**base)


def random_instances(n, seed=0, vocab_size=16, lo=3, hi=7):
    """Instance triples over ids 7.. (clear of reserved ids and the three tags)."""
    rng = np.random.default_rng(seed)

    def seq(start, k):
        return [start, *rng.integers(7, vocab_size, k).tolist(), EOS]

    out = []
    for _ in range(n):
        k = int(rng.integers(lo, hi + 1))
        out.append(InstanceTriple(seq(BOS, k), seq(6, k + 1), seq(5, max(k - 1, 1))))
    return out


@pytest.fixture
def float64():
    with nx.precision("float64"):
        yield


@pytest.fixture
def tiny_params(float64):
    return init_params(tiny_config())


@pytest.fixture(autouse=True)
def _clean_tape():
    nx.reset_tape()
    yield
    nx.reset_tape()


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.VERDICTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
