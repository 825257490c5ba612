from pathlib import Path

import pytest

from codeswitch_st.corpus import Dataset, DatasetKind, Example, SentimentLabel
from codeswitch_st.synthgen import SynthConfig, generate

DATA = Path(__file__).parent / "data"

POS, NEG = SentimentLabel.POSITIVE, SentimentLabel.NEGATIVE

ACCEPTANCE_RESULTS = []


@pytest.fixture
def data_dir():
    return DATA


def separable_pairs(n_per_class=50):
    """Two clusters with disjoint vocabularies."""
    pos_words = ["sunny", "bright", "joy", "glad", "warm", "smile", "cheer", "yay"]
    neg_words = ["rainy", "gloom", "sad", "cold", "frown", "grim", "boo", "dull"]
    pairs = []
    for i in range(n_per_class):
        pairs.append((" ".join(pos_words[(i + j) % 8] for j in range(4)) + f" p{i}", POS))
        pairs.append((" ".join(neg_words[(i + j) % 8] for j in range(4)) + f" n{i}", NEG))
    return pairs


@pytest.fixture
def separable():
    return separable_pairs()


def dataset_from_pairs(pairs, name="fixture", kind=DatasetKind.SOURCE_LABELED, prefix="x"):
    return Dataset(name, tuple(Example(f"{prefix}{i:04d}", t, l) for i, (t, l) in enumerate(pairs)), kind)


SMALL_SYNTH = SynthConfig(n_source=400, n_target=300, vocab_size_per_lang=200)


@pytest.fixture(scope="session")
def small_synth():
    return generate(SMALL_SYNTH)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, seconds, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {name} ({seconds:.2f}s) {detail}")
