"""Synthetic two-language sentiment benchmark.

Language A plays the resource-rich role and language B the low-resource one.
Both vocabularies are random pseudo-words with no surface form in common; each
has positive words, negative words and neutral filler. A sentence of length L
with mix ratio r gets round(r * L) language-A tokens. Sentiment slots agree
with a drawn intent label with probability ``polarity_agreement``; the hidden
gold label is the majority polarity of the sentiment words (ties go positive),
then flipped with probability ``label_noise``.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .corpus import Dataset, DatasetKind, Example, SentimentLabel, save_dataset
from .langid import Lexicon
from .seeding import rng_for

_CONSONANTS = "bdfghjklmnprstvz"
_VOWELS = "aeiou"

# Two spikes: an A-dominated mode around 0.75 and a B-dominated mode around 0.15.
# Levels are 0.1 apart, more than 1 / min sentence length, so f_eng ranks agree with ratio ranks.
BIMODAL_MIX = ((0.85, 1.0), (0.75, 3.0), (0.65, 1.0), (0.25, 1.0), (0.15, 3.0), (0.05, 1.0))


@dataclass(frozen=True)
class SynthConfig:
    vocab_size_per_lang: int = 600
    polar_vocab_fraction: float = 0.2
    sentiment_word_fraction: float = 0.3
    polarity_agreement: float = 0.8
    sentence_length: tuple = (12, 20)
    mix_ratio_distribution: tuple = BIMODAL_MIX
    positive_fraction: float = 0.5
    n_source: int = 2000
    n_target: int = 4000
    label_noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sentence_length", tuple(int(x) for x in self.sentence_length))
        object.__setattr__(self, "mix_ratio_distribution",
                           tuple((float(r), float(w)) for r, w in self.mix_ratio_distribution))
        lo, hi = self.sentence_length
        if lo < 1 or hi < lo:
            raise ValueError(f"sentence_length must satisfy 1 <= min <= max, got {self.sentence_length}")
        n_polar = int(round(self.vocab_size_per_lang * self.polar_vocab_fraction / 2))
        if n_polar < 1:
            raise ValueError("vocabulary too small to hold positive and negative words")
        if n_polar * 2 > self.vocab_size_per_lang:
            raise ValueError("polar_vocab_fraction exceeds 1")
        if n_polar * 2 == self.vocab_size_per_lang and self.sentiment_word_fraction < 1.0:
            raise ValueError("no neutral filler words left for non-sentiment slots")
        if not 0.0 < self.sentiment_word_fraction <= 1.0:
            raise ValueError("sentiment_word_fraction must lie in (0, 1]")
        if not self.mix_ratio_distribution:
            raise ValueError("mix_ratio_distribution is empty")
        for r, w in self.mix_ratio_distribution:
            if not 0.0 <= r <= 1.0 or w <= 0:
                raise ValueError(f"bad mix ratio entry {(r, w)}")
        for name in ("polarity_agreement", "positive_fraction", "label_noise"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_source < 2 or self.n_target < 2:
            raise ValueError("n_source and n_target must be >= 2")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sentence_length"] = list(self.sentence_length)
        d["mix_ratio_distribution"] = [list(p) for p in self.mix_ratio_distribution]
        return d


@dataclass(frozen=True)
class Vocabulary:
    positive: tuple
    negative: tuple
    neutral: tuple

    @property
    def words(self) -> tuple:
        return self.positive + self.negative + self.neutral


class SynthCorpus(NamedTuple):
    source: Dataset
    target: Dataset
    lexicon: Lexicon
    mix_ratios: dict
    vocab_a: Vocabulary
    vocab_b: Vocabulary


def _pseudo_words(rng: np.random.Generator, count: int, taken: set) -> list[str]:
    out = []
    while len(out) < count:
        n_syll = int(rng.integers(2, 4))
        word = "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
                       for _ in range(n_syll))
        if word not in taken:
            taken.add(word)
            out.append(word)
    return out


def _vocabulary(config: SynthConfig, rng: np.random.Generator, taken: set) -> Vocabulary:
    n_polar = int(round(config.vocab_size_per_lang * config.polar_vocab_fraction / 2))
    words = _pseudo_words(rng, config.vocab_size_per_lang, taken)
    return Vocabulary(tuple(words[:n_polar]), tuple(words[n_polar:2 * n_polar]), tuple(words[2 * n_polar:]))


def _sentence(rng, config: SynthConfig, ratio: float, vocab_a: Vocabulary, vocab_b: Vocabulary):
    lo, hi = config.sentence_length
    length = int(rng.integers(lo, hi + 1))
    n_a = int(np.floor(ratio * length + 0.5))
    in_a = np.zeros(length, dtype=bool)
    in_a[rng.choice(length, size=n_a, replace=False)] = True
    n_sent = max(1, int(np.floor(config.sentiment_word_fraction * length + 0.5)))
    sentiment_slots = set(rng.choice(length, size=n_sent, replace=False).tolist())
    intent_positive = rng.random() < config.positive_fraction
    n_pos = n_neg = 0
    tokens = []
    for slot in range(length):
        vocab = vocab_a if in_a[slot] else vocab_b
        if slot in sentiment_slots:
            agrees = rng.random() < config.polarity_agreement
            positive = intent_positive == agrees
            pool = vocab.positive if positive else vocab.negative
            n_pos, n_neg = n_pos + positive, n_neg + (not positive)
        else:
            pool = vocab.neutral
        tokens.append(pool[rng.integers(len(pool))])
    label_positive = n_pos >= n_neg
    if rng.random() < config.label_noise:
        label_positive = not label_positive
    label = SentimentLabel.POSITIVE if label_positive else SentimentLabel.NEGATIVE
    return " ".join(tokens), label


def generate_corpus(config: SynthConfig) -> SynthCorpus:
    taken: set = set()
    vocab_rng = rng_for(config.seed, "synth", "vocab")
    vocab_a = _vocabulary(config, vocab_rng, taken)
    vocab_b = _vocabulary(config, vocab_rng, taken)

    src_rng = rng_for(config.seed, "synth", "source")
    source = []
    for i in range(config.n_source):
        text, label = _sentence(src_rng, config, 1.0, vocab_a, vocab_b)
        source.append(Example(f"s{i:06d}", text, label))

    tgt_rng = rng_for(config.seed, "synth", "target")
    ratios = np.array([r for r, _ in config.mix_ratio_distribution])
    weights = np.array([w for _, w in config.mix_ratio_distribution])
    target, mix = [], {}
    for i in range(config.n_target):
        ratio = float(ratios[tgt_rng.choice(len(ratios), p=weights / weights.sum())])
        text, label = _sentence(tgt_rng, config, ratio, vocab_a, vocab_b)
        ex = Example(f"t{i:06d}", text, label)
        target.append(ex)
        mix[ex.id] = ratio

    return SynthCorpus(Dataset("synth_source", tuple(source), DatasetKind.SOURCE_LABELED),
                       Dataset("synth_target", tuple(target), DatasetKind.TARGET_WITH_HIDDEN_GOLD),
                       Lexicon(frozenset(vocab_a.words), name="synth_lang_a"), mix, vocab_a, vocab_b)


def generate(config: SynthConfig) -> tuple[Dataset, Dataset, Lexicon]:
    corpus = generate_corpus(config)
    return corpus.source, corpus.target, corpus.lexicon


def write_corpus(config: SynthConfig, out_dir) -> dict:
    """Write source.tsv, target.tsv and lexicon.txt; return their paths and a combined digest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source, target, lexicon = generate(config)
    paths = {"source": out_dir / "source.tsv", "target": out_dir / "target.tsv",
             "lexicon": out_dir / "lexicon.txt"}
    save_dataset(source, paths["source"])
    save_dataset(target, paths["target"])
    lexicon.save(paths["lexicon"])
    h = hashlib.sha256()
    for key in ("source", "target", "lexicon"):
        h.update(paths[key].read_bytes())
    return {**{k: str(v) for k, v in paths.items()}, "digest": h.hexdigest()}


def corpus_digest(config: SynthConfig) -> str:
    source, target, lexicon = generate(config)
    h = hashlib.sha256()
    for ds in (source, target):
        for ex in ds:
            h.update(f"{ex.id}\t{ex.text}\t{ex.gold.value}\n".encode())
    h.update("".join(w + "\n" for w in sorted(lexicon.words)).encode())
    return h.hexdigest()
