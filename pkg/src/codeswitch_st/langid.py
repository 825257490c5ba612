"""Word splitting and the resource-rich-language fraction used for bucketing.

Tokenization rules (frozen by fixtures in the test suite):

* split on Unicode whitespace;
* strip leading/trailing punctuation and symbols (Unicode categories P* and S*)
  from every token, dropping tokens that become empty;
* a token is *counted* iff it contains at least one alphabetic character, so
  numbers and emoji take part in neither numerator nor denominator;
* a token's script is the majority script of its alphabetic characters
  (ties resolved in the order Latin, Devanagari, Tamil, Other).
"""

from __future__ import annotations

import enum
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path


class Script(str, enum.Enum):
    LATIN = "latin"
    DEVANAGARI = "devanagari"
    TAMIL = "tamil"
    OTHER = "other"


_SCRIPT_ORDER = (Script.LATIN, Script.DEVANAGARI, Script.TAMIL, Script.OTHER)


def char_script(ch: str) -> Script:
    cp = ord(ch)
    if 0x0900 <= cp <= 0x097F or 0xA8E0 <= cp <= 0xA8FF:
        return Script.DEVANAGARI
    if 0x0B80 <= cp <= 0x0BFF:
        return Script.TAMIL
    if cp < 0x0250 or 0x1E00 <= cp <= 0x1EFF:
        return Script.LATIN
    return Script.OTHER


def _is_edge_junk(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


@dataclass(frozen=True)
class Token:
    surface: str
    script: Script
    counted: bool


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[Token, ...]

    @property
    def counted(self) -> list[Token]:
        return [t for t in self.tokens if t.counted]


def tokenize(text: str) -> TokenizedText:
    tokens = []
    for raw in text.split():
        start, end = 0, len(raw)
        while start < end and _is_edge_junk(raw[start]):
            start += 1
        while end > start and _is_edge_junk(raw[end - 1]):
            end -= 1
        surface = raw[start:end]
        if not surface:
            continue
        alpha = [ch for ch in surface if ch.isalpha()]
        if alpha:
            votes = Counter(char_script(ch) for ch in alpha)
            best = max(votes.values())
            script = next(s for s in _SCRIPT_ORDER if votes.get(s) == best)
        else:
            script = Script.OTHER
        tokens.append(Token(surface, script, bool(alpha)))
    return TokenizedText(tuple(tokens))


def _fold(word: str) -> str:
    return word.strip().casefold()


@dataclass(frozen=True)
class Lexicon:
    words: frozenset
    name: str = "lexicon"

    def __post_init__(self):
        folded = frozenset(_fold(w) for w in self.words if _fold(w))
        if not folded:
            raise ValueError(f"lexicon {self.name!r} is empty")
        object.__setattr__(self, "words", folded)

    def __contains__(self, word: str) -> bool:
        return _fold(word) in self.words

    def __len__(self):
        return len(self.words)

    @classmethod
    def load(cls, path) -> "Lexicon":
        path = Path(path)
        words = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                words.append(line)
        return cls(frozenset(words), name=path.stem)

    def save(self, path) -> None:
        Path(path).write_text("".join(w + "\n" for w in sorted(self.words)), encoding="utf-8")


def is_resource_rich(token: Token | str, lexicon: Lexicon) -> bool:
    surface = token.surface if isinstance(token, Token) else token
    return surface in lexicon


@dataclass(frozen=True)
class Fraction:
    """A ratio over counted tokens; ``degenerate`` marks texts with no counted tokens."""
    value: float
    degenerate: bool = False

    def __float__(self):
        return self.value


def f_eng(text: str, lexicon: Lexicon) -> Fraction:
    counted = tokenize(text).counted
    if not counted:
        return Fraction(0.0, True)
    n_rich = sum(1 for tok in counted if tok.surface in lexicon)
    return Fraction(n_rich / len(counted))


def script_fraction(text: str, script: Script | str) -> Fraction:
    script = Script(script)
    counted = tokenize(text).counted
    if not counted:
        return Fraction(0.0, True)
    return Fraction(sum(1 for tok in counted if tok.script is script) / len(counted))


class LexiconDetector:
    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon

    def __call__(self, text: str) -> Fraction:
        return f_eng(text, self.lexicon)

    def describe(self) -> str:
        return f"lexicon:{self.lexicon.name}:{len(self.lexicon)}"


class ScriptDetector:
    def __init__(self, script: Script | str = Script.LATIN):
        self.script = Script(script)

    def __call__(self, text: str) -> Fraction:
        return script_fraction(text, self.script)

    def describe(self) -> str:
        return f"script:{self.script.value}"
