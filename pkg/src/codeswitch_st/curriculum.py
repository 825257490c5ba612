"""Bucketing by resource-rich fraction and confidence-based instance selection."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classifier import Prediction
from .corpus import LABELS, Example, SentimentLabel


class CurriculumError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredExample:
    example: Example
    f_eng: float
    prediction: Prediction | None = None

    def __post_init__(self):
        if not 0.0 <= self.f_eng <= 1.0:
            raise CurriculumError(f"f_eng out of range for {self.example.id!r}: {self.f_eng}")

    @property
    def id(self) -> str:
        return self.example.id


@dataclass(frozen=True)
class Bucket:
    index: int
    members: tuple[ScoredExample, ...]

    @property
    def ids(self) -> list[str]:
        return [m.id for m in self.members]

    @property
    def f_eng_values(self) -> np.ndarray:
        return np.array([m.f_eng for m in self.members])

    @property
    def f_eng_mean(self) -> float:
        return float(self.f_eng_values.mean())

    @property
    def f_eng_std(self) -> float:
        return float(self.f_eng_values.std())

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class SelectionResult:
    selected: frozenset
    per_class_counts: dict = field(default_factory=dict)
    per_bucket: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.selected)


def make_buckets(scored: Sequence[ScoredExample], k: int) -> list[Bucket]:
    n = len(scored)
    if k < 1:
        raise CurriculumError(f"k must be >= 1, got {k}")
    if n == 0:
        raise CurriculumError("cannot bucket an empty corpus")
    if k > n:
        raise CurriculumError(f"k={k} exceeds corpus size {n}")
    ordered = sorted(scored, key=lambda s: (-s.f_eng, s.id))
    base, extra = divmod(n, k)
    buckets, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        buckets.append(Bucket(i + 1, tuple(ordered[start:start + size])))
        start += size
    return buckets


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _check_delta(delta: float) -> None:
    if not 0.0 < delta <= 1.0:
        raise CurriculumError(f"delta must lie in (0, 1], got {delta}")


def _top_by_confidence(items: Sequence[ScoredExample], count: int) -> list[ScoredExample]:
    return sorted(items, key=lambda s: (-s.prediction.confidence, s.id))[:count]


def select_per_class(scored: Sequence[ScoredExample], delta: float) -> SelectionResult:
    """Most confident round(delta * |class|) items of each predicted class, at least one per non-empty class."""
    _check_delta(delta)
    chosen: list[ScoredExample] = []
    counts = {}
    for label in LABELS:
        members = [s for s in scored if s.prediction.label is label]
        count = max(1, round_half_up(delta * len(members))) if members else 0
        picked = _top_by_confidence(members, count)
        counts[label] = len(picked)
        chosen.extend(picked)
    return SelectionResult(frozenset(s.id for s in chosen), counts)


def select_global(scored: Sequence[ScoredExample], delta: float) -> SelectionResult:
    """Most confident round(delta * n) items regardless of predicted class."""
    _check_delta(delta)
    picked = _top_by_confidence(scored, round_half_up(delta * len(scored)))
    counts = Counter(s.prediction.label for s in picked)
    return SelectionResult(frozenset(s.id for s in picked),
                           {label: counts.get(label, 0) for label in LABELS})


def bucket_intersect(selection: SelectionResult, buckets: Sequence[Bucket]) -> dict[int, list[str]]:
    """Selected ids per bucket, in bucket order. Selected ids outside every bucket are an error."""
    out = {b.index: [i for i in b.ids if i in selection.selected] for b in buckets}
    covered = sum(len(v) for v in out.values())
    if covered != len(selection.selected):
        raise CurriculumError("selection contains ids outside the buckets")
    return out


def with_buckets(selection: SelectionResult, buckets: Sequence[Bucket]) -> SelectionResult:
    return SelectionResult(selection.selected, selection.per_class_counts,
                           bucket_intersect(selection, buckets))


def bucket_stats(buckets: Sequence[Bucket]) -> list[dict]:
    return [{"bucket": b.index, "size": len(b), "f_eng_mean": b.f_eng_mean, "f_eng_std": b.f_eng_std,
             "f_eng_min": float(b.f_eng_values.min()), "f_eng_max": float(b.f_eng_values.max())}
            for b in buckets]


def histogram(values: Sequence[float], bins: int = 10, width: int = 40) -> tuple[list[dict], str]:
    """Counts over equal-width bins on [0, 1] plus a text rendering, one bar per bin."""
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=(0.0, 1.0))
    top = max(int(counts.max()), 1)
    rows, lines = [], []
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        rows.append({"lo": float(lo), "hi": float(hi), "count": int(c)})
        bar = "#" * int(round(width * c / top))
        lines.append(f"[{lo:.1f}, {hi:.1f}{']' if hi == 1.0 else ')'} {int(c):>7d} {bar}")
    return rows, "\n".join(lines)
