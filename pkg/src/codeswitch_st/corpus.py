"""Labeled and unlabeled text datasets: loading, splitting, class balancing."""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .seeding import rng_for


class CorpusError(ValueError):
    pass


class SentimentLabel(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @classmethod
    def parse(cls, raw: str) -> "SentimentLabel":
        key = raw.strip().lower()
        aliases = {"positive": cls.POSITIVE, "pos": cls.POSITIVE,
                   "negative": cls.NEGATIVE, "neg": cls.NEGATIVE}
        if key not in aliases:
            raise CorpusError(f"unknown label {raw!r}")
        return aliases[key]


LABELS = (SentimentLabel.POSITIVE, SentimentLabel.NEGATIVE)


class DatasetKind(str, enum.Enum):
    SOURCE_LABELED = "source_labeled"
    TARGET_UNLABELED = "target_unlabeled"
    TARGET_WITH_HIDDEN_GOLD = "target_with_hidden_gold"


@dataclass(frozen=True)
class Example:
    id: str
    text: str
    gold: SentimentLabel | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError(f"example {self.id!r} has empty text")


@dataclass(frozen=True)
class Dataset:
    name: str
    examples: tuple[Example, ...]
    kind: DatasetKind = DatasetKind.SOURCE_LABELED
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise CorpusError(f"duplicate id {ex.id!r} in dataset {self.name!r}")
            seen.add(ex.id)
        if self.kind is DatasetKind.SOURCE_LABELED:
            missing = [ex.id for ex in self.examples if ex.gold is None]
            if missing:
                raise CorpusError(f"source dataset {self.name!r} has unlabeled rows, first id {missing[0]!r}")
        object.__setattr__(self, "_index", {ex.id: ex for ex in self.examples})

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def __getitem__(self, example_id: str) -> Example:
        return self._index[example_id]

    @property
    def ids(self) -> list[str]:
        return [ex.id for ex in self.examples]

    def label_counts(self) -> Counter:
        return Counter(ex.gold for ex in self.examples if ex.gold is not None)

    def without_gold(self) -> "Dataset":
        """The view handed to self-training code: same ids and texts, labels removed."""
        return Dataset(self.name, tuple(replace(ex, gold=None) for ex in self.examples),
                       DatasetKind.TARGET_UNLABELED)

    def golds(self) -> dict[str, SentimentLabel]:
        return {ex.id: ex.gold for ex in self.examples if ex.gold is not None}


def _format_from_path(path: Path) -> str:
    suffix = path.suffix.lower().lstrip(".")
    if suffix in ("tsv", "csv", "jsonl"):
        return suffix
    raise CorpusError(f"cannot infer format from {path.name!r}; pass format explicitly")


def _rows_delimited(text: str, delimiter: str):
    reader = csv.reader(io.StringIO(text), delimiter=delimiter,
                        quoting=csv.QUOTE_MINIMAL if delimiter == "," else csv.QUOTE_NONE)
    try:
        header = next(reader)
    except StopIteration:
        raise CorpusError("empty file") from None
    header = [h.strip().lower() for h in header]
    if "text" not in header:
        raise CorpusError("line 1: header lacks a 'text' column")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CorpusError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        yield lineno, dict(zip(header, row))


def _rows_jsonl(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"line {lineno}: invalid JSON ({e.msg})") from None
        if not isinstance(obj, dict) or "text" not in obj:
            raise CorpusError(f"line {lineno}: expected an object with a 'text' key")
        yield lineno, obj


def load_dataset(path, format: str | None = None,
                 kind: DatasetKind = DatasetKind.SOURCE_LABELED,
                 name: str | None = None) -> Dataset:
    path = Path(path)
    format = format or _format_from_path(path)
    raw = path.read_text(encoding="utf-8")
    if not raw.strip():
        raise CorpusError(f"{path}: empty file")
    if format == "jsonl":
        rows = _rows_jsonl(raw)
    elif format in ("tsv", "csv"):
        rows = _rows_delimited(raw, "\t" if format == "tsv" else ",")
    else:
        raise CorpusError(f"unsupported format {format!r}")

    examples = []
    try:
        for row_index, (lineno, row) in enumerate(rows):
            ex_id = row.get("id")
            ex_id = str(row_index) if ex_id is None or str(ex_id) == "" else str(ex_id)
            label = row.get("label")
            gold = None
            if label is not None and str(label).strip() != "":
                try:
                    gold = SentimentLabel.parse(str(label))
                except CorpusError as e:
                    raise CorpusError(f"line {lineno}: {e}") from None
            if kind is DatasetKind.TARGET_UNLABELED:
                gold = None
            try:
                examples.append(Example(ex_id, str(row["text"]), gold))
            except CorpusError as e:
                raise CorpusError(f"line {lineno}: {e}") from None
    except CorpusError as e:
        raise CorpusError(f"{path}: {e}") from None
    if not examples:
        raise CorpusError(f"{path}: empty file")
    return Dataset(name or path.stem, tuple(examples), kind)


def save_dataset(dataset: Dataset, path, format: str | None = None) -> None:
    path = Path(path)
    format = format or _format_from_path(path)
    with_labels = any(ex.gold is not None for ex in dataset)
    if format == "jsonl":
        lines = []
        for ex in dataset:
            obj = {"id": ex.id, "text": ex.text}
            if ex.gold is not None:
                obj["label"] = ex.gold.value
            lines.append(json.dumps(obj, ensure_ascii=False))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    header = ["id", "text"] + (["label"] if with_labels else [])
    rows = []
    for ex in dataset:
        row = [ex.id, ex.text]
        if with_labels:
            row.append(ex.gold.value if ex.gold is not None else "")
        rows.append(row)
    buf = io.StringIO()
    if format == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        for row in [header] + rows:
            if any("\t" in cell or "\n" in cell for cell in row):
                raise CorpusError(f"row {row[0]!r}: tabs/newlines cannot be stored in TSV")
            buf.write("\t".join(row) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


def train_dev_split(d: Dataset, dev_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Label-stratified split; each class contributes round(fraction * class size) to dev."""
    if d.kind is not DatasetKind.SOURCE_LABELED:
        raise CorpusError("train_dev_split needs a labeled source dataset")
    if not 0.0 < dev_fraction < 1.0:
        raise CorpusError(f"dev_fraction must lie in (0, 1), got {dev_fraction}")
    rng = rng_for(seed, "train_dev_split")
    dev_ids = set()
    for label in LABELS:
        members = [ex.id for ex in d if ex.gold is label]
        if not members:
            continue
        n_dev = int(np.floor(dev_fraction * len(members) + 0.5))
        order = rng.permutation(len(members))
        dev_ids.update(members[i] for i in order[:n_dev])
    train = tuple(ex for ex in d if ex.id not in dev_ids)
    dev = tuple(ex for ex in d if ex.id in dev_ids)
    if not train or not dev:
        raise CorpusError(f"dev_fraction {dev_fraction} leaves an empty split for {len(d)} examples")
    return (Dataset(f"{d.name}.train", train, d.kind), Dataset(f"{d.name}.dev", dev, d.kind))


def upsample_minority(d: Dataset, seed: int) -> Dataset:
    counts = d.label_counts()
    if any(ex.gold is None for ex in d):
        raise CorpusError("upsampling needs gold labels on every example")
    if len(counts) < 2:
        raise CorpusError("cannot balance a single-class dataset")
    (major, n_major), (minor, n_minor) = counts.most_common(2)
    if n_major == n_minor:
        return d
    pool = [ex for ex in d if ex.gold is minor]
    rng = rng_for(seed, "upsample_minority")
    draws = rng.integers(0, len(pool), size=n_major - n_minor)
    dup_counter: Counter = Counter()
    extra = []
    for i in draws:
        src = pool[int(i)]
        dup_counter[src.id] += 1
        extra.append(replace(src, id=f"{src.id}#dup{dup_counter[src.id]}"))
    return Dataset(d.name, d.examples + tuple(extra), d.kind)
