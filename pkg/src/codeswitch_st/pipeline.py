"""Progressive self-training over f_eng buckets, plus the comparison methods.

All methods share one preparation step: pretrain ``m_pt`` on the source train
split (checkpoint picked by dev macro-F1), score every target text with
``m_pt`` and the resource-rich detector, bucket by descending f_eng, and select
the confident subset once from ``m_pt`` confidences.

Seed streams (all derived from ``RunConfig.seed``): ``split``,
``upsample_source``, ``fit/0`` for pretraining, ``fit/i`` for the model of
iteration i, ``upsample_pseudo/i`` and ``fit/supervised``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

from .classifier import ClassifierSpec, ExternalBackend, LinearBackend, Prediction
from .corpus import Dataset, DatasetKind, Example, SentimentLabel, train_dev_split, upsample_minority
from .curriculum import (Bucket, ScoredExample, SelectionResult, make_buckets, select_global,
                         select_per_class, with_buckets)
from .evaluation import evaluate, probe_ood
from .langid import Lexicon, LexiconDetector, ScriptDetector
from .seeding import derive_seed

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PER_CLASS = "per_class"
GLOBAL = "global"


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    k: int = 2
    delta: float = 0.5
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    seed: int = 0
    selection_mode: str = PER_CLASS
    use_source_in_training: bool = True
    upsample_source: bool = True
    upsample_pseudo: bool = False
    dev_fraction: float = 0.2
    detector: str = "script:latin"
    backend_command: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.selection_mode not in (PER_CLASS, GLOBAL):
            raise ValueError(f"selection_mode must be {PER_CLASS!r} or {GLOBAL!r}")
        if not 0.0 < self.dev_fraction < 1.0:
            raise ValueError("dev_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {"k": self.k, "delta": self.delta, "seed": self.seed,
                "selection_mode": self.selection_mode,
                "use_source_in_training": self.use_source_in_training,
                "upsample_source": self.upsample_source, "upsample_pseudo": self.upsample_pseudo,
                "dev_fraction": self.dev_fraction, "detector": self.detector,
                "backend_command": self.backend_command, "classifier": self.classifier.to_dict()}


def resolve_detector(spec: str):
    """``"lexicon:<path>"`` or ``"script:<latin|devanagari|tamil|other>"``."""
    kind, _, arg = spec.partition(":")
    if kind == "lexicon" and arg:
        return LexiconDetector(Lexicon.load(arg))
    if kind == "script":
        return ScriptDetector(arg or "latin")
    raise ValueError(f"unknown detector {spec!r}")


def make_backend(config: RunConfig):
    if config.backend_command:
        return ExternalBackend(config.backend_command)
    return LinearBackend(config.classifier)


def _pairs(examples) -> list[tuple[str, SentimentLabel]]:
    return [(ex.text, ex.gold) for ex in examples]


def source_split(S: Dataset, config: RunConfig) -> tuple[Dataset, Dataset]:
    """Train/dev split of the source corpus; the train side is class-balanced if configured."""
    if S.kind is not DatasetKind.SOURCE_LABELED:
        raise PipelineError("source dataset must be labeled")
    train, dev = train_dev_split(S, config.dev_fraction, derive_seed(config.seed, "split"))
    if config.upsample_source and len(train.label_counts()) == 2:
        train = upsample_minority(train, derive_seed(config.seed, "upsample_source"))
    return train, dev


def pretrain_source(S: Dataset, config: RunConfig, backend=None):
    train, dev = source_split(S, config)
    return _pretrain(train, dev, config, backend or make_backend(config))


def _pretrain(train: Dataset, dev: Dataset, config: RunConfig, backend):
    dev_golds = dev.golds()
    dev_texts = [ex.text for ex in dev]

    def dev_macro_f1(model) -> float:
        preds = dict(zip(dev.ids, model.predict_many(dev_texts)))
        return evaluate(preds, dev_golds).macro_f1

    return backend.fit(_pairs(train), seed=derive_seed(config.seed, "fit", 0), provenance="pretrained",
                       checkpoint_score=dev_macro_f1)


@dataclass
class RunReport:
    config: dict
    models: list
    buckets: list
    selection: dict
    pseudo_labels: dict
    final_predictions: dict
    flags: list
    artifacts: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "config": self.config, "models": self.models,
                "buckets": self.buckets, "selection": self.selection,
                "pseudo_labels": self.pseudo_labels, "final_predictions": self.final_predictions,
                "flags": self.flags}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, ensure_ascii=False) + "\n"

    def predictions(self) -> dict[str, SentimentLabel]:
        return {i: SentimentLabel(p["label"]) for i, p in self.final_predictions.items()}

    def bucket_ids(self) -> dict[int, list[str]]:
        return {b["index"]: list(b["ids"]) for b in self.buckets}

    def close(self) -> None:
        for model in self.artifacts.get("models", []):
            model.close()


@dataclass
class _Context:
    config: RunConfig
    backend: object
    source_train: Dataset
    source_dev: Dataset
    target: Dataset
    m_pt: object
    scored: list
    buckets: list
    selection: SelectionResult
    detector_name: str


def _model_entry(model, iteration: int, n_train: int, reused: bool = False) -> dict:
    return {"iteration": iteration, "provenance": model.provenance, "digest": model.digest,
            "training_digest": model.training_digest, "n_train": n_train, "reused": reused}


def _prepare(S: Dataset, T: Dataset, config: RunConfig, backend=None, detector=None,
             select: bool = True) -> _Context:
    backend = backend or make_backend(config)
    detector = detector or resolve_detector(config.detector)
    target = T.without_gold()
    train, dev = source_split(S, config)
    m_pt = _pretrain(train, dev, config, backend)
    preds = m_pt.predict_many([ex.text for ex in target])
    scored = [ScoredExample(ex, float(detector(ex.text)), p) for ex, p in zip(target, preds)]
    buckets = make_buckets(scored, config.k)
    selection = SelectionResult(frozenset())
    if select:
        chooser = select_per_class if config.selection_mode == PER_CLASS else select_global
        selection = with_buckets(chooser(scored, config.delta), buckets)
    return _Context(config, backend, train, dev, target, m_pt, scored, buckets, selection,
                    detector.describe())


def _config_dict(ctx: _Context) -> dict:
    d = ctx.config.to_dict()
    d["detector"] = ctx.detector_name
    return d


def _bucket_entries(buckets: list[Bucket]) -> list[dict]:
    return [{"index": b.index, "size": len(b), "f_eng_mean": b.f_eng_mean, "f_eng_std": b.f_eng_std,
             "ids": b.ids} for b in buckets]


def _selection_entry(selection: SelectionResult) -> dict:
    return {"size": len(selection),
            "per_class": {label.value: n for label, n in selection.per_class_counts.items()},
            "per_bucket": {str(i): len(ids) for i, ids in selection.per_bucket.items()}}


def _final(model, target: Dataset) -> dict:
    preds = model.predict_many([ex.text for ex in target])
    return {ex.id: p.to_dict() for ex, p in zip(target, preds)}


def _training_pairs(ctx: _Context, pseudo: list[tuple[str, SentimentLabel]], iteration: int):
    config = ctx.config
    if config.upsample_pseudo and len({l for _, l in pseudo}) == 2:
        ds = Dataset("pseudo", tuple(Example(str(j), t, l) for j, (t, l) in enumerate(pseudo)))
        ds = upsample_minority(ds, derive_seed(config.seed, "upsample_pseudo", iteration))
        pseudo = _pairs(ds)
    if not config.use_source_in_training:
        if len({l for _, l in pseudo}) < 2:
            raise PipelineError(f"iteration {iteration}: pseudo-labeled training set has a single class "
                                "and no source data is mixed in")
        return list(pseudo)
    return _pairs(ctx.source_train) + list(pseudo)


def _texts_by_id(ctx: _Context) -> dict[str, str]:
    return {ex.id: ex.text for ex in ctx.target}


def run_progressive(S: Dataset, T: Dataset, config: RunConfig, backend=None, detector=None,
                    stop_after: int | None = None) -> RunReport:
    """Self-train bucket by bucket; pseudo-labels for bucket r come from the model of iteration r - 1.

    ``stop_after`` ends the loop early (used by the OOD probe, which needs only m_1).
    """
    ctx = _prepare(S, T, config, backend, detector)
    if not ctx.selection.selected:
        raise PipelineError("selection is empty in every bucket")
    texts = _texts_by_id(ctx)
    models = [ctx.m_pt]
    entries = [_model_entry(ctx.m_pt, 0, len(ctx.source_train))]
    pseudo_labels, flags = {}, []
    pseudo: list[tuple[str, SentimentLabel]] = []
    current = ctx.m_pt
    last = config.k if stop_after is None else min(stop_after, config.k)
    for i in range(1, last + 1):
        ids = ctx.selection.per_bucket[i]
        if not ids:
            flags.append(f"empty_bucket:{i}")
            log.info("bucket %d contributes no selected instances; reusing model of iteration %d", i, i - 1)
            models.append(current)
            entries.append(_model_entry(current, i, entries[-1]["n_train"], reused=True))
            pseudo_labels[str(i)] = []
            continue
        preds = current.predict_many([texts[j] for j in ids])
        pseudo_labels[str(i)] = [{"id": j, "label": p.label.value, "confidence": p.confidence,
                                  "labeled_by": i - 1} for j, p in zip(ids, preds)]
        pseudo.extend((texts[j], p.label) for j, p in zip(ids, preds))
        pairs = _training_pairs(ctx, pseudo, i)
        current = ctx.backend.fit(pairs, seed=derive_seed(config.seed, "fit", i),
                                  provenance=f"iteration:{i}")
        models.append(current)
        entries.append(_model_entry(current, i, len(pairs)))
    report = RunReport(_config_dict(ctx), entries, _bucket_entries(ctx.buckets),
                       _selection_entry(ctx.selection), pseudo_labels, _final(current, ctx.target), flags)
    report.artifacts = {"models": models, "buckets": ctx.buckets, "source_dev": ctx.source_dev,
                        "selection": ctx.selection, "scored": ctx.scored}
    return report


def run_no_pt(S: Dataset, T: Dataset, config: RunConfig, backend=None, detector=None) -> RunReport:
    """One self-training round: every selected instance labeled by m_pt, one model on S plus them."""
    ctx = _prepare(S, T, config, backend, detector)
    if not ctx.selection.selected:
        raise PipelineError("selection is empty in every bucket")
    texts = _texts_by_id(ctx)
    pseudo_labels, pseudo = {}, []
    for i in range(1, config.k + 1):
        ids = ctx.selection.per_bucket[i]
        preds = ctx.m_pt.predict_many([texts[j] for j in ids])
        pseudo_labels[str(i)] = [{"id": j, "label": p.label.value, "confidence": p.confidence,
                                  "labeled_by": 0} for j, p in zip(ids, preds)]
        pseudo.extend((texts[j], p.label) for j, p in zip(ids, preds))
    pairs = _training_pairs(ctx, pseudo, 1)
    model = ctx.backend.fit(pairs, seed=derive_seed(config.seed, "fit", 1), provenance="iteration:1")
    entries = [_model_entry(ctx.m_pt, 0, len(ctx.source_train)), _model_entry(model, 1, len(pairs))]
    flags = [f"empty_bucket:{i}" for i in range(1, config.k + 1) if not ctx.selection.per_bucket[i]]
    report = RunReport(_config_dict(ctx), entries, _bucket_entries(ctx.buckets),
                       _selection_entry(ctx.selection), pseudo_labels, _final(model, ctx.target), flags)
    report.artifacts = {"models": [ctx.m_pt, model], "buckets": ctx.buckets, "source_dev": ctx.source_dev,
                        "selection": ctx.selection, "scored": ctx.scored}
    return report


def run_zero_shot(S: Dataset, T: Dataset, config: RunConfig, backend=None, detector=None) -> RunReport:
    ctx = _prepare(S, T, config, backend, detector, select=False)
    final = {s.id: s.prediction.to_dict() for s in ctx.scored}
    report = RunReport(_config_dict(ctx), [_model_entry(ctx.m_pt, 0, len(ctx.source_train))],
                       _bucket_entries(ctx.buckets), _selection_entry(ctx.selection), {}, final, [])
    report.artifacts = {"models": [ctx.m_pt], "buckets": ctx.buckets, "source_dev": ctx.source_dev,
                        "scored": ctx.scored}
    return report


def run_minus_source(S: Dataset, T: Dataset, config: RunConfig, backend=None, detector=None) -> RunReport:
    return run_progressive(S, T, replace(config, use_source_in_training=False), backend, detector)


def run_minus_ratio(S: Dataset, T: Dataset, config: RunConfig, backend=None, detector=None) -> RunReport:
    return run_progressive(S, T, replace(config, selection_mode=GLOBAL), backend, detector)


def run_supervised_bound(T_with_gold: Dataset, config: RunConfig, backend=None, detector=None) -> RunReport:
    """Train on the target corpus with its true labels and predict the same corpus."""
    golds = T_with_gold.golds()
    if len(golds) != len(T_with_gold):
        raise PipelineError("supervised bound needs a gold label on every target example")
    backend = backend or make_backend(config)
    model = backend.fit(_pairs(T_with_gold), seed=derive_seed(config.seed, "fit", "supervised"),
                        provenance="supervised")
    preds = model.predict_many([ex.text for ex in T_with_gold])
    final = {ex.id: p.to_dict() for ex, p in zip(T_with_gold, preds)}
    detector = detector or resolve_detector(config.detector)
    scored = [ScoredExample(ex, float(detector(ex.text)), p) for ex, p in zip(T_with_gold, preds)]
    buckets = make_buckets(scored, min(config.k, len(scored)))
    cfg = config.to_dict()
    cfg["detector"] = detector.describe()
    report = RunReport(cfg, [_model_entry(model, 0, len(T_with_gold))], _bucket_entries(buckets),
                       _selection_entry(SelectionResult(frozenset())), {}, final, [])
    report.artifacts = {"models": [model], "buckets": buckets}
    return report


METHODS: dict[str, Callable] = {
    "progressive": run_progressive,
    "no_pt": run_no_pt,
    "zero_shot": run_zero_shot,
    "minus_source": run_minus_source,
    "minus_ratio": run_minus_ratio,
}


def run_method(method: str, S: Dataset, T: Dataset, config: RunConfig, backend=None, detector=None) -> RunReport:
    if method == "supervised":
        return run_supervised_bound(T, config, backend, detector)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    return METHODS[method](S, T, config, backend, detector)


def run_ood_probe(S: Dataset, T: Dataset, config: RunConfig, alphas=(0.01, 0.05, 0.10),
                  backend=None, detector=None):
    """Pretrain, run the first progressive iteration, and probe OOD fractions for m_pt and m_1."""
    report = run_progressive(S, T, config, backend, detector, stop_after=1)
    m_pt, m_1 = report.artifacts["models"][:2]
    x_st_1 = report.artifacts["selection"].per_bucket[1]
    dev_texts = [ex.text for ex in report.artifacts["source_dev"]]
    return probe_ood(m_pt, m_1, report.artifacts["buckets"], dev_texts, x_st_1, alphas), report
