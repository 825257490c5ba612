"""F1 aggregation, per-bucket breakdowns, confidence-threshold OOD probing, paired t-test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import LABELS, SentimentLabel


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    """``counts[(gold, predicted)]`` over the two sentiment classes."""
    counts: Mapping

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, key) -> int:
        return self.counts.get(key, 0)

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts({key: self[key] + other[key] for key in _pairs()})

    def as_matrix(self) -> np.ndarray:
        return np.array([[self[(g, p)] for p in LABELS] for g in LABELS])


def _pairs():
    return [(g, p) for g in LABELS for p in LABELS]


def _label_of(x) -> SentimentLabel:
    return x.label if hasattr(x, "label") else SentimentLabel(x)


def confusion(preds: Mapping, golds: Mapping) -> ConfusionCounts:
    """``preds`` maps id to a Prediction or label; ``golds`` maps id to a label. Key sets must match."""
    if set(preds) != set(golds):
        missing = sorted(set(golds) - set(preds))[:3]
        extra = sorted(set(preds) - set(golds))[:3]
        raise EvaluationError(f"id mismatch: missing predictions for {missing}, no gold for {extra}")
    counts = {key: 0 for key in _pairs()}
    for ex_id, pred in preds.items():
        counts[(SentimentLabel(golds[ex_id]), _label_of(pred))] += 1
    return ConfusionCounts(counts)


@dataclass(frozen=True)
class MetricsReport:
    macro_f1: float
    micro_f1: float
    weighted_f1: float
    per_class_f1: dict
    support: dict
    accuracy: float = 0.0

    def to_dict(self) -> dict:
        return {"macro_f1": self.macro_f1, "micro_f1": self.micro_f1, "weighted_f1": self.weighted_f1,
                "accuracy": self.accuracy,
                "per_class_f1": {k.value: v for k, v in self.per_class_f1.items()},
                "support": {k.value: v for k, v in self.support.items()}}


def _f1(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def f1_scores(c: ConfusionCounts) -> MetricsReport:
    total = c.total
    if total == 0:
        raise EvaluationError("no evaluated examples")
    per_class, support = {}, {}
    tp_all = fp_all = fn_all = 0
    for label in LABELS:
        tp = c[(label, label)]
        fp = sum(c[(g, label)] for g in LABELS if g is not label)
        fn = sum(c[(label, p)] for p in LABELS if p is not label)
        per_class[label] = _f1(tp, fp, fn)
        support[label] = tp + fn
        tp_all, fp_all, fn_all = tp_all + tp, fp_all + fp, fn_all + fn
    macro = sum(per_class.values()) / len(LABELS)
    weighted = sum(per_class[l] * support[l] for l in LABELS) / total
    accuracy = sum(c[(l, l)] for l in LABELS) / total
    return MetricsReport(macro, _f1(tp_all, fp_all, fn_all), weighted, per_class, support, accuracy)


def evaluate(preds: Mapping, golds: Mapping) -> MetricsReport:
    return f1_scores(confusion(preds, golds))


def per_bucket_metrics(final_predictions: Mapping, buckets: Mapping[int, Sequence[str]],
                       golds: Mapping) -> dict[int, MetricsReport]:
    """Metrics restricted to each bucket's ids. ``buckets`` maps bucket index to member ids."""
    out = {}
    for index, ids in buckets.items():
        ids = [i for i in ids if i in golds]
        if not ids:
            raise EvaluationError(f"bucket {index} has no gold labels")
        out[index] = evaluate({i: final_predictions[i] for i in ids}, {i: golds[i] for i in ids})
    return out


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise EvaluationError(f"alpha must lie in (0, 1), got {alpha}")


def ood_threshold(calibration_confidences: Sequence[float], alpha: float) -> float:
    """Value at 0-based rank floor(alpha * n) of the ascending calibration confidences.

    At most ``alpha`` of the calibration set lies strictly below the returned value.
    """
    _check_alpha(alpha)
    values = np.sort(np.asarray(calibration_confidences, dtype=float))
    if values.size == 0:
        raise EvaluationError("empty calibration set")
    return float(values[int(math.floor(alpha * values.size))])


def ood_fraction(target_confidences: Sequence[float], p_alpha: float) -> float:
    values = np.asarray(target_confidences, dtype=float)
    if values.size == 0:
        raise EvaluationError("empty target set")
    return float(np.mean(values < p_alpha))


@dataclass(frozen=True)
class OODReport:
    alpha: float
    p_alpha: dict  # model name -> threshold
    fractions: dict  # (model name, bucket index) -> fraction
    calibration_sizes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "p_alpha": dict(self.p_alpha),
                "calibration_sizes": dict(self.calibration_sizes),
                "fractions": [{"model": m, "bucket": b, "fraction": f}
                              for (m, b), f in sorted(self.fractions.items())]}


def probe_ood(m_pt, m_1, buckets, s_dev_texts: Sequence[str], x_st_1: Sequence[str],
              alphas: Sequence[float] = (0.01, 0.05, 0.10)) -> list[OODReport]:
    """Threshold-based OOD fractions per alpha.

    ``buckets`` is the ordered list of curriculum buckets (B_1 first). ``m_pt`` is
    calibrated on the source dev texts, ``m_1`` on the B_1 members that were not
    selected for self-training. Fractions are reported for every bucket under
    ``m_pt`` and for every bucket after B_1 under ``m_1``.
    """
    for a in alphas:
        _check_alpha(a)
    if not s_dev_texts:
        raise EvaluationError("calibration set for m_pt (source dev split) is empty")
    first = buckets[0]
    held_out = [m.example.text for m in first.members if m.id not in set(x_st_1)]
    if not held_out:
        raise EvaluationError("calibration set for m_1 (B_1 minus its selected instances) is empty; "
                              "delta too large")

    def confidences(model, texts):
        return [p.confidence for p in model.predict_many(list(texts))]

    calib = {"m_pt": confidences(m_pt, s_dev_texts), "m_1": confidences(m_1, held_out)}
    bucket_texts = {b.index: [m.example.text for m in b.members] for b in buckets}
    conf = {("m_pt", i): confidences(m_pt, t) for i, t in bucket_texts.items()}
    conf.update({("m_1", i): confidences(m_1, t) for i, t in bucket_texts.items() if i > 1})

    reports = []
    for alpha in alphas:
        p = {name: ood_threshold(c, alpha) for name, c in calib.items()}
        fractions = {key: ood_fraction(c, p[key[0]]) for key, c in conf.items()}
        reports.append(OODReport(alpha, p, fractions, {k: len(v) for k, v in calib.items()}))
    return reports


# Student t distribution via the regularized incomplete beta function.

def _betacf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-15) -> float:
    # modified Lentz continued fraction for I_x(a, b)
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_two_sided_p(t, df)
    return 1.0 - tail if t >= 0 else tail


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise EvaluationError("paired samples must be equal-length sequences")
    n = a.size
    if n < 2:
        raise EvaluationError("paired t-test needs at least two pairs")
    d = a - b
    mean = float(d.mean())
    var = float(np.sum((d - mean) ** 2) / (n - 1))
    if var <= 1e-24 * max(1.0, mean * mean):
        raise EvaluationError("differences have zero variance")
    t = mean / math.sqrt(var / n)
    return t, t_two_sided_p(t, n - 1)
