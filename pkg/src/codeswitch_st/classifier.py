"""Hashed bag-of-n-grams logistic classifier and an external-process backend.

Feature hashing
---------------
Each text is tokenized (see ``langid.tokenize``) and case-folded. Word n-grams
produce keys ``"w{n}:" + " ".join(gram)``; character n-grams are taken inside
each token without boundary padding and produce keys ``"c{n}:" + gram``. A key
goes to bucket ``zlib.crc32(key.encode("utf-8")) % feature_dims`` (standard
CRC-32, the same polynomial as gzip/PNG). Bucket counts are L2-normalized.

Model
-----
Binary logistic regression, ``P(positive | x) = sigmoid(w . x + b)``. The
training objective is the mean logistic loss plus ``l2 / 2 * ||w||^2`` (the
bias is not regularized), minimized by seeded mini-batch gradient descent for
a fixed number of epochs: AdaGrad per-coordinate steps by default (hashed
features are sparse and of very uneven frequency), plain SGD on request.
"""

from __future__ import annotations

import hashlib
import json
import math
import shlex
import subprocess
import zlib
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import SentimentLabel
from .langid import tokenize
from .seeding import rng_for


class TrainingError(RuntimeError):
    pass


class AdapterError(RuntimeError):
    pass


class TransportError(AdapterError):
    """The child process died, closed its pipes, or could not be spawned."""


class ProtocolError(AdapterError):
    """The child answered with something that violates the line protocol."""


@dataclass(frozen=True)
class ClassifierSpec:
    feature_dims: int = 2 ** 18
    word_ngrams: tuple = (1,)
    char_ngrams: tuple = ()
    epochs: int = 4
    learning_rate: float = 0.3
    l2: float = 0.0
    batch_size: int = 16
    optimizer: str = "adagrad"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "word_ngrams", tuple(sorted(set(int(n) for n in self.word_ngrams))))
        object.__setattr__(self, "char_ngrams", tuple(sorted(set(int(n) for n in self.char_ngrams))))
        dims = self.feature_dims
        if dims < 2 ** 10 or dims & (dims - 1):
            raise ValueError(f"feature_dims must be a power of two >= 1024, got {dims}")
        if not self.word_ngrams and not self.char_ngrams:
            raise ValueError("at least one n-gram order is required")
        if any(n < 1 for n in self.word_ngrams + self.char_ngrams):
            raise ValueError("n-gram orders must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("adagrad", "sgd"):
            raise ValueError(f"optimizer must be 'adagrad' or 'sgd', got {self.optimizer!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["word_ngrams"] = list(self.word_ngrams)
        d["char_ngrams"] = list(self.char_ngrams)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        return cls(**{**d, "word_ngrams": tuple(d["word_ngrams"]), "char_ngrams": tuple(d["char_ngrams"])})

    def feature_key(self) -> tuple:
        return (self.feature_dims, self.word_ngrams, self.char_ngrams)


def feature_bucket(key: str, dims: int) -> int:
    return zlib.crc32(key.encode("utf-8")) % dims


def ngram_keys(text: str, word_ngrams: Sequence[int], char_ngrams: Sequence[int]) -> list[str]:
    words = [t.surface.casefold() for t in tokenize(text).tokens]
    keys = []
    for n in word_ngrams:
        for i in range(len(words) - n + 1):
            keys.append(f"w{n}:" + " ".join(words[i:i + n]))
    for n in char_ngrams:
        for w in words:
            for i in range(len(w) - n + 1):
                keys.append(f"c{n}:" + w[i:i + n])
    return keys


@dataclass(frozen=True)
class FeatureVector:
    """Sparse vector: sorted bucket indices and their (L2-normalized) values."""
    indices: np.ndarray
    values: np.ndarray
    dims: int

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dims)
        out[self.indices] = self.values
        return out


@lru_cache(maxsize=200_000)
def _featurize_cached(text: str, feature_key: tuple) -> FeatureVector:
    dims, word_ngrams, char_ngrams = feature_key
    counts: dict[int, int] = {}
    for key in ngram_keys(text, word_ngrams, char_ngrams):
        b = feature_bucket(key, dims)
        counts[b] = counts.get(b, 0) + 1
    idx = np.array(sorted(counts), dtype=np.int64)
    vals = np.array([counts[i] for i in idx], dtype=np.float64)
    if vals.size:
        vals /= np.sqrt(np.dot(vals, vals))
    idx.setflags(write=False)
    vals.setflags(write=False)
    return FeatureVector(idx, vals, dims)


def featurize(text: str, spec: ClassifierSpec, normalize: bool = True) -> FeatureVector:
    if normalize:
        return _featurize_cached(text, spec.feature_key())
    counts: dict[int, int] = {}
    for key in ngram_keys(text, spec.word_ngrams, spec.char_ngrams):
        b = feature_bucket(key, spec.feature_dims)
        counts[b] = counts.get(b, 0) + 1
    idx = np.array(sorted(counts), dtype=np.int64)
    return FeatureVector(idx, np.array([counts[i] for i in idx], dtype=np.float64), spec.feature_dims)


def feature_matrix(texts: Sequence[str], spec: ClassifierSpec) -> sp.csr_matrix:
    vecs = [featurize(t, spec) for t in texts]
    indptr = np.zeros(len(vecs) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([v.indices.size for v in vecs])
    if vecs:
        indices = np.concatenate([v.indices for v in vecs])
        data = np.concatenate([v.values for v in vecs])
    else:
        indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vecs), spec.feature_dims))


@dataclass(frozen=True)
class Prediction:
    prob_positive: float

    def __post_init__(self):
        p = self.prob_positive
        if not (math.isfinite(p) and 0.0 <= p <= 1.0):
            raise ValueError(f"invalid probability {p!r}")

    @property
    def probs(self) -> tuple[float, float]:
        return (self.prob_positive, 1.0 - self.prob_positive)

    @property
    def label(self) -> SentimentLabel:
        # exact tie goes to Positive
        return SentimentLabel.POSITIVE if self.prob_positive >= 0.5 else SentimentLabel.NEGATIVE

    @property
    def confidence(self) -> float:
        return max(self.probs)

    def to_dict(self) -> dict:
        return {"probs": list(self.probs), "label": self.label.value, "confidence": self.confidence}


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def training_digest(pairs: Sequence[tuple[str, SentimentLabel]], spec: ClassifierSpec) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(spec.to_dict(), sort_keys=True).encode())
    for text, label in pairs:
        h.update(json.dumps([text, SentimentLabel(label).value], ensure_ascii=False).encode())
        h.update(b"\n")
    return h.hexdigest()


@dataclass(frozen=True)
class Model:
    spec: ClassifierSpec
    weights: np.ndarray  # feature weights followed by the bias
    provenance: str = "pretrained"
    training_digest: str = ""
    _digest: str = field(default="", init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.shape != (self.spec.feature_dims + 1,):
            raise ValueError(f"weights must have length {self.spec.feature_dims + 1}")
        if not np.all(np.isfinite(w)):
            raise TrainingError("model weights are not finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        h = hashlib.sha256(w.tobytes())
        h.update(json.dumps(self.spec.to_dict(), sort_keys=True).encode())
        h.update(self.provenance.encode())
        object.__setattr__(self, "_digest", h.hexdigest())

    @classmethod
    def zeros(cls, spec: ClassifierSpec, provenance: str = "pretrained") -> "Model":
        return cls(spec, np.zeros(spec.feature_dims + 1), provenance)

    @property
    def digest(self) -> str:
        return self._digest

    def scores(self, X: sp.csr_matrix) -> np.ndarray:
        return X @ self.weights[:-1] + self.weights[-1]

    def predict(self, text: str) -> Prediction:
        return predict(self, text)

    def predict_many(self, texts: Sequence[str]) -> list[Prediction]:
        if not texts:
            return []
        probs = _sigmoid(self.scores(feature_matrix(texts, self.spec)))
        return [Prediction(float(p)) for p in probs]

    def with_provenance(self, provenance: str) -> "Model":
        return Model(self.spec, self.weights, provenance, self.training_digest)

    def save(self, path) -> None:
        meta = {"spec": self.spec.to_dict(), "provenance": self.provenance,
                "training_digest": self.training_digest}
        with open(path, "wb") as fh:
            np.savez(fh, weights=self.weights, meta=np.array(json.dumps(meta)))

    @classmethod
    def load(cls, path) -> "Model":
        with np.load(path) as z:
            meta = json.loads(str(z["meta"]))
            return cls(ClassifierSpec.from_dict(meta["spec"]), z["weights"],
                       meta["provenance"], meta["training_digest"])

    def close(self):
        pass


def predict(model: Model, text: str) -> Prediction:
    v = featurize(text, model.spec)
    z = float(np.dot(model.weights[v.indices], v.values) + model.weights[-1])
    return Prediction(float(_sigmoid(np.array([z]))[0]))


def _targets(labels: Iterable) -> np.ndarray:
    return np.array([1.0 if SentimentLabel(l) is SentimentLabel.POSITIVE else 0.0 for l in labels])


def _loss_grad(w: np.ndarray, X: sp.csr_matrix, y: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    z = X @ w[:-1] + w[-1]
    # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0
    margin = np.where(y > 0.5, -z, z)
    loss = float(np.mean(np.logaddexp(0.0, margin)) + 0.5 * l2 * np.dot(w[:-1], w[:-1]))
    r = (_sigmoid(z) - y) / len(y)
    grad = np.empty_like(w)
    grad[:-1] = X.T @ r + l2 * w[:-1]
    grad[-1] = r.sum()
    return loss, grad


def loss_and_gradient(model: Model, batch: Sequence[tuple[str, SentimentLabel]]) -> tuple[float, np.ndarray]:
    """Mean regularized logistic loss over ``batch`` and its exact gradient w.r.t. ``model.weights``."""
    if not batch:
        raise ValueError("empty batch")
    texts = [t for t, _ in batch]
    return _loss_grad(np.array(model.weights), feature_matrix(texts, model.spec),
                      _targets(l for _, l in batch), model.spec.l2)


def _check_classes(y: np.ndarray) -> None:
    if y.size == 0:
        raise TrainingError("no training examples")
    if y.min() == y.max():
        raise TrainingError("training data contains a single class")


def _batch_step(w: np.ndarray, Xb: sp.csr_matrix, yb: np.ndarray, l2: float):
    """Loss and gradient of one mini-batch, gradient restricted to the batch's active columns.

    Returns ``(loss, cols, g_cols, g_bias)``; with ``l2 > 0`` the regularizer's
    gradient on inactive columns is left to the caller.
    """
    z = Xb @ w[:-1] + w[-1]
    margin = np.where(yb > 0.5, -z, z)
    loss = float(np.mean(np.logaddexp(0.0, margin)))
    r = (_sigmoid(z) - yb) / len(yb)
    cols, inv = np.unique(Xb.indices, return_inverse=True)
    g_cols = np.bincount(inv, weights=Xb.data * np.repeat(r, np.diff(Xb.indptr)), minlength=cols.size)
    return loss, cols, g_cols, float(r.sum())


def train_epochs(pairs: Sequence[tuple[str, SentimentLabel]], spec: ClassifierSpec,
                 provenance: str = "pretrained") -> Iterator[Model]:
    """Yield the model after each epoch of seeded mini-batch descent from zero weights.

    ``optimizer="sgd"`` takes plain steps ``lr * grad``; ``"adagrad"`` divides
    each coordinate's step by the root of its accumulated squared gradients.
    """
    pairs = list(pairs)
    y = _targets(l for _, l in pairs)
    _check_classes(y)
    X = feature_matrix([t for t, _ in pairs], spec)
    digest = training_digest(pairs, spec)
    w = np.zeros(spec.feature_dims + 1)
    acc = np.zeros_like(w)
    adagrad = spec.optimizer == "adagrad"
    lr, l2, eps = spec.learning_rate, spec.l2, 1e-8
    n = len(pairs)
    for epoch in range(spec.epochs):
        order = rng_for(spec.seed, "sgd_epoch", epoch).permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = order[start:start + spec.batch_size]
            loss, cols, g_cols, g_bias = _batch_step(w, X[idx], y[idx], l2)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss in epoch {epoch + 1}; learning rate too large?")
            if l2 > 0:
                grad = l2 * w
                grad[-1] = g_bias
                grad[cols] += g_cols
                if adagrad:
                    acc += grad * grad
                    w -= lr * grad / (np.sqrt(acc) + eps)
                else:
                    w -= lr * grad
                continue
            if adagrad:
                acc[cols] += g_cols * g_cols
                acc[-1] += g_bias * g_bias
                w[cols] -= lr * g_cols / (np.sqrt(acc[cols]) + eps)
                w[-1] -= lr * g_bias / (math.sqrt(acc[-1]) + eps)
            else:
                w[cols] -= lr * g_cols
                w[-1] -= lr * g_bias
        if not np.all(np.isfinite(w)):
            raise TrainingError(f"non-finite weights after epoch {epoch + 1}; learning rate too large?")
        yield Model(spec, w.copy(), provenance, digest)


def train(pairs: Sequence[tuple[str, SentimentLabel]], spec: ClassifierSpec,
          provenance: str = "pretrained") -> Model:
    model = None
    for model in train_epochs(pairs, spec, provenance):
        pass
    return model


def full_loss(model: Model, pairs: Sequence[tuple[str, SentimentLabel]]) -> float:
    return loss_and_gradient(model, pairs)[0]


class LinearBackend:
    """Built-in backend. ``fit`` trains from scratch with a per-call seed."""

    def __init__(self, spec: ClassifierSpec | None = None):
        self.spec = spec or ClassifierSpec()

    def describe(self) -> dict:
        return {"backend": "linear", **self.spec.to_dict()}

    def fit(self, pairs, *, seed: int, provenance: str,
            checkpoint_score: Callable[[Model], float] | None = None) -> Model:
        spec = replace(self.spec, seed=seed)
        if checkpoint_score is None:
            return train(pairs, spec, provenance)
        best, best_score = None, -math.inf
        for model in train_epochs(pairs, spec, provenance):
            score = checkpoint_score(model)
            if score > best_score:
                best, best_score = model, score
        return best


class ExternalModel:
    """Handle on a child process that has been sent one ``train`` request."""

    def __init__(self, command: str, provenance: str, digest: str, proc: subprocess.Popen):
        self.command = command
        self.provenance = provenance
        self.training_digest = digest
        self.digest = hashlib.sha256(f"{command}\n{provenance}\n{digest}".encode()).hexdigest()
        self._proc = proc

    def _request(self, payload: dict) -> dict:
        proc = self._proc
        if proc is None or proc.poll() is not None:
            raise TransportError(f"child {self.command!r} is not running")
        try:
            proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as e:
            raise TransportError(f"lost connection to child {self.command!r}: {e}") from None
        if not line:
            raise TransportError(f"child {self.command!r} closed its output (exit code {proc.poll()})")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"malformed line from child: {line.strip()[:200]!r}") from None
        if not isinstance(reply, dict):
            raise ProtocolError(f"expected a JSON object, got {line.strip()[:200]!r}")
        return reply

    def predict(self, text: str) -> Prediction:
        reply = self._request({"op": "predict", "text": text})
        probs = reply.get("probs")
        if not (isinstance(probs, list) and len(probs) == 2
                and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs)):
            raise ProtocolError(f"expected 'probs' with two numbers, got {reply!r}")
        p_pos, p_neg = (float(p) for p in probs)
        if not (math.isfinite(p_pos) and math.isfinite(p_neg)):
            raise ProtocolError(f"non-finite probabilities {probs!r}")
        if p_pos < 0 or p_neg < 0 or abs(p_pos + p_neg - 1.0) > 1e-6:
            raise ProtocolError(f"probabilities {probs!r} do not form a distribution")
        return Prediction(p_pos / (p_pos + p_neg))

    def predict_many(self, texts: Sequence[str]) -> list[Prediction]:
        return [self.predict(t) for t in texts]

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        for stream in (proc.stdin, proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


class ExternalBackend:
    """Runs ``command`` once per trained model and speaks the JSON line protocol with it."""

    def __init__(self, command: str):
        self.command = command

    def describe(self) -> dict:
        return {"backend": "external", "command": self.command}

    def fit(self, pairs, *, seed: int, provenance: str, checkpoint_score=None) -> ExternalModel:
        pairs = list(pairs)
        try:
            proc = subprocess.Popen(shlex.split(self.command), stdin=subprocess.PIPE,
                                    stdout=subprocess.PIPE, text=True, encoding="utf-8", bufsize=1)
        except OSError as e:
            raise TransportError(f"cannot spawn {self.command!r}: {e}") from None
        digest = hashlib.sha256(json.dumps(
            [[t, SentimentLabel(l).value] for t, l in pairs], ensure_ascii=False).encode()).hexdigest()
        model = ExternalModel(self.command, provenance, digest, proc)
        reply = model._request({"op": "train", "seed": seed, "examples": [
            {"text": t, "label": SentimentLabel(l).value} for t, l in pairs]})
        if reply.get("ok") is not True:
            model.close()
            raise ProtocolError(f"child rejected train request: {reply!r}")
        return model


def external_adapter(command: str) -> ExternalBackend:
    return ExternalBackend(command)
