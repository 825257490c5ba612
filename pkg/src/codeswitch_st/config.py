"""Flat ``key = value`` experiment config files.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Lists are comma-separated, booleans are ``true``/``false``, the synthetic mix
distribution is written ``ratio:weight, ratio:weight, ...``. Relative paths are
resolved against the config file's directory. Unknown keys are errors.
Precedence when the CLI builds a config: flags > file > defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .classifier import ClassifierSpec
from .pipeline import RunConfig
from .synthgen import SynthConfig


class ConfigError(ValueError):
    pass


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _ints(raw: str) -> tuple:
    return tuple(int(x) for x in raw.split(",") if x.strip())


def _floats(raw: str) -> tuple:
    return tuple(float(x) for x in raw.split(",") if x.strip())


def _mix(raw: str) -> tuple:
    out = []
    for part in raw.split(","):
        if not part.strip():
            continue
        ratio, _, weight = part.partition(":")
        out.append((float(ratio), float(weight or 1.0)))
    return tuple(out)


def _opt_str(raw: str):
    return raw.strip() or None


PATH_KEYS = {"source", "target", "lexicon", "out"}

# key -> parser
KEYS = {
    # data and detector
    "source": str, "target": str, "lexicon": _opt_str, "script_detector": _opt_str, "out": str,
    "backend_command": _opt_str,
    # run
    "method": str, "k": int, "delta": float, "seed": int, "selection_mode": str,
    "use_source_in_training": _bool, "upsample_source": _bool, "upsample_pseudo": _bool,
    "dev_fraction": float, "alphas": _floats,
    # classifier
    "feature_dims": int, "word_ngrams": _ints, "char_ngrams": _ints, "epochs": int,
    "learning_rate": float, "l2": float, "batch_size": int, "optimizer": str,
    # synthetic benchmark
    "synth_vocab_size_per_lang": int, "synth_polar_vocab_fraction": float,
    "synth_sentiment_word_fraction": float, "synth_polarity_agreement": float,
    "synth_sentence_length": _ints, "synth_mix_ratio_distribution": _mix,
    "synth_positive_fraction": float, "synth_n_source": int, "synth_n_target": int,
    "synth_label_noise": float,
    # sweep
    "sweep_k": _ints, "sweep_delta": _floats, "sweep_seeds": _ints, "jobs": int,
}

CLASSIFIER_KEYS = ("feature_dims", "word_ngrams", "char_ngrams", "epochs", "learning_rate", "l2",
                   "batch_size", "optimizer")
RUN_KEYS = ("k", "delta", "seed", "selection_mode", "use_source_in_training", "upsample_source",
            "upsample_pseudo", "dev_fraction", "backend_command")


def parse_text(text: str, base_dir: Path | None = None) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            value = KEYS[key](raw.strip())
        except (ValueError, TypeError) as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {e}") from None
        if key in PATH_KEYS and value and base_dir is not None and not Path(value).is_absolute():
            value = str(base_dir / value)
        values[key] = value
    return values


def load_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_text(text, path.parent)


@dataclass
class Settings:
    """Merged view of defaults, config file and flags."""
    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def merged(self, overrides: dict) -> "Settings":
        for key in overrides:
            if key not in KEYS:
                raise ConfigError(f"unknown key {key!r}")
        return Settings({**self.values, **{k: v for k, v in overrides.items() if v is not None}})

    def classifier_spec(self) -> ClassifierSpec:
        kw = {k: self.values[k] for k in CLASSIFIER_KEYS if k in self.values}
        return ClassifierSpec(**kw)

    def detector(self) -> str:
        lexicon, script = self.values.get("lexicon"), self.values.get("script_detector")
        if lexicon and script:
            raise ConfigError("give either a lexicon or a script detector, not both")
        if lexicon:
            return f"lexicon:{lexicon}"
        return f"script:{script or 'latin'}"

    def run_config(self) -> RunConfig:
        kw = {k: self.values[k] for k in RUN_KEYS if k in self.values}
        try:
            return RunConfig(classifier=self.classifier_spec(), detector=self.detector(), **kw)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def synth_config(self) -> SynthConfig:
        kw = {f.name: self.values[f"synth_{f.name}"] for f in fields(SynthConfig)
              if f"synth_{f.name}" in self.values}
        if "seed" in self.values:
            kw["seed"] = self.values["seed"]
        try:
            return SynthConfig(**kw)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def with_seed(self, seed: int) -> "Settings":
        return Settings({**self.values, "seed": seed})


def settings_from(path=None, overrides: dict | None = None) -> Settings:
    base = Settings(load_file(path)) if path else Settings()
    return base.merged(overrides or {})
