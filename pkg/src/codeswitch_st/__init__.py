"""Progressive self-training for code-switched sentiment classification."""

from .classifier import ClassifierSpec, LinearBackend, ExternalBackend, Model, Prediction
from .corpus import Dataset, DatasetKind, Example, SentimentLabel, load_dataset
from .langid import Lexicon, f_eng, tokenize
from .pipeline import (RunConfig, RunReport, run_minus_ratio, run_minus_source, run_no_pt,
                       run_progressive, run_supervised_bound, run_zero_shot)
from .synthgen import SynthConfig, generate

__version__ = "0.1.0"
