"""Command-line entry point: ``codeswitch-st <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print one
JSON line ``{"error": ..., "type": ..., "command": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

from .classifier import Model
from .config import ConfigError, Settings, settings_from
from .corpus import DatasetKind, load_dataset
from .curriculum import ScoredExample, bucket_stats, histogram, make_buckets
from .evaluation import evaluate, per_bucket_metrics
from .pipeline import RunReport, pretrain_source, resolve_detector, run_method, run_ood_probe, source_split
from .synthgen import write_corpus

log = logging.getLogger("codeswitch_st")

METHODS = ("progressive", "no_pt", "zero_shot", "minus_source", "minus_ratio", "supervised")
DEFAULT_ALPHAS = (0.01, 0.05, 0.10)


class UsageError(Exception):
    pass


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False) + "\n"


def _out_dir(settings: Settings) -> Path:
    out = settings.get("out")
    if not out:
        raise UsageError("an output directory is required (--out or 'out =' in the config)")
    return Path(out)


def _require(settings: Settings, *keys):
    missing = [k for k in keys if not settings.get(k)]
    if missing:
        raise UsageError(f"missing required setting(s): {', '.join(missing)}")


def _load_source(settings: Settings):
    _require(settings, "source")
    return load_dataset(settings.get("source"), kind=DatasetKind.SOURCE_LABELED)


def _load_target(settings: Settings):
    _require(settings, "target")
    return load_dataset(settings.get("target"), kind=DatasetKind.TARGET_WITH_HIDDEN_GOLD)


def metrics_document(report: RunReport, golds: dict, method: str) -> dict | None:
    if len(golds) != len(report.final_predictions):
        return None
    preds = report.predictions()
    per_bucket = per_bucket_metrics(preds, report.bucket_ids(), golds)
    return {"method": method, "seed": report.config["seed"],
            "global": evaluate(preds, golds).to_dict(),
            "per_bucket": {str(i): m.to_dict() for i, m in per_bucket.items()}}


def execute_run(settings: Settings, method: str) -> tuple[RunReport, dict | None]:
    config = settings.run_config()
    source = _load_source(settings) if method != "supervised" else None
    target = _load_target(settings)
    report = run_method(method, source, target, config)
    try:
        return report, metrics_document(report, target.golds(), method)
    finally:
        report.close()


def cmd_synth(settings: Settings) -> int:
    out = _out_dir(settings)
    synth = settings.synth_config()
    info = write_corpus(synth, out)
    _write(out, "synth.json", _dump({"config": synth.to_dict(), "digest": info["digest"],
                                     "files": {k: Path(v).name for k, v in info.items() if k != "digest"}}))
    print(info["digest"])
    return 0


def cmd_pretrain(settings: Settings) -> int:
    out = _out_dir(settings)
    config = settings.run_config()
    source = _load_source(settings)
    model = pretrain_source(source, config)
    _, dev = source_split(source, config)
    preds = dict(zip(dev.ids, model.predict_many([ex.text for ex in dev])))
    doc = {"provenance": model.provenance, "digest": model.digest, "config": config.to_dict(),
           "dev_metrics": evaluate(preds, dev.golds()).to_dict()}
    if isinstance(model, Model):
        out.mkdir(parents=True, exist_ok=True)
        model.save(out / "model.npz")
    model.close()
    _write(out, "pretrain.json", _dump(doc))
    return 0


def cmd_run(settings: Settings, method: str) -> int:
    out = _out_dir(settings)
    report, metrics = execute_run(settings, method)
    _write(out, "report.json", report.to_json())
    if metrics is not None:
        _write(out, "metrics.json", _dump(metrics))
    else:
        log.warning("target has no gold labels; metrics.json not written")
    return 0


def _sweep_cell(args):
    values, method, k, delta, seed = args
    settings = Settings(values).merged({"k": k, "delta": delta, "seed": seed})
    try:
        report, metrics = execute_run(settings, method)
    except Exception as e:  # recorded per cell
        return {"k": k, "delta": delta, "seed": seed, "error": f"{type(e).__name__}: {e}"}
    if metrics is None:
        return {"k": k, "delta": delta, "seed": seed, "error": "target has no gold labels"}
    g = metrics["global"]
    return {"k": k, "delta": delta, "seed": seed, "macro_f1": g["macro_f1"], "micro_f1": g["micro_f1"],
            "weighted_f1": g["weighted_f1"], "error": ""}


def _mean_std(xs: list[float]) -> tuple[float, float]:
    if not xs:
        return float("nan"), float("nan")
    return statistics.fmean(xs), statistics.stdev(xs) if len(xs) > 1 else 0.0


def aggregate_sweep(rows: list[dict]) -> list[dict]:
    """Mean and sample standard deviation over seeds for each (k, delta) cell."""
    cells = {}
    for row in rows:
        cells.setdefault((row["k"], row["delta"]), []).append(row)
    out = []
    for (k, delta), group in cells.items():
        ok = [r for r in group if not r["error"]]
        entry = {"k": k, "delta": delta, "n_seeds": len(ok), "n_failed": len(group) - len(ok)}
        for metric in ("macro_f1", "micro_f1", "weighted_f1"):
            mean, std = _mean_std([r[metric] for r in ok])
            entry[f"{metric}_mean"], entry[f"{metric}_std"] = mean, std
        out.append(entry)
    return out


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_sweep(settings: Settings, method: str) -> int:
    out = _out_dir(settings)
    ks = settings.get("sweep_k") or (settings.get("k", 2),)
    deltas = settings.get("sweep_delta") or (settings.get("delta", 0.5),)
    seeds = settings.get("sweep_seeds") or (settings.get("seed", 0),)
    jobs = settings.get("jobs", 1)
    tasks = [(settings.values, method, k, d, s) for k, d, s in product(ks, deltas, seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    cols = ["k", "delta", "seed", "macro_f1", "micro_f1", "weighted_f1", "error"]
    _write(out, "sweep_runs.csv", _csv(rows, cols))
    agg = aggregate_sweep(rows)
    agg_cols = ["k", "delta", "n_seeds", "n_failed"] + [f"{m}_{s}" for m in ("macro_f1", "micro_f1", "weighted_f1")
                                                       for s in ("mean", "std")]
    _write(out, "sweep.csv", _csv(agg, agg_cols))
    failed = [r for r in rows if r["error"]]
    for r in failed:
        log.error("cell k=%s delta=%s seed=%s failed: %s", r["k"], r["delta"], r["seed"], r["error"])
    return 1 if failed else 0


def cmd_probe_ood(settings: Settings) -> int:
    out = _out_dir(settings)
    config = settings.run_config()
    alphas = settings.get("alphas") or DEFAULT_ALPHAS
    reports, run = run_ood_probe(_load_source(settings), _load_target(settings), config, alphas)
    doc = {"seed": config.seed, "models": {"m_pt": run.models[0]["digest"], "m_1": run.models[1]["digest"]},
           "alphas": list(alphas), "reports": [r.to_dict() for r in reports]}
    rows = [{"seed": config.seed, "alpha": r.alpha, "model": m, "bucket": b, "fraction": f,
             "p_alpha": r.p_alpha[m]}
            for r in reports for (m, b), f in sorted(r.fractions.items())]
    run.close()
    _write(out, "ood.json", _dump(doc))
    _write(out, "ood.csv", _csv(rows, ["seed", "alpha", "model", "bucket", "fraction", "p_alpha"]))
    return 0


def cmd_bucket_stats(settings: Settings) -> int:
    out = _out_dir(settings)
    target = _load_target(settings)
    detector = resolve_detector(settings.detector())
    k = settings.get("k", 2)
    scored = [ScoredExample(ex, float(detector(ex.text))) for ex in target]
    buckets = make_buckets(scored, k)
    rows, text = histogram([s.f_eng for s in scored])
    doc = {"detector": detector.describe(), "k": k, "n": len(scored),
           "buckets": bucket_stats(buckets), "histogram": rows}
    _write(out, "bucket_stats.json", _dump(doc))
    _write(out, "histogram.txt", text + "\n")
    print(text)
    return 0


def cmd_eval(settings: Settings, report_path: str) -> int:
    out = _out_dir(settings)
    target = _load_target(settings)
    data = json.loads(Path(report_path).read_text(encoding="utf-8"))
    report = RunReport(data["config"], data["models"], data["buckets"], data.get("selection", {}),
                       data["pseudo_labels"], data["final_predictions"], data["flags"])
    metrics = metrics_document(report, target.golds(), settings.get("method", "unknown"))
    if metrics is None:
        raise ValueError("gold labels do not cover every predicted id")
    _write(out, "metrics.json", _dump(metrics))
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--lexicon", help="resource-rich lexicon, one word per line")
    p.add_argument("--script-detector", dest="script_detector",
                   choices=("latin", "devanagari", "tamil", "other"))
    p.add_argument("--source", help="labeled source dataset (tsv/csv/jsonl)")
    p.add_argument("--target", help="target dataset (tsv/csv/jsonl)")
    p.add_argument("--k", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("-v", "--verbose", action="store_true")


def _int_list(raw: str) -> tuple:
    return tuple(int(x) for x in raw.split(","))


def _float_list(raw: str) -> tuple:
    return tuple(float(x) for x in raw.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codeswitch-st", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("synth", "write the synthetic benchmark"), ("pretrain", "train m_pt on the source"),
                            ("run", "run one method end to end"), ("sweep", "grid over k, delta and seeds"),
                            ("probe-ood", "OOD fractions for m_pt and m_1"),
                            ("bucket-stats", "per-bucket f_eng statistics and histogram"),
                            ("eval", "metrics for a saved report")]:
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name in ("run", "sweep", "eval"):
            p.add_argument("--method", choices=METHODS)
        if name == "sweep":
            p.add_argument("--ks", type=_int_list, dest="sweep_k", help="comma-separated k values")
            p.add_argument("--deltas", type=_float_list, dest="sweep_delta", help="comma-separated deltas")
            p.add_argument("--seeds", type=_int_list, dest="sweep_seeds", help="comma-separated seeds")
            p.add_argument("--jobs", type=int)
        if name == "probe-ood":
            p.add_argument("--alphas", type=_float_list)
        if name == "eval":
            p.add_argument("--report", required=True, help="report.json written by 'run'")
    return parser


OVERRIDE_KEYS = ("out", "seed", "lexicon", "script_detector", "source", "target", "k", "delta", "method",
                 "sweep_k", "sweep_delta", "sweep_seeds", "jobs", "alphas")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = {k: getattr(args, k) for k in OVERRIDE_KEYS if getattr(args, k, None) is not None}
    try:
        settings = settings_from(args.config, overrides)
        if args.command in ("run", "sweep"):
            method = settings.get("method", "progressive")
            if method not in METHODS:
                raise UsageError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
        handlers = {
            "synth": lambda: cmd_synth(settings),
            "pretrain": lambda: cmd_pretrain(settings),
            "run": lambda: cmd_run(settings, method),
            "sweep": lambda: cmd_sweep(settings, method),
            "probe-ood": lambda: cmd_probe_ood(settings),
            "bucket-stats": lambda: cmd_bucket_stats(settings),
            "eval": lambda: cmd_eval(settings, args.report),
        }
        return handlers[args.command]()
    except (UsageError, ConfigError) as e:
        print(json.dumps({"error": str(e), "type": type(e).__name__, "command": args.command}), file=sys.stderr)
        return 2
    except Exception as e:
        if args.verbose:
            log.exception("command failed")
        print(json.dumps({"error": str(e), "type": type(e).__name__, "command": args.command}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
