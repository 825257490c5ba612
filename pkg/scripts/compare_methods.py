"""Every method on the synthetic benchmark over several seeds.

Prints global and per-bucket macro-F1 (mean and sample std over seeds) and a
paired t-test of progressive against each baseline on bucket 2.

    python3 scripts/compare_methods.py --seeds 0,1,2,3,4
"""
import argparse
import statistics
import time

from codeswitch_st.evaluation import EvaluationError, evaluate, paired_t_test, per_bucket_metrics
from codeswitch_st.langid import LexiconDetector
from codeswitch_st.pipeline import RunConfig, run_method
from codeswitch_st.synthgen import SynthConfig, generate

METHODS = ["progressive", "no_pt", "zero_shot", "minus_source", "minus_ratio", "supervised"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--delta", type=float, default=0.5)
    ap.add_argument("--methods", default=",".join(METHODS))
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    methods = args.methods.split(",")

    scores = {m: {"all": [], **{b: [] for b in range(1, args.k + 1)}} for m in methods}
    for seed in seeds:
        S, T, lexicon = generate(SynthConfig(seed=seed))
        det, golds = LexiconDetector(lexicon), T.golds()
        config = RunConfig(k=args.k, delta=args.delta, seed=seed)
        for m in methods:
            t0 = time.perf_counter()
            report = run_method(m, S, T, config, detector=det)
            scores[m]["all"].append(100 * evaluate(report.predictions(), golds).macro_f1)
            for b, r in per_bucket_metrics(report.predictions(), report.bucket_ids(), golds).items():
                scores[m][b].append(100 * r.macro_f1)
            print(f"seed {seed} {m:<13s} macro-F1 {scores[m]['all'][-1]:5.1f} ({time.perf_counter() - t0:.1f}s)")

    def cell(xs):
        return f"{statistics.fmean(xs):5.1f} ± {statistics.stdev(xs) if len(xs) > 1 else 0.0:3.1f}"

    cols = ["all"] + list(range(1, args.k + 1))
    print("\nmethod         " + "".join(f"{('T' if c == 'all' else f'B_{c}'):>14s}" for c in cols))
    for m in methods:
        print(f"{m:<15s}" + "".join(f"{cell(scores[m][c]):>14s}" for c in cols))

    if "progressive" in methods and len(seeds) > 1:
        last = args.k
        print(f"\npaired t-test on B_{last}, progressive vs ...")
        for m in methods:
            if m == "progressive":
                continue
            try:
                t, p = paired_t_test(scores["progressive"][last], scores[m][last])
                print(f"  {m:<13s} t = {t:7.3f}  p = {p:.4f}")
            except EvaluationError as e:
                print(f"  {m:<13s} {e}")


if __name__ == "__main__":
    main()
