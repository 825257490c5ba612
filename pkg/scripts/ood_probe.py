"""OOD fractions per bucket for m_pt and m_1 across seeds on the synthetic benchmark.

    python3 scripts/ood_probe.py --seeds 0,1,2,3,4 --alphas 0.01,0.05,0.1
"""
import argparse
import statistics

from codeswitch_st.langid import LexiconDetector
from codeswitch_st.pipeline import RunConfig, run_ood_probe
from codeswitch_st.synthgen import SynthConfig, generate


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--alphas", default="0.01,0.05,0.1")
    ap.add_argument("--k", type=int, default=2)
    args = ap.parse_args()
    alphas = [float(a) for a in args.alphas.split(",")]

    table = {}
    for seed in (int(s) for s in args.seeds.split(",")):
        S, T, lexicon = generate(SynthConfig(seed=seed))
        reports, run = run_ood_probe(S, T, RunConfig(k=args.k, seed=seed), alphas, detector=LexiconDetector(lexicon))
        for r in reports:
            for key, frac in r.fractions.items():
                table.setdefault((r.alpha, *key), []).append(frac)

    print(f"{'alpha':>6s} {'model':>6s} {'bucket':>6s} {'OOD %':>8s}")
    for (alpha, model, bucket), fracs in sorted(table.items()):
        print(f"{alpha:6.2f} {model:>6s} {bucket:6d} {100 * statistics.fmean(fracs):8.2f}")


if __name__ == "__main__":
    main()
