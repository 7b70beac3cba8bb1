#!/usr/bin/env python3
"""Run the separability, concurrency and brand-split sweeps and write one CSV each.

Example:
    python3 scripts/run_experiments.py --out-dir results --seeds 5
"""

import argparse
import csv
import time
from pathlib import Path

from hfsg.bench import EXPERIMENTS, MODELS, count_inversions, run_experiment
from hfsg.config import RunConfig
from hfsg.corpus import pseudo_real_corpus
from hfsg.latent import fit_pca, load_model

TREND = {"separability": "increasing", "concurrency": "decreasing", "brand": "decreasing"}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--model", help="PCAMOD file; default fits one on a pseudo-real corpus")
    ap.add_argument("--experiments", default=",".join(EXPERIMENTS))
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = load_model(args.model) if args.model else fit_pca(pseudo_real_corpus(200, seed=0),
                                                             variance_threshold=0.99)
    print(f"latent space: L={model.n_components}, T={model.n_samples}")

    for name in args.experiments.split(","):
        preset, values = EXPERIMENTS[name]
        t0 = time.perf_counter()
        res = run_experiment(name, RunConfig(**preset), model, values, MODELS, range(args.seeds))
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sweep_value", "model", "seed", "r2"])
            w.writerows(res.records)
        print(f"\n{name} ({time.perf_counter() - t0:.0f} s), median R2 over {args.seeds} seeds")
        print(f"  {res.parameter:>8}  " + "  ".join(f"{v:>7}" for v in res.values))
        for m in res.models():
            med = res.table(m)
            inv = count_inversions(med, TREND[name])
            print(f"  {m:>8}  " + "  ".join(f"{r:7.3f}" for r in med) + f"   inversions={inv}")


if __name__ == "__main__":
    main()
