"""Ablation study over several seeds: how much each pipeline stage buys.

Compresses shuffled-smooth tensors with order updates, with initial
orders only, with identity orders, and compares against a plain
tensor-train truncation of the folded tensor at matched parameter count.
Prints one row per (seed, variant) plus medians, and optionally a CSV.
"""

import argparse
import csv
import statistics

from tencodec.bench import ablation_variants
from tencodec.synth import synth_shuffled_smooth
from tencodec.trainer import TrainConfig

VARIANTS = ("full", "no_updates", "no_reorder", "baseline_folded")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", default="64,32,32")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--rank", type=int, default=8)
    ap.add_argument("--hidden", type=int, default=8)
    ap.add_argument("--rounds", type=int, default=6)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("-o", "--output", help="also write rows as CSV")
    args = ap.parse_args()

    dims = tuple(int(v) for v in args.dims.split(","))
    cfg = TrainConfig(max_rounds=args.rounds, epochs_per_round=args.epochs,
                      tol=0.0)
    rows = []
    fits = {v: [] for v in VARIANTS}
    for seed in range(args.seeds):
        t, _ = synth_shuffled_smooth(dims, seed=seed)
        out = ablation_variants(t, rank=args.rank, hidden=args.hidden, cfg=cfg)
        for name in VARIANTS:
            rec = out[name]
            fits[name].append(rec["fitness"])
            rows.append((seed, name, rec["fitness"], rec["seconds"],
                         rec["bytes"]))
            print(f"seed {seed}  {name:16s} fitness {rec['fitness']:.4f}  "
                  f"{rec['seconds']:7.1f}s  {rec['bytes']} bytes", flush=True)

    print("\nmedian fitness over seeds:")
    for name in VARIANTS:
        print(f"  {name:16s} {statistics.median(fits[name]):.4f}")

    if args.output:
        with open(args.output, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(("seed", "variant", "fitness", "seconds", "bytes"))
            w.writerows(rows)
        print(f"\nwrote {args.output}")


if __name__ == "__main__":
    main()
