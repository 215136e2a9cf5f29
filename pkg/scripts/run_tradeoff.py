"""Rate-distortion sweep: fitness vs compressed size across ranks.

Compresses one tensor at several ranks and reports artifact size next
to reconstruction fitness, alongside a plain tensor-train truncation at
a similar byte budget for context.
"""

import argparse
import csv

from tencodec.bench import bench_tradeoff


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", default="64,32,32")
    ap.add_argument("--ranks", default="2,4,6,8,10")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--output", default="tradeoff.csv")
    args = ap.parse_args()

    dims = tuple(int(v) for v in args.dims.split(","))
    ranks = tuple(int(v) for v in args.ranks.split(","))
    rows = bench_tradeoff(seed=args.seed, dims=dims, ranks=ranks)
    for key, metric, value in rows:
        print(f"  {key:>16}  {metric:10s} {value:.6f}", flush=True)

    with open(args.output, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("key", "metric", "value"))
        w.writerows(rows)
    print(f"wrote {args.output} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
