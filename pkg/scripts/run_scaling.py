"""Scaling measurements: query throughput and per-round training cost.

Writes the two scaling matrices (query time vs mode size, round time vs
tensor entries) as CSV files so the growth rates can be inspected or
plotted. Both should scale roughly with the logarithm of the size, not
the size itself.
"""

import argparse
import csv

from tencodec.bench import bench_compress_scaling, bench_query_scaling


def write_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("key", "metric", "value"))
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--query-sizes", default="8,12,16,20",
                    help="comma list of log2 largest-mode sizes")
    ap.add_argument("--queries", type=int, default=1 << 18)
    ap.add_argument("--compress-sizes", default="20,21,22,23",
                    help="comma list of log2 total entry counts")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--query-out", default="query_scaling.csv")
    ap.add_argument("--compress-out", default="compress_scaling.csv")
    args = ap.parse_args()

    qsizes = tuple(int(v) for v in args.query_sizes.split(","))
    rows = bench_query_scaling(seed=args.seed, n_queries=args.queries,
                               log2_sizes=qsizes)
    for key, metric, value in rows:
        print(f"  {key:>12}  {metric:18s} {value:.6f}", flush=True)
    write_csv(args.query_out, rows)

    csizes = tuple(int(v) for v in args.compress_sizes.split(","))
    rows = bench_compress_scaling(seed=args.seed, log2_entries=csizes)
    for key, metric, value in rows:
        print(f"  {key:>12}  {metric:18s} {value:.6f}", flush=True)
    write_csv(args.compress_out, rows)


if __name__ == "__main__":
    main()
