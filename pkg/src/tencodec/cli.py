"""Command line interface.

JSON results go to stdout, progress logs to stderr. Exit codes: 1 for
malformed files or arguments, 2 for training divergence, 3 for domain
errors such as constant tensors.

Thread use of the underlying BLAS is capped with --threads (or the
TENCODEC_THREADS environment variable); the cap must be applied before
numpy loads, which is why this module sets environment variables first.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time

log = logging.getLogger("tencodec")


def _apply_thread_cap(argv):
    threads = None
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            threads = argv[i + 1]
        elif a.startswith("--threads="):
            threads = a.split("=", 1)[1]
    if threads is None:
        threads = os.environ.get("TENCODEC_THREADS")
    if threads is None:
        return  # leave the BLAS default (all logical cores)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[var] = str(threads)


def _build_parser():
    p = argparse.ArgumentParser(prog="tencodec",
                                description="Lossy neural tensor compressor")
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS threads (default: all logical cores, or "
                        "TENCODEC_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="fit a model to a tensor file")
    c.add_argument("-i", "--input", required=True)
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--rank", type=int, default=8)
    c.add_argument("--hidden", type=int, default=8)
    c.add_argument("--fold-matrix", default=None,
                   help="text file with one row of factors per mode")
    c.add_argument("--lr", type=float, default=1e-2)
    c.add_argument("--batch", type=int, default=1 << 16)
    c.add_argument("--epochs", type=int, default=5,
                   help="gradient passes per round")
    c.add_argument("--rounds", type=int, default=50)
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--sample-budget", type=int, default=4096,
                   help="entries per slice for swap deltas; 0 = exact")
    c.add_argument("--log", default=None, help="JSON-lines training log path")

    d = sub.add_parser("decompress", help="materialize the approximation")
    d.add_argument("-i", "--input", required=True)
    d.add_argument("-o", "--output", required=True)

    q = sub.add_parser("query", help="reconstruct single entries")
    q.add_argument("-i", "--input", required=True)
    q.add_argument("--index", required=True,
                   help="comma-separated 0-based coordinates")

    e = sub.add_parser("eval", help="fitness of an approximation")
    e.add_argument("--original", required=True)
    e.add_argument("--approx", required=True)

    s = sub.add_parser("stats", help="summary statistics of a tensor file")
    s.add_argument("-i", "--input", required=True)

    y = sub.add_parser("synth", help="generate a synthetic tensor")
    y.add_argument("-o", "--output", required=True)
    y.add_argument("--kind", choices=["random", "rank1", "smooth", "nttd"],
                   default="random")
    y.add_argument("--dims", required=True, help="comma-separated mode lengths")
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--rank", type=int, default=5, help="nttd generator rank")
    y.add_argument("--hidden", type=int, default=5, help="nttd generator width")

    b = sub.add_parser("bench", help="run an experiment matrix, write CSV")
    b.add_argument("matrix", choices=["compress-scaling", "query-scaling",
                                      "ablation", "tradeoff"])
    b.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--sizes", default=None,
                   help="comma-separated log2 sizes (query-scaling: largest "
                        "mode; compress-scaling: total entries)")
    b.add_argument("--queries", type=int, default=None,
                   help="query-scaling: queries per size")
    b.add_argument("--dims", default=None,
                   help="ablation/tradeoff: comma-separated tensor dims")
    return p


def _parse_index(text, arity=None):
    try:
        idx = tuple(int(v) for v in text.split(","))
    except ValueError as e:
        raise ValueError(f"bad --index {text!r}: {e}") from e
    if arity is not None and len(idx) != arity:
        raise ValueError(f"--index has {len(idx)} coordinates, tensor has {arity}")
    return idx


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _cmd_compress(args):
    from . import codec, folding, tensor, trainer

    t = tensor.load_tensor(args.input)
    spec = None
    if args.fold_matrix:
        spec = folding.load_factor_matrix(args.fold_matrix, t.dims)
    cfg = trainer.TrainConfig(
        lr=args.lr, batch_size=args.batch, epochs_per_round=args.epochs,
        max_rounds=args.rounds, tol=args.tol, seed=args.seed,
        sample_budget=args.sample_budget or None, log_path=args.log)
    log.info("compressing %s dims=%s rank=%d hidden=%d",
             args.input, t.dims, args.rank, args.hidden)
    artifact, report = trainer.compress(t, rank=args.rank, hidden=args.hidden,
                                        cfg=cfg, spec=spec)
    codec.save_artifact(artifact, args.output)
    sizes = codec.report_size(artifact)
    _emit({"fitness": report.final_fitness, "rounds": len(report.rounds),
           "seconds": report.seconds, "bytes": sizes["total_bytes"],
           "size": sizes})


def _cmd_decompress(args):
    from . import codec, tensor, trainer

    artifact = codec.load_artifact(args.input)
    rec = trainer.reconstruct_full(artifact)
    tensor.save_tensor(rec, args.output)
    _emit({"dims": list(rec.dims), "output": args.output})


def _cmd_query(args):
    from . import codec, trainer

    artifact = codec.load_artifact(args.input)
    idx = _parse_index(args.index, arity=len(artifact.dims))
    t0 = time.perf_counter()
    value = trainer.reconstruct_entry(artifact, idx)
    micros = (time.perf_counter() - t0) * 1e6
    _emit({"index": list(idx), "value": value, "micros": micros})


def _cmd_eval(args):
    from . import tensor

    orig = tensor.load_tensor(args.original)
    approx = tensor.load_tensor(args.approx)
    _emit({"fitness": tensor.fitness(orig, approx)})


def _cmd_stats(args):
    from . import tensor
    from .errors import DomainError

    t = tensor.load_tensor(args.input)
    try:
        smooth = tensor.smoothness(t)
    except DomainError:
        smooth = None
    values = t.values
    _emit({"dims": list(t.dims), "entries": t.size,
           "density": float(np.count_nonzero(values)) / t.size,
           "mean": float(values.mean()), "std": float(values.std()),
           "frobenius_norm": t.frobenius_norm(), "smoothness": smooth})


def _cmd_synth(args):
    from . import synth, tensor

    dims = _parse_index(args.dims)
    if any(n < 1 for n in dims):
        raise ValueError(f"bad --dims {args.dims!r}")
    if args.kind == "nttd":
        t = synth.synth_nttd(dims, seed=args.seed, rank=args.rank,
                             hidden=args.hidden)
    else:
        t = synth.KINDS[args.kind](dims, seed=args.seed)
    tensor.save_tensor(t, args.output)
    _emit({"dims": list(dims), "kind": args.kind, "output": args.output})


def _cmd_bench(args):
    from . import bench

    kwargs = {"seed": args.seed}
    if args.matrix == "query-scaling":
        if args.sizes:
            kwargs["log2_sizes"] = _parse_index(args.sizes)
        if args.queries:
            kwargs["n_queries"] = args.queries
    elif args.matrix == "compress-scaling":
        if args.sizes:
            kwargs["log2_entries"] = _parse_index(args.sizes)
    elif args.dims:
        kwargs["dims"] = _parse_index(args.dims)
    rows = bench.BENCHES[args.matrix](**kwargs)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(bench.CSV_HEADER)
        w.writerows(rows)
    finally:
        if args.output:
            out.close()
    if args.output:
        _emit({"matrix": args.matrix, "rows": len(rows), "output": args.output})


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    _apply_thread_cap(argv)

    global np
    import numpy as np  # after the thread cap so BLAS pools size correctly

    from .errors import DivergedError, DomainError, FormatError

    args = _build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {
        "compress": _cmd_compress,
        "decompress": _cmd_decompress,
        "query": _cmd_query,
        "eval": _cmd_eval,
        "stats": _cmd_stats,
        "synth": _cmd_synth,
        "bench": _cmd_bench,
    }[args.command]
    try:
        handler(args)
    except DivergedError as e:
        log.error("%s", e)
        return 2
    except DomainError as e:  # before ValueError: DomainError subclasses it
        log.error("%s", e)
        return 3
    except (FormatError, FileNotFoundError, IsADirectoryError, ValueError,
            IndexError) as e:
        log.error("%s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
