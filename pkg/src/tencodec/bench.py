"""Benchmark matrices behind the `tencodec bench` subcommand.

Every benchmark returns rows of (key, metric, value); timing metrics carry
seconds. Keys are entry counts, mode lengths, byte budgets, or variant
names depending on the matrix.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from .codec import CompressedArtifact, report_size
from .folding import auto_folding_spec
from .model import Adam, NttdHyper, NttdParams, param_count
from .reorder import init_orders_tsp, update_orders
from .tensor import PermutationSet, fitness
from .trainer import TrainConfig, compress, reconstruct_entry, reconstruct_full, \
    train_round, _standardize
from .ttd import variant_n, variant_n_fitness
from . import synth

CSV_HEADER = ("key", "metric", "value")


def _random_artifact(dims, rank=8, hidden=8, seed=0) -> CompressedArtifact:
    spec = auto_folding_spec(dims)
    params = NttdParams.init(NttdHyper(rank, hidden, spec.folded_dims), seed)
    perms = PermutationSet.random(dims, seed=seed)
    return CompressedArtifact(spec, params, perms, 0.0, 1.0, seed)


def bench_query_scaling(seed=0, n_queries=1 << 14, log2_sizes=range(6, 15)):
    """Mean single-entry reconstruction latency as the largest mode grows."""
    rows = []
    rng = np.random.default_rng(seed)
    for lg in log2_sizes:
        n = 1 << lg
        art = _random_artifact((n, 8, 8), seed=seed)
        queries = np.stack([rng.integers(0, m, size=n_queries)
                            for m in art.dims], axis=1)
        reconstruct_entry(art, queries[0])  # warm up
        t0 = time.perf_counter()
        for q in queries:
            reconstruct_entry(art, q)
        dt = (time.perf_counter() - t0) / n_queries
        rows.append((n, "query_seconds", dt))
    return rows


def _cube_dims(log2_entries):
    # split the exponent across three modes as evenly as possible
    base, rem = divmod(log2_entries, 3)
    return tuple(1 << (base + (1 if i < rem else 0)) for i in range(3))


def bench_compress_scaling(seed=0, log2_entries=(20, 21, 22, 23)):
    """Per-round time (one epoch + one full-budget order sweep) vs entries."""
    cfg = TrainConfig(epochs_per_round=1, sample_budget=None, seed=seed)
    rows = []
    for lg in log2_entries:
        dims = _cube_dims(lg)
        t = synth.synth_random(dims, seed=seed)
        y, _, _ = _standardize(t)
        spec = auto_folding_spec(dims)
        params = NttdParams.init(NttdHyper(8, 8, spec.folded_dims), seed)
        rng = np.random.default_rng(seed)

        t0 = time.perf_counter()
        perms = init_orders_tsp(y, seed=seed)
        rows.append((t.size, "tsp_init_seconds", time.perf_counter() - t0))

        opt = Adam(lr=cfg.lr)
        t0 = time.perf_counter()
        train_round(params, opt, y, perms, spec, cfg, rng)
        epoch_s = time.perf_counter() - t0
        rows.append((t.size, "epoch_seconds", epoch_s))

        t0 = time.perf_counter()
        update_orders(y, perms, params, spec, seed=seed, sample_budget=None)
        reorder_s = time.perf_counter() - t0
        rows.append((t.size, "reorder_seconds", reorder_s))
        rows.append((t.size, "round_seconds", epoch_s + reorder_s))
    return rows


def ablation_variants(t, rank=8, hidden=8, cfg: TrainConfig | None = None):
    """Fitness of the full pipeline and its ablations on one tensor.

    full: TSP init + order updates; no_updates: TSP init only;
    no_reorder: identity orders throughout; baseline_folded: plain TT-SVD
    on the folded tensor at a matching parameter budget.
    """
    cfg = cfg or TrainConfig(max_rounds=6, epochs_per_round=20)
    out = {}
    variants = {
        "full": dict(tsp_init=True, order_updates=True),
        "no_updates": dict(tsp_init=True, order_updates=False),
        "no_reorder": dict(tsp_init=False, order_updates=False),
    }
    for name, flags in variants.items():
        vcfg = dataclasses.replace(cfg, **flags)
        art, rep = compress(t, rank=rank, hidden=hidden, cfg=vcfg)
        out[name] = {"fitness": fitness(t, reconstruct_full(art)),
                     "seconds": rep.seconds,
                     "bytes": report_size(art)["total_bytes"]}
    spec = auto_folding_spec(t.dims)
    budget = param_count(NttdHyper(rank, hidden, spec.folded_dims))
    t0 = time.perf_counter()
    cores, mean, std = variant_n(t, spec, budget)
    out["baseline_folded"] = {
        "fitness": variant_n_fitness(t, spec, cores, mean, std),
        "seconds": time.perf_counter() - t0,
        "bytes": 8 * sum(c.size for c in cores.cores),
    }
    return out


def bench_ablation(seed=0, dims=(64, 32, 32), cfg: TrainConfig | None = None):
    t, _ = synth.synth_shuffled_smooth(dims, seed=seed)
    rows = []
    for name, rec in ablation_variants(t, cfg=cfg).items():
        for metric in ("fitness", "seconds", "bytes"):
            rows.append((name, metric, rec[metric]))
    return rows


def bench_tradeoff(seed=0, dims=(32, 32, 32), ranks=(2, 4, 6, 8)):
    """Fitness against artifact bytes for the model and the TT baseline."""
    t = synth.synth_smooth(dims, seed=seed)
    spec = auto_folding_spec(dims)
    cfg = TrainConfig(max_rounds=4, epochs_per_round=15, seed=seed)
    rows = []
    for r in ranks:
        art, _ = compress(t, rank=r, hidden=r, cfg=cfg, spec=spec)
        nbytes = report_size(art)["total_bytes"]
        rows.append((nbytes, "nttd_fitness", fitness(t, reconstruct_full(art))))
        budget = param_count(art.hyper)
        cores, mean, std = variant_n(t, spec, budget)
        rows.append((nbytes, "ttsvd_fitness",
                     variant_n_fitness(t, spec, cores, mean, std)))
    return rows


BENCHES = {
    "query-scaling": bench_query_scaling,
    "compress-scaling": bench_compress_scaling,
    "ablation": bench_ablation,
    "tradeoff": bench_tradeoff,
}
