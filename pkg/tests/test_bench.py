"""Synthetic-tensor generators and the benchmark matrices behind `bench`."""

import statistics

import numpy as np
import pytest

from tencodec.bench import (CSV_HEADER, _cube_dims, ablation_variants,
                            bench_ablation, bench_compress_scaling,
                            bench_query_scaling, bench_tradeoff)
from tencodec.synth import (KINDS, synth_nttd, synth_random, synth_rank1,
                            synth_shuffled_smooth, synth_smooth)
from tencodec.tensor import smoothness
from tencodec.trainer import TrainConfig


class TestSynth:
    def test_random_range_and_shape(self):
        t = synth_random((9, 5, 4), seed=3)
        assert t.dims == (9, 5, 4)
        assert t.values.min() >= 0.0 and t.values.max() < 1.0

    def test_random_deterministic(self):
        a = synth_random((6, 6), seed=11)
        b = synth_random((6, 6), seed=11)
        c = synth_random((6, 6), seed=12)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_rank1_is_rank_one(self):
        t = synth_rank1((8, 6, 5), seed=2)
        mat = t.data.reshape(8, -1)
        s = np.linalg.svd(mat, compute_uv=False)
        assert s[1] <= 1e-12 * s[0]
        assert t.values.min() > 0  # separable factors stay positive

    def test_smooth_is_smoother_than_random(self):
        dims = (20, 16, 12)
        assert smoothness(synth_smooth(dims, seed=0)) > \
            smoothness(synth_random(dims, seed=0))

    def test_shuffle_hides_smoothness(self):
        base = synth_smooth((20, 16, 12), seed=4)
        shuffled, _ = synth_shuffled_smooth((20, 16, 12), seed=4)
        assert smoothness(shuffled) < smoothness(base)

    def test_shuffle_inverse_restores_base(self):
        dims = (10, 8, 6)
        shuffled, hidden = synth_shuffled_smooth(dims, seed=9)
        base = synth_smooth(dims, seed=9)
        restored = shuffled.apply_permutation(hidden.inverse())
        assert np.array_equal(restored.values, base.values)

    def test_nttd_matches_generator(self):
        from tencodec.model import generate_random_nttd_tensor
        a = synth_nttd((6, 5), seed=3, rank=2, hidden=3)
        b = generate_random_nttd_tensor((6, 5), 2, 3, seed=3)
        assert np.array_equal(a.values, b.values)

    def test_kind_registry(self):
        assert set(KINDS) == {"random", "rank1", "smooth", "nttd"}
        for fn in KINDS.values():
            assert fn((4, 3), seed=0).dims == (4, 3)


class TestCubeDims:
    def test_exact_entry_counts(self):
        for lg in range(6, 24):
            dims = _cube_dims(lg)
            assert len(dims) == 3
            assert int(np.prod(dims)) == 1 << lg

    def test_known_splits(self):
        assert _cube_dims(20) == (128, 128, 64)
        assert _cube_dims(21) == (128, 128, 128)
        assert _cube_dims(23) == (256, 256, 128)


class TestQueryScaling:
    def test_one_row_per_size(self):
        rows = bench_query_scaling(seed=0, n_queries=16, log2_sizes=(6, 7))
        assert [r[0] for r in rows] == [64, 128]
        for key, metric, value in rows:
            assert metric == "query_seconds"
            assert value > 0

    def test_header_shape(self):
        assert CSV_HEADER == ("key", "metric", "value")


class TestCompressScaling:
    def test_metrics_per_size(self):
        rows = bench_compress_scaling(seed=0, log2_entries=(12,))
        assert all(key == 4096 for key, _, _ in rows)
        by_metric = {metric: value for _, metric, value in rows}
        assert set(by_metric) == {"tsp_init_seconds", "epoch_seconds",
                                  "reorder_seconds", "round_seconds"}
        assert all(v > 0 for v in by_metric.values())
        assert by_metric["round_seconds"] == pytest.approx(
            by_metric["epoch_seconds"] + by_metric["reorder_seconds"])


class TestAblation:
    def test_variant_keys_and_rows(self):
        cfg = TrainConfig(lr=0.02, batch_size=256, epochs_per_round=4,
                          max_rounds=1, tol=0.0, seed=0, sample_budget=None)
        rows = bench_ablation(seed=0, dims=(8, 6, 5), cfg=cfg)
        names = {key for key, _, _ in rows}
        assert names == {"full", "no_updates", "no_reorder", "baseline_folded"}
        metrics = {metric for _, metric, _ in rows}
        assert metrics == {"fitness", "seconds", "bytes"}
        assert len(rows) == 12

    def test_component_ordering_at_median(self):
        # each pipeline stage should help, judged at the median over seeds:
        # order updates on top of TSP init on top of identity orders
        cfg = TrainConfig(lr=0.02, batch_size=512, epochs_per_round=25,
                          max_rounds=5, tol=0.0, seed=7, sample_budget=None)
        fits = {"full": [], "no_updates": [], "no_reorder": []}
        for seed in range(5):
            t, _ = synth_shuffled_smooth((16, 12, 10), seed=seed)
            out = ablation_variants(t, rank=3, hidden=3, cfg=cfg)
            for k in fits:
                fits[k].append(out[k]["fitness"])
        med = {k: statistics.median(v) for k, v in fits.items()}
        assert med["full"] >= med["no_updates"] >= med["no_reorder"]


class TestTradeoff:
    def test_rows_and_monotone_bytes(self):
        rows = bench_tradeoff(seed=0, dims=(8, 8, 8), ranks=(2, 3))
        assert len(rows) == 4
        by_metric = {}
        for key, metric, value in rows:
            by_metric.setdefault(metric, []).append((key, value))
        assert set(by_metric) == {"nttd_fitness", "ttsvd_fitness"}
        nttd_bytes = [key for key, _ in by_metric["nttd_fitness"]]
        assert nttd_bytes[0] < nttd_bytes[1]  # bigger rank, bigger artifact
        for _, fit in by_metric["nttd_fitness"] + by_metric["ttsvd_fitness"]:
            assert np.isfinite(fit) and fit <= 1.0
