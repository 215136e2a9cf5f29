"""Compression loop: alternate gradient epochs with order updates.

The tensor is standardized once (mean/std stored in the artifact). Each
round shuffles every non-padded entry into minibatches, takes Adam steps on
the mean squared error, then re-optimizes the slice orders; the optimizer
state is reinitialized after each order update because the loss surface the
model sees changes with the orders. Rounds stop when the fitness estimate
moves less than the tolerance or the round cap is reached.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .codec import CompressedArtifact
from .errors import DivergedError, DomainError
from .folding import FoldingSpec, auto_folding_spec, fold_batch
from .model import Adam, NttdHyper, NttdParams, batch_loss_and_grads, forward_batch
from .reorder import count_swaps, init_orders_tsp, update_orders
from .tensor import DenseTensor, PermutationSet

FITNESS_SAMPLE_CAP = 1 << 20


@dataclass
class TrainConfig:
    lr: float = 1e-2
    batch_size: int = 1 << 16
    epochs_per_round: int = 5
    max_rounds: int = 50
    tol: float = 1e-4
    seed: int = 0
    sample_budget: int | None = 4096
    tsp_init: bool = True      # ablation switch: TSP initial orders
    order_updates: bool = True  # ablation switch: per-round order updates
    log_path: str | None = None


@dataclass
class RoundRecord:
    round: int
    loss: float
    fitness: float
    swaps: list[int]
    seconds: float


@dataclass
class TrainReport:
    rounds: list[RoundRecord] = field(default_factory=list)
    final_fitness: float = float("nan")
    seconds: float = 0.0

    def write_jsonl(self, path):
        with open(path, "w") as f:
            for rec in self.rounds:
                f.write(json.dumps(asdict(rec)) + "\n")
            f.write(json.dumps({"final_fitness": self.final_fitness,
                                "seconds": self.seconds}) + "\n")


def _standardize(t: DenseTensor):
    std = float(t.data.std())
    if std == 0.0:
        raise DomainError("constant tensor has no information to fit; store "
                          "its mean instead")
    mean = float(t.data.mean())
    return DenseTensor.from_array((t.data - mean) / std), mean, std


def _entry_batch(y: DenseTensor, p: PermutationSet, spec: FoldingSpec, offs):
    """Folded model inputs and standardized targets for reordered offsets."""
    idx = np.stack(np.unravel_index(offs, y.dims), axis=1)
    orig = np.empty_like(idx)
    for k in range(idx.shape[1]):
        orig[:, k] = p.perms[k][idx[:, k]]
    targets = y.values[np.ravel_multi_index(tuple(orig.T), y.dims)]
    return fold_batch(spec, idx), targets


def train_round(params: NttdParams, opt: Adam, y: DenseTensor,
                p: PermutationSet, spec: FoldingSpec, cfg: TrainConfig,
                rng) -> float:
    """cfg.epochs_per_round passes over all entries; returns last epoch loss."""
    total = y.size
    bsz = min(cfg.batch_size, total)
    epoch_loss = float("nan")
    for _ in range(cfg.epochs_per_round):
        order = rng.permutation(total)
        losses = []
        for start in range(0, total, bsz):
            offs = order[start:start + bsz]
            fidx, targets = _entry_batch(y, p, spec, offs)
            loss, grads = batch_loss_and_grads(params, fidx, targets)
            if not np.isfinite(loss):
                raise DivergedError(
                    "training loss became non-finite; try a lower --lr")
            opt.step(params, grads)
            losses.append(loss)
        epoch_loss = float(np.mean(losses))
    return epoch_loss


def _fitness_estimate(y: DenseTensor, params: NttdParams, p: PermutationSet,
                      spec: FoldingSpec, std: float, orig_norm2: float,
                      sample_offs=None) -> float:
    """Original-scale fitness: residuals scale by std, the norm does not."""
    total = y.size
    if sample_offs is None:
        err2 = 0.0
        for start in range(0, total, 1 << 16):
            offs = np.arange(start, min(start + (1 << 16), total), dtype=np.int64)
            fidx, targets = _entry_batch(y, p, spec, offs)
            pred, _ = forward_batch(params, fidx, keep_tape=False)
            err2 += float(((pred - targets) ** 2).sum())
    else:
        fidx, targets = _entry_batch(y, p, spec, sample_offs)
        pred, _ = forward_batch(params, fidx, keep_tape=False)
        err2 = float(((pred - targets) ** 2).sum()) * total / sample_offs.size
    return 1.0 - np.sqrt(std * std * err2 / orig_norm2)


def compress(t: DenseTensor, rank: int = 8, hidden: int = 8,
             cfg: TrainConfig | None = None,
             spec: FoldingSpec | None = None):
    """Fit a model+orders to the tensor. Returns (artifact, report).

    Reported fitness is always on the original scale: residuals shrink by
    the stored std when de-standardized, while the reference norm is the
    original tensor's.
    """
    cfg = cfg or TrainConfig()
    wall_start = time.perf_counter()
    y, mean, std = _standardize(t)
    orig_norm2 = float((t.values * t.values).sum())
    if spec is None:
        spec = auto_folding_spec(t.dims)
    elif spec.dims != t.dims:
        raise ValueError("folding spec dims disagree with the tensor")
    hyper = NttdHyper(rank, hidden, spec.folded_dims)
    params = NttdParams.init(hyper, cfg.seed)
    perms = init_orders_tsp(y, seed=cfg.seed) if cfg.tsp_init \
        else PermutationSet.identity(t.dims)
    opt = Adam(lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    sample_offs = None
    if y.size > FITNESS_SAMPLE_CAP:
        sample_offs = rng.choice(y.size, size=FITNESS_SAMPLE_CAP, replace=False)

    report = TrainReport()
    prev_fitness = None
    for rnd in range(cfg.max_rounds):
        t0 = time.perf_counter()
        loss = train_round(params, opt, y, perms, spec, cfg, rng)
        swaps = [0] * t.order
        if cfg.order_updates:
            new_perms = update_orders(y, perms, params, spec,
                                      seed=int(rng.integers(2**63)),
                                      sample_budget=cfg.sample_budget)
            swaps = count_swaps(perms, new_perms)
            perms = new_perms
            opt.reset()  # the loss surface changed with the orders
        fit = _fitness_estimate(y, params, perms, spec, std, orig_norm2,
                                sample_offs)
        report.rounds.append(RoundRecord(rnd + 1, loss, float(fit), swaps,
                                         time.perf_counter() - t0))
        if prev_fitness is not None and abs(fit - prev_fitness) < cfg.tol:
            prev_fitness = fit
            break
        prev_fitness = fit

    report.final_fitness = float(
        _fitness_estimate(y, params, perms, spec, std, orig_norm2))
    report.seconds = time.perf_counter() - wall_start
    artifact = CompressedArtifact(spec, params, perms, mean, std, cfg.seed)
    if cfg.log_path:
        report.write_jsonl(cfg.log_path)
    return artifact, report


def reconstruct_full(artifact: CompressedArtifact) -> DenseTensor:
    """Materialize the whole approximation (batched, no padded entries)."""
    dims = artifact.dims
    total = int(np.prod(dims))
    out = np.empty(total)
    perms = artifact.perms
    for start in range(0, total, 1 << 16):
        offs = np.arange(start, min(start + (1 << 16), total), dtype=np.int64)
        idx = np.stack(np.unravel_index(offs, dims), axis=1)
        pred, _ = forward_batch(artifact.params,
                                fold_batch(artifact.spec, idx), keep_tape=False)
        orig = np.empty_like(idx)
        for k in range(idx.shape[1]):
            orig[:, k] = perms.perms[k][idx[:, k]]
        out[np.ravel_multi_index(tuple(orig.T), dims)] = pred
    return DenseTensor(dims, out * artifact.std + artifact.mean)


def reconstruct_entry(artifact: CompressedArtifact, idx) -> float:
    """One entry in O(d' (h^2 + R^2)) without touching the rest."""
    idx = tuple(int(i) for i in idx)
    dims = artifact.dims
    if len(idx) != len(dims):
        raise IndexError(f"index arity {len(idx)} != order {len(dims)}")
    for i, n in zip(idx, dims):
        if not 0 <= i < n:
            raise IndexError(f"coordinate {i} out of range [0, {n})")
    pos = np.array([inv[i] for inv, i in zip(artifact.perms.inv, idx)],
                   dtype=np.int64)
    fidx = fold_batch(artifact.spec, pos[None, :])
    pred, _ = forward_batch(artifact.params, fidx, keep_tape=False)
    return float(pred[0] * artifact.std + artifact.mean)
