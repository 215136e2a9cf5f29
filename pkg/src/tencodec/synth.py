"""Synthetic tensors for tests, benchmarks, and the CLI."""

from __future__ import annotations

import numpy as np

from .model import generate_random_nttd_tensor
from .tensor import DenseTensor, PermutationSet


def synth_random(dims, seed=0) -> DenseTensor:
    """Entries i.i.d. uniform on [0, 1)."""
    rng = np.random.default_rng(seed)
    return DenseTensor(dims, rng.random(int(np.prod(dims))))


def _smooth_vector(n, rng):
    i = np.arange(n)
    freq = rng.integers(1, 3)
    phase = rng.uniform(0, 2 * np.pi)
    return 1.0 + 0.5 * np.sin(2 * np.pi * freq * i / max(n, 1) + phase)


def synth_rank1(dims, seed=0) -> DenseTensor:
    """Outer product of smooth per-mode vectors."""
    rng = np.random.default_rng(seed)
    out = np.ones(())
    for n in dims:
        out = np.multiply.outer(out, _smooth_vector(n, rng))
    return DenseTensor.from_array(out)


def synth_smooth(dims, seed=0, noise=0.01) -> DenseTensor:
    """Sum of a few separable low-frequency waves plus a little noise."""
    rng = np.random.default_rng(seed)
    out = np.zeros(tuple(dims))
    for _ in range(3):
        term = np.ones(())
        for n in dims:
            term = np.multiply.outer(term, _smooth_vector(n, rng))
        out = out + rng.uniform(0.5, 1.0) * term
    out += noise * rng.standard_normal(out.shape)
    return DenseTensor.from_array(out)


def synth_shuffled_smooth(dims, seed=0):
    """Smooth tensor with every mode randomly shuffled.

    Returns (tensor, hidden permutation); undoing the permutation restores
    the smooth original, which is what reordering is supposed to discover.
    """
    base = synth_smooth(dims, seed=seed)
    hidden = PermutationSet.random(dims, seed=seed + 1)
    return base.apply_permutation(hidden), hidden


def synth_nttd(dims, seed=0, rank=5, hidden=5) -> DenseTensor:
    """Output of a randomly initialized entry-generator model."""
    return generate_random_nttd_tensor(dims, rank, hidden, seed=seed)


KINDS = {
    "random": synth_random,
    "rank1": synth_rank1,
    "smooth": synth_smooth,
    "nttd": synth_nttd,
}
