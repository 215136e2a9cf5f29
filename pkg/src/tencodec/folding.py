"""Reshaping a d-order tensor into a higher-order one by digit interleaving.

Each original mode length is padded up to a product of small factors
(1..5), one factor per folded mode. The original coordinate is decomposed
into mixed-radix digits (most significant first) and folded mode l combines
the l-th digits of all original modes, again most significant original mode
first. The map is a bijection between the padded box and the folded box, so
neighboring original indices share most folded coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

MAX_FACTOR = 5


def _suffix_products(a: np.ndarray, axis: int) -> np.ndarray:
    """suffix[i] = product of a[i+1:] along axis."""
    flipped = np.flip(a, axis=axis)
    cum = np.cumprod(flipped, axis=axis)
    shifted = np.roll(np.flip(cum, axis=axis), -1, axis=axis)
    idx = [slice(None)] * a.ndim
    idx[axis] = -1
    shifted[tuple(idx)] = 1
    return shifted


@dataclass(frozen=True, eq=False)
class FoldingSpec:
    """Factor matrix mapping d original modes onto d_prime folded modes."""

    dims: tuple[int, ...]
    factors: np.ndarray  # (d, d_prime) ints in 1..MAX_FACTOR
    folded_dims: tuple[int, ...] = field(init=False)
    padded_dims: tuple[int, ...] = field(init=False)
    # digit weights: _w[k, l] for original modes, _u[k, l] for folded modes
    _w: np.ndarray = field(init=False, repr=False)
    _u: np.ndarray = field(init=False, repr=False)
    # lazily built per-mode digit-contribution tables (see fold_batch)
    _fold_tables: list = field(init=False, repr=False, compare=False)
    _unfold_tables: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        factors = np.asarray(self.factors, dtype=np.int64)
        if factors.ndim != 2 or factors.shape[0] != len(dims):
            raise ValueError("factor matrix must have one row per original mode")
        if factors.shape[1] <= len(dims):
            raise ValueError("folded order must exceed the original order")
        if factors.min() < 1 or factors.max() > MAX_FACTOR:
            raise ValueError(f"factors must lie in 1..{MAX_FACTOR}")
        padded = tuple(int(v) for v in factors.prod(axis=1))
        for n, pn in zip(dims, padded):
            if pn < n:
                raise ValueError(f"padded length {pn} smaller than mode length {n}")
        folded = tuple(int(v) for v in factors.prod(axis=0))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "folded_dims", folded)
        object.__setattr__(self, "padded_dims", padded)
        object.__setattr__(self, "_w", _suffix_products(factors, axis=1))
        object.__setattr__(self, "_u", _suffix_products(factors, axis=0))
        object.__setattr__(self, "_fold_tables", None)
        object.__setattr__(self, "_unfold_tables", None)

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def d_prime(self) -> int:
        return self.factors.shape[1]

    def padding_fraction(self) -> float:
        total = float(np.prod([float(n) for n in self.padded_dims]))
        used = float(np.prod([float(n) for n in self.dims]))
        return 1.0 - used / total


def _five_smooth_choices(n: int, budget: int):
    """(value, exponents) of 5-smooth numbers >= n expressible in <= budget factors."""
    out = []
    amax = max(int(np.ceil(np.log2(max(n, 1)))) + 1, 1)
    bmax = int(np.ceil(np.log(max(n, 2)) / np.log(3))) + 1
    cmax = int(np.ceil(np.log(max(n, 2)) / np.log(5))) + 1
    for a in range(amax + 1):
        for b in range(bmax + 1):
            for c in range(cmax + 1):
                m = 2**a * 3**b * 5**c
                if m < n or m >= 2 * n and n > 1:
                    continue
                # fours absorb two 2s each, so the minimal count is ceil(a/2)+b+c
                if (a + 1) // 2 + b + c <= budget:
                    out.append((m, (a, b, c)))
    return out


def _mode_factors(n: int, budget: int) -> list[int]:
    """Smallest padded length for one mode, written as <= budget factors."""
    choices = _five_smooth_choices(n, budget)
    if not choices:
        raise ValueError(f"no factorization of a padded length for {n} in {budget} slots")
    m, (a, b, c) = min(choices)
    fours = max(0, (a + b + c) - budget)
    factors = [2] * (a - 2 * fours) + [4] * fours + [3] * b + [5] * c
    factors.sort()
    factors += [1] * (budget - len(factors))
    return factors


def auto_folding_spec(dims) -> FoldingSpec:
    """Pick the folded order and factor matrix for a tensor shape.

    The folded order is ceil(log2(max mode length)), clamped to at least 2
    and strictly above the original order. Every mode is padded to the
    smallest 5-smooth number that fits that many factors, which keeps the
    padded length under twice the original.
    """
    dims = tuple(int(n) for n in dims)
    if not dims or min(dims) < 1:
        raise ValueError(f"bad dims {dims}")
    n_max = max(dims)
    d_prime = max(int(np.ceil(np.log2(n_max))) if n_max > 1 else 0, 2, len(dims) + 1)
    factors = np.array([_mode_factors(n, d_prime) for n in dims], dtype=np.int64)
    return FoldingSpec(dims, factors)


def load_factor_matrix(path, dims) -> FoldingSpec:
    """Parse a whitespace factor-matrix file: one row of factors per mode."""
    with open(path) as f:
        rows = [line.split() for line in f if line.strip()]
    try:
        factors = np.array([[int(v) for v in row] for row in rows], dtype=np.int64)
    except ValueError as e:
        raise FormatError(f"malformed factor matrix: {e}", offset=0) from e
    if factors.ndim != 2:
        raise FormatError("factor matrix rows have unequal lengths", offset=0)
    try:
        return FoldingSpec(tuple(dims), factors)
    except ValueError as e:
        raise FormatError(str(e), offset=0) from e


# per-mode contribution tables are worth building only for modes short
# enough that the table itself stays small
_TABLE_ROW_CAP = 1 << 22


def _contribution_tables(spec: FoldingSpec, folded: bool):
    """Tables turning fold/unfold into one gather-and-sum per mode.

    Both maps are sums of independent per-mode terms: folded coordinate l
    collects digit_kl(x_k) * u[k, l] over original modes k, and the inverse
    collects digit_kl(f_l) * w[k, l] over folded modes l. Caching those
    terms per coordinate value replaces the digit divisions with lookups.
    """
    attr = "_unfold_tables" if folded else "_fold_tables"
    tables = getattr(spec, attr)
    if tables is None:
        if folded:
            tables = [((np.arange(n, dtype=np.int64)[:, None] // spec._u[:, l])
                       % spec.factors[:, l]) * spec._w[:, l]
                      for l, n in enumerate(spec.folded_dims)]
        else:
            tables = [((np.arange(n, dtype=np.int64)[:, None] // spec._w[k])
                       % spec.factors[k]) * spec._u[k]
                      for k, n in enumerate(spec.padded_dims)]
        object.__setattr__(spec, attr, tables)
    return tables


def fold_batch(spec: FoldingSpec, idx: np.ndarray) -> np.ndarray:
    """Map original indices (B, d) in the padded box to folded ones (B, d')."""
    idx = np.asarray(idx, dtype=np.int64)
    squeeze = idx.ndim == 1
    if squeeze:
        idx = idx[None, :]
    if idx.shape[1] != spec.d:
        raise IndexError(f"index arity {idx.shape[1]} != order {spec.d}")
    if idx.size and (idx.min() < 0 or (idx >= np.array(spec.padded_dims)).any()):
        raise IndexError("index outside the padded box")
    if max(spec.padded_dims) <= _TABLE_ROW_CAP:
        tables = _contribution_tables(spec, folded=False)
        out = tables[0][idx[:, 0]].copy()
        for k in range(1, spec.d):
            out += tables[k][idx[:, k]]
    else:
        digits = (idx[:, :, None] // spec._w[None]) % spec.factors[None]
        out = (digits * spec._u[None]).sum(axis=1)
    return out[0] if squeeze else out


def unfold_batch(spec: FoldingSpec, fidx: np.ndarray) -> np.ndarray:
    """Inverse of fold_batch: folded indices (B, d') to padded-box ones (B, d)."""
    fidx = np.asarray(fidx, dtype=np.int64)
    squeeze = fidx.ndim == 1
    if squeeze:
        fidx = fidx[None, :]
    if fidx.shape[1] != spec.d_prime:
        raise IndexError(f"index arity {fidx.shape[1]} != folded order {spec.d_prime}")
    if fidx.size and (fidx.min() < 0 or (fidx >= np.array(spec.folded_dims)).any()):
        raise IndexError("index outside the folded box")
    if max(spec.folded_dims) <= _TABLE_ROW_CAP:
        tables = _contribution_tables(spec, folded=True)
        out = tables[0][fidx[:, 0]].copy()
        for l in range(1, spec.d_prime):
            out += tables[l][fidx[:, l]]
    else:
        digits = (fidx[:, None, :] // spec._u[None]) % spec.factors[None]
        out = (digits * spec._w[None]).sum(axis=2)
    return out[0] if squeeze else out


def fold_index(spec: FoldingSpec, idx) -> tuple[int, ...]:
    return tuple(int(v) for v in fold_batch(spec, np.asarray(idx, dtype=np.int64)))


def unfold_index(spec: FoldingSpec, fidx) -> tuple[int, ...]:
    return tuple(int(v) for v in unfold_batch(spec, np.asarray(fidx, dtype=np.int64)))


def is_padding(spec: FoldingSpec, fidx) -> bool:
    """True when the folded index maps outside the actual tensor box."""
    idx = unfold_batch(spec, np.asarray(fidx, dtype=np.int64))
    if idx.ndim == 1:
        return bool((idx >= np.array(spec.dims)).any())
    return (idx >= np.array(spec.dims)[None]).any(axis=1)
