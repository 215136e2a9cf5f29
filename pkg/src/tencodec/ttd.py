"""Classic tensor-train decomposition via sequential truncated SVD.

Serves as the explicit-core baseline: cores are materialized arrays rather
than a neural generator, so the parameter count is sum(r_{k-1}*N_k*r_k).
Truncation runs either under a rank cap or under a relative-error target;
with target eps, each step keeps enough singular values that the discarded
tail energy stays below (eps*|X|_F)^2/(d-1), which guarantees overall
relative error <= eps.
"""

from __future__ import annotations

import io
import warnings

import numpy as np

from .errors import FormatError
from .folding import FoldingSpec, unfold_batch
from .tensor import DenseTensor

TT_MAGIC = b"TCTT"
TT_VERSION = 1


class TTCores:
    """Explicit tensor-train cores, core k shaped (r_{k-1}, N_k, r_k)."""

    __slots__ = ("cores",)

    def __init__(self, cores):
        cores = [np.asarray(c, dtype=np.float64) for c in cores]
        if not cores or cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for a, b in zip(cores, cores[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError("adjacent core ranks disagree")
        self.cores = cores

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores[:-1])


def tt_param_count(cores: TTCores) -> int:
    return sum(c.size for c in cores.cores)


def _fix_signs(u, vt, r):
    # deterministic orientation: the largest-magnitude entry of each kept
    # left singular vector is made positive
    for i in range(r):
        lead = u[np.argmax(np.abs(u[:, i])), i]
        if lead < 0:
            u[:, i] = -u[:, i]
            vt[i, :] = -vt[i, :]


def tt_svd(t: DenseTensor, max_rank: int | None = None,
           eps: float | None = None) -> TTCores:
    """Decompose a tensor, truncating by rank cap and/or error target."""
    if max_rank is None and eps is None:
        raise ValueError("need a rank cap or an error target")
    if max_rank is not None and max_rank < 1:
        raise ValueError(f"rank cap must be >= 1, got {max_rank}")
    if eps is not None and eps <= 0:
        raise ValueError(f"error target must be > 0, got {eps}")
    dims = t.dims
    d = len(dims)
    delta2 = None
    if eps is not None and d > 1:
        delta2 = (eps * t.frobenius_norm()) ** 2 / (d - 1)

    cores = []
    mat = t.data.reshape(dims[0], -1)
    r_prev = 1
    for k in range(d - 1):
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        r = s.size
        if delta2 is not None:
            tail = np.cumsum((s * s)[::-1])[::-1]  # tail[i] = energy of s[i:]
            keep = np.nonzero(tail > delta2)[0]
            r = int(keep[-1]) + 1 if keep.size else 1
        if max_rank is not None:
            r = min(r, max_rank)
        r = max(r, 1)
        _fix_signs(u, vt, r)
        cores.append(u[:, :r].reshape(r_prev, dims[k], r))
        mat = (s[:r, None] * vt[:r]).reshape(r * dims[k + 1], -1)
        r_prev = r
    cores.append(mat.reshape(r_prev, dims[d - 1], 1))
    return TTCores(cores)


def tt_reconstruct(cores: TTCores, idx) -> float:
    """Single entry: product of the selected core slices."""
    idx = tuple(int(i) for i in idx)
    if len(idx) != len(cores.cores):
        raise IndexError(f"index arity {len(idx)} != order {len(cores.cores)}")
    v = cores.cores[0][:, idx[0], :]
    for c, i in zip(cores.cores[1:], idx[1:]):
        v = v @ c[:, i, :]
    return float(v[0, 0])


def tt_reconstruct_full(cores: TTCores) -> DenseTensor:
    """Materialize the full tensor the cores define."""
    out = cores.cores[0].reshape(cores.dims[0], -1)  # (N_1, r_1)
    for c in cores.cores[1:]:
        r_prev, n, r = c.shape
        out = out @ c.reshape(r_prev, n * r)
        out = out.reshape(-1, r)
    return DenseTensor(cores.dims, out.reshape(cores.dims))


def fold_to_array(t: DenseTensor, spec: FoldingSpec,
                  fill: float = 0.0) -> np.ndarray:
    """Materialize the folded tensor, padding cells set to fill."""
    out = np.full(spec.folded_dims, fill)
    total = int(np.prod(spec.folded_dims))
    chunk = 1 << 18
    dims_arr = np.array(spec.dims)
    flat_out = out.reshape(-1)
    tvals = t.values
    for start in range(0, total, chunk):
        offs = np.arange(start, min(start + chunk, total), dtype=np.int64)
        fidx = np.stack(np.unravel_index(offs, spec.folded_dims), axis=1)
        idx = unfold_batch(spec, fidx)
        ok = (idx < dims_arr[None]).all(axis=1)
        src = np.ravel_multi_index(tuple(idx[ok].T), spec.dims)
        flat_out[offs[ok]] = tvals[src]
    return out


def variant_n(t: DenseTensor, spec: FoldingSpec, param_budget: int):
    """TT-SVD on the zero-padded folded tensor at a parameter budget.

    The tensor is standardized first (padding cells hold 0 afterwards), and
    the uniform rank cap is the largest one whose decomposition stays within
    the budget, found by bisection; the achieved count lands within one
    rank step of the budget. Returns (cores, mean, std).
    """
    from .errors import DomainError

    std = float(t.data.std())
    if std == 0.0:
        raise DomainError("constant tensor cannot be standardized")
    mean = float(t.data.mean())
    # padding cells hold the mean so they sit at 0 after standardization
    folded = (fold_to_array(t, spec, fill=mean) - mean) / std
    ft = DenseTensor.from_array(folded)

    rank1 = tt_svd(ft, max_rank=1)
    if tt_param_count(rank1) > param_budget:
        warnings.warn(f"parameter budget {param_budget} below rank-1 cost "
                      f"{tt_param_count(rank1)}; using rank 1")
        return rank1, mean, std

    hi = 2
    while hi < 4096 and tt_param_count(tt_svd(ft, max_rank=hi)) <= param_budget:
        hi *= 2
    lo = max(hi // 2, 1)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if tt_param_count(tt_svd(ft, max_rank=mid)) <= param_budget:
            lo = mid
        else:
            hi = mid - 1
    return tt_svd(ft, max_rank=lo), mean, std


def variant_n_fitness(t: DenseTensor, spec: FoldingSpec, cores: TTCores,
                      mean: float, std: float) -> float:
    """Fitness of a folded-baseline reconstruction on the original box only."""
    rec = tt_reconstruct_full(cores).data * std + mean
    total = int(np.prod(spec.folded_dims))
    approx = np.empty(t.size)
    chunk = 1 << 18
    dims_arr = np.array(spec.dims)
    flat_rec = rec.reshape(-1)
    for start in range(0, total, chunk):
        offs = np.arange(start, min(start + chunk, total), dtype=np.int64)
        fidx = np.stack(np.unravel_index(offs, spec.folded_dims), axis=1)
        idx = unfold_batch(spec, fidx)
        ok = (idx < dims_arr[None]).all(axis=1)
        dst = np.ravel_multi_index(tuple(idx[ok].T), spec.dims)
        approx[dst] = flat_rec[offs[ok]]
    from .tensor import fitness

    return fitness(t, DenseTensor(t.dims, approx))


def save_tt(cores: TTCores, path):
    with open(path, "wb") as f:
        f.write(serialize_tt(cores))


def serialize_tt(cores: TTCores) -> bytes:
    # layout: magic, version u16, d u16, d mode lengths u64, the d-1
    # internal ranks u64 (boundary ranks are always 1), cores f64 LE
    buf = io.BytesIO()
    buf.write(TT_MAGIC)
    buf.write(TT_VERSION.to_bytes(2, "little"))
    buf.write(len(cores.cores).to_bytes(2, "little"))
    for n in cores.dims:
        buf.write(int(n).to_bytes(8, "little"))
    for r in cores.ranks:
        buf.write(int(r).to_bytes(8, "little"))
    for c in cores.cores:
        buf.write(c.astype("<f8").tobytes())
    return buf.getvalue()


def deserialize_tt(raw: bytes) -> TTCores:
    if raw[:4] != TT_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}", offset=0)
    if raw[4:6] != TT_VERSION.to_bytes(2, "little"):
        raise FormatError("unsupported core-file version", offset=4)
    d = int.from_bytes(raw[6:8], "little")
    if d < 1:
        raise FormatError("core count must be >= 1", offset=6)
    off = 8
    if len(raw) < off + 8 * (2 * d - 1):
        raise FormatError("truncated dims/ranks", offset=len(raw))
    dims = [int.from_bytes(raw[off + 8 * i: off + 8 * (i + 1)], "little")
            for i in range(d)]
    off += 8 * d
    inner = [int.from_bytes(raw[off + 8 * i: off + 8 * (i + 1)], "little")
             for i in range(d - 1)]
    off += 8 * (d - 1)
    if any(n < 1 for n in dims) or any(r < 1 for r in inner):
        raise FormatError("dims and ranks must be >= 1", offset=8)
    ranks = [1, *inner, 1]
    cores = []
    for k in range(d):
        shape = (ranks[k], dims[k], ranks[k + 1])
        count = int(np.prod(shape))
        if len(raw) < off + 8 * count:
            raise FormatError("truncated core data", offset=len(raw))
        cores.append(np.frombuffer(raw, dtype="<f8", count=count,
                                   offset=off).reshape(shape).copy())
        off += 8 * count
    if off != len(raw):
        raise FormatError("trailing bytes after cores", offset=off)
    return TTCores(cores)


def load_tt(path) -> TTCores:
    with open(path, "rb") as f:
        return deserialize_tt(f.read())
